//! Ball averages and variable-radius mollification.

use crate::error::MzError;
use crate::field::grid::GridField;
use crate::truncation::profile::{RadialProfile, SUPPORT_END};
use crate::Result;

/// Arithmetic mean of `u` over the grid nodes inside the closed ball
/// `B_r(center)`, resolving out-of-domain nodes via the grid's boundary
/// convention.  Requires `r >= h`.
pub fn ball_average(u: &GridField, center: &[f64], r: f64) -> Result<Vec<f64>> {
    let h = u.grid.spacing;
    if r < h {
        return Err(MzError::DegenerateRadius { r, h });
    }
    if center.len() != u.grid.dim {
        return Err(MzError::Argument("center dimension mismatch".into()));
    }
    // Anchor the mean at the node nearest the center: summing differences
    // keeps constant fields exact and avoids magnitude cancellation.
    let idx: Vec<isize> = (0..u.grid.dim)
        .map(|a| ((center[a] - u.grid.origin[a]) / h).round() as isize)
        .collect();
    let anchor = u.values(u.grid.resolve(&idx)).to_vec();
    let mut acc = vec![0.0f64; u.components];
    let count = ball_accumulate(u, center, r, &anchor, &mut acc);
    if count == 0 {
        return Ok(anchor);
    }
    let inv = 1.0 / count as f64;
    for (v, a) in acc.iter_mut().zip(&anchor) {
        *v = a + *v * inv;
    }
    Ok(acc)
}

/// Sum `u - anchor` over nodes of the closed ball; returns the node count.
fn ball_accumulate(u: &GridField, center: &[f64], r: f64, anchor: &[f64], acc: &mut [f64]) -> usize {
    let g = &u.grid;
    let h = g.spacing;
    let d = g.dim;
    let mut lo = vec![0isize; d];
    let mut hi = vec![0isize; d];
    for a in 0..d {
        lo[a] = ((center[a] - r - g.origin[a]) / h).ceil() as isize;
        hi[a] = ((center[a] + r - g.origin[a]) / h).floor() as isize;
    }
    let r2 = r * r;
    let m = u.components;
    let mut count = 0usize;
    let mut idx = lo.clone();
    'outer: loop {
        let mut dist2 = 0.0;
        for a in 0..d {
            let dx = g.origin[a] + idx[a] as f64 * h - center[a];
            dist2 += dx * dx;
        }
        if dist2 <= r2 {
            let n = g.resolve(&idx);
            let vals = u.values(n);
            for c in 0..m {
                acc[c] += vals[c] - anchor[c];
            }
            count += 1;
        }
        // Advance the multi-index, last axis fastest.
        let mut a = d;
        loop {
            if a == 0 {
                break 'outer;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] <= hi[a] {
                break;
            }
            idx[a] = lo[a];
        }
    }
    count
}

/// Variable-radius mollification of `u` on the ball `B_r(a)`.
///
/// Nodes with `|x - a| >= (7/8) r` keep their original values; nodes whose
/// profile radius falls below the grid spacing also keep their values (the
/// averaging region degenerates to the point itself); every other node is
/// replaced by the plain ball average over `B_{rho(x)}(x)`.
pub fn variable_mollify(u: &GridField, a: &[f64], r: f64, profile: &RadialProfile) -> Result<GridField> {
    u.validate()?;
    if a.len() != u.grid.dim {
        return Err(MzError::Argument("ball center dimension mismatch".into()));
    }
    if (profile.r - r).abs() > 1e-9 * r.max(1.0) {
        return Err(MzError::Argument(format!(
            "profile radius {} does not match ball radius {}",
            profile.r, r
        )));
    }
    if !u.grid.contains_ball(a, r) {
        return Err(MzError::BallExitsDomain { center: a.to_vec(), radius: r });
    }
    let mut out = u.clone();
    mollify_into(u, &mut out, a, r, profile)?;
    Ok(out)
}

/// Write mollified values into `out` (which must start as a copy of `u`).
/// Returns the list of modified node indices.
pub(crate) fn mollify_into(
    u: &GridField,
    out: &mut GridField,
    a: &[f64],
    r: f64,
    profile: &RadialProfile,
) -> Result<Vec<usize>> {
    let g = &u.grid;
    let h = g.spacing;
    let d = g.dim;
    let inner = SUPPORT_END * r;
    let mut lo = vec![0isize; d];
    let mut hi = vec![0isize; d];
    for ax in 0..d {
        lo[ax] = (((a[ax] - inner - g.origin[ax]) / h).ceil() as isize).max(0);
        hi[ax] = (((a[ax] + inner - g.origin[ax]) / h).floor() as isize)
            .min(g.shape[ax] as isize - 1);
    }
    let m = u.components;
    let mut touched = Vec::new();
    let mut idx = lo.clone();
    let mut x = vec![0.0f64; d];
    let mut acc = vec![0.0f64; m];
    if (0..d).any(|ax| lo[ax] > hi[ax]) {
        return Ok(touched);
    }
    'outer: loop {
        for ax in 0..d {
            x[ax] = g.origin[ax] + idx[ax] as f64 * h;
        }
        let dist = x
            .iter()
            .zip(a)
            .map(|(xi, ai)| (xi - ai) * (xi - ai))
            .sum::<f64>()
            .sqrt();
        if dist < inner {
            let rho = profile.radius_at(dist);
            if rho >= h {
                let uidx: Vec<usize> = idx.iter().map(|&i| i as usize).collect();
                let n = g.lin(&uidx);
                // The node's own value anchors its mean (its Lebesgue point).
                let anchor = u.values(n).to_vec();
                acc.fill(0.0);
                let count = ball_accumulate(u, &x, rho, &anchor, &mut acc);
                if count > 0 {
                    let inv = 1.0 / count as f64;
                    for c in 0..m {
                        out.data[n * m + c] = anchor[c] + acc[c] * inv;
                    }
                    touched.push(n);
                }
            }
        }
        let mut ax = d;
        loop {
            if ax == 0 {
                break 'outer;
            }
            ax -= 1;
            idx[ax] += 1;
            if idx[ax] <= hi[ax] {
                break;
            }
            idx[ax] = lo[ax];
        }
    }
    Ok(touched)
}
