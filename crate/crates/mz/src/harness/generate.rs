//! Deterministic synthetic input sequences with calibrated distance mass.

use crate::convex::ConvexBody;
use crate::error::MzError;
use crate::field::grid::{Grid, GridField};
use crate::field::integral::l1_dist_integral;
use crate::field::operator::{apply_operator, HomogeneousOperator};
use crate::truncation::drivers::AxisBox;
use crate::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    SpikeTrain,
    Oscillation,
    ShearLayer,
}

/// A synthetic sequence family: deviations live inside `support`, the
/// declared distance mass follows `lambda0 * ratio^j` and is realized by
/// amplitude calibration to within 5 percent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticFamily {
    pub name: FamilyName,
    pub lambda0: f64,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    pub support: AxisBox,
    #[serde(default = "default_spikes")]
    pub spikes: usize,
    pub bump_radius: f64,
    #[serde(default = "default_j_count")]
    pub j_count: usize,
}

fn default_ratio() -> f64 {
    0.5
}
fn default_spikes() -> usize {
    3
}
fn default_j_count() -> usize {
    9
}

impl SyntheticFamily {
    pub fn lambda_target(&self, j: usize) -> f64 {
        self.lambda0 * self.ratio.powi(j as i32)
    }
}

/// Smooth compactly supported bump, value 1 at the center.
fn bump(dist2: f64, radius2: f64) -> f64 {
    if dist2 >= radius2 {
        0.0
    } else {
        let q = 1.0 - dist2 / radius2;
        q * q * q
    }
}

fn spike_positions(family: &SyntheticFamily, grid: &Grid, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5350_494b_4553u64);
    let d = grid.dim;
    let r = family.bump_radius;
    (0..family.spikes)
        .map(|_| {
            (0..d)
                .map(|a| {
                    let lo = family.support.lo[a] + r;
                    let hi = family.support.hi[a] - r;
                    lo + (hi - lo).max(0.0) * rng.gen::<f64>()
                })
                .collect()
        })
        .collect()
}

/// Scalar bump stack scaled by `amp`, placed into component `comp_of(s)`.
fn bump_field(
    grid: &Grid,
    m: usize,
    positions: &[Vec<f64>],
    radius: f64,
    amp: f64,
    comp_of: impl Fn(usize) -> usize,
) -> GridField {
    let mut u = GridField::zeros(grid.clone(), m);
    let r2 = radius * radius;
    let d = grid.dim;
    let mut idx = vec![0usize; d];
    for n in 0..grid.node_count() {
        grid.fill_multi(n, &mut idx);
        let x = grid.coord(&idx);
        for (s, p) in positions.iter().enumerate() {
            let dist2: f64 = x.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist2 < r2 {
                u.data[n * m + comp_of(s)] += amp * bump(dist2, r2);
            }
        }
    }
    u
}

/// Bisect the amplitude so the measured distance mass matches the target to
/// 1 percent (well inside the declared 5 percent contract).
fn calibrate<F>(target: f64, build: F) -> Result<(f64, GridField)>
where
    F: Fn(f64) -> Result<(GridField, f64)>,
{
    if target <= 0.0 {
        return Err(MzError::Argument("lambda target must be positive".into()));
    }
    let mut hi = 1.0f64;
    let mut hi_val = build(hi)?.1;
    let mut guard = 0;
    while hi_val < target {
        hi *= 2.0;
        hi_val = build(hi)?.1;
        guard += 1;
        if guard > 60 {
            return Err(MzError::NumericFailure {
                what: "amplitude calibration could not reach the lambda target".into(),
                residual: target - hi_val,
            });
        }
    }
    let mut lo = 0.0f64;
    let mut best = build(hi)?;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let cand = build(mid)?;
        if (cand.1 - target).abs() <= 0.01 * target {
            return Ok((mid, cand.0));
        }
        if cand.1 < target {
            lo = mid;
        } else {
            hi = mid;
            best = cand;
        }
    }
    let rel = (best.1 - target).abs() / target;
    if rel <= 0.05 {
        Ok((hi, best.0))
    } else {
        Err(MzError::NumericFailure {
            what: "amplitude calibration missed the 5 percent window".into(),
            residual: rel,
        })
    }
}

/// Generate the `j`-th member of the sequence.  Deterministic in
/// `(family, seed, j)`; the measured `lambda_j` matches the declared target
/// within 5 percent.
pub fn generate_sequence(
    family: &SyntheticFamily,
    j: usize,
    grid: &Grid,
    op: &HomogeneousOperator,
    body: &ConvexBody,
    seed: u64,
) -> Result<GridField> {
    if j >= family.j_count {
        return Err(MzError::Argument(format!(
            "j = {j} outside the family range 0..{}",
            family.j_count
        )));
    }
    let target = family.lambda_target(j);
    let m = op.in_components;
    let measure = |u: &GridField| -> Result<f64> {
        let bu = apply_operator(op, u)?;
        Ok(l1_dist_integral(&bu, body)?.1)
    };
    match family.name {
        FamilyName::SpikeTrain => {
            let positions = spike_positions(family, grid, seed);
            let (_, field) = calibrate(target, |amp| {
                let u = bump_field(grid, m, &positions, family.bump_radius, amp, |s| s % m);
                let lam = measure(&u)?;
                Ok((u, lam))
            })?;
            Ok(field)
        }
        FamilyName::Oscillation => {
            // Sawtooth microstructure along x_1 whose gradient alternates on
            // the segment hull{-a e_1, a e_1}.  The transverse taper bands
            // near the x_2 edges of the support are the declared bad set;
            // their distance mass is proportional to the period, which is
            // what the calibration adjusts.
            if m != 1 {
                return Err(MzError::Argument(
                    "the oscillation family generates scalar fields".into(),
                ));
            }
            let a_amp = body.sup_norm()?;
            let support = family.support.clone();
            let h = grid.spacing;
            let build = |period: f64| -> Result<(GridField, f64)> {
                let u = oscillation_field(grid, &support, a_amp, period, family.bump_radius);
                let lam = measure(&u)?;
                Ok((u, lam))
            };
            // Distance mass grows with the period; bisect the period.
            let mut lo = 6.0 * h;
            let mut hi = 0.5 * (support.hi[0] - support.lo[0]);
            let lam_lo = build(lo)?.1;
            if lam_lo > target * 1.05 {
                return Err(MzError::NumericFailure {
                    what: "oscillation period floor cannot reach the lambda target".into(),
                    residual: lam_lo - target,
                });
            }
            let mut best = build(lo)?;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let cand = build(mid)?;
                if (cand.1 - target).abs() <= 0.01 * target {
                    return Ok(cand.0);
                }
                if cand.1 < target {
                    lo = mid;
                    best = cand;
                } else {
                    hi = mid;
                }
            }
            let rel = (best.1 - target).abs() / target;
            if rel <= 0.05 {
                Ok(best.0)
            } else {
                Err(MzError::NumericFailure {
                    what: "oscillation period calibration missed the 5 percent window".into(),
                    residual: rel,
                })
            }
        }
        FamilyName::ShearLayer => {
            // A velocity layer u = (s(x_2), 0, ...) whose symmetric gradient
            // concentrates on the layer; amplitude calibrated per j.
            let d = grid.dim;
            if m != d {
                return Err(MzError::Argument(
                    "the shear layer family generates d-component fields".into(),
                ));
            }
            let mid = 0.5 * (family.support.lo[1] + family.support.hi[1]);
            let width = family.bump_radius;
            let support = family.support.clone();
            let (_, field) = calibrate(target, |amp| {
                let u = GridField::from_fn(grid.clone(), m, |x, out| {
                    out.fill(0.0);
                    let t = ((x[1] - mid) / width).clamp(-1.0, 1.0);
                    let s = 0.5 + 0.25 * t * (3.0 - t * t);
                    let inside_x = x[0] >= support.lo[0] && x[0] <= support.hi[0];
                    let ramp = if inside_x {
                        1.0
                    } else {
                        0.0
                    };
                    out[0] = amp * s * ramp;
                });
                let lam = measure(&u)?;
                Ok((u, lam))
            })?;
            Ok(field)
        }
    }
}

/// Triangle-wave primitive over full periods inside the support, tapered to
/// zero across bands of width `taper` at the transverse edges.  Inside the
/// plateau the gradient stays on the segment `[-a e_1, a e_1]`; only the
/// taper bands carry transverse gradient components.
fn oscillation_field(
    grid: &Grid,
    support: &AxisBox,
    a_amp: f64,
    period: f64,
    taper: f64,
) -> GridField {
    let d = grid.dim;
    let periods = ((support.hi[0] - support.lo[0]) / period).floor().max(1.0);
    let x_end = support.lo[0] + periods * period;
    let support = support.clone();
    GridField::from_fn(grid.clone(), 1, move |x, out| {
        out[0] = 0.0;
        if x[0] < support.lo[0] || x[0] > x_end {
            return;
        }
        let t = (x[0] - support.lo[0]) / period;
        let frac = t - t.floor();
        let tri = if frac < 0.5 { frac } else { 1.0 - frac };
        let mut weight = 1.0;
        for a in 1..d {
            let lo = support.lo[a];
            let hi = support.hi[a];
            if x[a] < lo || x[a] > hi {
                weight = 0.0;
                break;
            }
            let s = ((x[a] - lo) / taper).min((hi - x[a]) / taper).clamp(0.0, 1.0);
            weight *= s * s * (3.0 - 2.0 * s);
        }
        out[0] = a_amp * period * tri * weight;
    })
}
