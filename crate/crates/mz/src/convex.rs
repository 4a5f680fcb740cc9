//! Compact convex target sets: distance, projection, inflation, Hausdorff.
//!
//! Bodies are either Euclidean balls or vertex polytopes.  Both admit an
//! exact sup norm and a robust Euclidean projection; balls are closed form,
//! polytopes go through a minimum-norm-point iteration over the translated
//! vertex set.  Distance to the inflation `K_gamma` is computed as
//! `(dist(p, K) - gamma)^+`, which is exact for convex `K`, so inflated
//! bodies never need an explicit geometric representation.

use crate::error::MzError;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Projection tolerance in the unit-rescaled frame.
pub const TOL_PROJ: f64 = 1e-10;

/// Boundary sampling resolution for mixed ball/polytope Hausdorff queries.
pub const HAUSDORFF_DIRS_2D: usize = 4096;
pub const HAUSDORFF_DIRS_3D: usize = 16384;

/// A compact convex set in `R^k`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ConvexBody {
    Ball { center: Vec<f64>, radius: f64 },
    VPolytope { vertices: Vec<Vec<f64>> },
}

/// Result of a Euclidean projection onto a body: the distance and a nearest
/// point of the body.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceResult {
    pub distance: f64,
    pub foot_point: Vec<f64>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

impl ConvexBody {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        ConvexBody::Ball { center, radius }
    }

    pub fn vpolytope(vertices: Vec<Vec<f64>>) -> Self {
        ConvexBody::VPolytope { vertices }
    }

    /// Ambient dimension `k`.
    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Ball { center, .. } => center.len(),
            ConvexBody::VPolytope { vertices } => vertices.first().map_or(0, |v| v.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexBody::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(MzError::InvalidBody("ball center is empty".into()));
                }
                if !radius.is_finite() || *radius < 0.0 {
                    return Err(MzError::InvalidBody(format!(
                        "ball radius {radius} must be finite and nonnegative"
                    )));
                }
                if center.iter().any(|c| !c.is_finite()) {
                    return Err(MzError::InvalidBody("ball center has non-finite entry".into()));
                }
            }
            ConvexBody::VPolytope { vertices } => {
                if vertices.is_empty() {
                    return Err(MzError::InvalidBody("vertex list is empty".into()));
                }
                let k = vertices[0].len();
                if k == 0 {
                    return Err(MzError::InvalidBody("zero-dimensional vertices".into()));
                }
                for v in vertices {
                    if v.len() != k {
                        return Err(MzError::InvalidBody("inconsistent vertex dimensions".into()));
                    }
                    if v.iter().any(|c| !c.is_finite()) {
                        return Err(MzError::InvalidBody("vertex has non-finite entry".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// `|K|_inf`: the largest Euclidean norm over the body.  For a ball this
    /// is `|center| + radius`; for a polytope the maximum of a convex
    /// function is attained at a vertex.
    pub fn sup_norm(&self) -> Result<f64> {
        self.validate()?;
        Ok(match self {
            ConvexBody::Ball { center, radius } => norm(center) + radius,
            ConvexBody::VPolytope { vertices } => vertices
                .iter()
                .map(|v| norm(v))
                .fold(0.0f64, f64::max),
        })
    }

    /// Euclidean distance to the body plus a nearest point.
    pub fn project(&self, p: &[f64]) -> Result<DistanceResult> {
        self.validate()?;
        if p.len() != self.dim() {
            return Err(MzError::Argument(format!(
                "query dimension {} does not match body dimension {}",
                p.len(),
                self.dim()
            )));
        }
        match self {
            ConvexBody::Ball { center, radius } => {
                let diff = sub(p, center);
                let d = norm(&diff);
                if d <= *radius {
                    Ok(DistanceResult { distance: 0.0, foot_point: p.to_vec() })
                } else {
                    let foot: Vec<f64> = center
                        .iter()
                        .zip(&diff)
                        .map(|(c, x)| c + x * (*radius / d))
                        .collect();
                    Ok(DistanceResult { distance: d - radius, foot_point: foot })
                }
            }
            ConvexBody::VPolytope { vertices } => project_polytope(vertices, p),
        }
    }

    /// Distance alone; avoids allocating the foot point for balls.
    pub fn distance(&self, p: &[f64]) -> Result<f64> {
        match self {
            ConvexBody::Ball { center, radius } => {
                let mut s = 0.0;
                for (a, b) in p.iter().zip(center) {
                    let d = a - b;
                    s += d * d;
                }
                Ok((s.sqrt() - radius).max(0.0))
            }
            ConvexBody::VPolytope { .. } => Ok(self.project(p)?.distance),
        }
    }

    /// Distance to the inflation `K_gamma = {z : dist(z, K) <= gamma}`,
    /// computed as `(dist(p, K) - gamma)^+`.
    pub fn inflated_distance(&self, gamma: f64, p: &[f64]) -> Result<f64> {
        if !(gamma >= 0.0) {
            return Err(MzError::Argument(format!("inflation gamma {gamma} must be >= 0")));
        }
        Ok((self.distance(p)? - gamma).max(0.0))
    }

    /// Hausdorff distance between two bodies.
    ///
    /// Polytope-polytope and ball-ball cases are exact (the one-sided excess
    /// of a polytope is attained at a vertex by convexity of the distance
    /// function; for balls there is a closed form).  Mixed cases sample the
    /// ball boundary at a fixed documented resolution and are intended for
    /// diagnostics only.
    pub fn hausdorff(&self, other: &ConvexBody) -> Result<f64> {
        self.validate()?;
        other.validate()?;
        if self.dim() != other.dim() {
            return Err(MzError::Argument("bodies have different dimensions".into()));
        }
        match (self, other) {
            (ConvexBody::Ball { center: c1, radius: r1 }, ConvexBody::Ball { center: c2, radius: r2 }) => {
                Ok(norm(&sub(c1, c2)) + (r1 - r2).abs())
            }
            (ConvexBody::VPolytope { vertices: v1 }, ConvexBody::VPolytope { vertices: v2 }) => {
                let e12 = excess_vertices(v1, other)?;
                let e21 = excess_vertices(v2, self)?;
                Ok(e12.max(e21))
            }
            (ConvexBody::Ball { .. }, ConvexBody::VPolytope { vertices }) => {
                let e_ball = excess_ball(self, other)?;
                let e_poly = excess_vertices(vertices, self)?;
                Ok(e_ball.max(e_poly))
            }
            (ConvexBody::VPolytope { vertices }, ConvexBody::Ball { .. }) => {
                let e_ball = excess_ball(other, self)?;
                let e_poly = excess_vertices(vertices, other)?;
                Ok(e_ball.max(e_poly))
            }
        }
    }
}

fn excess_vertices(vertices: &[Vec<f64>], target: &ConvexBody) -> Result<f64> {
    let mut best = 0.0f64;
    for v in vertices {
        best = best.max(target.distance(v)?);
    }
    Ok(best)
}

/// One-sided excess of a ball over a target body, by sampling the sphere.
fn excess_ball(ball: &ConvexBody, target: &ConvexBody) -> Result<f64> {
    let (center, radius) = match ball {
        ConvexBody::Ball { center, radius } => (center, *radius),
        _ => unreachable!(),
    };
    let k = center.len();
    let dirs = sphere_directions(k);
    let mut best = target.distance(center)?;
    let mut q = vec![0.0; k];
    for dir in &dirs {
        for i in 0..k {
            q[i] = center[i] + radius * dir[i];
        }
        best = best.max(target.distance(&q)?);
    }
    Ok(best)
}

/// Fixed direction sets on the unit sphere: exact endpoints in 1-D, equal
/// angles in 2-D, a Fibonacci lattice in 3-D, and a deterministic seeded
/// sample in higher dimensions.
fn sphere_directions(k: usize) -> Vec<Vec<f64>> {
    match k {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..HAUSDORFF_DIRS_2D)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * (i as f64) / (HAUSDORFF_DIRS_2D as f64);
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let n = HAUSDORFF_DIRS_3D;
            let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / (n as f64);
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = 2.0 * std::f64::consts::PI * (i as f64) / golden;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x4d5a_6469_7273u64);
            (0..HAUSDORFF_DIRS_3D)
                .map(|_| {
                    loop {
                        let v: Vec<f64> =
                            (0..k).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
                        let n = norm(&v);
                        if n > 1e-3 {
                            return v.iter().map(|x| x / n).collect();
                        }
                    }
                })
                .collect()
        }
    }
}

/// Minimum-norm-point projection onto `conv(vertices)`.
///
/// Translates the query to the origin, rescales to unit size and runs
/// Wolfe's algorithm: a major cycle adds the vertex most aligned against the
/// current point, a minor cycle keeps the active set affinely independent by
/// solving the equality-constrained least-norm problem on its affine hull.
fn project_polytope(vertices: &[Vec<f64>], p: &[f64]) -> Result<DistanceResult> {
    let n = vertices.len();

    // Translate so the query is the origin.
    let pts: Vec<Vec<f64>> = vertices.iter().map(|v| sub(v, p)).collect();
    let scale = pts.iter().map(|v| norm(v)).fold(0.0f64, f64::max);
    if scale == 0.0 {
        // All vertices coincide with the query point.
        return Ok(DistanceResult { distance: 0.0, foot_point: p.to_vec() });
    }
    let pts: Vec<Vec<f64>> = pts.iter().map(|v| v.iter().map(|x| x / scale).collect()).collect();

    // Start from the vertex of smallest norm.
    let start = (0..n)
        .min_by(|&a, &b| dot(&pts[a], &pts[a]).total_cmp(&dot(&pts[b], &pts[b])))
        .unwrap();
    let mut active: Vec<usize> = vec![start];
    let mut weights: Vec<f64> = vec![1.0];
    let mut x = pts[start].clone();

    let max_iter = (10 * n * n).max(16);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let xx = dot(&x, &x);
        // Optimality: <x, v> >= <x, x> - tol for every vertex.
        let mut best_j = usize::MAX;
        let mut best_gap = 0.0f64;
        for (j, v) in pts.iter().enumerate() {
            let gap = xx - dot(&x, v);
            if gap > best_gap {
                best_gap = gap;
                best_j = j;
            }
        }
        residual = best_gap;
        if best_gap <= TOL_PROJ || best_j == usize::MAX {
            return Ok(finish_projection(&active, &weights, vertices, p));
        }
        if !active.contains(&best_j) {
            active.push(best_j);
            weights.push(0.0);
        }

        // Minor cycles: project onto the affine hull of the active set and
        // clip back into the simplex, dropping vertices that hit weight 0.
        loop {
            let a = affine_min_norm(&pts, &active);
            let a = match a {
                Some(a) => a,
                None => {
                    // Degenerate Gram system; drop the smallest-weight vertex.
                    if active.len() <= 1 {
                        return Ok(finish_projection(&active, &weights, vertices, p));
                    }
                    let drop = (0..active.len())
                        .min_by(|&i, &j| weights[i].total_cmp(&weights[j]))
                        .unwrap();
                    active.remove(drop);
                    weights.remove(drop);
                    continue;
                }
            };
            if a.iter().all(|&w| w > 1e-14) {
                weights = a;
                x = combination(&pts, &active, &weights);
                break;
            }
            // Move from `weights` toward `a` until the first coordinate hits 0.
            let mut theta = 1.0f64;
            for i in 0..active.len() {
                let d = weights[i] - a[i];
                if d > 1e-18 {
                    theta = theta.min(weights[i] / d);
                }
            }
            for i in 0..active.len() {
                weights[i] = (1.0 - theta) * weights[i] + theta * a[i];
            }
            let keep: Vec<bool> = weights.iter().map(|&w| w > 1e-14).collect();
            if keep.iter().all(|&b| b) {
                // Numerical edge: nothing dropped; accept and exit the cycle.
                x = combination(&pts, &active, &weights);
                break;
            }
            let mut na = Vec::new();
            let mut nw = Vec::new();
            for i in 0..active.len() {
                if keep[i] {
                    na.push(active[i]);
                    nw.push(weights[i]);
                }
            }
            let total: f64 = nw.iter().sum();
            active = na;
            weights = nw.iter().map(|w| w / total).collect();
        }
    }
    Err(MzError::NumericFailure {
        what: "minimum-norm-point projection did not converge".into(),
        residual: residual * scale,
    })
}

fn combination(pts: &[Vec<f64>], active: &[usize], weights: &[f64]) -> Vec<f64> {
    let k = pts[0].len();
    let mut x = vec![0.0; k];
    for (idx, &i) in active.iter().enumerate() {
        for (xi, pi) in x.iter_mut().zip(&pts[i]) {
            *xi += weights[idx] * pi;
        }
    }
    x
}

fn finish_projection(
    active: &[usize],
    weights: &[f64],
    vertices: &[Vec<f64>],
    p: &[f64],
) -> DistanceResult {
    let mut foot = vec![0.0; p.len()];
    for (idx, &i) in active.iter().enumerate() {
        for (fi, vi) in foot.iter_mut().zip(&vertices[i]) {
            *fi += weights[idx] * vi;
        }
    }
    let distance = norm(&sub(&foot, p));
    DistanceResult { distance, foot_point: foot }
}

/// Minimize `|sum a_i q_i|` over `sum a_i = 1` for the active subset; returns
/// the affine coefficients, or `None` if the bordered Gram system is
/// numerically singular.
fn affine_min_norm(pts: &[Vec<f64>], active: &[usize]) -> Option<Vec<f64>> {
    let m = active.len();
    // Bordered system: [G 1; 1^T 0] [a; lam] = [0; 1].
    let dim = m + 1;
    let mut mat = vec![0.0f64; dim * dim];
    let mut rhs = vec![0.0f64; dim];
    for r in 0..m {
        for c in 0..m {
            mat[r * dim + c] = dot(&pts[active[r]], &pts[active[c]]);
        }
        mat[r * dim + m] = 1.0;
        mat[m * dim + r] = 1.0;
    }
    rhs[m] = 1.0;
    solve_dense(&mut mat, &mut rhs, dim)?;
    Some(rhs[..m].to_vec())
}

/// In-place Gaussian elimination with partial pivoting.
pub(crate) fn solve_dense(mat: &mut [f64], rhs: &mut [f64], n: usize) -> Option<()> {
    for col in 0..n {
        let mut piv = col;
        let mut best = mat[col * n + col].abs();
        for r in (col + 1)..n {
            let v = mat[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best < 1e-13 {
            return None;
        }
        if piv != col {
            for c in 0..n {
                mat.swap(col * n + c, piv * n + c);
            }
            rhs.swap(col, piv);
        }
        let d = mat[col * n + col];
        for r in (col + 1)..n {
            let f = mat[r * n + col] / d;
            if f != 0.0 {
                for c in col..n {
                    mat[r * n + c] -= f * mat[col * n + c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut v = rhs[col];
        for c in (col + 1)..n {
            v -= mat[col * n + c] * rhs[c];
        }
        rhs[col] = v / mat[col * n + col];
    }
    Some(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b2(cx: f64, cy: f64, r: f64) -> ConvexBody {
        ConvexBody::ball(vec![cx, cy], r)
    }

    #[test]
    fn sup_norm_examples() {
        assert_eq!(b2(0.0, 0.0, 1.0).sup_norm().unwrap(), 1.0);
        let tri = ConvexBody::vpolytope(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]]);
        assert_eq!(tri.sup_norm().unwrap(), 1.0);
        assert_eq!(b2(3.0, 4.0, 2.0).sup_norm().unwrap(), 7.0);
    }

    #[test]
    fn sup_norm_empty_vertices_errors() {
        let bad = ConvexBody::vpolytope(vec![]);
        assert!(matches!(bad.sup_norm(), Err(MzError::InvalidBody(_))));
    }

    #[test]
    fn project_ball_radial() {
        let res = b2(0.0, 0.0, 1.0).project(&[3.0, 4.0]).unwrap();
        assert!((res.distance - 4.0).abs() < 1e-14);
        assert!((res.foot_point[0] - 0.6).abs() < 1e-14);
        assert!((res.foot_point[1] - 0.8).abs() < 1e-14);
    }

    #[test]
    fn project_segment_nearest_vertex() {
        let seg = ConvexBody::vpolytope(vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        let res = seg.project(&[2.0, 1.0]).unwrap();
        assert!((res.distance - 2.0f64.sqrt()).abs() < 1e-10);
        assert!((res.foot_point[0] - 1.0).abs() < 1e-9);
        assert!(res.foot_point[1].abs() < 1e-9);
    }

    #[test]
    fn project_is_idempotent() {
        let tri = ConvexBody::vpolytope(vec![vec![0.0, 0.0], vec![2.0, 0.5], vec![0.5, 2.0]]);
        let res = tri.project(&[3.0, 3.0]).unwrap();
        let again = tri.project(&res.foot_point).unwrap();
        assert!(again.distance <= 10.0 * TOL_PROJ, "distance {}", again.distance);
    }

    #[test]
    fn inflated_distance_examples() {
        assert!((b2(0.0, 0.0, 1.0).inflated_distance(1.0, &[3.0, 4.0]).unwrap() - 3.0).abs() < 1e-14);
        // Clamp at zero once inside the inflation.
        assert_eq!(b2(0.0, 0.0, 1.0).inflated_distance(5.0, &[3.0, 4.0]).unwrap(), 0.0);
        let seg = ConvexBody::vpolytope(vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        let d = seg.inflated_distance(0.1, &[2.0, 1.0]).unwrap();
        assert!((d - (2.0f64.sqrt() - 0.1)).abs() < 1e-10);
        assert!(seg.inflated_distance(-0.5, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn hausdorff_balls_and_identity() {
        assert!((b2(0.0, 0.0, 1.0).hausdorff(&b2(0.0, 0.0, 3.0)).unwrap() - 2.0).abs() < 1e-14);
        let tri = ConvexBody::vpolytope(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(tri.hausdorff(&tri).unwrap(), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let body = b2(0.5, -1.0, 2.0);
        let s = serde_json::to_string(&body).unwrap();
        assert!(s.contains("\"kind\":\"ball\""));
        let back: ConvexBody = serde_json::from_str(&s).unwrap();
        assert_eq!(body, back);
        let poly = ConvexBody::vpolytope(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let s = serde_json::to_string(&poly).unwrap();
        assert!(s.contains("\"kind\":\"vpolytope\""));
        let back: ConvexBody = serde_json::from_str(&s).unwrap();
        assert_eq!(poly, back);
    }
}
