//! Discrete integrals with a fixed deterministic summation order.

use crate::convex::ConvexBody;
use crate::error::MzError;
use crate::field::grid::GridField;
use crate::Result;

/// Deterministic pairwise (tree) summation; independent of any tiling or
/// worker count because the reduction order is fixed by the data order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pointwise distance of a `k`-component field to `K_gamma`, as a scalar
/// field `(dist(f(x), K) - gamma)^+`.
pub fn distance_field(f: &GridField, body: &ConvexBody, gamma: f64) -> Result<GridField> {
    f.validate()?;
    body.validate()?;
    if body.dim() != f.components {
        return Err(MzError::ComponentMismatch { expected: body.dim(), got: f.components });
    }
    if gamma < 0.0 {
        return Err(MzError::Argument("gamma must be nonnegative".into()));
    }
    let mut out = GridField::zeros(f.grid.clone(), 1);
    for n in 0..f.grid.node_count() {
        let d = body.distance(f.values(n))?;
        out.data[n] = (d - gamma).max(0.0);
    }
    Ok(out)
}

/// `raw = h^d sum_x dist(f(x), K)` and `lambda = raw / |K|_inf`.
pub fn l1_dist_integral(f: &GridField, body: &ConvexBody) -> Result<(f64, f64)> {
    l1_dist_integral_inflated(f, body, 0.0)
}

/// Same integral against the inflated body `K_gamma`; `lambda` stays
/// normalized by the base `|K|_inf`.
pub fn l1_dist_integral_inflated(f: &GridField, body: &ConvexBody, gamma: f64) -> Result<(f64, f64)> {
    let sup = body.sup_norm()?;
    if sup == 0.0 {
        return Err(MzError::InvalidBody("sup norm of K vanishes; cannot normalize".into()));
    }
    let dist = distance_field(f, body, gamma)?;
    let raw = pairwise_sum(&dist.data) * f.grid.cell_measure();
    Ok((raw, raw / sup))
}
