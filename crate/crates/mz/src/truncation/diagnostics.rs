//! Per-sequence diagnostics: the admissibility functional for varying
//! derivative bounds, and empirical moment comparison between a sequence
//! and its truncation.

use crate::error::MzError;
use crate::field::grid::GridField;
use crate::field::integral::pairwise_sum;
use crate::Result;
use serde::Serialize;

/// The growth functional
/// `lambda_j^{1-eps} (1 + C1 M_j) |K|_inf^{d+1} e^{2(d+1) C2 (1 + C1 M_j)}`.
/// A per-`j` diagnostic; drivers report whether the values decrease.
pub fn growth_admissibility(
    lambda_j: f64,
    m_j: f64,
    eps: f64,
    d: usize,
    k_sup: f64,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    if lambda_j < 0.0 {
        return Err(MzError::Argument("lambda_j must be nonnegative".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(MzError::Argument(format!("eps {eps} must lie in (0,1)")));
    }
    let dp1 = d as f64 + 1.0;
    let growth = 1.0 + c1 * m_j;
    Ok(lambda_j.powf(1.0 - eps) * growth * k_sup.powf(dp1) * (2.0 * dp1 * c2 * growth).exp())
}

/// Spatial averages of value monomials for two fields plus their absolute
/// differences.
#[derive(Debug, Clone, Serialize)]
pub struct MomentTable {
    pub rows: Vec<MomentRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentRow {
    /// Monomial exponents per component.
    pub exponents: Vec<usize>,
    pub mean_left: f64,
    pub mean_right: f64,
    pub abs_diff: f64,
}

/// Compare spatial averages of monomials of the field values (degree up to
/// 3 in the intended use) between `f1` and a modified `f2`.
pub fn young_measure_compare(
    f1: &GridField,
    f2: &GridField,
    moments: &[Vec<usize>],
) -> Result<MomentTable> {
    f1.validate()?;
    f2.validate()?;
    if f1.grid != f2.grid || f1.components != f2.components {
        return Err(MzError::GridMismatch("moment comparison needs equal grids and components".into()));
    }
    let m = f1.components;
    let nodes = f1.grid.node_count();
    let mut rows = Vec::with_capacity(moments.len());
    let mut buf1 = vec![0.0f64; nodes];
    let mut buf2 = vec![0.0f64; nodes];
    for exps in moments {
        if exps.len() != m {
            return Err(MzError::Argument(format!(
                "moment exponent vector length {} does not match {} components",
                exps.len(),
                m
            )));
        }
        for n in 0..nodes {
            let mut p1 = 1.0f64;
            let mut p2 = 1.0f64;
            for c in 0..m {
                for _ in 0..exps[c] {
                    p1 *= f1.value(n, c);
                    p2 *= f2.value(n, c);
                }
            }
            buf1[n] = p1;
            buf2[n] = p2;
        }
        let mean_left = pairwise_sum(&buf1) / nodes as f64;
        let mean_right = pairwise_sum(&buf2) / nodes as f64;
        rows.push(MomentRow {
            exponents: exps.clone(),
            mean_left,
            mean_right,
            abs_diff: (mean_left - mean_right).abs(),
        });
    }
    Ok(MomentTable { rows })
}

/// All monomial exponent vectors over `m` components with total degree in
/// `1..=max_degree`.
pub fn monomials_up_to(m: usize, max_degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; m];
    fn rec(c: usize, remaining: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if c == current.len() {
            if current.iter().sum::<usize>() > 0 {
                out.push(current.clone());
            }
            return;
        }
        for e in 0..=remaining {
            current[c] = e;
            rec(c + 1, remaining - e, current, out);
        }
        current[c] = 0;
    }
    rec(0, max_degree, &mut current, &mut out);
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::grid::{Boundary, Grid, GridField};

    #[test]
    fn zero_lambda_gives_zero() {
        let v = growth_admissibility(0.0, 1.0, 0.5, 2, 1.0, 9.0, 0.09).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn geometric_lambda_halves_by_sqrt_ratio() {
        // With M_j constant and lambda_j = 2^{-j}, eps = 1/2, successive
        // values shrink by 2^{-1/2}.
        let mut prev = None;
        for j in 0..6 {
            let lambda = 2f64.powi(-j);
            let v = growth_admissibility(lambda, 2.0, 0.5, 2, 1.5, 9.0, 0.09).unwrap();
            if let Some(p) = prev {
                let ratio: f64 = v / p;
                assert!((ratio - 2f64.powf(-0.5)).abs() < 1e-12);
            }
            prev = Some(v);
        }
    }

    #[test]
    fn formula_matches_independent_reevaluation() {
        let (lambda, m_j, eps, d, k, c1, c2) = (0.37, 1.25, 0.25, 3usize, 2.5, 9.0, 0.07);
        let v = growth_admissibility(lambda, m_j, eps, d, k, c1, c2).unwrap();
        let g = 1.0 + c1 * m_j;
        let expect = lambda.powf(0.75) * g * k.powf(4.0) * (2.0 * 4.0 * c2 * g).exp();
        assert!((v - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn identical_fields_have_zero_drift() {
        let grid = Grid::cube(2, 17, 1.0, Boundary::Extend).unwrap();
        let f = GridField::from_fn(grid, 2, |x, out| {
            out[0] = x[0];
            out[1] = x[1] * x[0];
        });
        let table = young_measure_compare(&f, &f, &monomials_up_to(2, 3)).unwrap();
        assert!(!table.rows.is_empty());
        for row in &table.rows {
            assert_eq!(row.abs_diff, 0.0);
        }
    }

    #[test]
    fn small_modification_moves_first_moment_little() {
        let grid = Grid::cube(2, 33, 1.0, Boundary::Extend).unwrap();
        let f1 = GridField::from_fn(grid.clone(), 1, |_, out| out[0] = 1.0);
        let mut f2 = f1.clone();
        // Modify a set of 5 nodes with bounded values.
        let nodes = grid.node_count();
        for n in [3usize, 100, 500, 800, nodes - 2] {
            f2.data[n] = -1.0;
        }
        let delta = 5.0 / nodes as f64;
        let table = young_measure_compare(&f1, &f2, &[vec![1]]).unwrap();
        assert!(table.rows[0].abs_diff <= delta * 2.0 + 1e-15);
    }
}
