//! Homogeneous constant-coefficient differential operators of order 1 or 2
//! and their finite-difference application.
//!
//! Stencils are central and second order in the interior; non-periodic
//! boundaries fall back to one-sided second-order stencils.  Mixed second
//! derivatives are composed from two first-derivative passes, which keeps
//! the boundary handling uniform.

use crate::error::MzError;
use crate::field::grid::{Boundary, Grid, GridField};
use crate::Result;
use serde::{Deserialize, Serialize};

/// One term `B^alpha d_alpha` of the operator: a multi-index (exponent per
/// axis) plus a `k x m` coefficient matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpTerm {
    pub alpha: Vec<usize>,
    pub coeff: Vec<f64>,
}

/// `B = sum_{|alpha| = l} B^alpha d_alpha` with constant matrices
/// `B^alpha in R^{k x m}`.  Mixed second-order multi-indices appear once
/// (unordered), so a stored mixed coefficient is the sum of both ordered
/// contributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousOperator {
    pub order: usize,
    pub in_components: usize,
    pub out_components: usize,
    pub terms: Vec<OpTerm>,
}

impl HomogeneousOperator {
    pub fn new(order: usize, in_components: usize, out_components: usize, terms: Vec<OpTerm>) -> Result<Self> {
        let op = HomogeneousOperator { order, in_components, out_components, terms };
        op.validate()?;
        Ok(op)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.order == 1 || self.order == 2) {
            return Err(MzError::Argument(format!("operator order {} not in {{1,2}}", self.order)));
        }
        if self.terms.is_empty() {
            return Err(MzError::Argument("operator has no terms".into()));
        }
        let dim = self.terms[0].alpha.len();
        let mut any_nonzero = false;
        for t in &self.terms {
            if t.alpha.len() != dim {
                return Err(MzError::Argument("inconsistent multi-index dimensions".into()));
            }
            if t.alpha.iter().sum::<usize>() != self.order {
                return Err(MzError::Argument("every multi-index must have |alpha| = order".into()));
            }
            if t.coeff.len() != self.in_components * self.out_components {
                return Err(MzError::Argument("coefficient matrix shape mismatch".into()));
            }
            any_nonzero |= t.coeff.iter().any(|&v| v != 0.0);
        }
        if !any_nonzero {
            return Err(MzError::Argument("operator must have a nonzero coefficient".into()));
        }
        Ok(())
    }

    /// Spatial dimension the multi-indices act on.
    pub fn dim(&self) -> usize {
        self.terms[0].alpha.len()
    }

    /// The gradient of a scalar field: `l = 1`, `m = 1`, `k = d`.
    pub fn gradient(d: usize) -> Self {
        let terms = (0..d)
            .map(|a| {
                let mut alpha = vec![0; d];
                alpha[a] = 1;
                let mut coeff = vec![0.0; d];
                coeff[a] = 1.0;
                OpTerm { alpha, coeff }
            })
            .collect();
        HomogeneousOperator { order: 1, in_components: 1, out_components: d, terms }
    }

    /// Sum of pure second derivatives of a scalar field (the Laplacian):
    /// `l = 2`, `m = 1`, `k = 1`.
    pub fn laplacian(d: usize) -> Self {
        let terms = (0..d)
            .map(|a| {
                let mut alpha = vec![0; d];
                alpha[a] = 2;
                OpTerm { alpha, coeff: vec![1.0] }
            })
            .collect();
        HomogeneousOperator { order: 2, in_components: 1, out_components: 1, terms }
    }
}

/// Offsets (in nodes) and weights (in units of `1/h`) of the second-order
/// first-derivative stencil at 1-D position `i` of `n`.
fn fd1_taps(i: usize, n: usize, boundary: Boundary) -> [(isize, f64); 3] {
    match boundary {
        Boundary::Periodic => [(-1, -0.5), (0, 0.0), (1, 0.5)],
        Boundary::Extend => {
            if i == 0 {
                [(0, -1.5), (1, 2.0), (2, -0.5)]
            } else if i == n - 1 {
                [(0, 1.5), (-1, -2.0), (-2, 0.5)]
            } else {
                [(-1, -0.5), (0, 0.0), (1, 0.5)]
            }
        }
    }
}

/// Offsets and weights (in units of `1/h^2`) of the second-order pure second
/// derivative stencil.
fn fd2_taps(i: usize, n: usize, boundary: Boundary) -> [(isize, f64); 4] {
    match boundary {
        Boundary::Periodic => [(-1, 1.0), (0, -2.0), (1, 1.0), (0, 0.0)],
        Boundary::Extend => {
            if i == 0 {
                [(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)]
            } else if i == n - 1 {
                [(0, 2.0), (-1, -5.0), (-2, 4.0), (-3, -1.0)]
            } else {
                [(-1, 1.0), (0, -2.0), (1, 1.0), (0, 0.0)]
            }
        }
    }
}

#[inline]
fn shifted_value(u: &GridField, comp: usize, idx: &[usize], axis: usize, off: isize) -> f64 {
    // Stencil taps stay in range by construction for extend grids; periodic
    // grids wrap.
    let n = u.grid.shape[axis] as isize;
    let mut i = idx[axis] as isize + off;
    if u.grid.boundary == Boundary::Periodic {
        i = i.rem_euclid(n);
    }
    debug_assert!(i >= 0 && i < n);
    let mut lin = 0usize;
    for a in 0..u.grid.dim {
        let ia = if a == axis { i as usize } else { idx[a] };
        lin = lin * u.grid.shape[a] + ia;
    }
    u.value(lin, comp)
}

/// First derivative along `axis` at a node.
pub(crate) fn fd1_at(u: &GridField, comp: usize, idx: &[usize], axis: usize) -> f64 {
    let taps = fd1_taps(idx[axis], u.grid.shape[axis], u.grid.boundary);
    let mut s = 0.0;
    for (off, w) in taps {
        if w != 0.0 {
            s += w * shifted_value(u, comp, idx, axis, off);
        }
    }
    s / u.grid.spacing
}

/// Pure second derivative along `axis` at a node.
pub(crate) fn fd2_at(u: &GridField, comp: usize, idx: &[usize], axis: usize) -> f64 {
    let taps = fd2_taps(idx[axis], u.grid.shape[axis], u.grid.boundary);
    let mut s = 0.0;
    for (off, w) in taps {
        if w != 0.0 {
            s += w * shifted_value(u, comp, idx, axis, off);
        }
    }
    s / (u.grid.spacing * u.grid.spacing)
}

/// Mixed second derivative `d_a d_b` (a != b) at a node, composed from two
/// first-derivative stencils.
pub(crate) fn fd_mixed_at(u: &GridField, comp: usize, idx: &[usize], a: usize, b: usize) -> f64 {
    let taps = fd1_taps(idx[a], u.grid.shape[a], u.grid.boundary);
    let mut s = 0.0;
    let mut shifted = idx.to_vec();
    let n = u.grid.shape[a] as isize;
    for (off, w) in taps {
        if w == 0.0 {
            continue;
        }
        let mut i = idx[a] as isize + off;
        if u.grid.boundary == Boundary::Periodic {
            i = i.rem_euclid(n);
        }
        shifted[a] = i as usize;
        s += w * fd1_at(u, comp, &shifted, b);
    }
    s / u.grid.spacing
}

/// Evaluate `d_alpha u_comp` at a node.
pub(crate) fn derivative_at(u: &GridField, comp: usize, idx: &[usize], alpha: &[usize]) -> f64 {
    let mut axes = [0usize; 2];
    let mut count = 0;
    for (a, &e) in alpha.iter().enumerate() {
        for _ in 0..e {
            axes[count] = a;
            count += 1;
        }
    }
    match count {
        1 => fd1_at(u, comp, idx, axes[0]),
        2 => {
            if axes[0] == axes[1] {
                fd2_at(u, comp, idx, axes[0])
            } else {
                fd_mixed_at(u, comp, idx, axes[0], axes[1])
            }
        }
        _ => unreachable!("multi-index order must be 1 or 2"),
    }
}

/// Evaluate all `k` output components of `op u` at one node.
pub(crate) fn operator_at(op: &HomogeneousOperator, u: &GridField, idx: &[usize], out: &mut [f64]) {
    out.fill(0.0);
    let m = op.in_components;
    for term in &op.terms {
        for c in 0..m {
            let d = derivative_at(u, c, idx, &term.alpha);
            if d != 0.0 {
                for (r, o) in out.iter_mut().enumerate() {
                    *o += term.coeff[r * m + c] * d;
                }
            }
        }
    }
}

/// Apply the operator over the whole grid by finite differences.
pub fn apply_operator(op: &HomogeneousOperator, u: &GridField) -> Result<GridField> {
    op.validate()?;
    u.validate()?;
    if u.components != op.in_components {
        return Err(MzError::ComponentMismatch { expected: op.in_components, got: u.components });
    }
    if op.dim() != u.grid.dim {
        return Err(MzError::GridMismatch(format!(
            "operator dimension {} vs grid dimension {}",
            op.dim(),
            u.grid.dim
        )));
    }
    let mut out = GridField::zeros(u.grid.clone(), op.out_components);
    let dim = u.grid.dim;
    let mut idx = vec![0usize; dim];
    let k = op.out_components;
    let mut buf = vec![0.0; k];
    for n in 0..u.grid.node_count() {
        u.grid.fill_multi(n, &mut idx);
        operator_at(op, u, &idx, &mut buf);
        out.data[n * k..(n + 1) * k].copy_from_slice(&buf);
    }
    Ok(out)
}

/// Spectral (2-norm) of a `k x m` matrix by power iteration on `A^T A`.
fn spectral_norm(coeff: &[f64], k: usize, m: usize) -> f64 {
    if coeff.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let mut v = vec![1.0 / (m as f64).sqrt(); m];
    let mut av = vec![0.0; k];
    let mut atav = vec![0.0; m];
    let mut sigma = 0.0;
    for _ in 0..200 {
        for r in 0..k {
            av[r] = (0..m).map(|c| coeff[r * m + c] * v[c]).sum();
        }
        for c in 0..m {
            atav[c] = (0..k).map(|r| coeff[r * m + c] * av[r]).sum();
        }
        let n = atav.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            break;
        }
        for c in 0..m {
            v[c] = atav[c] / n;
        }
        sigma = n.sqrt();
    }
    sigma
}

/// The regularization constant `C1` of the operator: `9 sum |B^a|` for order
/// one, `36 sum |B^{ab}|` for order two (operator norms; a stored mixed
/// coefficient counts once since it already carries both ordered terms).
pub fn operator_constant(op: &HomogeneousOperator) -> Result<f64> {
    op.validate()?;
    let sum: f64 = op
        .terms
        .iter()
        .map(|t| spectral_norm(&t.coeff, op.out_components, op.in_components))
        .sum();
    Ok(if op.order == 1 { 9.0 * sum } else { 36.0 * sum })
}

/// Frobenius norm of the order-`l` derivative tensor of `u` at a node.
pub(crate) fn dl_frobenius_at(u: &GridField, l: usize, idx: &[usize]) -> f64 {
    let d = u.grid.dim;
    let mut s = 0.0;
    for c in 0..u.components {
        if l == 1 {
            for a in 0..d {
                let v = fd1_at(u, c, idx, a);
                s += v * v;
            }
        } else {
            for a in 0..d {
                let va = fd2_at(u, c, idx, a);
                s += va * va;
                for b in (a + 1)..d {
                    let vab = fd_mixed_at(u, c, idx, a, b);
                    s += 2.0 * vab * vab;
                }
            }
        }
    }
    s.sqrt()
}

/// Whether a node is in the stencil interior (all nodes for periodic grids,
/// one-node margin otherwise).
pub fn is_interior(grid: &Grid, idx: &[usize]) -> bool {
    match grid.boundary {
        Boundary::Periodic => true,
        Boundary::Extend => (0..grid.dim).all(|a| idx[a] >= 1 && idx[a] + 2 <= grid.shape[a]),
    }
}

/// The full finite-difference derivative tensor as a field: `m * d`
/// components for `l = 1` (component-major, axis-fastest), `m * d * d` for
/// `l = 2` (component, then row-major axis pair).
pub fn derivative_tensor(u: &GridField, l: usize) -> Result<GridField> {
    if !(l == 1 || l == 2) {
        return Err(MzError::Argument(format!("derivative order {l} not in {{1,2}}")));
    }
    u.validate()?;
    let d = u.grid.dim;
    let m = u.components;
    let per_comp = if l == 1 { d } else { d * d };
    let mut out = GridField::zeros(u.grid.clone(), m * per_comp);
    let mut idx = vec![0usize; d];
    for n in 0..u.grid.node_count() {
        u.grid.fill_multi(n, &mut idx);
        let base = n * m * per_comp;
        for c in 0..m {
            if l == 1 {
                for a in 0..d {
                    out.data[base + c * d + a] = fd1_at(u, c, &idx, a);
                }
            } else {
                for a in 0..d {
                    for b in 0..d {
                        let v = if a == b {
                            fd2_at(u, c, &idx, a)
                        } else {
                            fd_mixed_at(u, c, &idx, a.min(b), a.max(b))
                        };
                        out.data[base + c * d * d + a * d + b] = v;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Max over interior nodes of the Frobenius norm of the finite-difference
/// `D^l u` tensor.
pub fn sup_norm_derivative(u: &GridField, l: usize) -> Result<f64> {
    if !(l == 1 || l == 2) {
        return Err(MzError::Argument(format!("derivative order {l} not in {{1,2}}")));
    }
    u.validate()?;
    let dim = u.grid.dim;
    let mut idx = vec![0usize; dim];
    let mut best = 0.0f64;
    for n in 0..u.grid.node_count() {
        u.grid.fill_multi(n, &mut idx);
        if is_interior(&u.grid, &idx) {
            best = best.max(dl_frobenius_at(u, l, &idx));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::grid::{Boundary, Grid, GridField};

    fn affine_field(n: usize, a: [f64; 2], b: f64) -> GridField {
        let grid = Grid::cube(2, n, 1.0, Boundary::Extend).unwrap();
        GridField::from_fn(grid, 1, |x, out| out[0] = a[0] * x[0] + a[1] * x[1] + b)
    }

    #[test]
    fn gradient_exact_on_affine() {
        let u = affine_field(17, [2.0, -3.0], 0.5);
        let g = apply_operator(&HomogeneousOperator::gradient(2), &u).unwrap();
        for n in 0..u.grid.node_count() {
            assert!((g.value(n, 0) - 2.0).abs() < 1e-12);
            assert!((g.value(n, 1) + 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn second_order_exact_on_quadratics() {
        let grid = Grid::cube(2, 21, 1.0, Boundary::Extend).unwrap();
        // u = 3 x^2 + 2 x y - y^2: u_xx = 6, u_yy = -2, u_xy = 2.
        let u = GridField::from_fn(grid, 1, |x, out| {
            out[0] = 3.0 * x[0] * x[0] + 2.0 * x[0] * x[1] - x[1] * x[1]
        });
        let mut idx = vec![0usize; 2];
        for n in 0..u.grid.node_count() {
            u.grid.fill_multi(n, &mut idx);
            assert!((fd2_at(&u, 0, &idx, 0) - 6.0).abs() < 1e-9);
            assert!((fd2_at(&u, 0, &idx, 1) + 2.0).abs() < 1e-9);
            assert!((fd_mixed_at(&u, 0, &idx, 0, 1) - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn refinement_ratio_second_order() {
        // max error of the gradient of sin(2 pi x) halves twice per h -> h/2.
        let err = |n: usize| -> f64 {
            let grid = Grid::cube(1, n, 1.0, Boundary::Periodic).unwrap();
            let u = GridField::from_fn(grid, 1, |x, out| {
                out[0] = (2.0 * std::f64::consts::PI * x[0]).sin()
            });
            let g = apply_operator(&HomogeneousOperator::gradient(1), &u).unwrap();
            let mut worst = 0.0f64;
            let mut idx = [0usize; 1];
            for n in 0..u.grid.node_count() {
                u.grid.fill_multi(n, &mut idx);
                let x = u.grid.coord(&idx)[0];
                let exact = 2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * x).cos();
                worst = worst.max((g.value(n, 0) - exact).abs());
            }
            worst
        };
        let e1 = err(64);
        let e2 = err(128);
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn component_mismatch_rejected() {
        let u = affine_field(9, [1.0, 1.0], 0.0);
        let op = HomogeneousOperator::gradient(2);
        let mut two = u.clone();
        two.components = 2;
        two.data = vec![0.0; two.grid.node_count() * 2];
        assert!(matches!(
            apply_operator(&op, &two),
            Err(MzError::ComponentMismatch { .. })
        ));
    }

    #[test]
    fn sup_norm_derivative_on_affine() {
        let u = affine_field(17, [3.0, 4.0], 1.0);
        let d1 = sup_norm_derivative(&u, 1).unwrap();
        assert!((d1 - 5.0).abs() < 1e-10);
        let d2 = sup_norm_derivative(&u, 2).unwrap();
        assert!(d2 < 1e-8, "second derivative of affine data should vanish, got {d2}");
    }

    #[test]
    fn sup_norm_second_derivative_of_sine() {
        // u = sin(2 pi x1): D^2 Frobenius sup = 4 pi^2, checked by refinement.
        let meas = |n: usize| -> f64 {
            let grid = Grid::cube(2, n, 1.0, Boundary::Periodic).unwrap();
            let u = GridField::from_fn(grid, 1, |x, out| {
                out[0] = (2.0 * std::f64::consts::PI * x[0]).sin()
            });
            sup_norm_derivative(&u, 2).unwrap()
        };
        let exact = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
        let e1 = (meas(32) - exact).abs();
        let e2 = (meas(64) - exact).abs();
        assert!(e1 < 0.05 * exact);
        assert!(e2 < 0.3 * e1, "errors {e1} {e2}");
    }

    #[test]
    fn operator_constants() {
        let c1 = operator_constant(&HomogeneousOperator::gradient(2)).unwrap();
        assert!((c1 - 18.0).abs() < 1e-12);
        let c2 = operator_constant(&HomogeneousOperator::laplacian(2)).unwrap();
        assert!((c2 - 72.0).abs() < 1e-12);
    }

    #[test]
    fn linearity_within_rounding() {
        let grid = Grid::cube(2, 17, 1.0, Boundary::Extend).unwrap();
        let u = GridField::from_fn(grid.clone(), 1, |x, out| out[0] = (3.0 * x[0] + x[1]).sin());
        let v = GridField::from_fn(grid.clone(), 1, |x, out| out[0] = (x[0] * x[1]).cos());
        let (a, b) = (0.5, -2.0);
        let mut combo = GridField::zeros(grid, 1);
        for i in 0..combo.data.len() {
            combo.data[i] = a * u.data[i] + b * v.data[i];
        }
        let op = HomogeneousOperator::gradient(2);
        let gu = apply_operator(&op, &u).unwrap();
        let gv = apply_operator(&op, &v).unwrap();
        let gc = apply_operator(&op, &combo).unwrap();
        let scale = 1.0 / combo.grid.spacing;
        for i in 0..gc.data.len() {
            let lin = a * gu.data[i] + b * gv.data[i];
            assert!((gc.data[i] - lin).abs() <= 1e-13 * scale.max(1.0));
        }
    }
}
