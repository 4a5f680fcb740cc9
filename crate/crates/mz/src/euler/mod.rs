//! Linear constraints with low-order potentials: the symmetric gradient with
//! its second-order annihilator, and the linearized isentropic Euler system
//! with its second-order potential, plus Fourier-symbol exactness checks.
//!
//! Space-time fields live on `(d+1)`-dimensional periodic grids with axis 0
//! playing the role of time.  State vectors `z = (rho, m, M, q)` are stored
//! with `N = (d+1)(d+2)/2` components in the order `[rho, m_1..m_d,
//! M upper-triangle row-major excluding the last diagonal entry, q]`; the
//! matrix made of them is symmetric of size `(d+1) x (d+1)` with matrix
//! index `d` paired to the time axis.
//!
//! The potential consumes antisymmetric double-potential components
//! `psi^{ij}_{kl}` indexed by pairs `i < j` and `k < l` over the full
//! space-time index range `0..=d`, giving `(D(D-1)/2)^2` scalar fields with
//! `D = d + 1`; every divergence is the full space-time divergence.

pub mod linalg;
pub mod spectral;

use crate::error::MzError;
use crate::field::grid::GridField;
use crate::field::operator::{apply_operator, HomogeneousOperator, OpTerm};
use crate::Result;
use serde::Serialize;
use std::collections::BTreeMap;

pub use linalg::{matmul, numerical_rank, singular_values};
pub use spectral::{apply_operator_spectral, apply_operator_spectral_streaming};

/// Number of state components `N = (1 + d/2)(d + 1) = (d+1)(d+2)/2`.
pub fn n_components(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

/// Number of independent potential components over the full space-time
/// index range: `(D(D-1)/2)^2` with `D = d + 1`.
pub fn potential_component_count(d: usize) -> usize {
    let np = (d + 1) * d / 2;
    np * np
}

/// Grid axis paired to the matrix index `a` (0-based): spatial indices map
/// to axes `1..=d`, the last matrix index to the time axis 0.
fn axis_of(a: usize, d: usize) -> usize {
    if a < d {
        a + 1
    } else {
        0
    }
}

/// Position of the symmetric-matrix entry `(i, j)` (`i <= j`, 0-based) in a
/// row-major upper-triangle enumeration of a `d x d` matrix.
pub fn sym_index(i: usize, j: usize, d: usize) -> usize {
    debug_assert!(i <= j && j < d);
    i * (2 * d - i + 1) / 2 + (j - i)
}

/// State component index of the trace-free part entry `M_{ij}` (`i <= j`,
/// not the last diagonal entry).
fn m_component(i: usize, j: usize, d: usize) -> usize {
    debug_assert!(!(i == d - 1 && j == d - 1));
    1 + d + sym_index(i, j, d)
}

/// Pack the state values at one point into the symmetric `(d+1) x (d+1)`
/// matrix (row-major).
pub fn state_to_matrix(z: &[f64], d: usize) -> Result<Vec<f64>> {
    let n = n_components(d);
    if z.len() != n {
        return Err(MzError::ComponentMismatch { expected: n, got: z.len() });
    }
    let dd = d + 1;
    let rho = z[0];
    let q = z[n - 1];
    let mut u = vec![0.0; dd * dd];
    // Trace-free symmetric part with the last diagonal entry reconstructed.
    let mut diag_sum = 0.0;
    for i in 0..d {
        for j in i..d {
            let v = if i == d - 1 && j == d - 1 {
                -diag_sum
            } else {
                z[m_component(i, j, d)]
            };
            if i == j {
                diag_sum += v;
            }
            u[i * dd + j] = v + if i == j { q } else { 0.0 };
            u[j * dd + i] = u[i * dd + j];
        }
    }
    for i in 0..d {
        u[i * dd + d] = z[1 + i];
        u[d * dd + i] = z[1 + i];
    }
    u[d * dd + d] = rho;
    Ok(u)
}

/// Invert [`state_to_matrix`]: `q` is the trace of the upper block over `d`,
/// `M` the block minus `q I`.  Errors when the matrix is not symmetric to
/// 1e-12 (relative).
pub fn matrix_to_state(u: &[f64], d: usize) -> Result<Vec<f64>> {
    let dd = d + 1;
    if u.len() != dd * dd {
        return Err(MzError::ComponentMismatch { expected: dd * dd, got: u.len() });
    }
    let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..dd {
        for j in (i + 1)..dd {
            if (u[i * dd + j] - u[j * dd + i]).abs() > 1e-12 * scale {
                return Err(MzError::Argument(format!(
                    "matrix not symmetric at ({i},{j}): {} vs {}",
                    u[i * dd + j],
                    u[j * dd + i]
                )));
            }
        }
    }
    let n = n_components(d);
    let mut z = vec![0.0; n];
    z[0] = u[d * dd + d];
    for i in 0..d {
        z[1 + i] = u[i * dd + d];
    }
    let trace: f64 = (0..d).map(|i| u[i * dd + i]).sum();
    let q = trace / d as f64;
    z[n - 1] = q;
    for i in 0..d {
        for j in i..d {
            if i == d - 1 && j == d - 1 {
                continue;
            }
            z[m_component(i, j, d)] = u[i * dd + j] - if i == j { q } else { 0.0 };
        }
    }
    Ok(z)
}

/// Expand an `N`-component state field into the full `(d+1)^2`-component
/// symmetric matrix field (row-major entries).
pub fn state_to_matrix_field(z: &GridField) -> Result<GridField> {
    let d = z.grid.dim - 1;
    let n = n_components(d);
    if z.components != n {
        return Err(MzError::ComponentMismatch { expected: n, got: z.components });
    }
    let dd = d + 1;
    let mut out = GridField::zeros(z.grid.clone(), dd * dd);
    for node in 0..z.grid.node_count() {
        let u = state_to_matrix(z.values(node), d)?;
        out.data[node * dd * dd..(node + 1) * dd * dd].copy_from_slice(&u);
    }
    Ok(out)
}

/// Row divergence of a `dd x dd` matrix field over space-time axes: output
/// row `i` is `sum_k d_{axis(k)} U_{ik}`.
pub fn row_divergence_operator(dd: usize) -> HomogeneousOperator {
    let d = dd - 1;
    let dim = dd;
    let mut terms = Vec::new();
    for k in 0..dd {
        let mut alpha = vec![0usize; dim];
        alpha[axis_of(k, d)] += 1;
        let mut coeff = vec![0.0; dd * dd * dd];
        for i in 0..dd {
            coeff[i * (dd * dd) + i * dd + k] = 1.0;
        }
        terms.push(OpTerm { alpha, coeff });
    }
    HomogeneousOperator { order: 1, in_components: dd * dd, out_components: dd, terms }
}

/// The first-order constraint operator of the linearized isentropic Euler
/// system acting on state fields: rows `0..d` are the momentum equations,
/// row `d` the continuity equation.
pub fn build_euler_a(d: usize) -> HomogeneousOperator {
    let n = n_components(d);
    let dim = d + 1;
    let out = d + 1;
    let mut terms = Vec::new();

    // Time derivative: d_t m in the momentum rows, d_t rho in continuity.
    {
        let mut alpha = vec![0usize; dim];
        alpha[0] = 1;
        let mut coeff = vec![0.0; out * n];
        for i in 0..d {
            coeff[i * n + (1 + i)] = 1.0;
        }
        coeff[d * n] = 1.0;
        terms.push(OpTerm { alpha, coeff });
    }
    // Spatial derivatives.
    for j in 0..d {
        let mut alpha = vec![0usize; dim];
        alpha[j + 1] = 1;
        let mut coeff = vec![0.0; out * n];
        for i in 0..d {
            // d_{x_j} (M_{ij} + q delta_{ij}).
            let (lo, hi) = (i.min(j), i.max(j));
            if lo == d - 1 && hi == d - 1 {
                // Reconstructed diagonal entry: -sum of the stored diagonal.
                for r in 0..d - 1 {
                    coeff[i * n + m_component(r, r, d)] -= 1.0;
                }
            } else {
                coeff[i * n + m_component(lo, hi, d)] += 1.0;
            }
            if i == j {
                coeff[i * n + (n - 1)] += 1.0;
            }
        }
        // Continuity: d_{x_j} m_j.
        coeff[d * n + (1 + j)] = 1.0;
        terms.push(OpTerm { alpha, coeff });
    }
    HomogeneousOperator { order: 1, in_components: n, out_components: out, terms }
}

/// The coupling matrix of the three unknowns `(phi^i_{jk}, phi^j_{ik},
/// phi^k_{ij})` for a sorted triple `i < j < k`: the divergence relations
/// read `b = TRIPLE_COUPLING v`.
pub const TRIPLE_COUPLING: [[f64; 3]; 3] = [[1.0, -1.0, 0.0], [-1.0, 0.0, -1.0], [0.0, -1.0, 1.0]];

/// Inverse of [`TRIPLE_COUPLING`]; the determinant is -2, so all entries are
/// halves.
pub const TRIPLE_COUPLING_INV: [[f64; 3]; 3] = [
    [0.5, -0.5, -0.5],
    [-0.5, -0.5, -0.5],
    [-0.5, -0.5, 0.5],
];

/// Sparse linear form over `(axis, component)` first-derivative symbols.
type Form1 = BTreeMap<(usize, usize), f64>;

fn pair_index(a: usize, b: usize, dd: usize) -> usize {
    debug_assert!(a < b && b < dd);
    a * (dd - 1) - a * (a + 1) / 2 + a + (b - a - 1)
}

/// `psi^{ab}_{kl}` as `(component, sign)`, or `None` when it vanishes by
/// antisymmetry.
fn psi_entry(a: usize, b: usize, k: usize, l: usize, dd: usize) -> Option<(usize, f64)> {
    if a == b || k == l {
        return None;
    }
    let (pl, ph, sp) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let (el, eh, se) = if k < l { (k, l, 1.0) } else { (l, k, -1.0) };
    let np = dd * (dd - 1) / 2;
    Some((pair_index(pl, ph, dd) * np + pair_index(el, eh, dd), sp * se))
}

/// `(div psi^{ab})_k` as a first-derivative form.
fn div_psi_form(a: usize, b: usize, k: usize, d: usize) -> Form1 {
    let dd = d + 1;
    let mut form = Form1::new();
    for l in 0..dd {
        if let Some((comp, sign)) = psi_entry(a, b, k, l, dd) {
            *form.entry((axis_of(l, d), comp)).or_insert(0.0) += sign;
        }
    }
    form
}

fn form_axpy(dst: &mut Form1, src: &Form1, factor: f64) {
    for (&key, &v) in src {
        *dst.entry(key).or_insert(0.0) += factor * v;
    }
}

/// `phi^a_{bc}` (`b < c`) as a first-derivative form of the potential
/// components.
fn phi_form(a: usize, b: usize, c: usize, d: usize) -> Form1 {
    debug_assert!(b < c);
    let mut out = Form1::new();
    if a == b || a == c {
        // phi^a_{bc} = -(div psi^{bc})_a for a in {b, c}.
        form_axpy(&mut out, &div_psi_form(b, c, a, d), -1.0);
        return out;
    }
    // Distinct triple: invert the 3x3 coupling.  With s0 < s1 < s2 and
    // b = ((div psi^{s0 s1})_{s2}, (div psi^{s0 s2})_{s1},
    // (div psi^{s1 s2})_{s0}), the unknowns (phi^{s0}_{s1 s2},
    // phi^{s1}_{s0 s2}, phi^{s2}_{s0 s1}) are TRIPLE_COUPLING_INV * b.
    let mut s = [a, b, c];
    s.sort_unstable();
    let [s0, s1, s2] = s;
    let rhs = [
        div_psi_form(s0, s1, s2, d),
        div_psi_form(s0, s2, s1, d),
        div_psi_form(s1, s2, s0, d),
    ];
    let row = if a == s0 {
        0
    } else if a == s1 {
        1
    } else {
        2
    };
    for (col, form) in rhs.iter().enumerate() {
        form_axpy(&mut out, form, TRIPLE_COUPLING_INV[row][col]);
    }
    out
}

/// Sparse linear form over `(multi-index, component)` second-derivative
/// symbols; mixed multi-indices are unordered.
type Form2 = BTreeMap<(Vec<usize>, usize), f64>;

/// `U_{ij} = (div phi^i)_j` as a second-derivative form.
fn u_entry_form(i: usize, j: usize, d: usize) -> Form2 {
    let dd = d + 1;
    let dim = dd;
    let mut out = Form2::new();
    for k in 0..dd {
        if k == j {
            continue;
        }
        let (lo, hi, sign) = if j < k { (j, k, 1.0) } else { (k, j, -1.0) };
        let inner = phi_form(i, lo, hi, d);
        let outer_axis = axis_of(k, d);
        for (&(ax, comp), &c) in &inner {
            let mut alpha = vec![0usize; dim];
            alpha[outer_axis] += 1;
            alpha[ax] += 1;
            *out.entry((alpha, comp)).or_insert(0.0) += sign * c;
        }
    }
    out
}

fn form2_axpy(dst: &mut Form2, src: &Form2, factor: f64) {
    for (key, &v) in src {
        *dst.entry(key.clone()).or_insert(0.0) += factor * v;
    }
}

/// The second-order potential of the Euler constraint: a homogeneous
/// operator turning the `(D(D-1)/2)^2` potential components into state
/// fields whose constraint residual vanishes identically.  Requires
/// `d >= 3` (the triple coupling needs three distinct spatial indices).
pub fn build_euler_b(d: usize) -> Result<HomogeneousOperator> {
    if d < 3 {
        return Err(MzError::Argument(format!(
            "the Euler potential construction needs d >= 3, got {d}"
        )));
    }
    let n = n_components(d);
    let n_psi = potential_component_count(d);
    let dd = d + 1;

    // Output component forms.
    let mut rows: Vec<Form2> = Vec::with_capacity(n);
    // rho = U_{dd}.
    let rho_form = u_entry_form(d, d, d);
    // q = trace(upper block) / d.
    let mut q_form = Form2::new();
    for i in 0..d {
        form2_axpy(&mut q_form, &u_entry_form(i, i, d), 1.0);
    }
    for v in q_form.values_mut() {
        *v /= d as f64;
    }

    rows.push(rho_form);
    for i in 0..d {
        rows.push(u_entry_form(i, d, d));
    }
    for i in 0..d {
        for j in i..d {
            if i == d - 1 && j == d - 1 {
                continue;
            }
            let mut form = u_entry_form(i, j, d);
            if i == j {
                form2_axpy(&mut form, &q_form, -1.0);
            }
            rows.push(form);
        }
    }
    rows.push(q_form);
    debug_assert_eq!(rows.len(), n);

    // Collect per multi-index coefficient matrices.
    let mut by_alpha: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
    for (row, form) in rows.iter().enumerate() {
        for (&(ref alpha, comp), &c) in form {
            if c == 0.0 {
                continue;
            }
            let mat = by_alpha
                .entry(alpha.clone())
                .or_insert_with(|| vec![0.0; n * n_psi]);
            mat[row * n_psi + comp] += c;
        }
    }
    let terms: Vec<OpTerm> = by_alpha
        .into_iter()
        .filter(|(_, coeff)| coeff.iter().any(|&v| v != 0.0))
        .map(|(alpha, coeff)| OpTerm { alpha, coeff })
        .collect();
    let _ = dd;
    HomogeneousOperator::new(2, n_psi, n, terms)
}

/// Apply the Euler constraint to a state field (spectral on periodic grids
/// when `spectral` is set, finite differences otherwise).
pub fn apply_a_euler(z: &GridField, spectral: bool) -> Result<GridField> {
    let d = z.grid.dim - 1;
    let op = build_euler_a(d);
    if spectral {
        apply_operator_spectral(&op, z)
    } else {
        apply_operator(&op, z)
    }
}

/// Apply the Euler potential to a stack of potential component fields.
pub fn apply_b_euler(psi: &GridField, spectral: bool) -> Result<GridField> {
    let d = psi.grid.dim - 1;
    let op = build_euler_b(d)?;
    if psi.components != op.in_components {
        return Err(MzError::ComponentMismatch {
            expected: op.in_components,
            got: psi.components,
        });
    }
    if spectral {
        apply_operator_spectral(&op, psi)
    } else {
        apply_operator(&op, psi)
    }
}

/// The symmetric gradient (order 1) together with its second-order
/// annihilator acting on symmetric-matrix fields (upper-triangle row-major
/// components).
pub fn symgrad_pair(d: usize) -> (HomogeneousOperator, HomogeneousOperator) {
    let t = d * (d + 1) / 2;
    // e(u)_{ij} = (d_i u_j + d_j u_i) / 2.
    let mut e_terms = Vec::new();
    for a in 0..d {
        let mut alpha = vec![0usize; d];
        alpha[a] = 1;
        let mut coeff = vec![0.0; t * d];
        for i in 0..d {
            for j in i..d {
                let row = sym_index(i, j, d);
                if a == i {
                    coeff[row * d + j] += 0.5;
                }
                if a == j {
                    coeff[row * d + i] += 0.5;
                }
            }
        }
        e_terms.push(OpTerm { alpha, coeff });
    }
    let e_op = HomogeneousOperator { order: 1, in_components: d, out_components: t, terms: e_terms };

    // Annihilator rows (j <= k):
    // sum_i d_i d_k f_{ij} + d_i d_j f_{ik} - d_j d_k f_{ii} - d_i d_i f_{jk}.
    let mut acc: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
    let mut add = |a: usize, b: usize, row: usize, comp: usize, val: f64| {
        let mut alpha = vec![0usize; d];
        alpha[a] += 1;
        alpha[b] += 1;
        let mat = acc.entry(alpha).or_insert_with(|| vec![0.0; t * t]);
        mat[row * t + comp] += val;
    };
    for j in 0..d {
        for k in j..d {
            let row = sym_index(j, k, d);
            for i in 0..d {
                add(i, k, row, sym_index(i.min(j), i.max(j), d), 1.0);
                add(i, j, row, sym_index(i.min(k), i.max(k), d), 1.0);
                add(j, k, row, sym_index(i, i, d), -1.0);
                add(i, i, row, sym_index(j, k, d), -1.0);
            }
        }
    }
    let ann_terms: Vec<OpTerm> = acc
        .into_iter()
        .filter(|(_, coeff)| coeff.iter().any(|&v| v != 0.0))
        .map(|(alpha, coeff)| OpTerm { alpha, coeff })
        .collect();
    let annihilator =
        HomogeneousOperator { order: 2, in_components: t, out_components: t, terms: ann_terms };
    (e_op, annihilator)
}

/// The symbol `sum_alpha B^alpha xi^alpha` with real monomials.
#[derive(Debug, Clone, Serialize)]
pub struct SymbolMatrix {
    pub xi: Vec<f64>,
    pub order: usize,
    pub rows: usize,
    pub cols: usize,
    pub mat: Vec<f64>,
}

pub fn symbol_matrix(op: &HomogeneousOperator, xi: &[f64]) -> Result<SymbolMatrix> {
    op.validate()?;
    if xi.len() != op.dim() {
        return Err(MzError::Argument(format!(
            "frequency dimension {} does not match operator dimension {}",
            xi.len(),
            op.dim()
        )));
    }
    let rows = op.out_components;
    let cols = op.in_components;
    let mut mat = vec![0.0; rows * cols];
    for term in &op.terms {
        let mut mono = 1.0;
        for (a, &e) in term.alpha.iter().enumerate() {
            for _ in 0..e {
                mono *= xi[a];
            }
        }
        if mono != 0.0 {
            for (m, c) in mat.iter_mut().zip(&term.coeff) {
                *m += mono * c;
            }
        }
    }
    Ok(SymbolMatrix { xi: xi.to_vec(), order: op.order, rows, cols, mat })
}

/// One failed frequency in an exactness check.
#[derive(Debug, Clone, Serialize)]
pub struct ExactnessFailure {
    pub xi: Vec<f64>,
    pub composition_norm: f64,
    pub rank_b: usize,
    pub dim_ker_a: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactnessReport {
    pub trials: usize,
    pub tol: f64,
    pub max_composition_norm: f64,
    pub rank_a: usize,
    pub rank_b: usize,
    pub state_components: usize,
    pub failures: Vec<ExactnessFailure>,
    pub ok: bool,
}

/// For pseudorandom unit frequencies: check that the symbols compose to
/// zero within `tol` and that `rank B(xi) = dim ker A(xi)` (singular-value
/// rank with a 1e-8 relative threshold).
pub fn exactness_check(
    a_op: &HomogeneousOperator,
    b_op: &HomogeneousOperator,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Result<ExactnessReport> {
    use rand::{Rng, SeedableRng};
    if b_op.out_components != a_op.in_components {
        return Err(MzError::ComponentMismatch {
            expected: a_op.in_components,
            got: b_op.out_components,
        });
    }
    if a_op.dim() != b_op.dim() {
        return Err(MzError::GridMismatch("operator dimensions differ".into()));
    }
    let dim = a_op.dim();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut max_norm = 0.0f64;
    let mut rank_a_seen = 0usize;
    let mut rank_b_seen = 0usize;
    for _ in 0..trials {
        let mut xi: Vec<f64>;
        loop {
            xi = (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let norm: f64 = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-3 {
                for v in &mut xi {
                    *v /= norm;
                }
                break;
            }
        }
        let sa = symbol_matrix(a_op, &xi)?;
        let sb = symbol_matrix(b_op, &xi)?;
        let comp = matmul(&sa.mat, &sb.mat, sa.rows, sa.cols, sb.cols);
        let comp_norm = comp.iter().map(|v| v * v).sum::<f64>().sqrt();
        max_norm = max_norm.max(comp_norm);
        let rank_a = numerical_rank(&sa.mat, sa.rows, sa.cols, 1e-8);
        let rank_b = numerical_rank(&sb.mat, sb.rows, sb.cols, 1e-8);
        rank_a_seen = rank_a;
        rank_b_seen = rank_b;
        let dim_ker_a = a_op.in_components - rank_a;
        if comp_norm > tol || rank_b != dim_ker_a {
            failures.push(ExactnessFailure { xi, composition_norm: comp_norm, rank_b, dim_ker_a });
        }
    }
    Ok(ExactnessReport {
        trials,
        tol,
        max_composition_norm: max_norm,
        rank_a: rank_a_seen,
        rank_b: rank_b_seen,
        state_components: a_op.in_components,
        failures: failures.clone(),
        ok: failures.is_empty(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::grid::{Boundary, Grid, GridField};
    use rand::{Rng, SeedableRng};

    #[test]
    fn component_counts() {
        for d in [3usize, 4, 5] {
            assert_eq!(n_components(d), (2 + d) * (d + 1) / 2);
            let np = (d + 1) * d / 2;
            assert_eq!(potential_component_count(d), np * np);
        }
        assert_eq!(n_components(3), 10);
        assert_eq!(n_components(4), 15);
    }

    #[test]
    fn triple_coupling_determinant_and_inverse() {
        let t = TRIPLE_COUPLING;
        let det = t[0][0] * (t[1][1] * t[2][2] - t[1][2] * t[2][1])
            - t[0][1] * (t[1][0] * t[2][2] - t[1][2] * t[2][0])
            + t[0][2] * (t[1][0] * t[2][1] - t[1][1] * t[2][0]);
        assert_eq!(det, -2.0);
        for r in 0..3 {
            for c in 0..3 {
                let mut v = 0.0;
                for k in 0..3 {
                    v += t[r][k] * TRIPLE_COUPLING_INV[k][c];
                }
                let expect = if r == c { 1.0 } else { 0.0 };
                assert_eq!(v, expect, "product entry ({r},{c})");
            }
        }
    }

    #[test]
    fn state_matrix_examples() {
        // (rho=1, m=0, M=0, q=0) -> diag(0,...,0,1).
        let d = 3;
        let n = n_components(d);
        let mut z = vec![0.0; n];
        z[0] = 1.0;
        let u = state_to_matrix(&z, d).unwrap();
        for i in 0..=d {
            for j in 0..=d {
                let expect = if i == d && j == d { 1.0 } else { 0.0 };
                assert_eq!(u[i * (d + 1) + j], expect);
            }
        }
        // (0, e_1, 0, 1) -> identity upper block, e_1 border, 0 corner.
        let mut z = vec![0.0; n];
        z[1] = 1.0;
        z[n - 1] = 1.0;
        let u = state_to_matrix(&z, d).unwrap();
        for i in 0..d {
            for j in 0..d {
                assert_eq!(u[i * (d + 1) + j], if i == j { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(u[0 * (d + 1) + d], 1.0);
        assert_eq!(u[d * (d + 1) + 1], 0.0);
        assert_eq!(u[d * (d + 1) + d], 0.0);
    }

    #[test]
    fn state_matrix_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for d in [3usize, 4] {
            let n = n_components(d);
            for _ in 0..20 {
                let z: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
                let u = state_to_matrix(&z, d).unwrap();
                let back = matrix_to_state(&u, d).unwrap();
                for (a, b) in z.iter().zip(&back) {
                    assert!((a - b).abs() <= 1e-15, "round trip drift {}", (a - b).abs());
                }
            }
        }
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let d = 3;
        let mut u = vec![0.0; 16];
        u[1] = 1.0;
        assert!(matrix_to_state(&u, d).is_err());
    }

    #[test]
    fn potential_matrix_forms_are_symmetric() {
        // U_{ij} and U_{ji} collapse to the same coefficient table once the
        // mixed multi-indices are collected unordered.
        let d = 3;
        for i in 0..=d {
            for j in 0..=d {
                let a = u_entry_form(i, j, d);
                let b = u_entry_form(j, i, d);
                assert_eq!(a.len(), b.len(), "entry ({i},{j})");
                for (key, va) in &a {
                    let vb = b.get(key).copied().unwrap_or(0.0);
                    assert_eq!(*va, vb, "coefficient mismatch at {key:?} in ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn symbol_composition_vanishes_and_ranks_match() {
        // d = 3: N = 10, rank A = 4, rank B = 6 at every sampled frequency.
        let a_op = build_euler_a(3);
        let b_op = build_euler_b(3).unwrap();
        assert_eq!(b_op.in_components, potential_component_count(3));
        let report = exactness_check(&a_op, &b_op, 100, 1e-12, 7).unwrap();
        assert!(report.ok, "failures: {:?}", report.failures.first());
        assert_eq!(report.rank_a, 4);
        assert_eq!(report.rank_b, 6);
        assert_eq!(report.state_components, 10);

        let a4 = build_euler_a(4);
        let b4 = build_euler_b(4).unwrap();
        let report4 = exactness_check(&a4, &b4, 25, 1e-12, 7).unwrap();
        assert!(report4.ok);
        assert_eq!(report4.rank_a, 5);
        assert_eq!(report4.rank_b, 10);
    }

    #[test]
    fn symgrad_exactness_d2_d3() {
        for d in [2usize, 3] {
            let (e_op, annihilator) = symgrad_pair(d);
            let report = exactness_check(&annihilator, &e_op, 100, 1e-12, 11).unwrap();
            assert!(report.ok, "symgrad pair failed at d={d}: {:?}", report.failures.first());
            assert_eq!(report.rank_b, d);
        }
    }

    #[test]
    fn symbol_homogeneity_and_gradient_selector() {
        let grad = crate::field::operator::HomogeneousOperator::gradient(3);
        let s = symbol_matrix(&grad, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.mat, vec![1.0, 0.0, 0.0]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let b_op = build_euler_b(3).unwrap();
        for _ in 0..5 {
            let xi: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let xi2: Vec<f64> = xi.iter().map(|v| 2.0 * v).collect();
            let s1 = symbol_matrix(&b_op, &xi).unwrap();
            let s2 = symbol_matrix(&b_op, &xi2).unwrap();
            for (a, b) in s1.mat.iter().zip(&s2.mat) {
                assert!((4.0 * a - b).abs() <= 1e-12 * a.abs().max(1.0), "order-2 homogeneity");
            }
            let r1 = numerical_rank(&s1.mat, s1.rows, s1.cols, 1e-8);
            let r2 = numerical_rank(&s2.mat, s2.rows, s2.cols, 1e-8);
            assert_eq!(r1, r2, "rank must be scale invariant");
        }
    }

    #[test]
    fn zero_potential_gives_zero_state() {
        let grid = Grid::cube(4, 6, 1.0, Boundary::Periodic).unwrap();
        let psi = GridField::zeros(grid, potential_component_count(3));
        let state = apply_b_euler(&psi, true).unwrap();
        assert!(state.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn potential_is_linear_in_psi() {
        let grid = Grid::cube(4, 6, 1.0, Boundary::Periodic).unwrap();
        let n_psi = potential_component_count(3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut f = GridField::zeros(grid.clone(), n_psi);
            for v in &mut f.data {
                *v = rng.gen::<f64>() * 2.0 - 1.0;
            }
            f
        };
        let p1 = mk(&mut rng);
        let p2 = mk(&mut rng);
        let mut combo = p1.clone();
        for (c, (a, b)) in combo.data.iter_mut().zip(p1.data.iter().zip(&p2.data)) {
            *c = 2.0 * a - 0.5 * b;
        }
        let s1 = apply_b_euler(&p1, true).unwrap();
        let s2 = apply_b_euler(&p2, true).unwrap();
        let sc = apply_b_euler(&combo, true).unwrap();
        let scale = s1.data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..sc.data.len() {
            let lin = 2.0 * s1.data[i] - 0.5 * s2.data[i];
            assert!((sc.data[i] - lin).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn constraint_annihilates_potential_on_trig_fields() {
        // Small spectral run: |A(B psi)| below 1e-10 relative.
        let d = 3;
        let grid = Grid::cube(d + 1, 8, 1.0, Boundary::Periodic).unwrap();
        let b_op = build_euler_b(d).unwrap();
        let state = apply_operator_spectral_streaming(&b_op, &grid, |c, buf| {
            crate::harness::fill_random_trig(&grid, 99, c, 2, 2, buf);
        })
        .unwrap();
        let residual = apply_a_euler(&state, true).unwrap();
        let sup_state = state.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sup_res = residual.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(sup_state > 1e-6, "degenerate test input");
        assert!(sup_res <= 1e-10 * sup_state, "residual {sup_res} vs state {sup_state}");
    }

    #[test]
    fn quadratic_potential_gives_exactly_divergence_free_state() {
        // Quadratic psi: the order-2 potential produces a constant state,
        // so the constraint residual vanishes identically for the
        // finite-difference path (stencils are exact on quadratics).
        let d = 3;
        let grid = Grid::cube(d + 1, 6, 1.0, Boundary::Extend).unwrap();
        let n_psi = potential_component_count(d);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let coeffs: Vec<Vec<f64>> = (0..n_psi)
            .map(|_| (0..15).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let psi = GridField::from_fn(grid.clone(), n_psi, |x, out| {
            for (p, c) in out.iter_mut().zip(&coeffs) {
                let mut v = 0.0;
                let mut t = 0;
                for a in 0..4 {
                    for b in a..4 {
                        v += c[t] * x[a] * x[b];
                        t += 1;
                    }
                }
                for a in 0..4 {
                    v += c[10 + a] * x[a];
                }
                v += c[14];
                *p = v;
            }
        });
        let state = apply_b_euler(&psi, false).unwrap();
        // The state is constant up to rounding.
        let first = state.values(0).to_vec();
        let scale = first.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for n in 0..grid.node_count() {
            for c in 0..state.components {
                assert!(
                    (state.value(n, c) - first[c]).abs() <= 1e-9 * scale,
                    "state not constant at node {n}"
                );
            }
        }
        let residual = apply_a_euler(&state, false).unwrap();
        let sup_res = residual.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(sup_res <= 1e-9 * scale, "residual {sup_res}");
    }

    #[test]
    fn constraint_equals_row_divergence_of_state_matrix() {
        let d = 3;
        let grid = Grid::cube(d + 1, 8, 1.0, Boundary::Periodic).unwrap();
        let n = n_components(d);
        let z = GridField::from_fn(grid.clone(), n, |x, out| {
            for (c, v) in out.iter_mut().enumerate() {
                let phase = std::f64::consts::TAU * (x[0] + 2.0 * x[(c % d) + 1]);
                *v = (phase + c as f64).sin();
            }
        });
        let direct = apply_a_euler(&z, false).unwrap();
        let matrix = state_to_matrix_field(&z).unwrap();
        let rowdiv = apply_operator(&row_divergence_operator(d + 1), &matrix).unwrap();
        let scale = direct.data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..direct.data.len() {
            assert!(
                (direct.data[i] - rowdiv.data[i]).abs() <= 1e-12 * scale,
                "paths disagree at {i}: {} vs {}",
                direct.data[i],
                rowdiv.data[i]
            );
        }
    }

    #[test]
    fn annihilator_kills_symmetric_gradients_of_cubics() {
        // Random vector polynomial of degree 3: each finite-difference layer
        // is exact up to constants, so the composed residual vanishes.
        let d = 3;
        let (e_op, annihilator) = symgrad_pair(d);
        let grid = Grid::cube(d, 9, 1.0, Boundary::Extend).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let coeffs: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..20).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let u = GridField::from_fn(grid.clone(), d, |x, out| {
            for (comp, c) in out.iter_mut().zip(&coeffs) {
                let mut v = 0.0;
                let mut t = 0;
                for a in 0..d {
                    for b in a..d {
                        for e in b..d {
                            v += c[t] * x[a] * x[b] * x[e];
                            t += 1;
                        }
                    }
                }
                for a in 0..d {
                    v += c[10 + a] * x[a] * x[a];
                }
                *comp = v;
            }
        });
        let f = apply_operator(&e_op, &u).unwrap();
        let res = apply_operator(&annihilator, &f).unwrap();
        let scale = f.data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let sup = res.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(sup <= 1e-9 * scale, "annihilator residual {sup} (scale {scale})");
    }

    #[test]
    fn annihilator_detects_incompatible_fields() {
        // A generic symmetric field is not a symmetric gradient.
        let d = 2;
        let (_, annihilator) = symgrad_pair(d);
        let grid = Grid::cube(d, 17, 1.0, Boundary::Extend).unwrap();
        let f = GridField::from_fn(grid, 3, |x, out| {
            out[0] = (3.0 * x[1]).sin();
            out[1] = 0.0;
            out[2] = 0.0;
        });
        let res = apply_operator(&annihilator, &f).unwrap();
        let sup = res.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(sup > 1e-2, "generic field should violate compatibility, sup {sup}");
    }

    #[test]
    fn sym_index_enumeration() {
        let d = 4;
        let mut seen = vec![false; d * (d + 1) / 2];
        for i in 0..d {
            for j in i..d {
                let idx = sym_index(i, j, d);
                assert!(!seen[idx], "duplicate index for ({i},{j})");
                seen[idx] = true;
            }
        }
        assert!(seen.iter().all(|&b| b));
        assert_eq!(sym_index(0, 0, d), 0);
        assert_eq!(sym_index(d - 1, d - 1, d), d * (d + 1) / 2 - 1);
    }
}
