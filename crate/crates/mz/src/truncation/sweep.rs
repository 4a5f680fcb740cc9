//! Ball regularization and the covering sweep.

use crate::convex::ConvexBody;
use crate::error::MzError;
use crate::field::average::mollify_into;
use crate::field::grid::GridField;
use crate::field::integral::pairwise_sum;
use crate::field::operator::{
    apply_operator, dl_frobenius_at, is_interior, operator_at, operator_constant,
    sup_norm_derivative, HomogeneousOperator,
};
use crate::truncation::profile::make_profile;
use crate::truncation::select::{select_balls, SelectedBall, SelectionOutcome};
use crate::truncation::Constants;
use crate::Result;
use rayon::prelude::*;
use serde::Serialize;

/// A stage body `K_i`: a base convex body inflated by an accumulated offset.
/// Distances are `(dist(p, K) - offset)^+`, the sup norm is
/// `|K|_inf + offset`; the inflation never needs a geometric representation.
#[derive(Debug, Clone, Copy)]
pub struct TargetSet<'a> {
    pub body: &'a ConvexBody,
    pub offset: f64,
}

impl<'a> TargetSet<'a> {
    pub fn new(body: &'a ConvexBody) -> Self {
        TargetSet { body, offset: 0.0 }
    }

    pub fn inflate(&self, gamma: f64) -> TargetSet<'a> {
        TargetSet { body: self.body, offset: self.offset + gamma }
    }

    pub fn sup_norm(&self) -> Result<f64> {
        Ok(self.body.sup_norm()? + self.offset)
    }

    pub fn distance(&self, p: &[f64]) -> Result<f64> {
        self.body.inflated_distance(self.offset, p)
    }
}

/// Measured conclusions of one ball regularization.
#[derive(Debug, Clone, Serialize)]
pub struct BallCert {
    pub theta: f64,
    pub gamma: f64,
    /// Normalized mean distance over the ball before regularization.
    pub mean_before: f64,
    /// Integral of `dist(Bu, K)` over the annulus `B_r \ B_{r/2}`.
    pub l1_before_annulus: f64,
    /// Integral of `dist(Bu~, K_gamma)` over the ball.
    pub l1_after: f64,
    pub dl_before: f64,
    pub dl_after: f64,
    /// Sup of `dist(Bu~, K)` over the inner ball `B_{5r/8}`.
    pub interior_sup: f64,
}

/// Regularize `u` on the ball `B_r(a)` by variable-radius mollification.
///
/// Requires `theta < 10^{-(d+1)}` and `theta` at least the ball's normalized
/// mean distance.  Sets `eps = theta^{1/(1+d)}`,
/// `gamma = eps (1 + C1 M) |K|_inf`, builds the radius profile and applies
/// the variable mollification; the returned certificate carries the measured
/// quantities.
pub fn regularize_on_ball(
    u: &GridField,
    a: &[f64],
    r: f64,
    theta: f64,
    target: &TargetSet,
    m_bound: f64,
    op: &HomogeneousOperator,
) -> Result<(GridField, BallCert)> {
    u.validate()?;
    let d = u.grid.dim;
    let bound = 10.0f64.powi(-(d as i32 + 1));
    if !(theta > 0.0 && theta < bound) {
        return Err(MzError::ThetaTooLarge { theta, bound });
    }
    if !u.grid.contains_ball(a, r) {
        return Err(MzError::BallExitsDomain { center: a.to_vec(), radius: r });
    }
    let k_sup = target.sup_norm()?;
    if k_sup <= 0.0 {
        return Err(MzError::InvalidBody("target sup norm must be positive".into()));
    }

    // Normalized mean of dist(Bu, K) over the ball.
    let mut idx = vec![0usize; d];
    let mut bu = vec![0.0; op.out_components];
    let mut vals = Vec::new();
    let eps_slop = 1.0 + 1e-12;
    for n in 0..u.grid.node_count() {
        u.grid.fill_multi(n, &mut idx);
        let x = u.grid.coord(&idx);
        let dist2: f64 = x.iter().zip(a).map(|(xi, ai)| (xi - ai) * (xi - ai)).sum();
        if dist2 <= r * r * eps_slop {
            operator_at(op, u, &idx, &mut bu);
            vals.push(target.distance(&bu)?);
        }
    }
    let mean = pairwise_sum(&vals) / vals.len().max(1) as f64 / k_sup;
    if theta < mean {
        return Err(MzError::MeanPrecondition { theta, mean });
    }

    let eps = theta.powf(1.0 / (1.0 + d as f64));
    let c1 = operator_constant(op)?;
    let gamma = eps * (1.0 + c1 * m_bound) * k_sup;
    let profile = make_profile(eps, r)?;
    let mut out = u.clone();
    mollify_into(u, &mut out, a, r, &profile)?;

    let cert = measure_ball_cert(u, &out, op, target, a, r, theta, gamma, mean)?;
    Ok((out, cert))
}

/// Measure the certificate quantities for a regularized ball.
#[allow(clippy::too_many_arguments)]
fn measure_ball_cert(
    before: &GridField,
    after: &GridField,
    op: &HomogeneousOperator,
    target: &TargetSet,
    a: &[f64],
    r: f64,
    theta: f64,
    gamma: f64,
    mean_before: f64,
) -> Result<BallCert> {
    let g = &before.grid;
    let d = g.dim;
    let h = g.spacing;
    let mut idx = vec![0usize; d];
    let mut bu = vec![0.0; op.out_components];
    let mut annulus = Vec::new();
    let mut inflated_after = Vec::new();
    let mut interior_sup = 0.0f64;
    let mut dl_before = 0.0f64;
    let mut dl_after = 0.0f64;
    let slop = 1.0 + 1e-12;
    let r2 = r * r * slop;
    let half2 = 0.25 * r * r * slop;
    let inner2 = (5.0 * r / 8.0) * (5.0 * r / 8.0) * slop;

    let mut lo = vec![0isize; d];
    let mut hi = vec![0isize; d];
    for ax in 0..d {
        lo[ax] = (((a[ax] - r - g.origin[ax]) / h).ceil() as isize).max(0);
        hi[ax] = (((a[ax] + r - g.origin[ax]) / h).floor() as isize).min(g.shape[ax] as isize - 1);
    }
    let mut cursor = lo.clone();
    'outer: loop {
        for ax in 0..d {
            idx[ax] = cursor[ax] as usize;
        }
        let x = g.coord(&idx);
        let dist2: f64 = x.iter().zip(a).map(|(xi, ai)| (xi - ai) * (xi - ai)).sum();
        if dist2 <= r2 {
            operator_at(op, before, &idx, &mut bu);
            let e_before = target.distance(&bu)?;
            if dist2 > half2 / slop {
                annulus.push(e_before);
            }
            operator_at(op, after, &idx, &mut bu);
            let e_after = target.distance(&bu)?;
            inflated_after.push((e_after - gamma).max(0.0));
            if dist2 <= inner2 {
                interior_sup = interior_sup.max(e_after);
            }
            if is_interior(g, &idx) {
                dl_before = dl_before.max(dl_frobenius_at(before, op.order, &idx));
                dl_after = dl_after.max(dl_frobenius_at(after, op.order, &idx));
            }
        }
        let mut ax = d;
        loop {
            if ax == 0 {
                break 'outer;
            }
            ax -= 1;
            cursor[ax] += 1;
            if cursor[ax] <= hi[ax] {
                break;
            }
            cursor[ax] = lo[ax];
        }
    }
    let hd = g.cell_measure();
    Ok(BallCert {
        theta,
        gamma,
        mean_before,
        l1_before_annulus: pairwise_sum(&annulus) * hd,
        l1_after: pairwise_sum(&inflated_after) * hd,
        dl_before,
        dl_after,
        interior_sup,
    })
}

/// Recorded inequality checks of one sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepChecks {
    pub lambda_before: f64,
    /// Empirical contraction `lambda_new / lambda_before` (NaN when the
    /// sweep started from zero mass).
    pub alpha_empirical: f64,
    pub mu_bound: f64,
    pub mu_ok: bool,
    pub deriv_bound: f64,
    pub deriv_measured: f64,
    pub deriv_ok: bool,
}

/// Result of one covering sweep.
#[derive(Debug)]
pub struct SweepOutcome {
    pub field: GridField,
    /// `(1/|K|_inf) \int dist(Bu~, K_gamma)`.
    pub lambda_new: f64,
    /// Measure of the modified set `{u != u~}`.
    pub mu: f64,
    pub modified_nodes: usize,
    pub theta: f64,
    pub selection: SelectionOutcome,
    pub ball_certs: Vec<BallCert>,
    pub checks: SweepChecks,
}

/// One pass: select balls by the stopping time, regularize each selected
/// ball, measure the contraction, the modified-set measure and the
/// derivative bound.
pub fn sweep(
    u: &GridField,
    target: &TargetSet,
    gamma: f64,
    m_bound: f64,
    op: &HomogeneousOperator,
    constants: &Constants,
) -> Result<SweepOutcome> {
    u.validate()?;
    let d = u.grid.dim;
    let k_sup = target.sup_norm()?;
    let c1 = operator_constant(op)?;
    let upper = constants.c2 * (1.0 + c1 * m_bound) * k_sup;
    if !(gamma > 0.0 && gamma < upper) {
        return Err(MzError::GammaOutOfRange { gamma, upper });
    }
    let theta = (gamma / ((1.0 + c1 * m_bound) * k_sup)).powi(d as i32 + 1);

    // Pointwise distance field and its normalized integral.
    let bu = apply_operator(op, u)?;
    let mut e = GridField::zeros(u.grid.clone(), 1);
    for n in 0..u.grid.node_count() {
        e.data[n] = target.distance(bu.values(n))?;
    }
    let lambda_before = pairwise_sum(&e.data) * u.grid.cell_measure() / k_sup;

    let selection = select_balls(&e, theta, k_sup, constants.radius_cap_frac)?;

    // Regularize every accepted ball.  Balls are pairwise disjoint, so each
    // patch reads only original values and the writes are disjoint; patches
    // are computed in parallel and applied in selection order.
    let eps = theta.powf(1.0 / (1.0 + d as f64));
    let mut out = u.clone();
    let patches: Vec<Result<(Vec<usize>, Vec<f64>)>> = selection
        .balls
        .par_iter()
        .map(|ball| compute_patch(u, ball, eps))
        .collect();
    let m = u.components;
    for patch in patches {
        let (nodes, values) = patch?;
        for (slot, &n) in nodes.iter().enumerate() {
            out.data[n * m..(n + 1) * m].copy_from_slice(&values[slot * m..(slot + 1) * m]);
        }
    }

    // Certificates, measured sequentially in ball order on the final field.
    let ball_gamma = eps * (1.0 + c1 * m_bound) * k_sup;
    let mut ball_certs = Vec::with_capacity(selection.balls.len());
    for ball in &selection.balls {
        let mean = ball_mean(&e, ball) / k_sup;
        ball_certs.push(measure_ball_cert(
            u, &out, op, target, &ball.center, ball.radius, theta, ball_gamma, mean,
        )?);
    }

    let target_inflated = target.inflate(gamma);
    let bu_after = apply_operator(op, &out)?;
    let mut after_vals = vec![0.0; u.grid.node_count()];
    for n in 0..u.grid.node_count() {
        after_vals[n] = target_inflated.distance(bu_after.values(n))?;
    }
    let lambda_new = pairwise_sum(&after_vals) * u.grid.cell_measure() / k_sup;
    let (mu, modified_nodes) = out.differing_measure(u)?;

    let mu_bound = (1 << d) as f64
        * lambda_before
        * ((1.0 + c1 * m_bound) * k_sup / gamma).powi(d as i32 + 1);
    let deriv_measured = sup_norm_derivative(&out, op.order)?;
    let deriv_bound = k_sup * m_bound + gamma;
    let slack = constants.slack_coeff * u.grid.spacing * deriv_measured;
    let checks = SweepChecks {
        lambda_before,
        alpha_empirical: if lambda_before > 0.0 { lambda_new / lambda_before } else { f64::NAN },
        mu_bound,
        mu_ok: mu <= mu_bound,
        deriv_bound,
        deriv_measured,
        deriv_ok: deriv_measured <= deriv_bound + slack,
    };
    Ok(SweepOutcome {
        field: out,
        lambda_new,
        mu,
        modified_nodes,
        theta,
        selection,
        ball_certs,
        checks,
    })
}

fn compute_patch(u: &GridField, ball: &SelectedBall, eps: f64) -> Result<(Vec<usize>, Vec<f64>)> {
    let profile = make_profile(eps, ball.radius)?;
    let mut scratch = u.clone();
    let nodes = mollify_into(u, &mut scratch, &ball.center, ball.radius, &profile)?;
    let m = u.components;
    let mut values = Vec::with_capacity(nodes.len() * m);
    for &n in &nodes {
        values.extend_from_slice(scratch.values(n));
    }
    Ok((nodes, values))
}

/// Mean of a scalar field over an integer-radius ball (exact node set).
fn ball_mean(e: &GridField, ball: &SelectedBall) -> f64 {
    let g = &e.grid;
    let d = g.dim;
    let r = ball.radius_nodes;
    let mut vals = Vec::new();
    let mut off = vec![-r; d];
    let mut idx = vec![0isize; d];
    'outer: loop {
        let mut norm2 = 0i64;
        let mut inside = true;
        for a in 0..d {
            let i = ball.center_idx[a] as i64 + off[a];
            if i < 0 || i >= g.shape[a] as i64 {
                inside = false;
                break;
            }
            norm2 += off[a] * off[a];
            idx[a] = i as isize;
        }
        if inside && norm2 <= r * r {
            let uidx: Vec<usize> = idx.iter().map(|&i| i as usize).collect();
            vals.push(e.data[g.lin(&uidx)]);
        }
        let mut a = d;
        loop {
            if a == 0 {
                break 'outer;
            }
            a -= 1;
            off[a] += 1;
            if off[a] <= r {
                break;
            }
            off[a] = -r;
        }
    }
    if vals.is_empty() {
        0.0
    } else {
        pairwise_sum(&vals) / vals.len() as f64
    }
}
