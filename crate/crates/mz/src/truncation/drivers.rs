//! End-to-end truncation drivers: whole space, bounded domain (cutoff
//! blend), and position-dependent constraint families (dyadic cube
//! segmentation).

use crate::convex::ConvexBody;
use crate::error::MzError;
use crate::field::grid::GridField;
use crate::field::integral::pairwise_sum;
use crate::field::operator::{
    apply_operator, operator_constant, sup_norm_derivative, HomogeneousOperator,
};
use crate::truncation::report::{
    DomainReport, ScheduleSummary, StageRecord, StopReason, SupportTracking, TruncationReport,
    VaryingKReport,
};
use crate::truncation::schedule::build_schedule;
use crate::truncation::sweep::{sweep, TargetSet};
use crate::truncation::Constants;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// A closed axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(MzError::Argument("box corner dimensions mismatch".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(MzError::Argument("box must have positive extent".into()));
        }
        Ok(AxisBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(xi, (lo, hi))| *xi >= *lo && *xi <= *hi)
    }

    pub fn dilate(&self, rho: f64) -> AxisBox {
        AxisBox {
            lo: self.lo.iter().map(|v| v - rho).collect(),
            hi: self.hi.iter().map(|v| v + rho).collect(),
        }
    }

    /// `inner` sits inside `self` with at least `margin` on every side
    /// (up to rounding of the box arithmetic).
    pub fn nests(&self, inner: &AxisBox, margin: f64) -> bool {
        let slop = 1e-12 * margin.abs().max(1.0);
        self.dim() == inner.dim()
            && (0..self.dim()).all(|a| {
                inner.lo[a] - self.lo[a] >= margin - slop && self.hi[a] - inner.hi[a] >= margin - slop
            })
    }
}

fn grid_box(grid: &crate::field::grid::Grid) -> AxisBox {
    AxisBox { lo: grid.origin.clone(), hi: grid.upper() }
}

/// Quintic smoothstep: C^2, 0 -> 1 over [0, 1].
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

/// Scalar cutoff field: exactly 1 on `v`, exactly 0 outside `v.dilate(width)`,
/// a product of per-axis quintic ramps in between.
pub fn build_cutoff(grid: &crate::field::grid::Grid, v: &AxisBox, width: f64) -> Result<GridField> {
    if v.dim() != grid.dim {
        return Err(MzError::Argument("cutoff box dimension mismatch".into()));
    }
    if width < 10.0 * grid.spacing {
        return Err(MzError::Argument(format!(
            "cutoff width {width} below the 10h floor {}",
            10.0 * grid.spacing
        )));
    }
    let v = v.clone();
    Ok(GridField::from_fn(grid.clone(), 1, move |x, out| {
        let mut phi = 1.0f64;
        for a in 0..x.len() {
            let s = if x[a] < v.lo[a] {
                smoothstep((x[a] - (v.lo[a] - width)) / width)
            } else if x[a] > v.hi[a] {
                smoothstep(((v.hi[a] + width) - x[a]) / width)
            } else {
                1.0
            };
            phi *= s;
        }
        out[0] = phi;
    }))
}

/// `w = u0 + phi (u - u0)`: equals `u0` bit-exactly wherever `phi = 0` and
/// `u` wherever `phi = 1`.
pub fn blend_fields(u: &GridField, u0: &GridField, phi: &GridField) -> Result<GridField> {
    if u.grid != u0.grid || u.components != u0.components || phi.grid != u.grid {
        return Err(MzError::GridMismatch("blend inputs live on different grids".into()));
    }
    let m = u.components;
    let mut out = u0.clone();
    for n in 0..u.grid.node_count() {
        let p = phi.data[n];
        if p != 0.0 {
            for c in 0..m {
                out.data[n * m + c] = u0.data[n * m + c] + p * (u.data[n * m + c] - u0.data[n * m + c]);
            }
        }
    }
    Ok(out)
}

/// Parameters of a whole-space truncation run.
#[derive(Debug, Clone)]
pub struct WholeSpaceParams {
    /// Total inflation budget (absolute units; the run's exit bound is
    /// measured against `K` inflated by this amount).
    pub gamma: f64,
    /// Derivative bound: `|D^l u| <= m_bound * |K|_inf`.
    pub m_bound: f64,
    /// Schedule decay parameter in (0, 1).
    pub alpha: f64,
    pub constants: Constants,
    /// Declared support of `{dist(Bu, K) > 0}` for dilate tracking.
    pub support: Option<AxisBox>,
    /// Hard cap on the number of sweeps actually run.
    pub max_stages: usize,
}

impl WholeSpaceParams {
    pub fn new(gamma: f64, m_bound: f64, d: usize) -> Self {
        WholeSpaceParams {
            gamma,
            m_bound,
            alpha: 0.01,
            constants: Constants::defaults(d),
            support: None,
            max_stages: 1000,
        }
    }
}

/// Iterate sweeps under the schedule until the distance mass falls below
/// `lambda_stop`, the schedule floor or resolution floor is reached, or the
/// sweep stops contracting (a divergence error after 3 non-decreasing
/// sweeps).
pub fn truncate_whole_space(
    u: &GridField,
    body: &ConvexBody,
    op: &HomogeneousOperator,
    params: &WholeSpaceParams,
) -> Result<(GridField, TruncationReport)> {
    truncate_whole_space_offset(u, body, 0.0, op, params)
}

/// Same as [`truncate_whole_space`] but measured against the inflated body
/// `K + base_offset` (used by the domain and varying-set drivers).
pub fn truncate_whole_space_offset(
    u: &GridField,
    body: &ConvexBody,
    base_offset: f64,
    op: &HomogeneousOperator,
    params: &WholeSpaceParams,
) -> Result<(GridField, TruncationReport)> {
    let start = Instant::now();
    u.validate()?;
    op.validate()?;
    let d = u.grid.dim;
    let h = u.grid.spacing;
    let base = TargetSet { body, offset: base_offset };
    let k0 = base.sup_norm()?;
    if k0 <= 0.0 {
        return Err(MzError::InvalidBody("base body sup norm must be positive".into()));
    }
    let c1 = operator_constant(op)?;
    let m = params.m_bound;

    let measured_dl = sup_norm_derivative(u, op.order)?;
    if measured_dl > m * k0 * (1.0 + 1e-9) {
        return Err(MzError::Argument(format!(
            "derivative precondition violated: |D^l u| = {measured_dl:.6e} > M |K|_inf = {:.6e}",
            m * k0
        )));
    }

    let schedule = build_schedule(
        params.gamma,
        d,
        m,
        params.alpha,
        k0,
        c1,
        params.constants.c2,
        params.constants.stage_floor_frac,
    )?;
    schedule.verify_identities().map_err(|e| {
        MzError::ScheduleInfeasible(format!("emitted schedule failed self-check: {e}"))
    })?;

    let lambda_stop = params.constants.lambda_stop_coeff * k0 * u.grid.domain_measure();
    let cap_nodes = (((u.grid.shape.iter().min().unwrap() - 1) as f64)
        * params.constants.radius_cap_frac)
        .floor()
        .max(1.0);
    let r_cap = cap_nodes * h;

    let bu0 = apply_operator(op, u)?;
    let mut initial_vals = vec![0.0; u.grid.node_count()];
    for n in 0..u.grid.node_count() {
        initial_vals[n] = base.distance(bu0.values(n))?;
    }
    let lambda_initial = pairwise_sum(&initial_vals) * u.grid.cell_measure() / k0;

    let mut current = u.clone();
    let mut stages: Vec<StageRecord> = Vec::new();
    let mut lambdas_for_rho = Vec::new();
    let mut non_decreasing = 0usize;
    let mut stop_reason = StopReason::StageFloor;

    let record_stage = |si: usize, escalated: bool, gamma_abs: f64, offset_abs: f64, outcome: &crate::truncation::sweep::SweepOutcome| {
        StageRecord {
            stage: si,
            escalated,
            gamma_abs,
            offset_abs,
            theta: outcome.theta,
            lambda_before: outcome.checks.lambda_before,
            lambda_after: outcome.lambda_new,
            alpha_empirical: outcome.checks.alpha_empirical,
            mu: outcome.mu,
            modified_nodes: outcome.modified_nodes,
            balls: outcome.selection.balls.len(),
            candidates: outcome.selection.candidates.len(),
            uncovered: outcome.selection.uncovered,
            mu_bound: outcome.checks.mu_bound,
            mu_ok: outcome.checks.mu_ok,
            deriv_measured: outcome.checks.deriv_measured,
            deriv_bound: outcome.checks.deriv_bound,
            deriv_ok: outcome.checks.deriv_ok,
        }
    };

    for (si, stage) in schedule.stages.iter().enumerate() {
        if si >= params.max_stages {
            stop_reason = StopReason::StageCap;
            break;
        }
        let offset_abs = base_offset + stage.offset * k0;
        let gamma_abs = stage.gamma_i * k0;
        let target = TargetSet { body, offset: offset_abs };
        let m_stage = (m + stage.offset) / stage.m_i;

        // Budget left relative to this run's total; spent in one sweep when
        // the scheduled stage cannot act at grid resolution.
        let gamma_rest = params.gamma - stage.offset * k0;

        // Resolution floor: the largest possible mollification radius of
        // this stage over any admissible ball.
        let eps_stage = stage.gamma_i / ((1.0 + c1 * m_stage) * stage.m_i);
        let below_resolution = eps_stage * r_cap < h;

        let mut escalate = below_resolution && gamma_rest > gamma_abs;
        if !escalate {
            let outcome = sweep(&current, &target, gamma_abs, m_stage, op, &params.constants)?;
            let stalled = outcome.selection.balls.is_empty()
                && outcome.selection.uncovered > 0
                && outcome.lambda_new > lambda_stop;
            if stalled && gamma_rest > gamma_abs {
                escalate = true;
            } else {
                stages.push(record_stage(si, false, gamma_abs, offset_abs, &outcome));
                lambdas_for_rho.push((outcome.checks.lambda_before, stage.gamma_i));
                if outcome.lambda_new >= outcome.checks.lambda_before
                    && outcome.checks.lambda_before > 0.0
                {
                    non_decreasing += 1;
                } else {
                    non_decreasing = 0;
                }
                current = outcome.field;
                if outcome.lambda_new <= lambda_stop {
                    stop_reason = StopReason::LambdaStop;
                    break;
                }
                if below_resolution {
                    stop_reason = StopReason::ResolutionFloor;
                    break;
                }
                if non_decreasing >= 3 {
                    let tail: Vec<String> = stages
                        .iter()
                        .rev()
                        .take(3)
                        .map(|s| {
                            format!(
                                "stage {}: lambda {} -> {}",
                                s.stage, s.lambda_before, s.lambda_after
                            )
                        })
                        .collect();
                    return Err(MzError::Divergence(format!(
                        "lambda failed to decrease across 3 consecutive sweeps: {}",
                        tail.join("; ")
                    )));
                }
                continue;
            }
        }
        if escalate {
            let outcome = sweep(&current, &target, gamma_rest, m_stage, op, &params.constants)?;
            stages.push(record_stage(si, true, gamma_rest, offset_abs, &outcome));
            lambdas_for_rho.push((outcome.checks.lambda_before, gamma_rest / k0));
            current = outcome.field;
            stop_reason = if outcome.lambda_new <= lambda_stop {
                StopReason::LambdaStop
            } else {
                StopReason::Escalated
            };
            break;
        }
    }

    // Final measurements against the fully inflated body.
    let gamma_total = params.gamma;
    let bg = apply_operator(op, &current)?;
    let mut final_vals = vec![0.0; u.grid.node_count()];
    let mut sup_final = 0.0f64;
    let mut sup_base = 0.0f64;
    for n in 0..u.grid.node_count() {
        let dist_base = base.distance(bg.values(n))?;
        sup_base = sup_base.max(dist_base);
        let v = (dist_base - gamma_total).max(0.0);
        final_vals[n] = v;
        sup_final = sup_final.max(v);
    }
    let lambda_final = pairwise_sum(&final_vals) * u.grid.cell_measure() / k0;

    let (modified_measure, _) = current.differing_measure(u)?;
    let mu_total: f64 = stages.iter().map(|s| s.mu).sum();

    let support = match &params.support {
        None => None,
        Some(v_box) => {
            let cs = &params.constants;
            let inv_d = 1.0 / d as f64;
            let rho_total = cs.c5
                * ((1.0 + c1 * m) * k0 / gamma_total).powf(inv_d + 1.0)
                * (2.0 * (inv_d + 1.0) * cs.c2 * (1.0 + c1 * m)).exp()
                * lambda_initial.powf(inv_d);
            let rho_stages: Vec<f64> = lambdas_for_rho
                .iter()
                .map(|(lam, g_unit)| {
                    cs.c3
                        * ((1.0 + c1 * m) * schedule.m_bar).powf(inv_d + 1.0)
                        * lam.powf(inv_d)
                        / g_unit.powf(inv_d + 1.0)
                })
                .collect();
            let dilated = v_box.dilate(rho_total);
            let mut violations = 0usize;
            let mut idx = vec![0usize; d];
            let mcomp = u.components;
            for n in 0..u.grid.node_count() {
                if current.data[n * mcomp..(n + 1) * mcomp] != u.data[n * mcomp..(n + 1) * mcomp] {
                    u.grid.fill_multi(n, &mut idx);
                    let x = u.grid.coord(&idx);
                    if !dilated.contains(&x) {
                        violations += 1;
                    }
                }
            }
            Some(SupportTracking { rho_total, rho_stages, contained: violations == 0, violations })
        }
    };

    let report = TruncationReport {
        d,
        k_sup: k0,
        gamma_bar_abs: gamma_total,
        m_input: m,
        c1,
        lambda_initial,
        lambda_stop,
        stages,
        stop_reason,
        mu_total,
        modified_measure,
        sup_dist_final: sup_final,
        sup_dist_base: sup_base,
        lambda_final,
        support,
        schedule: ScheduleSummary {
            delta: schedule.delta,
            alpha_bar: schedule.alpha_bar,
            m_bar: schedule.m_bar,
            gamma_bar_unit: schedule.gamma_bar,
            residual: schedule.residual,
            stages_emitted: schedule.stages.len(),
        },
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((current, report))
}

/// Configuration of a bounded-domain run: the limit field `u_0`, the nested
/// boxes `V` (cutoff plateau) and `U` (modification region), the ramp width,
/// and the whole-space parameters for the core iteration.
#[derive(Debug, Clone)]
pub struct DomainTruncationConfig {
    pub u0: GridField,
    pub v: AxisBox,
    pub u_box: AxisBox,
    pub cutoff_width: f64,
    /// Tolerance for the check `dist(B u_0, K) = 0` on the domain.
    pub u0_tol: f64,
    /// Extra inflation of the target body (used by the varying-set driver).
    pub k_offset: f64,
    pub whole: WholeSpaceParams,
}

/// Bounded-domain truncation: blend `u_j` with `u_0` through the cutoff,
/// truncate on the whole grid with the blend support declared, and copy
/// `u_0` outside `U`.
pub fn truncate_domain(
    u_j: &GridField,
    config: &DomainTruncationConfig,
    body: &ConvexBody,
    op: &HomogeneousOperator,
) -> Result<(GridField, DomainReport)> {
    u_j.validate()?;
    config.u0.validate()?;
    if u_j.grid != config.u0.grid || u_j.components != config.u0.components {
        return Err(MzError::GridMismatch("u_j and u_0 live on different grids".into()));
    }
    let grid = &u_j.grid;
    let h = grid.spacing;
    let omega = grid_box(grid);
    let support_box = config.v.dilate(config.cutoff_width);
    if !config.u_box.nests(&config.v, config.cutoff_width) {
        return Err(MzError::NestingViolated(format!(
            "V + width must nest inside U (V={:?}, U={:?}, width={})",
            config.v, config.u_box, config.cutoff_width
        )));
    }
    if !omega.nests(&config.u_box, h) {
        return Err(MzError::NestingViolated("U must be compactly contained in the grid box".into()));
    }

    // B u_0 must already sit in the target set.
    let target = TargetSet { body, offset: config.k_offset };
    let bu0 = apply_operator(op, &config.u0)?;
    let mut u0_violation = 0.0f64;
    for n in 0..grid.node_count() {
        u0_violation = u0_violation.max(target.distance(bu0.values(n))?);
    }
    if u0_violation > config.u0_tol {
        return Err(MzError::Argument(format!(
            "B u_0 leaves the target set by {u0_violation:.3e} (tolerance {:.3e})",
            config.u0_tol
        )));
    }

    let phi = build_cutoff(grid, &config.v, config.cutoff_width)?;
    let blend = blend_fields(u_j, &config.u0, &phi)?;

    // The blend may carry a slightly larger derivative than u_j; widen the
    // declared bound to the measured value when necessary.
    let k0 = target.sup_norm()?;
    let measured = sup_norm_derivative(&blend, op.order)?;
    let mut whole = config.whole.clone();
    whole.m_bound = whole.m_bound.max(measured * (1.0 + 1e-9) / k0);
    whole.support = Some(support_box);

    let (truncated, inner) = truncate_whole_space_offset(&blend, body, config.k_offset, op, &whole)?;

    // Exact copy of u_0 outside U.
    let mut out = truncated;
    let m = out.components;
    let mut mask_copy_changed = 0usize;
    let mut idx = vec![0usize; grid.dim];
    let mut inside_u_modified = 0usize;
    for n in 0..grid.node_count() {
        grid.fill_multi(n, &mut idx);
        let x = grid.coord(&idx);
        if !config.u_box.contains(&x) {
            if out.values(n) != config.u0.values(n) {
                mask_copy_changed += 1;
                for c in 0..m {
                    out.data[n * m + c] = config.u0.data[n * m + c];
                }
            }
        } else if out.values(n) != u_j.values(n) {
            inside_u_modified += 1;
        }
    }

    let report = DomainReport {
        inner,
        modified_measure_inside_u: inside_u_modified as f64 * grid.cell_measure(),
        mask_copy_changed,
        u0_violation,
    };
    Ok((out, report))
}

/// A position-dependent family of constraint bodies.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KMap {
    Constant { body: ConvexBody },
    /// Balls with an affinely varying radius `r(x) = base_radius + slope . x`.
    BallAffineRadius { center: Vec<f64>, base_radius: f64, slope: Vec<f64> },
}

impl KMap {
    pub fn body_at(&self, x: &[f64]) -> ConvexBody {
        match self {
            KMap::Constant { body } => body.clone(),
            KMap::BallAffineRadius { center, base_radius, slope } => {
                let r = base_radius + slope.iter().zip(x).map(|(s, xi)| s * xi).sum::<f64>();
                ConvexBody::ball(center.clone(), r.max(0.0))
            }
        }
    }
}

/// Configuration of one varying-constraint level.
#[derive(Debug, Clone)]
pub struct VaryingKConfig {
    pub k_map: KMap,
    /// Uniform lower bound on `|K_x|_inf`.
    pub eta: f64,
    /// Uniform-continuity modulus: rows `(eps, delta)` with
    /// `d_H(K_x, K_y) <= eps` whenever `|x - y| <= delta`.
    pub modulus: Vec<(f64, f64)>,
    /// The level index `i >= 1`; the level bound is `(2 + |Omega|)/i`.
    pub level: usize,
    pub u0: GridField,
    /// Absolute derivative bound `|D^l u_j| <= m_abs`.
    pub m_abs: f64,
    pub cutoff_width: f64,
    pub u0_tol: f64,
    pub whole: WholeSpaceParams,
}

/// Segment the domain into dyadic cubes fine enough for the level's
/// Hausdorff tolerance, truncate per cube against the inflated center body,
/// and stitch (cube outputs agree with `u_0` near shared boundaries by
/// construction).
pub fn truncate_varying_k(
    u_j: &GridField,
    config: &VaryingKConfig,
    op: &HomogeneousOperator,
) -> Result<(GridField, VaryingKReport)> {
    let start = Instant::now();
    u_j.validate()?;
    let grid = &u_j.grid;
    let d = grid.dim;
    let h = grid.spacing;
    let i = config.level.max(1);
    let omega_measure = grid.domain_measure();

    // Check the eta floor at every node.
    let mut idx = vec![0usize; d];
    for n in 0..grid.node_count() {
        grid.fill_multi(n, &mut idx);
        let x = grid.coord(&idx);
        let sup = config.k_map.body_at(&x).sup_norm()?;
        if sup < config.eta {
            return Err(MzError::EtaViolated(format!(
                "|K_x|_inf = {sup:.6e} < eta = {:.6e} at x = {x:?}",
                config.eta
            )));
        }
    }

    // Pick the dyadic depth from the modulus table.
    let eps_needed = 1.0 / i as f64;
    let delta = config
        .modulus
        .iter()
        .filter(|(eps, _)| *eps <= eps_needed)
        .map(|(_, delta)| *delta)
        .fold(f64::NAN, f64::max);
    if !delta.is_finite() || delta <= 0.0 {
        return Err(MzError::ModulusInsufficient(format!(
            "no modulus row with eps <= 1/{i}"
        )));
    }
    let sqrt_d = (d as f64).sqrt();
    let mut n_dyadic = 0u32;
    while sqrt_d * 2f64.powi(-(n_dyadic as i32)) > delta {
        n_dyadic += 1;
        if n_dyadic > 40 {
            return Err(MzError::ModulusInsufficient("dyadic depth exceeded 40".into()));
        }
    }
    let side = 2f64.powi(-(n_dyadic as i32));

    // Cube index ranges along each axis (node ranges, shared boundary nodes).
    let extent: Vec<f64> = (0..d).map(|a| (grid.shape[a] - 1) as f64 * h).collect();
    let cubes_per_axis: Vec<usize> = extent.iter().map(|e| (e / side).ceil().max(1.0) as usize).collect();

    let mut out = u_j.clone();
    let mut per_cube_modified = Vec::new();
    let mut cube_counter = 0usize;
    let mut cube_idx = vec![0usize; d];
    'cube: loop {
        // Node range of this cube.
        let mut lo_node = vec![0usize; d];
        let mut hi_node = vec![0usize; d];
        let mut degenerate = false;
        for a in 0..d {
            let lo = (cube_idx[a] as f64 * side / h).round() as usize;
            let hi = (((cube_idx[a] + 1) as f64 * side / h).round() as usize).min(grid.shape[a] - 1);
            lo_node[a] = lo;
            hi_node[a] = hi;
            if hi <= lo + 4 {
                degenerate = true;
            }
        }
        if degenerate {
            return Err(MzError::ModulusInsufficient(format!(
                "cube side {side} too small for the grid spacing {h}"
            )));
        }

        // Extract the subgrid fields.
        let sub_shape: Vec<usize> = (0..d).map(|a| hi_node[a] - lo_node[a] + 1).collect();
        let sub_origin: Vec<f64> = (0..d).map(|a| grid.origin[a] + lo_node[a] as f64 * h).collect();
        let sub_grid = crate::field::grid::Grid::new(sub_shape.clone(), h, sub_origin.clone(), grid.boundary)?;
        let mut sub_u = GridField::zeros(sub_grid.clone(), u_j.components);
        let mut sub_u0 = GridField::zeros(sub_grid.clone(), u_j.components);
        copy_box(u_j, &mut sub_u, &lo_node);
        copy_box(&config.u0, &mut sub_u0, &lo_node);

        // Center point, moved inside the cube when the geometric center
        // leaves the domain (clipped cubes keep their node-box center).
        let center: Vec<f64> = (0..d)
            .map(|a| sub_origin[a] + 0.5 * (sub_shape[a] - 1) as f64 * h)
            .collect();
        let body = config.k_map.body_at(&center);
        let k_offset = omega_measure / i as f64;

        // Nested boxes inside the cube.
        let (v_box, u_box) = nested_boxes_for_cube(&sub_grid, config.cutoff_width)?;

        let mut whole = config.whole.clone();
        whole.m_bound = config.m_abs / config.eta;
        let sub_config = DomainTruncationConfig {
            u0: sub_u0,
            v: v_box,
            u_box,
            cutoff_width: config.cutoff_width,
            u0_tol: config.u0_tol,
            k_offset,
            whole,
        };
        let (sub_out, sub_report) = truncate_domain(&sub_u, &sub_config, &body, op)?;
        per_cube_modified.push(sub_report.inner.modified_measure);
        write_box(&sub_out, &mut out, &lo_node);
        cube_counter += 1;

        // Advance the cube multi-index.
        let mut a = d;
        loop {
            if a == 0 {
                break 'cube;
            }
            a -= 1;
            cube_idx[a] += 1;
            if cube_idx[a] < cubes_per_axis[a] {
                break;
            }
            cube_idx[a] = 0;
        }
    }

    // Pointwise bound against the varying family.
    let bw = apply_operator(op, &out)?;
    let mut sup_pointwise = 0.0f64;
    for n in 0..grid.node_count() {
        grid.fill_multi(n, &mut idx);
        let x = grid.coord(&idx);
        let body = config.k_map.body_at(&x);
        sup_pointwise = sup_pointwise.max(body.distance(bw.values(n))?);
    }
    let bound = (2.0 + omega_measure) / i as f64;
    let slack = config.whole.constants.slack_coeff * h * sup_pointwise;
    let (mu_total, _) = out.differing_measure(u_j)?;

    let report = VaryingKReport {
        level: i,
        n_dyadic,
        cube_side: side,
        cubes: cube_counter,
        per_cube_modified,
        mu_total,
        sup_dist_pointwise: sup_pointwise,
        bound,
        bound_ok: sup_pointwise <= bound + slack,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((out, report))
}

/// The nested boxes `V` (cutoff plateau) and `U` (modification region) a
/// varying-constraint cube uses for its per-cube domain run: `U` sits one
/// small margin inside the cube, `V` one cutoff width inside `U`.
pub fn nested_boxes_for_cube(
    sub_grid: &crate::field::grid::Grid,
    cutoff_width: f64,
) -> Result<(AxisBox, AxisBox)> {
    let h = sub_grid.spacing;
    let sub_box = grid_box(sub_grid);
    let side = (0..sub_grid.dim)
        .map(|a| sub_box.hi[a] - sub_box.lo[a])
        .fold(f64::INFINITY, f64::min);
    let u_margin = (2.0 * h).max(0.02 * side);
    let u_box = AxisBox {
        lo: sub_box.lo.iter().map(|v| v + u_margin).collect(),
        hi: sub_box.hi.iter().map(|v| v - u_margin).collect(),
    };
    let v_box = AxisBox {
        lo: u_box.lo.iter().map(|v| v + cutoff_width).collect(),
        hi: u_box.hi.iter().map(|v| v - cutoff_width).collect(),
    };
    if v_box.lo.iter().zip(&v_box.hi).any(|(a, b)| a >= b) {
        return Err(MzError::ModulusInsufficient(format!(
            "cube of side {side} leaves no room for the cutoff width {cutoff_width}"
        )));
    }
    Ok((v_box, u_box))
}

fn copy_box(src: &GridField, dst: &mut GridField, lo: &[usize]) {
    let d = src.grid.dim;
    let m = src.components;
    let mut idx = vec![0usize; d];
    let mut src_idx = vec![0usize; d];
    for n in 0..dst.grid.node_count() {
        dst.grid.fill_multi(n, &mut idx);
        for a in 0..d {
            src_idx[a] = idx[a] + lo[a];
        }
        let s = src.grid.lin(&src_idx);
        dst.data[n * m..(n + 1) * m].copy_from_slice(&src.data[s * m..(s + 1) * m]);
    }
}

fn write_box(src: &GridField, dst: &mut GridField, lo: &[usize]) {
    let d = src.grid.dim;
    let m = src.components;
    let mut idx = vec![0usize; d];
    let mut dst_idx = vec![0usize; d];
    for n in 0..src.grid.node_count() {
        src.grid.fill_multi(n, &mut idx);
        for a in 0..d {
            dst_idx[a] = idx[a] + lo[a];
        }
        let t = dst.grid.lin(&dst_idx);
        dst.data[t * m..(t + 1) * m].copy_from_slice(&src.data[n * m..(n + 1) * m]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::grid::{Boundary, Grid, GridField};

    fn bump_into(u: &mut GridField, center: [f64; 2], radius: f64, amp: f64) {
        let mut idx = [0usize; 2];
        for n in 0..u.grid.node_count() {
            u.grid.fill_multi(n, &mut idx);
            let x = u.grid.coord(&idx);
            let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
            let r2 = radius * radius;
            if d2 < r2 {
                let q = 1.0 - d2 / r2;
                u.data[n] += amp * q * q * q;
            }
        }
    }

    fn setup(n: usize) -> (Grid, ConvexBody, HomogeneousOperator) {
        let grid = Grid::cube(2, n, 8.0, Boundary::Extend).unwrap();
        let k = ConvexBody::ball(vec![0.0, 0.0], 1.0);
        let op = HomogeneousOperator::gradient(2);
        (grid, k, op)
    }

    fn spike_params(u: &GridField, op: &HomogeneousOperator, k: &ConvexBody) -> WholeSpaceParams {
        let m = 1.05 * sup_norm_derivative(u, op.order).unwrap() / k.sup_norm().unwrap();
        let m = m.max(1.0);
        let c1 = operator_constant(op).unwrap();
        let constants = Constants::defaults(u.grid.dim);
        let gamma = 0.9 * constants.c2 * (1.0 + c1 * m) * k.sup_norm().unwrap();
        let mut p = WholeSpaceParams::new(gamma, m, u.grid.dim);
        p.constants = constants;
        p
    }

    #[test]
    fn whole_space_fixed_point_when_inside_k() {
        let (grid, k, op) = setup(65);
        let u = GridField::zeros(grid, 1);
        let params = spike_params(&u, &op, &k);
        let (g, report) = truncate_whole_space(&u, &k, &op, &params).unwrap();
        assert_eq!(g.data, u.data);
        assert_eq!(report.mu_total, 0.0);
        assert_eq!(report.stop_reason, StopReason::LambdaStop);
        assert_eq!(report.sup_dist_final, 0.0);
    }

    #[test]
    fn whole_space_spike_is_truncated_with_support_tracking() {
        // Gradient peak around 1.8, well beyond the first scheduled budget,
        // so the run must actually regularize (escalating if the scheduled
        // stage cannot cover the mass at grid resolution).
        let (grid, k, op) = setup(513);
        let mut u = GridField::zeros(grid, 1);
        bump_into(&mut u, [3.0, 3.0], 0.06, 0.0637);
        let mut params = spike_params(&u, &op, &k);
        params.support = Some(AxisBox::new(vec![2.5, 2.5], vec![3.5, 3.5]).unwrap());
        let (g, report) = truncate_whole_space(&u, &k, &op, &params).unwrap();
        assert!(report.lambda_initial > 0.0);
        assert!(report.mu_total > 0.0, "the sweep must modify the spike");
        assert!(report.sup_dist_final <= 1e-12, "sup {}", report.sup_dist_final);
        assert!(
            report.sup_dist_base < report.gamma_bar_abs,
            "the regularized spike must sit inside the inflated body"
        );
        assert!(report.all_checks_ok());
        let support = report.support.as_ref().unwrap();
        assert!(support.contained, "modified set left the dilated support");
        assert!(support.rho_total > 0.0);
        // The output agrees with the input away from the spike.
        let mut idx = [0usize; 2];
        for n in 0..u.grid.node_count() {
            u.grid.fill_multi(n, &mut idx);
            let x = u.grid.coord(&idx);
            if (x[0] - 3.0f64).hypot(x[1] - 3.0) > 2.2 {
                assert_eq!(g.data[n], u.data[n]);
            }
        }
    }

    #[test]
    fn whole_space_rejects_bad_derivative_bound() {
        let (grid, k, op) = setup(65);
        let mut u = GridField::zeros(grid, 1);
        bump_into(&mut u, [2.0, 2.0], 0.3, 1.0);
        let mut params = spike_params(&u, &op, &k);
        params.m_bound = 0.01;
        assert!(matches!(
            truncate_whole_space(&u, &k, &op, &params),
            Err(MzError::Argument(_))
        ));
    }

    #[test]
    fn cutoff_is_exactly_one_on_v_and_zero_outside_dilate() {
        let (grid, _, _) = setup(257);
        let v = AxisBox::new(vec![1.5, 1.5], vec![2.5, 2.5]).unwrap();
        let width = 0.5;
        let phi = build_cutoff(&grid, &v, width).unwrap();
        let mut idx = [0usize; 2];
        for n in 0..grid.node_count() {
            grid.fill_multi(n, &mut idx);
            let x = grid.coord(&idx);
            if v.contains(&x) {
                assert_eq!(phi.data[n], 1.0);
            } else if !v.dilate(width).contains(&x) {
                assert_eq!(phi.data[n], 0.0);
            } else {
                assert!(phi.data[n] >= 0.0 && phi.data[n] <= 1.0);
            }
        }
    }

    #[test]
    fn cutoff_width_floor_enforced() {
        let (grid, _, _) = setup(65);
        let v = AxisBox::new(vec![1.5, 1.5], vec![2.5, 2.5]).unwrap();
        assert!(build_cutoff(&grid, &v, 0.1).is_err());
    }

    #[test]
    fn domain_identity_when_u_j_equals_u0() {
        let (grid, k, op) = setup(257);
        let u0 = GridField::zeros(grid.clone(), 1);
        let config = DomainTruncationConfig {
            u0: u0.clone(),
            v: AxisBox::new(vec![2.1, 2.1], vec![3.9, 3.9]).unwrap(),
            u_box: AxisBox::new(vec![0.9, 0.9], vec![5.1, 5.1]).unwrap(),
            cutoff_width: 0.5,
            u0_tol: 1e-9,
            k_offset: 0.0,
            whole: spike_params(&u0, &op, &k),
        };
        let (w, report) = truncate_domain(&u0, &config, &k, &op).unwrap();
        assert_eq!(w.data, u0.data);
        assert_eq!(report.modified_measure_inside_u, 0.0);
        assert_eq!(report.mask_copy_changed, 0);
    }

    #[test]
    fn domain_output_is_u0_outside_u_bitwise() {
        let (grid, k, op) = setup(513);
        let u0 = GridField::from_fn(grid.clone(), 1, |x, out| out[0] = 0.1 * (x[0] + x[1]));
        let mut u_j = u0.clone();
        bump_into(&mut u_j, [3.0, 3.0], 0.06, 0.0637);
        let whole = spike_params(&u_j, &op, &k);
        let config = DomainTruncationConfig {
            u0: u0.clone(),
            v: AxisBox::new(vec![2.1, 2.1], vec![3.9, 3.9]).unwrap(),
            u_box: AxisBox::new(vec![0.9, 0.9], vec![5.1, 5.1]).unwrap(),
            cutoff_width: 0.5,
            u0_tol: 1e-9,
            k_offset: 0.0,
            whole,
        };
        let (w, report) = truncate_domain(&u_j, &config, &k, &op).unwrap();
        assert_eq!(report.mask_copy_changed, 0, "truncation must stay inside U");
        assert!(report.modified_measure_inside_u > 0.0);
        let mut idx = [0usize; 2];
        for n in 0..grid.node_count() {
            grid.fill_multi(n, &mut idx);
            let x = grid.coord(&idx);
            if !config.u_box.contains(&x) {
                assert_eq!(w.data[n], u0.data[n]);
            }
        }
    }

    #[test]
    fn domain_nesting_violations_rejected() {
        let (grid, k, op) = setup(257);
        let u0 = GridField::zeros(grid.clone(), 1);
        let whole = spike_params(&u0, &op, &k);
        let config = DomainTruncationConfig {
            u0: u0.clone(),
            v: AxisBox::new(vec![0.5, 0.5], vec![7.8, 7.8]).unwrap(),
            u_box: AxisBox::new(vec![0.6, 0.6], vec![7.9, 7.9]).unwrap(),
            cutoff_width: 0.5,
            u0_tol: 1e-9,
            k_offset: 0.0,
            whole,
        };
        assert!(matches!(
            truncate_domain(&u0, &config, &k, &op),
            Err(MzError::NestingViolated(_))
        ));
    }

    #[test]
    fn varying_k_constant_maps_agree_bitwise() {
        let grid = Grid::cube(2, 129, 1.0, Boundary::Extend).unwrap();
        let op = HomogeneousOperator::gradient(2);
        let mut u = GridField::zeros(grid.clone(), 1);
        let mut idx = [0usize; 2];
        for n in 0..grid.node_count() {
            grid.fill_multi(n, &mut idx);
            let x = grid.coord(&idx);
            let d2 = (x[0] - 0.5f64).powi(2) + (x[1] - 0.5).powi(2);
            let r2: f64 = 0.03 * 0.03;
            if d2 < r2 {
                let q = 1.0 - d2 / r2;
                u.data[n] += 0.02 * q * q * q;
            }
        }
        let m_abs = 1.05 * sup_norm_derivative(&u, 1).unwrap().max(1.0);
        let mk_config = |map: KMap| {
            let mut whole = WholeSpaceParams::new(0.8, m_abs, 2);
            whole.alpha = 1e-4;
            VaryingKConfig {
                k_map: map,
                eta: 1.0,
                modulus: vec![(0.2, 10.0)],
                level: 1,
                u0: GridField::zeros(grid.clone(), 1),
                m_abs,
                cutoff_width: 0.1,
                u0_tol: 1e-9,
                whole,
            }
        };
        let body = ConvexBody::ball(vec![0.0, 0.0], 1.0);
        let (w1, r1) = truncate_varying_k(&u, &mk_config(KMap::Constant { body }), &op).unwrap();
        let map2 = KMap::BallAffineRadius {
            center: vec![0.0, 0.0],
            base_radius: 1.0,
            slope: vec![0.0, 0.0],
        };
        let (w2, r2) = truncate_varying_k(&u, &mk_config(map2), &op).unwrap();
        assert_eq!(w1.data, w2.data);
        assert!(r1.bound_ok && r2.bound_ok);
        assert_eq!(r1.cubes, 1);
    }

    #[test]
    fn varying_k_eta_floor_enforced() {
        let grid = Grid::cube(2, 65, 1.0, Boundary::Extend).unwrap();
        let op = HomogeneousOperator::gradient(2);
        let u = GridField::zeros(grid.clone(), 1);
        let map = KMap::BallAffineRadius {
            center: vec![0.0, 0.0],
            base_radius: 0.1,
            slope: vec![0.0, 0.0],
        };
        let config = VaryingKConfig {
            k_map: map,
            eta: 0.5,
            modulus: vec![(0.2, 10.0)],
            level: 1,
            u0: GridField::zeros(grid.clone(), 1),
            m_abs: 1.0,
            cutoff_width: 0.1,
            u0_tol: 1e-9,
            whole: WholeSpaceParams::new(0.05, 1.0, 2),
        };
        assert!(matches!(
            truncate_varying_k(&u, &config, &op),
            Err(MzError::EtaViolated(_))
        ));
    }

    #[test]
    fn varying_k_insufficient_modulus_rejected() {
        let grid = Grid::cube(2, 65, 1.0, Boundary::Extend).unwrap();
        let op = HomogeneousOperator::gradient(2);
        let u = GridField::zeros(grid.clone(), 1);
        let config = VaryingKConfig {
            k_map: KMap::Constant { body: ConvexBody::ball(vec![0.0, 0.0], 1.0) },
            eta: 0.5,
            modulus: vec![(2.0, 10.0)],
            level: 3,
            u0: GridField::zeros(grid.clone(), 1),
            m_abs: 1.0,
            cutoff_width: 0.1,
            u0_tol: 1e-9,
            whole: WholeSpaceParams::new(0.05, 1.0, 2),
        };
        assert!(matches!(
            truncate_varying_k(&u, &config, &op),
            Err(MzError::ModulusInsufficient(_))
        ));
    }
}
