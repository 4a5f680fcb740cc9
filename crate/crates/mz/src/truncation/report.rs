//! Per-run reports with all per-stage arrays, serialized as JSON.

use serde::Serialize;

/// Outcome of one sweep stage inside a driver run.
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: usize,
    /// Whether this stage spent the remaining budget in one sweep because
    /// the scheduled budget could not act at grid resolution.
    pub escalated: bool,
    /// Per-stage inflation budget, absolute units.
    pub gamma_abs: f64,
    /// Accumulated inflation describing the stage body `K_i`.
    pub offset_abs: f64,
    pub theta: f64,
    pub lambda_before: f64,
    pub lambda_after: f64,
    pub alpha_empirical: f64,
    pub mu: f64,
    pub modified_nodes: usize,
    pub balls: usize,
    pub candidates: usize,
    pub uncovered: usize,
    pub mu_bound: f64,
    pub mu_ok: bool,
    pub deriv_measured: f64,
    pub deriv_bound: f64,
    pub deriv_ok: bool,
}

/// Why the stage iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The normalized distance mass fell below `lambda_stop`.
    LambdaStop,
    /// The emitted schedule ran out (per-stage budget below the floor).
    StageFloor,
    /// The next stage's mollification radius would fall below the grid
    /// spacing everywhere; no discrete progress is possible.
    ResolutionFloor,
    /// A configured stage cap was reached.
    StageCap,
    /// A stage could not act at grid resolution, so the remaining budget was
    /// spent in one final sweep.
    Escalated,
}

/// Support-tracking record: the dilate radius from the iteration constants
/// and whether the modified set stayed inside the dilated support box.
#[derive(Debug, Clone, Serialize)]
pub struct SupportTracking {
    pub rho_total: f64,
    pub rho_stages: Vec<f64>,
    pub contained: bool,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleSummary {
    pub delta: f64,
    pub alpha_bar: f64,
    pub m_bar: f64,
    pub gamma_bar_unit: f64,
    pub residual: f64,
    pub stages_emitted: usize,
}

/// Full record of a whole-space truncation run.
#[derive(Debug, Clone, Serialize)]
pub struct TruncationReport {
    pub d: usize,
    pub k_sup: f64,
    /// Total inflation budget (absolute units); the final field is measured
    /// against `K` inflated by this amount.
    pub gamma_bar_abs: f64,
    pub m_input: f64,
    pub c1: f64,
    pub lambda_initial: f64,
    pub lambda_stop: f64,
    pub stages: Vec<StageRecord>,
    pub stop_reason: StopReason,
    /// Sum of per-stage modified measures.
    pub mu_total: f64,
    /// Measure of `{u != g}` between input and output fields.
    pub modified_measure: f64,
    /// `sup_x dist(Bg, K_{gamma_bar})`.
    pub sup_dist_final: f64,
    /// `sup_x dist(Bg, K)` for diagnostics.
    pub sup_dist_base: f64,
    pub lambda_final: f64,
    pub support: Option<SupportTracking>,
    pub schedule: ScheduleSummary,
    pub wall_clock_seconds: f64,
}

impl TruncationReport {
    /// All recorded inequality checks passed.
    pub fn all_checks_ok(&self) -> bool {
        self.stages.iter().all(|s| s.mu_ok && s.deriv_ok)
            && self.support.as_ref().map_or(true, |s| s.contained)
    }
}

/// Record of a bounded-domain truncation run.
#[derive(Debug, Clone, Serialize)]
pub struct DomainReport {
    pub inner: TruncationReport,
    /// Measure of `{w != u_j}` restricted to the box `U`.
    pub modified_measure_inside_u: f64,
    /// Nodes outside `U` whose value the final copy of `u_0` actually
    /// changed (0 when the truncation stayed inside `U`).
    pub mask_copy_changed: usize,
    /// Max over nodes of `dist(B u_0, K)` measured before blending.
    pub u0_violation: f64,
}

/// Record of one varying-constraint level.
#[derive(Debug, Clone, Serialize)]
pub struct VaryingKReport {
    pub level: usize,
    pub n_dyadic: u32,
    pub cube_side: f64,
    pub cubes: usize,
    pub per_cube_modified: Vec<f64>,
    pub mu_total: f64,
    /// Measured `sup_x dist(B w(x), K_x)`.
    pub sup_dist_pointwise: f64,
    /// The level bound `(2 + |Omega|) / i`.
    pub bound: f64,
    pub bound_ok: bool,
    pub wall_clock_seconds: f64,
}
