//! The truncation engine: ball regularization, covering sweeps, iteration
//! schedules, and the whole-space / domain / varying-set drivers.

pub mod diagnostics;
pub mod drivers;
pub mod profile;
pub mod report;
pub mod schedule;
pub mod select;
pub mod sweep;

pub use diagnostics::{growth_admissibility, monomials_up_to, young_measure_compare, MomentTable};
pub use drivers::{
    blend_fields, build_cutoff, truncate_domain, truncate_varying_k, truncate_whole_space,
    truncate_whole_space_offset, AxisBox, DomainTruncationConfig, KMap, VaryingKConfig,
    WholeSpaceParams,
};
pub use profile::{make_profile, ProfileCert, RadialProfile};
pub use report::{DomainReport, StageRecord, StopReason, TruncationReport, VaryingKReport};
pub use schedule::{build_schedule, Schedule, Stage};
pub use select::{select_balls, SelectedBall, SelectionOutcome};
pub use sweep::{regularize_on_ball, sweep, BallCert, SweepOutcome, TargetSet};

use serde::{Deserialize, Serialize};

/// Dimension constants of the covering argument.  The underlying theory only
/// guarantees their existence, so they are configuration with defaults; the
/// contraction they imply is validated empirically per sweep and reported.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Constants {
    /// Per-sweep contraction factor `alpha(d) < 1`.
    pub alpha: f64,
    /// Admissible-gamma coefficient `C2(d) < 1/10`.
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    /// Stop once `lambda <= lambda_stop_coeff * |K|_inf * |domain|`.
    pub lambda_stop_coeff: f64,
    /// Additive discretization slack: every continuum inequality is asserted
    /// with `slack = slack_coeff * h * (scale of its left side)`.
    pub slack_coeff: f64,
    /// Selected balls are capped at this fraction of the box's short side.
    pub radius_cap_frac: f64,
    /// Emit schedule stages until `gamma_i` falls below this fraction of the
    /// total budget.
    pub stage_floor_frac: f64,
}

impl Constants {
    pub fn defaults(d: usize) -> Self {
        Constants {
            alpha: 1.0 - 0.25 * 5.0f64.powi(-(d as i32)),
            c2: 0.09,
            c3: (1 << d) as f64,
            c4: (1 << d) as f64,
            c5: (1 << d) as f64,
            lambda_stop_coeff: 1e-8,
            slack_coeff: 1.0,
            radius_cap_frac: 0.25,
            stage_floor_frac: 1e-6,
        }
    }
}
