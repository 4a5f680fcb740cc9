//! The iteration schedule: per-stage inflation budgets `gamma_i` and body
//! norms `M_i` in the unit frame `|K|_inf = 1`, driven by the solution of
//! `gamma = delta alpha_bar e^{delta alpha_bar}`.

use crate::error::MzError;
use crate::Result;
use serde::Serialize;

/// One stage of the schedule (unit frame).
#[derive(Debug, Clone, Serialize)]
pub struct Stage {
    pub index: usize,
    /// `delta * alpha^{i/(2(d+1))}`, so that `gamma_i = ratio * m_i`.
    pub ratio: f64,
    pub gamma_i: f64,
    /// `M_i = |K_i|_inf`; `M_0 = 1`, `M_{i+1} = M_i + gamma_i`.
    pub m_i: f64,
    /// Accumulated inflation `sum_{j<i} gamma_j` describing `K_i`.
    pub offset: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Schedule {
    /// Total inflation target `gamma = gamma_bar` (unit frame).
    pub gamma_target: f64,
    pub d: usize,
    pub alpha: f64,
    pub delta: f64,
    pub alpha_bar: f64,
    pub m_bar: f64,
    pub gamma_bar: f64,
    /// `|delta alpha_bar e^{delta alpha_bar} - gamma|` after the bisection.
    pub residual: f64,
    pub stages: Vec<Stage>,
}

/// Solve the schedule for a total unit-frame budget `gamma`.
///
/// Requires `gamma < c2 (1 + c1 m) k_sup / k_sup` after normalization and
/// `alpha` in `(0, 1)`.  The series `alpha_bar = sum alpha^{i/(2(d+1))}` is
/// summed to relative tail below 1e-15, `delta` is found by bisection on the
/// strictly increasing map `delta -> delta alpha_bar e^{delta alpha_bar}` to
/// absolute residual 1e-12, and stages are emitted until `gamma_i` falls
/// below `stage_floor_frac * gamma`.
pub fn build_schedule(
    gamma: f64,
    d: usize,
    m: f64,
    alpha: f64,
    k_sup: f64,
    c1: f64,
    c2: f64,
    stage_floor_frac: f64,
) -> Result<Schedule> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MzError::ScheduleInfeasible(format!("alpha {alpha} outside (0,1)")));
    }
    if !(k_sup > 0.0) {
        return Err(MzError::ScheduleInfeasible("k_sup must be positive".into()));
    }
    let gamma_u = gamma / k_sup;
    let upper = c2 * (1.0 + c1 * m);
    if !(gamma_u > 0.0 && gamma_u < upper) {
        return Err(MzError::GammaOutOfRange { gamma, upper: upper * k_sup });
    }

    // alpha_bar as a finite sum with relative tail below 1e-15.
    let q = alpha.powf(1.0 / (2.0 * (d as f64 + 1.0)));
    let mut alpha_bar = 0.0f64;
    let mut term = 1.0f64;
    loop {
        alpha_bar += term;
        term *= q;
        if term < 1e-16 * alpha_bar {
            break;
        }
    }

    // Bisection for delta on the strictly increasing defining map.
    let f = |delta: f64| delta * alpha_bar * (delta * alpha_bar).exp();
    let mut hi = 1.0f64;
    let mut guard = 0;
    while f(hi) < gamma_u {
        hi *= 2.0;
        guard += 1;
        assert!(guard < 200, "bracketing the schedule solve cannot fail for finite gamma");
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < gamma_u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    let residual = (f(delta) - gamma_u).abs();
    if residual > 1e-12 {
        return Err(MzError::ScheduleInfeasible(format!(
            "bisection residual {residual:.3e} above 1e-12"
        )));
    }
    let m_bar = (delta * alpha_bar).exp();
    let gamma_bar = delta * alpha_bar * m_bar;

    // Emit stages until the per-stage budget decays below the floor.
    let floor = stage_floor_frac * gamma_u;
    let mut stages = Vec::new();
    let mut m_i = 1.0f64;
    let mut offset = 0.0f64;
    let mut pow = 1.0f64;
    for index in 0..1_000_000usize {
        let ratio = delta * pow;
        let gamma_i = ratio * m_i;
        if gamma_i < floor && index > 0 {
            break;
        }
        stages.push(Stage { index, ratio, gamma_i, m_i, offset });
        offset += gamma_i;
        m_i += gamma_i;
        pow *= q;
        if gamma_i < floor {
            break;
        }
    }
    Ok(Schedule {
        gamma_target: gamma_u,
        d,
        alpha,
        delta,
        alpha_bar,
        m_bar,
        gamma_bar,
        residual,
        stages,
    })
}

impl Schedule {
    /// Exact arithmetic identities of the emitted stages:
    /// `gamma_i == ratio_i * m_i`, `m_{i+1} == m_i + gamma_i`,
    /// `offset_{i+1} == offset_i + gamma_i`, `sum gamma_i <= gamma_bar`
    /// and `1 <= m_i <= m_bar`.
    pub fn verify_identities(&self) -> Result<()> {
        let mut sum = 0.0f64;
        for (i, s) in self.stages.iter().enumerate() {
            if s.gamma_i != s.ratio * s.m_i {
                return Err(MzError::ScheduleInfeasible(format!(
                    "stage {i}: gamma_i != ratio * m_i"
                )));
            }
            if !(s.m_i >= 1.0 && s.m_i <= self.m_bar * (1.0 + 1e-12)) {
                return Err(MzError::ScheduleInfeasible(format!(
                    "stage {i}: m_i = {} outside [1, m_bar = {}]",
                    s.m_i, self.m_bar
                )));
            }
            if i + 1 < self.stages.len() {
                let next = &self.stages[i + 1];
                if next.m_i != s.m_i + s.gamma_i || next.offset != s.offset + s.gamma_i {
                    return Err(MzError::ScheduleInfeasible(format!(
                        "stage {i}: additive recursion violated"
                    )));
                }
            }
            sum += s.gamma_i;
        }
        if sum > self.gamma_bar * (1.0 + 1e-12) {
            return Err(MzError::ScheduleInfeasible(format!(
                "sum gamma_i = {sum} exceeds gamma_bar = {}",
                self.gamma_bar
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_residual() {
        let s = build_schedule(0.05, 2, 1.0, 0.5, 1.0, 9.0, 0.09, 1e-6).unwrap();
        let lhs = s.delta * s.alpha_bar * (s.delta * s.alpha_bar).exp();
        assert!((lhs - 0.05).abs() <= 1e-12, "residual {}", (lhs - 0.05).abs());
        s.verify_identities().unwrap();
    }

    #[test]
    fn small_gamma_linearizes() {
        // As gamma -> 0+, delta alpha_bar ~ gamma.
        let s = build_schedule(1e-9, 2, 1.0, 0.5, 1.0, 9.0, 0.09, 1e-3).unwrap();
        let prod = s.delta * s.alpha_bar;
        assert!((prod - 1e-9).abs() < 1e-12 * 1.0 + 1e-17);
    }

    #[test]
    fn delta_monotone_in_gamma() {
        let mut last = 0.0;
        for gamma in [0.01, 0.02, 0.05, 0.1, 0.2, 0.4] {
            let s = build_schedule(gamma, 2, 1.0, 0.5, 1.0, 9.0, 0.09, 1e-6).unwrap();
            assert!(s.delta > last, "delta not increasing at gamma={gamma}");
            last = s.delta;
        }
    }

    #[test]
    fn out_of_range_gamma_rejected() {
        assert!(matches!(
            build_schedule(10.0, 2, 1.0, 0.5, 1.0, 9.0, 0.09, 1e-6),
            Err(MzError::GammaOutOfRange { .. })
        ));
        assert!(build_schedule(0.05, 2, 1.0, 1.5, 1.0, 9.0, 0.09, 1e-6).is_err());
    }

    #[test]
    fn stage_budgets_decay_geometrically() {
        let s = build_schedule(0.3, 2, 1.0, 0.01, 1.0, 9.0, 0.09, 1e-6).unwrap();
        assert!(s.stages.len() >= 3);
        let q = 0.01f64.powf(1.0 / 6.0);
        for w in s.stages.windows(2) {
            let expected = w[0].ratio * q;
            assert!((w[1].ratio - expected).abs() < 1e-15);
        }
    }
}
