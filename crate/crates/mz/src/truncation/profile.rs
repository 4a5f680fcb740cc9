//! The radial mollification profile.
//!
//! On the unit ball the profile equals `eps` on `B_{5/8}`, decays through a
//! C^1 pair of quadratics on the shell `[5/8, 7/8]`, and vanishes outside
//! `B_{7/8}`.  The transition has max slope `8 eps` and curvature `64 eps`
//! almost everywhere, inside the admissible budget `|D rho| <= 9 eps`,
//! `|D^2 rho| <= 65 eps`.  For a ball of radius `r` the profile is rescaled
//! as `rho_r(s) = r * rho(s / r)`, so the slope bound is scale free and the
//! curvature bound scales as `65 eps / r`.

use crate::error::MzError;
use crate::Result;
use serde::Serialize;

pub const PLATEAU_END: f64 = 5.0 / 8.0;
pub const SUPPORT_END: f64 = 7.0 / 8.0;

/// Discretized variable mollification radius on a ball, with derivative
/// certificates.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub epsilon: f64,
    pub r: f64,
}

/// Derivative bounds of the unit profile measured by dense evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileCert {
    pub epsilon: f64,
    pub points: usize,
    pub max_abs_d1: f64,
    pub ess_max_abs_d2: f64,
    pub d1_bound: f64,
    pub d2_bound: f64,
    pub satisfied: bool,
}

/// Build the profile for radius `r`; requires `0 < eps < 1/10`.
pub fn make_profile(epsilon: f64, r: f64) -> Result<RadialProfile> {
    if !(epsilon > 0.0 && epsilon < 0.1) {
        return Err(MzError::Argument(format!(
            "profile epsilon {epsilon} must lie in (0, 1/10)"
        )));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(MzError::Argument(format!("profile radius {r} must be positive")));
    }
    Ok(RadialProfile { epsilon, r })
}

impl RadialProfile {
    /// Unit profile value at `t = |x - a| / r in [0, 1]`.
    pub fn unit_value(&self, t: f64) -> f64 {
        let eps = self.epsilon;
        if t <= PLATEAU_END {
            eps
        } else if t >= SUPPORT_END {
            0.0
        } else {
            let tau = (t - PLATEAU_END) / (SUPPORT_END - PLATEAU_END);
            if tau <= 0.5 {
                eps * (1.0 - 2.0 * tau * tau)
            } else {
                let s = 1.0 - tau;
                2.0 * eps * s * s
            }
        }
    }

    /// d/dt of the unit profile (analytic, piecewise).
    pub fn unit_deriv1(&self, t: f64) -> f64 {
        let eps = self.epsilon;
        let w = SUPPORT_END - PLATEAU_END;
        if t <= PLATEAU_END || t >= SUPPORT_END {
            0.0
        } else {
            let tau = (t - PLATEAU_END) / w;
            if tau <= 0.5 {
                -4.0 * eps * tau / w
            } else {
                -4.0 * eps * (1.0 - tau) / w
            }
        }
    }

    /// d^2/dt^2 of the unit profile (piecewise constant on the transition).
    pub fn unit_deriv2(&self, t: f64) -> f64 {
        let eps = self.epsilon;
        let w = SUPPORT_END - PLATEAU_END;
        if t <= PLATEAU_END || t >= SUPPORT_END {
            0.0
        } else {
            let tau = (t - PLATEAU_END) / w;
            if tau <= 0.5 {
                -4.0 * eps / (w * w)
            } else {
                4.0 * eps / (w * w)
            }
        }
    }

    /// Mollification radius at absolute distance `s` from the ball center.
    pub fn radius_at(&self, s: f64) -> f64 {
        self.r * self.unit_value(s / self.r)
    }

    /// Dense 1-D evaluation of the analytic derivatives on `points` samples
    /// of `[0, 1]`.
    pub fn certificate(&self, points: usize) -> ProfileCert {
        let mut max_d1 = 0.0f64;
        let mut max_d2 = 0.0f64;
        for i in 0..points {
            let t = i as f64 / (points - 1) as f64;
            max_d1 = max_d1.max(self.unit_deriv1(t).abs());
            max_d2 = max_d2.max(self.unit_deriv2(t).abs());
        }
        let d1_bound = 9.0 * self.epsilon;
        let d2_bound = 65.0 * self.epsilon;
        ProfileCert {
            epsilon: self.epsilon,
            points,
            max_abs_d1: max_d1,
            ess_max_abs_d2: max_d2,
            d1_bound,
            d2_bound,
            satisfied: max_d1 <= d1_bound && max_d2 <= d2_bound,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_tail_and_midpoint() {
        let p = make_profile(0.05, 1.0).unwrap();
        assert_eq!(p.radius_at(0.0), 0.05);
        assert_eq!(p.radius_at(0.9), 0.0);
        // Midpoint of the transition sits at eps/2 by symmetry.
        assert!((p.unit_value(0.75) - 0.025).abs() < 1e-15);
    }

    #[test]
    fn profile_scales_with_radius() {
        let p = make_profile(0.08, 4.0).unwrap();
        assert!((p.radius_at(0.0) - 0.32).abs() < 1e-15);
        assert_eq!(p.radius_at(3.6), 0.0);
        assert!((p.radius_at(0.5 * 4.0) - 0.32).abs() < 1e-15);
    }

    #[test]
    fn certified_slope_and_curvature() {
        for eps in [0.01, 0.05, 0.099] {
            let p = make_profile(eps, 1.0).unwrap();
            let cert = p.certificate(100_000);
            assert!(cert.satisfied);
            assert!((cert.max_abs_d1 - 8.0 * eps).abs() <= 0.01 * 8.0 * eps);
            assert!((cert.ess_max_abs_d2 - 64.0 * eps).abs() <= 0.01 * 64.0 * eps);
        }
    }

    #[test]
    fn epsilon_range_enforced() {
        assert!(make_profile(0.1, 1.0).is_err());
        assert!(make_profile(0.0, 1.0).is_err());
        assert!(make_profile(-0.2, 1.0).is_err());
    }

    #[test]
    fn profile_is_c1_at_joints() {
        let p = make_profile(0.09, 1.0).unwrap();
        let d = 1e-9;
        for joint in [PLATEAU_END, 0.75, SUPPORT_END] {
            let left = (p.unit_value(joint) - p.unit_value(joint - d)) / d;
            let right = (p.unit_value(joint + d) - p.unit_value(joint)) / d;
            assert!((left - right).abs() < 1e-5, "slope jump at {joint}: {left} vs {right}");
        }
    }
}
