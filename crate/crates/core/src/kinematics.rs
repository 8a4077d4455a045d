//! Robot velocity limits and unicycle integration.

use crate::geometry::{wrap_angle, Pose};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

pub const V_MAX: f64 = 0.5;
pub const OMEGA_MAX: f64 = FRAC_PI_2;

/// A velocity command `(v, omega)` in m/s and rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub v: f64,
    pub omega: f64,
}

impl Action {
    pub const fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub fn clamped(self) -> Self {
        Self::new(self.v.clamp(-V_MAX, V_MAX), self.omega.clamp(-OMEGA_MAX, OMEGA_MAX))
    }

    /// Maps a normalized command in `[-1, 1]^2` onto the velocity limits.
    pub fn from_normalized(v_norm: f64, omega_norm: f64) -> Self {
        Self::new(v_norm.clamp(-1.0, 1.0) * V_MAX, omega_norm.clamp(-1.0, 1.0) * OMEGA_MAX)
    }

    pub fn normalized(self) -> (f64, f64) {
        (self.v / V_MAX, self.omega / OMEGA_MAX)
    }
}

/// Forward-Euler unicycle step; heading wrapped to (-pi, pi].
pub fn integrate(pose: &Pose, v: f64, omega: f64, dt: f64) -> Pose {
    Pose::new(
        pose.x + v * pose.theta.cos() * dt,
        pose.y + v * pose.theta.sin() * dt,
        wrap_angle(pose.theta + omega * dt),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn straight_step() {
        let p = integrate(&Pose::default(), 0.5, 0.0, 0.1);
        assert!((p.x - 0.05).abs() < 1e-15 && p.y == 0.0 && p.theta == 0.0);
    }

    #[test]
    fn turn_in_place() {
        let p = integrate(&Pose::default(), 0.0, FRAC_PI_2, 0.1);
        assert_eq!((p.x, p.y), (0.0, 0.0));
        assert!((p.theta - 0.05 * PI).abs() < 1e-15);
    }

    #[test]
    fn heading_wraps() {
        let p = integrate(&Pose::new(0.0, 0.0, PI), 0.0, 1.0, 0.1);
        assert!(p.theta > -PI && p.theta <= PI);
        assert!((p.theta - (-PI + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn normalized_mapping() {
        let a = Action::from_normalized(1.0, -1.0);
        assert_eq!(a, Action::new(0.5, -FRAC_PI_2));
        assert_eq!(Action::new(0.7, -3.0).clamped(), Action::new(0.5, -FRAC_PI_2));
    }
}
