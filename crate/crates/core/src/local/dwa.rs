//! Dynamic Window Approach baseline.
//!
//! Cost of a sampled `(v, omega)` rollout (lower is better):
//! `alpha * |heading error| / pi + beta * (v_max - v) / (2 v_max) + gamma * (1 - clamp(d_min / 5))`.

use crate::geometry::{wrap_angle, Pose, Vec2};
use crate::gridmap::{DistanceField, OccupancyGrid};
use crate::kinematics::{integrate, Action, OMEGA_MAX, V_MAX};
use crate::sensing::PedestrianEstimate;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwaConfig {
    pub heading_weight: f64,
    pub speed_weight: f64,
    pub obstacle_weight: f64,
    pub linear_accel: f64,
    pub angular_accel: f64,
    pub horizon: f64,
    pub v_samples: usize,
    pub omega_samples: usize,
    /// Predict pedestrians forward at constant velocity instead of freezing them.
    pub predict_pedestrians: bool,
    /// Clearance at which the obstacle term vanishes.
    pub clearance_range: f64,
}

impl Default for DwaConfig {
    fn default() -> Self {
        Self {
            heading_weight: 0.4,
            speed_weight: 1.0,
            obstacle_weight: 0.1,
            linear_accel: 1.0,
            angular_accel: PI,
            horizon: 1.5,
            v_samples: 11,
            omega_samples: 21,
            predict_pedestrians: false,
            clearance_range: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityWindow {
    pub v_min: f64,
    pub v_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl VelocityWindow {
    pub fn contains(&self, a: Action) -> bool {
        let eps = 1e-12;
        a.v >= self.v_min - eps && a.v <= self.v_max + eps && a.omega >= self.omega_min - eps && a.omega <= self.omega_max + eps
    }
}

/// Velocities reachable within one control period, intersected with the caps.
pub fn dynamic_window(v: f64, omega: f64, cfg: &DwaConfig, dt: f64) -> VelocityWindow {
    assert!(dt > 0.0, "dt must be positive");
    VelocityWindow {
        v_min: (-V_MAX).max(v - cfg.linear_accel * dt),
        v_max: V_MAX.min(v + cfg.linear_accel * dt),
        omega_min: (-OMEGA_MAX).max(omega - cfg.angular_accel * dt),
        omega_max: OMEGA_MAX.min(omega + cfg.angular_accel * dt),
    }
}

/// Constant-velocity unicycle rollout; returns the poses after each step.
pub fn rollout(pose: &Pose, v: f64, omega: f64, horizon: f64, dt: f64) -> Vec<Pose> {
    let steps = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(steps);
    let mut p = *pose;
    for _ in 0..steps {
        p = integrate(&p, v, omega, dt);
        out.push(p);
    }
    out
}

/// What the DWA sees: static map, its distance field, and sensed pedestrians.
pub struct DwaWorld<'a> {
    pub grid: &'a OccupancyGrid,
    pub distance: &'a DistanceField,
    pub pedestrians: &'a [PedestrianEstimate],
    pub robot_radius: f64,
    pub collision_distance: f64,
}

impl DwaWorld<'_> {
    fn pedestrian_at(&self, ped: &PedestrianEstimate, t: f64, predict: bool) -> Vec2 {
        if predict {
            ped.position + ped.velocity * t
        } else {
            ped.position
        }
    }
}

/// Cost of a rollout, or `None` if it hits a wall or enters a pedestrian's
/// collision radius.
pub fn score_trajectory(
    traj: &[Pose],
    v: f64,
    local_goal: Vec2,
    world: &DwaWorld<'_>,
    cfg: &DwaConfig,
    dt: f64,
) -> Option<f64> {
    assert!(!traj.is_empty(), "trajectory must be nonempty");
    let half_cell = world.grid.resolution() / 2.0;
    let mut d_min = f64::INFINITY;
    for (k, pose) in traj.iter().enumerate() {
        let p = pose.position();
        if world.grid.disc_collides(p, world.robot_radius) {
            return None;
        }
        d_min = d_min.min((world.distance.at(p) - half_cell).max(0.0));
        let t = (k + 1) as f64 * dt;
        for ped in world.pedestrians {
            let d = p.distance(world.pedestrian_at(ped, t, cfg.predict_pedestrians));
            if d < world.collision_distance {
                return None;
            }
            d_min = d_min.min(d);
        }
    }
    let end = traj.last().unwrap();
    let heading_error = wrap_angle((local_goal - end.position()).angle() - end.theta).abs();
    let clearance = (d_min / cfg.clearance_range).clamp(0.0, 1.0);
    Some(
        cfg.heading_weight * (heading_error / PI)
            + cfg.speed_weight * ((V_MAX - v) / (2.0 * V_MAX))
            + cfg.obstacle_weight * (1.0 - clearance),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwaDecision {
    pub action: Action,
    /// `None` when every sample was inadmissible and the rotate fallback was used.
    pub cost: Option<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
}

/// Every sampled `(v, omega)` in the window with its score, `v`-major.
pub fn evaluate_window(
    pose: &Pose,
    current: Action,
    local_goal: Vec2,
    world: &DwaWorld<'_>,
    cfg: &DwaConfig,
    dt: f64,
) -> Vec<(Action, Option<f64>)> {
    let window = dynamic_window(current.v, current.omega, cfg, dt);
    let mut out = Vec::with_capacity(cfg.v_samples * cfg.omega_samples);
    for v in linspace(window.v_min, window.v_max, cfg.v_samples) {
        for omega in linspace(window.omega_min, window.omega_max, cfg.omega_samples) {
            let traj = rollout(pose, v, omega, cfg.horizon, dt);
            out.push((Action::new(v, omega), score_trajectory(&traj, v, local_goal, world, cfg, dt)));
        }
    }
    out
}

/// Lowest-cost admissible sample (first in `v`-major order on ties); rotates
/// in place toward the goal when nothing is admissible.
pub fn dwa_step(
    pose: &Pose,
    current: Action,
    local_goal: Vec2,
    world: &DwaWorld<'_>,
    cfg: &DwaConfig,
    dt: f64,
) -> DwaDecision {
    let mut best: Option<(Action, f64)> = None;
    for (action, cost) in evaluate_window(pose, current, local_goal, world, cfg, dt) {
        if let Some(c) = cost {
            if best.is_none_or(|(_, b)| c < b) {
                best = Some((action, c));
            }
        }
    }
    match best {
        Some((action, cost)) => DwaDecision { action, cost: Some(cost) },
        None => {
            let bearing = wrap_angle((local_goal - pose.position()).angle() - pose.theta);
            let omega = if bearing < 0.0 { -OMEGA_MAX } else { OMEGA_MAX };
            DwaDecision { action: Action::new(0.0, omega), cost: None }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn window_examples() {
        let cfg = DwaConfig::default();
        let w = dynamic_window(0.0, 0.0, &cfg, 0.1);
        assert!((w.v_min + 0.1).abs() < 1e-12 && (w.v_max - 0.1).abs() < 1e-12);
        assert!((w.omega_min + 0.1 * PI).abs() < 1e-12 && (w.omega_max - 0.1 * PI).abs() < 1e-12);
        let w = dynamic_window(0.5, 0.0, &cfg, 0.1);
        assert_eq!(w.v_max, 0.5);
    }

    #[test]
    fn rollout_straight_and_spin() {
        let t = rollout(&Pose::default(), 0.5, 0.0, 1.0, 0.1);
        assert_eq!(t.len(), 10);
        assert!((t[9].x - 0.5).abs() < 1e-12);
        let s = rollout(&Pose::new(1.0, 2.0, 0.0), 0.0, 1.0, 1.0, 0.1);
        assert!(s.iter().all(|p| p.x == 1.0 && p.y == 2.0));
        assert!((s[9].theta - 1.0).abs() < 1e-12);
        assert_eq!(rollout(&Pose::default(), 0.5, 0.0, 1.5, 0.1).len(), 15);
    }

    #[test]
    fn rollout_arc_matches_circle() {
        // Closed-form arc of radius v / omega about (0, R); forward Euler
        // stays within one step length (v * dt) of it.
        let (v, w, dt) = (0.5, FRAC_PI_2, 0.1);
        let t = rollout(&Pose::default(), v, w, 1.0, dt);
        let r = v / w;
        assert!((r - std::f64::consts::FRAC_1_PI).abs() < 1e-12);
        let exact = Vec2::new(r * (w * 1.0).sin(), r * (1.0 - (w * 1.0).cos()));
        assert!(t.last().unwrap().position().distance(exact) < v * dt);
        for p in &t {
            assert!((p.position().distance(Vec2::new(0.0, r)) - r).abs() < v * dt);
        }
    }
}
