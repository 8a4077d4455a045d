//! Pure-pursuit waypoint tracker used for planner-only evaluations.

use crate::geometry::{point_segment_closest, wrap_angle, Pose, Vec2};
use crate::gridmap::OccupancyGrid;
use crate::kinematics::{integrate, Action, OMEGA_MAX, V_MAX};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowerConfig {
    pub lookahead: f64,
    pub turn_gain: f64,
    /// Heading error beyond which the follower turns in place.
    pub turn_in_place: f64,
}

impl Default for FollowerConfig {
    fn default() -> Self {
        Self { lookahead: 0.3, turn_gain: 2.5, turn_in_place: std::f64::consts::FRAC_PI_4 }
    }
}

fn steer(pose: &Pose, target: Vec2, cfg: &FollowerConfig) -> Action {
    let delta = target - pose.position();
    if delta.norm() < 1e-9 {
        return Action::default();
    }
    let bearing = wrap_angle(delta.angle() - pose.theta);
    let omega = (cfg.turn_gain * bearing).clamp(-OMEGA_MAX, OMEGA_MAX);
    let v = if bearing.abs() >= cfg.turn_in_place { 0.0 } else { V_MAX * bearing.cos() };
    Action::new(v, omega)
}

/// Segments searched for the robot's projection, starting one before the cursor.
const PROJECTION_WINDOW: usize = 4;

/// Point `lookahead` meters along `path` past the robot's projection onto
/// the segments around `cursor`.
pub fn pursuit_target(position: Vec2, path: &[Vec2], cursor: usize, lookahead: f64) -> Option<Vec2> {
    let last = path.len().checked_sub(1)?;
    let first = cursor.min(last).saturating_sub(1);
    if first == last {
        return Some(path[last]);
    }
    let mut best = (f64::INFINITY, first, path[first]);
    for k in first..last.min(first + PROJECTION_WINDOW) {
        let (d, q) = point_segment_closest(position, path[k], path[k + 1]);
        if d < best.0 {
            best = (d, k, q);
        }
    }
    let (_, mut k, mut from) = best;
    let mut left = lookahead;
    while k < last {
        let seg = path[k + 1] - from;
        let len = seg.norm();
        if len >= left {
            return Some(from + seg * (left / len));
        }
        left -= len;
        k += 1;
        from = path[k];
    }
    Some(path[last])
}

/// Pure pursuit along `path`: steers toward the point `lookahead` ahead of
/// the robot's projection, slowing with the heading error and turning in
/// place when it exceeds `turn_in_place`.
pub fn follow(pose: &Pose, path: &[Vec2], cursor: usize, cfg: &FollowerConfig) -> Action {
    match pursuit_target(pose.position(), path, cursor, cfg.lookahead) {
        Some(target) => steer(pose, target, cfg),
        None => Action::default(),
    }
}

/// Like [`follow`], but if the step would hit a wall it heads for the
/// nearest path vertex instead, and turns in place if even that is blocked.
pub fn follow_guarded(
    pose: &Pose,
    path: &[Vec2],
    cursor: usize,
    cfg: &FollowerConfig,
    grid: &OccupancyGrid,
    radius: f64,
    dt: f64,
) -> Action {
    let blocked = |a: Action| grid.disc_collides(integrate(pose, a.v, a.omega, dt).position(), radius);
    let a = follow(pose, path, cursor, cfg);
    if !blocked(a) {
        return a;
    }
    let p = pose.position();
    let nearest = path
        .iter()
        .copied()
        .filter(|w| w.distance(p) > 0.05)
        .min_by(|a, b| a.distance(p).total_cmp(&b.distance(p)));
    let Some(target) = nearest else {
        return Action::new(0.0, a.omega);
    };
    let back = steer(pose, target, cfg);
    if !blocked(back) {
        return back;
    }
    let omega = if back.omega == 0.0 { OMEGA_MAX } else { back.omega.signum() * OMEGA_MAX };
    Action::new(0.0, omega)
}
