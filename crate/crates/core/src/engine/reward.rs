//! Itemised step reward.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardTerms {
    pub goal: bool,
    pub ped_collision: bool,
    pub wall_collision: bool,
    pub waypoint: bool,
    pub timestep: bool,
    pub waypoint_distance: bool,
    pub ped_avoidance: bool,
    pub waypoint_orientation: bool,
}

impl Default for RewardTerms {
    fn default() -> Self {
        Self {
            goal: true,
            ped_collision: true,
            wall_collision: true,
            waypoint: true,
            timestep: true,
            waypoint_distance: true,
            ped_avoidance: true,
            waypoint_orientation: true,
        }
    }
}

impl RewardTerms {
    /// Variant without the orientation and pedestrian-avoidance shaping terms.
    pub fn baseline() -> Self {
        Self { ped_avoidance: false, waypoint_orientation: false, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub goal: f64,
    pub ped_collision: f64,
    pub wall_collision: f64,
    pub waypoint: f64,
    /// Radius around a waypoint that earns the waypoint bonus.
    pub waypoint_radius: f64,
    pub w_distance: f64,
    pub w_orientation: f64,
    pub d_thresh: f64,
    pub d_col: f64,
    pub timestep: f64,
    pub enabled: RewardTerms,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            goal: 20.0,
            ped_collision: -20.0,
            wall_collision: -10.0,
            waypoint: 0.8,
            waypoint_radius: 0.1,
            w_distance: 0.3,
            w_orientation: 0.3,
            d_thresh: 1.0,
            d_col: 0.3,
            timestep: -0.001,
            enabled: RewardTerms::default(),
        }
    }
}

impl RewardConfig {
    pub fn is_valid(&self) -> bool {
        self.d_thresh > self.d_col && self.d_col > 0.0 && self.waypoint_radius > 0.0
    }
}

/// Per-step measurements the reward is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardInputs {
    /// Distance to the tracked waypoint before and after the step.
    pub waypoint_distance_prev: f64,
    pub waypoint_distance: f64,
    /// Absolute bearing to the tracked waypoint before and after the step.
    pub waypoint_angle_prev: f64,
    pub waypoint_angle: f64,
    /// Distance to the nearest visible pedestrian.
    pub nearest_pedestrian: Option<f64>,
    /// Waypoints entered for the first time this step.
    pub waypoints_entered: usize,
    pub reached_goal: bool,
    pub ped_collision: bool,
    pub wall_collision: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub goal: f64,
    pub ped_collision: f64,
    pub wall_collision: f64,
    pub waypoint: f64,
    pub timestep: f64,
    pub waypoint_distance: f64,
    pub ped_avoidance: f64,
    pub waypoint_orientation: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn terms(&self) -> [f64; 8] {
        [
            self.goal,
            self.ped_collision,
            self.wall_collision,
            self.waypoint,
            self.timestep,
            self.waypoint_distance,
            self.ped_avoidance,
            self.waypoint_orientation,
        ]
    }

    /// Left-to-right sum of the eight terms.
    pub fn sum_terms(&self) -> f64 {
        self.terms().iter().fold(0.0, |acc, t| acc + t)
    }
}

/// Pedestrian-avoidance shaping: `-(d_thresh - d) / (d_thresh - d_col)` inside
/// `d_thresh`, zero beyond.
pub fn pedestrian_avoidance(distance: Option<f64>, cfg: &RewardConfig) -> f64 {
    match distance {
        Some(d) if d <= cfg.d_thresh => -(cfg.d_thresh - d) / (cfg.d_thresh - cfg.d_col),
        _ => 0.0,
    }
}

pub fn compute_reward(inputs: &RewardInputs, cfg: &RewardConfig) -> RewardBreakdown {
    let on = &cfg.enabled;
    let gate = |enabled: bool, value: f64| if enabled { value } else { 0.0 };
    let mut b = RewardBreakdown {
        goal: gate(on.goal && inputs.reached_goal, cfg.goal),
        ped_collision: gate(on.ped_collision && inputs.ped_collision, cfg.ped_collision),
        wall_collision: gate(on.wall_collision && inputs.wall_collision, cfg.wall_collision),
        waypoint: gate(on.waypoint, cfg.waypoint * inputs.waypoints_entered as f64),
        timestep: gate(on.timestep, cfg.timestep),
        waypoint_distance: gate(
            on.waypoint_distance,
            cfg.w_distance * (inputs.waypoint_distance_prev - inputs.waypoint_distance),
        ),
        ped_avoidance: gate(on.ped_avoidance, pedestrian_avoidance(inputs.nearest_pedestrian, cfg)),
        waypoint_orientation: gate(
            on.waypoint_orientation,
            cfg.w_orientation * (inputs.waypoint_angle_prev - inputs.waypoint_angle),
        ),
        total: 0.0,
    };
    b.total = b.sum_terms();
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_ped(d: f64) -> RewardBreakdown {
        compute_reward(&RewardInputs { nearest_pedestrian: Some(d), ..Default::default() }, &RewardConfig::default())
    }

    #[test]
    fn avoidance_boundaries() {
        assert_eq!(with_ped(0.3).ped_avoidance, -1.0);
        assert_eq!(with_ped(1.0).ped_avoidance, 0.0);
        assert!((with_ped(0.65).ped_avoidance + 0.5).abs() < 1e-12);
        assert_eq!(with_ped(1.2).ped_avoidance, 0.0);
    }

    #[test]
    fn dense_sum_example() {
        let inputs = RewardInputs {
            waypoint_distance_prev: 1.0,
            waypoint_distance: 0.95,
            waypoint_angle_prev: 0.3,
            waypoint_angle: 0.2,
            ..Default::default()
        };
        let b = compute_reward(&inputs, &RewardConfig::default());
        assert!((b.total - 0.044).abs() < 1e-12, "{}", b.total);
        assert_eq!(b.total, b.sum_terms());
    }

    #[test]
    fn disabled_terms_are_zero() {
        let cfg = RewardConfig { enabled: RewardTerms::baseline(), ..Default::default() };
        let inputs = RewardInputs {
            waypoint_angle_prev: 1.0,
            nearest_pedestrian: Some(0.5),
            ..Default::default()
        };
        let b = compute_reward(&inputs, &cfg);
        assert_eq!(b.ped_avoidance, 0.0);
        assert_eq!(b.waypoint_orientation, 0.0);
        assert_eq!(b.timestep, -0.001);
    }

    #[test]
    fn sparse_terms() {
        let b = compute_reward(
            &RewardInputs { reached_goal: true, wall_collision: true, waypoints_entered: 1, ..Default::default() },
            &RewardConfig::default(),
        );
        assert_eq!(b.goal, 20.0);
        assert_eq!(b.wall_collision, -10.0);
        assert_eq!(b.waypoint, 0.8);
    }
}
