//! Observation assembly and normalization.

use crate::geometry::{Pose, Vec2};
use crate::kinematics::{Action, OMEGA_MAX, V_MAX};
use crate::sensing::{EgoMap, PedestrianEstimate, EGO_SIZE};
use std::f64::consts::PI;

pub const WAYPOINT_SLOTS: usize = 5;
pub const PEDESTRIAN_SLOTS: usize = 5;
pub const PEDESTRIAN_FEATURES: usize = 4;
pub const MAP_CELLS: usize = EGO_SIZE * EGO_SIZE;
/// Flat length: goal, two maps, previous action, waypoints, pedestrian slots.
pub const OBSERVATION_LEN: usize = 2 + 2 * MAP_CELLS + 2 + 2 * WAYPOINT_SLOTS + PEDESTRIAN_FEATURES * PEDESTRIAN_SLOTS;

/// Normalization scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    /// Goal and waypoint distances.
    pub d_norm: f64,
    /// Pedestrian distances (the sensor range).
    pub ped_norm: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self { d_norm: 15.0, ped_norm: 5.0 }
    }
}

/// Unnormalized observation in metric units.
#[derive(Debug, Clone, PartialEq)]
pub struct RawObservation {
    /// (distance, bearing) to the goal.
    pub goal: (f64, f64),
    pub occupancy: EgoMap,
    pub pedestrian_map: EgoMap,
    pub prev_action: Action,
    /// (distance, bearing) to each upcoming waypoint, nearest-first.
    pub waypoints: Vec<(f64, f64)>,
    /// Visible pedestrians, nearest-first.
    pub pedestrians: Vec<PedestrianEstimate>,
}

impl RawObservation {
    pub fn new(
        robot: &Pose,
        goal: Vec2,
        occupancy: EgoMap,
        pedestrian_map: EgoMap,
        prev_action: Action,
        waypoints: &[Vec2],
        pedestrians: Vec<PedestrianEstimate>,
    ) -> Self {
        Self {
            goal: robot.polar_to(goal),
            occupancy,
            pedestrian_map,
            prev_action,
            waypoints: waypoints.iter().map(|&w| robot.polar_to(w)).collect(),
            pedestrians,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub goal: [f64; 2],
    pub occupancy: EgoMap,
    pub pedestrian_map: EgoMap,
    pub prev_action: [f64; 2],
    pub waypoints: [[f64; 2]; WAYPOINT_SLOTS],
    /// (distance, bearing, relative heading, present) per slot.
    pub pedestrians: [[f64; PEDESTRIAN_FEATURES]; PEDESTRIAN_SLOTS],
}

impl Observation {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(OBSERVATION_LEN);
        out.extend_from_slice(&self.goal);
        out.extend(self.occupancy.as_slice().iter().map(|&c| c as f64));
        out.extend(self.pedestrian_map.as_slice().iter().map(|&c| c as f64));
        out.extend_from_slice(&self.prev_action);
        for w in &self.waypoints {
            out.extend_from_slice(w);
        }
        for p in &self.pedestrians {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn presence_mask(&self) -> [bool; PEDESTRIAN_SLOTS] {
        self.pedestrians.map(|p| p[3] == 1.0)
    }
}

fn unit_distance(d: f64, scale: f64) -> f64 {
    (d / scale).clamp(0.0, 1.0)
}

fn unit_angle(a: f64) -> f64 {
    (a / PI).clamp(-1.0, 1.0)
}

/// Scales every field into [-1, 1]. Missing waypoints repeat the last one
/// (or are zero if there are none); missing pedestrian slots are zero with
/// presence 0.
pub fn normalize_observation(raw: &RawObservation, norm: &Normalization) -> Observation {
    let polar = |(d, b): (f64, f64)| [unit_distance(d, norm.d_norm), unit_angle(b)];
    let mut waypoints = [[0.0; 2]; WAYPOINT_SLOTS];
    for (k, slot) in waypoints.iter_mut().enumerate() {
        if let Some(&w) = raw.waypoints.get(k).or(raw.waypoints.last()) {
            *slot = polar(w);
        }
    }
    let mut pedestrians = [[0.0; PEDESTRIAN_FEATURES]; PEDESTRIAN_SLOTS];
    for (slot, p) in pedestrians.iter_mut().zip(&raw.pedestrians) {
        *slot = [unit_distance(p.distance, norm.ped_norm), unit_angle(p.bearing), unit_angle(p.relative_heading), 1.0];
    }
    Observation {
        goal: polar(raw.goal),
        occupancy: raw.occupancy.clone(),
        pedestrian_map: raw.pedestrian_map.clone(),
        prev_action: [
            (raw.prev_action.v / V_MAX).clamp(-1.0, 1.0),
            (raw.prev_action.omega / OMEGA_MAX).clamp(-1.0, 1.0),
        ],
        waypoints,
        pedestrians,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw() -> RawObservation {
        RawObservation {
            goal: (7.5, PI / 2.0),
            occupancy: EgoMap::default(),
            pedestrian_map: EgoMap::default(),
            prev_action: Action::new(0.5, -OMEGA_MAX),
            waypoints: vec![(1.0, 0.0), (30.0, -PI)],
            pedestrians: Vec::new(),
        }
    }

    #[test]
    fn length_accounting() {
        assert_eq!(OBSERVATION_LEN, 20034);
        let obs = normalize_observation(&raw(), &Normalization::default());
        assert_eq!(obs.to_vec().len(), 20034);
    }

    #[test]
    fn scalar_examples() {
        let obs = normalize_observation(&raw(), &Normalization::default());
        assert_eq!(obs.goal, [0.5, 0.5]);
        assert_eq!(obs.prev_action, [1.0, -1.0]);
        assert_eq!(obs.waypoints[1], [1.0, -1.0]);
        assert_eq!(obs.waypoints[4], obs.waypoints[1]);
        assert_eq!(obs.presence_mask(), [false; 5]);
    }

    #[test]
    fn pedestrian_at_sensor_range() {
        let mut r = raw();
        r.pedestrians.push(PedestrianEstimate {
            id: 3,
            distance: 5.0,
            bearing: -PI / 4.0,
            relative_heading: PI,
            position: Vec2::ZERO,
            heading: 0.0,
            velocity: Vec2::ZERO,
            radius: 0.15,
        });
        let obs = normalize_observation(&r, &Normalization::default());
        assert_eq!(obs.pedestrians[0], [1.0, -0.25, 1.0, 1.0]);
        assert_eq!(obs.pedestrians[1], [0.0; 4]);
    }
}
