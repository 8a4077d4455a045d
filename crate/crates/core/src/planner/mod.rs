//! Global planning: the proactive planner (Gaussian pedestrian inflation +
//! cost-weighted A*), the static-obstacle A* baseline, waypoint extraction,
//! and the replan trigger with its keep-the-old-path fallback.

pub mod astar;
pub mod gaussian;
pub mod waypoints;

pub use astar::{plan_astar, plan_astar_cells, GridPath, PlanError};
pub use gaussian::{gaussian_cost, inflate_pedestrians, mark_footprints, GaussianParams, ProximityMode};
pub use waypoints::{extract_waypoints, Waypoints};

use crate::geometry::{Pose, Vec2};
use crate::gridmap::{Cell, Costmap};
use crate::sensing::PedestrianEstimate;
use serde::{Deserialize, Serialize};

/// A visible pedestrian this close to an upcoming waypoint triggers a replan.
pub const REPLAN_DISTANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalPlannerKind {
    /// Gaussian-inflated replanning.
    Ppp,
    /// Replanning with pedestrians as static obstacles only.
    #[serde(rename = "astar")]
    AStar,
    /// One plan at reset; never replans.
    #[serde(rename = "fixed")]
    FixedAtStart,
}

impl GlobalPlannerKind {
    pub const ALL: [GlobalPlannerKind; 3] = [Self::Ppp, Self::AStar, Self::FixedAtStart];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ppp => "ppp",
            Self::AStar => "astar",
            Self::FixedAtStart => "fixed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }

    pub fn replans(self) -> bool {
        !matches!(self, Self::FixedAtStart)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeepReason {
    Infeasible,
    TimeBudgetExceeded,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanOutcome {
    NewPlan(Waypoints),
    KeptOldPlan(KeepReason),
    NoPath,
}

/// True iff a visible pedestrian is within 0.5 m of any waypoint at or after the cursor.
pub fn should_replan(wp: &Waypoints, visible: &[PedestrianEstimate]) -> bool {
    let limit_sq = REPLAN_DISTANCE * REPLAN_DISTANCE;
    visible
        .iter()
        .any(|p| wp.remaining().iter().any(|w| (p.position - *w).norm_sq() <= limit_sq))
}

/// Plans on `costmap` and converts the path into waypoints ending exactly at `goal`.
pub fn plan_waypoints(costmap: &Costmap, start: Vec2, goal: Vec2, spacing: f64) -> Result<(Waypoints, f64), PlanError> {
    let path = astar::plan_astar(costmap, start, goal)?;
    let mut polyline: Vec<Vec2> = path.cells.iter().map(|&c| costmap.cell_to_world(c)).collect();
    polyline[0] = start;
    *polyline.last_mut().unwrap() = goal;
    let length = polyline.windows(2).map(|w| w[0].distance(w[1])).sum();
    Ok((extract_waypoints(&polyline, spacing), length))
}

/// `point` itself if its cell is traversable, otherwise the nearest
/// traversable cell center within `max_distance` (ties by row-major index).
pub fn nearest_free(costmap: &Costmap, point: Vec2, max_distance: f64) -> Option<Vec2> {
    let here = costmap.world_to_cell(point).ok()?;
    if !costmap.is_lethal(here) {
        return Some(point);
    }
    let reach = (max_distance / costmap.resolution()).ceil() as i64;
    let mut best: Option<(f64, Vec2)> = None;
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let (x, y) = (here.x as i64 + dx, here.y as i64 + dy);
            if !costmap.contains(x, y) {
                continue;
            }
            let cell = Cell::new(x as usize, y as usize);
            if costmap.is_lethal(cell) {
                continue;
            }
            let c = costmap.cell_to_world(cell);
            let d = c.distance(point);
            if d <= max_distance && best.is_none_or(|(b, _)| d < b) {
                best = Some((d, c));
            }
        }
    }
    best.map(|(_, c)| c)
}

/// Replans on the pedestrian-aware costmap, keeping the current plan when no
/// path exists or the new one cannot be driven in the remaining steps.
pub fn replan_or_keep(
    costmap: &Costmap,
    robot: &Pose,
    goal: Vec2,
    steps_remaining: usize,
    dt: f64,
    v_max: f64,
    spacing: f64,
) -> PlanOutcome {
    match plan_waypoints(costmap, robot.position(), goal, spacing) {
        Err(_) => PlanOutcome::KeptOldPlan(KeepReason::Infeasible),
        Ok((_, length)) if length / v_max > steps_remaining as f64 * dt => {
            PlanOutcome::KeptOldPlan(KeepReason::TimeBudgetExceeded)
        }
        Ok((wp, _)) => PlanOutcome::NewPlan(wp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(p: Vec2) -> PedestrianEstimate {
        PedestrianEstimate {
            id: 0,
            distance: 1.0,
            bearing: 0.0,
            relative_heading: 0.0,
            position: p,
            heading: 0.0,
            velocity: Vec2::ZERO,
            radius: 0.15,
        }
    }

    fn line_wp() -> Waypoints {
        extract_waypoints(&[Vec2::ZERO, Vec2::new(5.0, 0.0)], 0.5)
    }

    #[test]
    fn replan_trigger_threshold() {
        let wp = line_wp();
        assert!(should_replan(&wp, &[est(Vec2::new(2.0, 0.4))]));
        assert!(!should_replan(&wp, &[est(Vec2::new(2.0, 0.6))]));
        assert!(!should_replan(&wp, &[]));
    }

    #[test]
    fn replan_ignores_passed_waypoints() {
        let mut wp = line_wp();
        wp.cursor = 6;
        assert!(!should_replan(&wp, &[est(Vec2::new(1.0, 0.1))]));
    }

    #[test]
    fn time_budget_rejects_long_detour() {
        let cm = Costmap::filled(400, 20, 0.1, Vec2::ZERO, 1.0);
        let robot = Pose::new(0.55, 1.05, 0.0);
        // 35 m away, 100 steps of 0.1 s at 0.5 m/s covers 5 m
        let out = replan_or_keep(&cm, &robot, Vec2::new(35.55, 1.05), 100, 0.1, 0.5, 0.5);
        assert_eq!(out, PlanOutcome::KeptOldPlan(KeepReason::TimeBudgetExceeded));
        let ok = replan_or_keep(&cm, &robot, Vec2::new(3.05, 1.05), 100, 0.1, 0.5, 0.5);
        assert!(matches!(ok, PlanOutcome::NewPlan(ref w) if w.cursor == 0));
    }

    #[test]
    fn names_round_trip() {
        for k in GlobalPlannerKind::ALL {
            assert_eq!(GlobalPlannerKind::parse(k.name()), Some(k));
        }
        assert_eq!(GlobalPlannerKind::parse("dijkstra"), None);
    }
}
