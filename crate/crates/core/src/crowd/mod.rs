//! ORCA pedestrians.
//!
//! Every pedestrian solves a small velocity LP per step: one half-plane per
//! nearby agent (shared responsibility 1/2) and one per nearby wall segment
//! (full responsibility). In cooperative mode the robot is one of those
//! agents; in uncooperative mode pedestrians ignore it entirely.

mod lp;
mod walls;

pub use lp::{solve_velocity_lp, solve_velocity_lp_with_hard, violation};
pub use walls::{extract_wall_segments, WallIndex, WallSegment};

use crate::geometry::{point_segment_closest, Vec2};
use crate::gridmap::{base_costmap, connected_components, Cell, Costmap, OccupancyGrid};
use crate::planner::astar::plan_astar;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CrowdError {
    #[error("pedestrian {0} has no reachable free cell to use as a goal")]
    NoReachableGoal(usize),
    #[error("pedestrian index {0} out of range")]
    UnknownAgent(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrowdMode {
    Cooperative,
    Uncooperative,
}

impl CrowdMode {
    pub const ALL: [CrowdMode; 2] = [Self::Cooperative, Self::Uncooperative];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cooperative => "cooperative",
            Self::Uncooperative => "uncooperative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cooperative" | "coop" => Some(Self::Cooperative),
            "uncooperative" | "uncoop" => Some(Self::Uncooperative),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    Agent,
    Obstacle,
}

/// Velocity-space half-plane. Permitted velocities lie to the left of
/// `direction` (a unit vector) through `point`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub point: Vec2,
    pub direction: Vec2,
    pub kind: ConstraintKind,
}

impl HalfPlane {
    pub fn permits(&self, v: Vec2, tolerance: f64) -> bool {
        violation(self, v) <= tolerance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrowdConfig {
    pub radius: f64,
    pub preferred_speed: f64,
    pub max_speed: f64,
    pub neighbor_distance: f64,
    pub max_neighbors: usize,
    pub time_horizon_agents: f64,
    pub time_horizon_obstacles: f64,
    pub goal_tolerance: f64,
    /// Extra clearance added to the radius when planning pedestrian routes.
    pub route_clearance: f64,
}

impl Default for CrowdConfig {
    fn default() -> Self {
        Self {
            radius: 0.15,
            preferred_speed: 0.5,
            max_speed: 0.6,
            neighbor_distance: 5.0,
            max_neighbors: 10,
            time_horizon_agents: 2.0,
            time_horizon_obstacles: 1.0,
            goal_tolerance: 0.3,
            route_clearance: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: usize,
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub preferred_speed: f64,
    pub max_speed: f64,
    pub goal: Vec2,
    pub neighbor_distance: f64,
    pub max_neighbors: usize,
    pub time_horizon_agents: f64,
    pub time_horizon_obstacles: f64,
}

impl Agent {
    pub fn new(id: usize, position: Vec2, goal: Vec2, config: &CrowdConfig) -> Self {
        Self {
            id,
            position,
            velocity: Vec2::ZERO,
            radius: config.radius,
            preferred_speed: config.preferred_speed,
            max_speed: config.max_speed,
            goal,
            neighbor_distance: config.neighbor_distance,
            max_neighbors: config.max_neighbors,
            time_horizon_agents: config.time_horizon_agents,
            time_horizon_obstacles: config.time_horizon_obstacles,
        }
    }

    /// Distance at which wall segments can constrain this agent.
    pub fn obstacle_range(&self) -> f64 {
        self.time_horizon_obstacles * self.max_speed + self.radius
    }
}

/// The robot as seen by cooperative pedestrians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotBody {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

/// ORCA constraints for `agent`: wall half-planes first, then one per
/// neighbour (nearest first, at most `max_neighbors`, within `neighbor_distance`).
pub fn orca_halfplanes(agent: &Agent, neighbors: &[Agent], walls: &[WallSegment], dt: f64) -> Vec<HalfPlane> {
    assert!(dt > 0.0, "dt must be positive");
    let mut lines = Vec::new();

    let range = agent.obstacle_range();
    for wall in walls {
        let (dist, closest) = point_segment_closest(agent.position, wall.a, wall.b);
        if dist > range {
            continue;
        }
        if let Some(line) = wall_line(agent, dist, closest, dt) {
            lines.push(line);
        }
    }

    let mut nearby: Vec<(f64, &Agent)> = neighbors
        .iter()
        .map(|n| ((n.position - agent.position).norm_sq(), n))
        .filter(|(d_sq, _)| *d_sq <= agent.neighbor_distance * agent.neighbor_distance)
        .collect();
    nearby.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)));
    for (_, other) in nearby.into_iter().take(agent.max_neighbors) {
        lines.push(agent_line(agent, other, 0.5, dt));
    }
    lines
}

/// Half-plane keeping the agent clear of a wall segment for the obstacle
/// horizon: the segment lies beyond the supporting line through its closest
/// point, so bounding the approach speed along that normal is sufficient.
fn wall_line(agent: &Agent, dist: f64, closest: Vec2, dt: f64) -> Option<HalfPlane> {
    let normal = (closest - agent.position).normalized();
    if normal == Vec2::ZERO {
        return None;
    }
    let gap = dist - agent.radius;
    let limit = if gap > 0.0 { gap / agent.time_horizon_obstacles } else { gap / dt };
    Some(HalfPlane { point: normal * limit, direction: normal.perp(), kind: ConstraintKind::Obstacle })
}

fn agent_line(agent: &Agent, other: &Agent, responsibility: f64, dt: f64) -> HalfPlane {
    let relative_position = other.position - agent.position;
    let relative_velocity = agent.velocity - other.velocity;
    let dist_sq = relative_position.norm_sq();
    let combined_radius = agent.radius + other.radius;
    let combined_radius_sq = combined_radius * combined_radius;
    let inv_horizon = 1.0 / agent.time_horizon_agents;

    let direction;
    let u;
    if dist_sq > combined_radius_sq {
        // Vector from the cut-off circle center to the relative velocity.
        let w = relative_velocity - relative_position * inv_horizon;
        let w_len_sq = w.norm_sq();
        let dot1 = w.dot(relative_position);
        if dot1 < 0.0 && dot1 * dot1 > combined_radius_sq * w_len_sq {
            // Project on the cut-off circle.
            let w_len = w_len_sq.sqrt();
            let unit_w = w / w_len;
            direction = Vec2::new(unit_w.y, -unit_w.x);
            u = unit_w * (combined_radius * inv_horizon - w_len);
        } else {
            // Project on the nearer leg of the cone.
            let leg = (dist_sq - combined_radius_sq).sqrt();
            let p = relative_position;
            direction = if p.det(w) > 0.0 {
                Vec2::new(p.x * leg - p.y * combined_radius, p.x * combined_radius + p.y * leg) / dist_sq
            } else {
                -Vec2::new(p.x * leg + p.y * combined_radius, -p.x * combined_radius + p.y * leg) / dist_sq
            };
            u = direction * relative_velocity.dot(direction) - relative_velocity;
        }
    } else {
        // Already overlapping: resolve within one step.
        let inv_dt = 1.0 / dt;
        let w = relative_velocity - relative_position * inv_dt;
        let w_len = w.norm();
        let unit_w = if w_len > 0.0 {
            w / w_len
        } else if relative_position.norm_sq() > 0.0 {
            -relative_position.normalized()
        } else {
            // Coincident centres: pick a deterministic separation axis by id.
            if agent.id < other.id {
                Vec2::new(-1.0, 0.0)
            } else {
                Vec2::new(1.0, 0.0)
            }
        };
        direction = Vec2::new(unit_w.y, -unit_w.x);
        u = unit_w * (combined_radius * inv_dt - w_len);
    }
    HalfPlane { point: agent.velocity + u * responsibility, direction, kind: ConstraintKind::Agent }
}

/// Map-derived data shared by every crowd on the same grid.
#[derive(Debug)]
pub struct CrowdNavMap {
    pub grid: Arc<OccupancyGrid>,
    pub costmap: Costmap,
    /// Pedestrian body radius the route costmap was built for.
    pub radius: f64,
    labels: Vec<Option<u32>>,
    component_cells: Vec<Vec<usize>>,
    walls: WallIndex,
}

impl CrowdNavMap {
    pub fn new(grid: Arc<OccupancyGrid>, config: &CrowdConfig) -> Self {
        let costmap = base_costmap(&grid, config.radius + config.route_clearance);
        let mask = costmap.traversable_mask();
        let (labels, count) = connected_components(&mask, grid.width(), grid.height());
        let mut component_cells = vec![Vec::new(); count as usize];
        for (i, label) in labels.iter().enumerate() {
            if let Some(l) = label {
                component_cells[*l as usize].push(i);
            }
        }
        let walls = WallIndex::new(&grid, 1.0);
        Self { grid, costmap, radius: config.radius, labels, component_cells, walls }
    }

    pub fn walls(&self) -> &WallIndex {
        &self.walls
    }

    /// Traversable cells in the same component as `point`, snapping to the
    /// nearest traversable cell when `point` sits in inflated space.
    pub fn reachable_cells(&self, point: Vec2) -> &[usize] {
        match self.nearest_traversable(point).and_then(|c| self.labels[self.costmap.index(c)]) {
            Some(label) => &self.component_cells[label as usize],
            None => &[],
        }
    }

    pub fn nearest_traversable(&self, point: Vec2) -> Option<Cell> {
        let (x, y) = self.grid.world_to_cell_unchecked(point);
        let w = self.grid.width() as i64;
        let h = self.grid.height() as i64;
        let start = (x.clamp(0, w - 1), y.clamp(0, h - 1));
        let mut seen = vec![false; self.grid.len()];
        let mut queue = VecDeque::from([start]);
        seen[(start.1 * w + start.0) as usize] = true;
        while let Some((cx, cy)) = queue.pop_front() {
            let cell = Cell::new(cx as usize, cy as usize);
            if !self.costmap.is_lethal(cell) {
                return Some(cell);
            }
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (cx + dx, cy + dy);
                if nx >= 0 && ny >= 0 && nx < w && ny < h && !seen[(ny * w + nx) as usize] {
                    seen[(ny * w + nx) as usize] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
        None
    }

    /// Straight-line traversability on the route costmap.
    pub fn line_of_sight(&self, from: Vec2, to: Vec2) -> bool {
        let step = self.grid.resolution() * 0.5;
        let len = from.distance(to);
        let n = (len / step).ceil().max(1.0) as usize;
        (0..=n).all(|k| {
            let p = from + (to - from) * (k as f64 / n as f64);
            self.costmap.world_to_cell(p).map(|c| !self.costmap.is_lethal(c)).unwrap_or(false)
        })
    }
}

/// One ORCA pedestrian plus its navigation state.
#[derive(Debug, Clone, PartialEq)]
pub struct Pedestrian {
    pub agent: Agent,
    pub route: Vec<Vec2>,
    pub route_cursor: usize,
    pub goal_reached: bool,
    /// Direction of the last non-negligible velocity.
    pub heading: f64,
}

#[derive(Debug, Clone)]
pub struct Crowd {
    nav: Arc<CrowdNavMap>,
    config: CrowdConfig,
    pub pedestrians: Vec<Pedestrian>,
}

const ROUTE_LOOKAHEAD: usize = 20;
const ROUTE_ADVANCE: f64 = 0.3;
const HEADING_SPEED_EPS: f64 = 1e-3;

impl Crowd {
    pub fn new(nav: Arc<CrowdNavMap>, config: CrowdConfig) -> Self {
        Self { nav, config, pedestrians: Vec::new() }
    }

    pub fn config(&self) -> &CrowdConfig {
        &self.config
    }

    pub fn nav(&self) -> &Arc<CrowdNavMap> {
        &self.nav
    }

    pub fn agents(&self) -> impl Iterator<Item = &Agent> {
        self.pedestrians.iter().map(|p| &p.agent)
    }

    /// Adds a pedestrian at `start` heading for `goal`; returns its index.
    pub fn spawn(&mut self, start: Vec2, goal: Vec2) -> usize {
        let id = self.pedestrians.len();
        let agent = Agent::new(id, start, goal, &self.config);
        let heading = (goal - start).angle();
        self.pedestrians.push(Pedestrian { agent, route: Vec::new(), route_cursor: 0, goal_reached: false, heading });
        self.set_goal(id, goal);
        id
    }

    /// Points pedestrian `i` at a new goal and recomputes its route.
    pub fn set_goal(&mut self, i: usize, goal: Vec2) {
        let route = self.plan_route(self.pedestrians[i].agent.position, goal);
        let ped = &mut self.pedestrians[i];
        ped.agent.goal = goal;
        ped.route = route;
        ped.route_cursor = 0;
        ped.goal_reached = false;
    }

    fn plan_route(&self, from: Vec2, goal: Vec2) -> Vec<Vec2> {
        let cm = &self.nav.costmap;
        let start = self.nav.nearest_traversable(from);
        let end = self.nav.nearest_traversable(goal);
        if let (Some(s), Some(e)) = (start, end) {
            if let Ok(path) = plan_astar(cm, cm.cell_to_world(s), cm.cell_to_world(e)) {
                let mut route: Vec<Vec2> = path.cells.iter().map(|&c| cm.cell_to_world(c)).collect();
                route.push(goal);
                return route;
            }
        }
        vec![goal]
    }

    /// Preferred velocity along the route to the goal.
    pub fn preferred_velocity(&self, i: usize, dt: f64) -> Vec2 {
        let ped = &self.pedestrians[i];
        let agent = &ped.agent;
        let target = if self.nav.line_of_sight(agent.position, agent.goal) {
            agent.goal
        } else {
            let last = ped.route.len().saturating_sub(1);
            let window_end = (ped.route_cursor + ROUTE_LOOKAHEAD).min(last);
            (ped.route_cursor..=window_end)
                .rev()
                .map(|j| ped.route[j])
                .find(|&p| self.nav.line_of_sight(agent.position, p))
                .unwrap_or(ped.route[ped.route_cursor.min(last)])
        };
        let to_target = target - agent.position;
        let dist = to_target.norm();
        if dist < 1e-12 {
            return Vec2::ZERO;
        }
        if target == agent.goal && dist < agent.preferred_speed * dt {
            return to_target / dt;
        }
        to_target * (agent.preferred_speed / dist)
    }

    /// ORCA constraints for pedestrian `i` against the current snapshot.
    pub fn constraints_for(&self, i: usize, robot: Option<&RobotBody>, mode: CrowdMode, dt: f64) -> Vec<HalfPlane> {
        let agent = &self.pedestrians[i].agent;
        let mut neighbors: Vec<Agent> =
            self.pedestrians.iter().filter(|p| p.agent.id != agent.id).map(|p| p.agent).collect();
        if let (CrowdMode::Cooperative, Some(robot)) = (mode, robot) {
            neighbors.push(Agent {
                id: usize::MAX,
                position: robot.position,
                velocity: robot.velocity,
                radius: robot.radius,
                preferred_speed: 0.0,
                max_speed: robot.velocity.norm(),
                goal: robot.position,
                neighbor_distance: 0.0,
                max_neighbors: 0,
                time_horizon_agents: agent.time_horizon_agents,
                time_horizon_obstacles: agent.time_horizon_obstacles,
            });
        }
        let walls = self.nav.walls.query(agent.position, agent.obstacle_range());
        orca_halfplanes(agent, &neighbors, &walls, dt)
    }

    /// Advances every pedestrian by one step. Constraints are computed from
    /// the pre-step snapshot, then all positions are integrated together.
    pub fn step(&mut self, robot: Option<&RobotBody>, mode: CrowdMode, dt: f64) {
        assert!(dt > 0.0, "dt must be positive");
        let new_velocities: Vec<Vec2> = (0..self.pedestrians.len())
            .map(|i| {
                let lines = self.constraints_for(i, robot, mode, dt);
                let hard = lines.iter().take_while(|l| l.kind == ConstraintKind::Obstacle).count();
                let preferred = self.preferred_velocity(i, dt);
                solve_velocity_lp_with_hard(&lines, hard, preferred, self.pedestrians[i].agent.max_speed)
            })
            .collect();
        let tolerance = self.config.goal_tolerance;
        for (ped, v) in self.pedestrians.iter_mut().zip(new_velocities) {
            ped.agent.velocity = v;
            ped.agent.position += v * dt;
            if v.norm() >= HEADING_SPEED_EPS {
                ped.heading = v.angle();
            }
            let last = ped.route.len().saturating_sub(1);
            while ped.route_cursor < last && ped.agent.position.distance(ped.route[ped.route_cursor]) < ROUTE_ADVANCE {
                ped.route_cursor += 1;
            }
            if ped.agent.position.distance(ped.agent.goal) <= tolerance {
                ped.goal_reached = true;
            }
        }
    }

    /// Samples a new goal uniformly over traversable cells reachable from the
    /// pedestrian's position and replans its route.
    pub fn reassign_goal<R: Rng + ?Sized>(&mut self, i: usize, rng: &mut R) -> Result<Vec2, CrowdError> {
        let ped = self.pedestrians.get(i).ok_or(CrowdError::UnknownAgent(i))?;
        let position = ped.agent.position;
        let cells = self.nav.reachable_cells(position);
        if cells.is_empty() {
            return Err(CrowdError::NoReachableGoal(i));
        }
        let cm = &self.nav.costmap;
        // Prefer goals beyond the reach tolerance so the new goal is not instantly met.
        let mut goal = cm.cell_to_world(cm.cell_at(cells[rng.gen_range(0..cells.len())]));
        for _ in 0..32 {
            if goal.distance(position) > 2.0 * self.config.goal_tolerance {
                break;
            }
            goal = cm.cell_to_world(cm.cell_at(cells[rng.gen_range(0..cells.len())]));
        }
        self.set_goal(i, goal);
        Ok(goal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn agent_at(id: usize, p: Vec2, goal: Vec2) -> Agent {
        let mut a = Agent::new(id, p, goal, &CrowdConfig::default());
        a.radius = 0.3;
        a
    }

    fn open_nav(w: usize, h: usize) -> Arc<CrowdNavMap> {
        let grid = Arc::new(OccupancyGrid::new(w, h, 0.1, Vec2::ZERO).unwrap());
        Arc::new(CrowdNavMap::new(grid, &CrowdConfig::default()))
    }

    #[test]
    fn no_neighbors_no_walls_is_empty() {
        let a = agent_at(0, Vec2::ZERO, Vec2::new(1.0, 0.0));
        assert!(orca_halfplanes(&a, &[], &[], 0.1).is_empty());
    }

    #[test]
    fn out_of_range_neighbor_ignored() {
        let a = agent_at(0, Vec2::ZERO, Vec2::ZERO);
        let b = agent_at(1, Vec2::new(10.0, 0.0), Vec2::ZERO);
        assert!(orca_halfplanes(&a, &[b], &[], 0.1).is_empty());
    }

    #[test]
    fn neighbor_cap_keeps_nearest() {
        let mut a = agent_at(0, Vec2::ZERO, Vec2::ZERO);
        a.max_neighbors = 2;
        let others: Vec<Agent> =
            (1..6).map(|i| agent_at(i, Vec2::new(i as f64, 0.0), Vec2::ZERO)).rev().collect();
        let lines = orca_halfplanes(&a, &others, &[], 0.1);
        assert_eq!(lines.len(), 2);
        let two = orca_halfplanes(&a, &others[3..], &[], 0.1);
        assert_eq!(lines, two);
    }

    #[test]
    fn halfplane_directions_are_unit() {
        let a = agent_at(0, Vec2::ZERO, Vec2::ZERO);
        let mut b = agent_at(1, Vec2::new(1.0, 0.3), Vec2::ZERO);
        b.velocity = Vec2::new(-0.4, 0.1);
        let wall = WallSegment { a: Vec2::new(-1.0, -0.5), b: Vec2::new(1.0, -0.5) };
        for l in orca_halfplanes(&a, &[b], &[wall], 0.1) {
            assert!((l.direction.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn wall_line_stops_approach() {
        let a = agent_at(0, Vec2::ZERO, Vec2::ZERO);
        let wall = WallSegment { a: Vec2::new(0.5, -1.0), b: Vec2::new(0.5, 1.0) };
        let lines = orca_halfplanes(&a, &[], &[wall], 0.1);
        assert_eq!(lines.len(), 1);
        let v = solve_velocity_lp(&lines, Vec2::new(0.6, 0.0), 0.6);
        // gap 0.2 m over a 1 s horizon
        assert!(v.x <= 0.2 + 1e-9);
        let slide = solve_velocity_lp(&lines, Vec2::new(0.0, 0.5), 0.6);
        assert!((slide - Vec2::new(0.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn straight_line_step_moves_expected_distance() {
        let nav = open_nav(100, 40);
        let mut crowd = Crowd::new(nav, CrowdConfig::default());
        crowd.spawn(Vec2::new(2.0, 2.0), Vec2::new(7.0, 2.0));
        crowd.step(None, CrowdMode::Uncooperative, 0.1);
        let p = crowd.pedestrians[0].agent.position;
        assert!((p - Vec2::new(2.05, 2.0)).norm() < 1e-12, "{p:?}");
    }

    #[test]
    fn zero_agents_is_noop() {
        let mut crowd = Crowd::new(open_nav(10, 10), CrowdConfig::default());
        crowd.step(None, CrowdMode::Cooperative, 0.1);
        assert!(crowd.pedestrians.is_empty());
    }

    #[test]
    fn goal_flag_set_on_arrival() {
        let mut crowd = Crowd::new(open_nav(60, 60), CrowdConfig::default());
        crowd.spawn(Vec2::new(2.0, 2.0), Vec2::new(2.4, 2.0));
        for _ in 0..10 {
            crowd.step(None, CrowdMode::Uncooperative, 0.1);
        }
        assert!(crowd.pedestrians[0].goal_reached);
    }

    #[test]
    fn reassign_goal_is_seeded_and_reachable() {
        let grid = OccupancyGrid::from_ascii(
            &[
                "####################",
                "#........#.........#",
                "#........#.........#",
                "#........#.........#",
                "#........#.........#",
                "#........#.........#",
                "####################",
            ],
            0.1,
            Vec2::ZERO,
        )
        .unwrap();
        let cfg = CrowdConfig { radius: 0.05, route_clearance: 0.0, ..CrowdConfig::default() };
        let nav = Arc::new(CrowdNavMap::new(Arc::new(grid), &cfg));
        let mut goals = Vec::new();
        for _ in 0..2 {
            let mut crowd = Crowd::new(nav.clone(), cfg);
            crowd.spawn(Vec2::new(0.35, 0.35), Vec2::new(0.35, 0.35));
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let g = crowd.reassign_goal(0, &mut rng).unwrap();
            assert!(g.x < 0.9, "goal {g:?} escaped the sealed room");
            goals.push(g);
        }
        assert_eq!(goals[0], goals[1]);
    }
}
