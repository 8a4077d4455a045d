//! Field-of-view sensor: ray casting, pedestrian visibility, and the two
//! robot-centred 100x100 observation maps.

use crate::crowd::Pedestrian;
use crate::geometry::{wrap_angle, Pose, Vec2};
use crate::gridmap::OccupancyGrid;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const EGO_SIZE: usize = 100;
pub const EGO_RESOLUTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub fov: f64,
    pub range: f64,
    pub ray_count: usize,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self { fov: PI / 2.0, range: 5.0, ray_count: 180 }
    }
}

impl SensorSpec {
    pub fn is_valid(&self) -> bool {
        self.fov > 0.0 && self.fov <= 2.0 * PI && self.range > 0.0 && self.ray_count >= 2
    }
}

/// A pedestrian that passed the visibility test, in robot-relative polar form
/// plus the world-frame state the planners need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedestrianEstimate {
    pub id: usize,
    pub distance: f64,
    pub bearing: f64,
    pub relative_heading: f64,
    pub position: Vec2,
    pub heading: f64,
    pub velocity: Vec2,
    pub radius: f64,
}

/// Distance along a ray to the first occupied cell (leaving the grid counts
/// as a hit), capped at `max_range`. Zero when the origin cell is occupied.
pub fn raycast(grid: &OccupancyGrid, origin: Vec2, angle: f64, max_range: f64) -> f64 {
    let res = grid.resolution();
    let rel = (origin - grid.origin()) / res;
    let (mut cx, mut cy) = (rel.x.floor() as i64, rel.y.floor() as i64);
    if grid.is_occupied_i(cx, cy) {
        return 0.0;
    }
    let dir = Vec2::from_angle(angle);
    let axis = |pos: f64, cell: i64, d: f64| -> (i64, f64, f64) {
        if d > 0.0 {
            (1, ((cell + 1) as f64 - pos) / d, 1.0 / d)
        } else if d < 0.0 {
            (-1, (pos - cell as f64) / -d, -1.0 / d)
        } else {
            (0, f64::INFINITY, f64::INFINITY)
        }
    };
    let (step_x, mut t_max_x, delta_x) = axis(rel.x, cx, dir.x);
    let (step_y, mut t_max_y, delta_y) = axis(rel.y, cy, dir.y);
    let limit = max_range / res;
    loop {
        let t;
        if t_max_x < t_max_y {
            t = t_max_x;
            cx += step_x;
            t_max_x += delta_x;
        } else {
            t = t_max_y;
            cy += step_y;
            t_max_y += delta_y;
        }
        if t >= limit {
            return max_range;
        }
        if grid.is_occupied_i(cx, cy) {
            return t * res;
        }
    }
}

/// Full scan of `spec.ray_count` rays spread evenly across the field of view.
pub fn scan(grid: &OccupancyGrid, pose: &Pose, spec: &SensorSpec) -> Vec<f64> {
    let n = spec.ray_count;
    (0..n)
        .map(|k| {
            let a = pose.theta - spec.fov / 2.0 + spec.fov * k as f64 / (n - 1) as f64;
            raycast(grid, pose.position(), a, spec.range)
        })
        .collect()
}

/// Pedestrians inside the field of view, within range, and not occluded,
/// sorted by ascending distance (ties by id).
pub fn visible_pedestrians(
    robot: &Pose,
    pedestrians: &[Pedestrian],
    grid: &OccupancyGrid,
    spec: &SensorSpec,
) -> Vec<PedestrianEstimate> {
    let mut out: Vec<PedestrianEstimate> = pedestrians
        .iter()
        .filter_map(|ped| {
            let a = &ped.agent;
            let (distance, bearing) = robot.polar_to(a.position);
            if distance > spec.range || bearing.abs() > spec.fov / 2.0 {
                return None;
            }
            let world_angle = (a.position - robot.position()).angle();
            if distance > 0.0 && raycast(grid, robot.position(), world_angle, distance) < distance {
                return None;
            }
            Some(PedestrianEstimate {
                id: a.id,
                distance,
                bearing,
                relative_heading: wrap_angle(ped.heading - robot.theta),
                position: a.position,
                heading: ped.heading,
                velocity: a.velocity,
                radius: a.radius,
            })
        })
        .collect();
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
    out
}

/// Binary 100x100 robot-centred map. Index `(i, j)`: `i` runs forward along
/// the robot heading, `j` runs to the robot's left; the robot sits at the
/// shared corner of cells (49, 49) and (50, 50).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EgoMap {
    cells: Vec<u8>,
}

impl Default for EgoMap {
    fn default() -> Self {
        Self { cells: vec![0; EGO_SIZE * EGO_SIZE] }
    }
}

impl EgoMap {
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.cells[i * EGO_SIZE + j]
    }

    pub fn set(&mut self, i: usize, j: usize) {
        self.cells[i * EGO_SIZE + j] = 1;
    }

    /// Row-major flat view (`i * 100 + j`).
    pub fn as_slice(&self) -> &[u8] {
        &self.cells
    }

    pub fn from_flat(cells: Vec<u8>) -> Option<Self> {
        (cells.len() == EGO_SIZE * EGO_SIZE && cells.iter().all(|&c| c <= 1)).then_some(Self { cells })
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c != 0).count()
    }

    /// Robot-frame center of cell `(i, j)`.
    pub fn cell_center(i: usize, j: usize) -> Vec2 {
        let half = EGO_SIZE as f64 / 2.0;
        Vec2::new((i as f64 - half + 0.5) * EGO_RESOLUTION, (j as f64 - half + 0.5) * EGO_RESOLUTION)
    }
}

/// Occupancy around the robot; world points outside the grid read as occupied.
pub fn ego_local_map(grid: &OccupancyGrid, robot: &Pose) -> EgoMap {
    let mut map = EgoMap::default();
    for i in 0..EGO_SIZE {
        for j in 0..EGO_SIZE {
            if grid.is_occupied_at(robot.to_world(EgoMap::cell_center(i, j))) {
                map.set(i, j);
            }
        }
    }
    map
}

/// Rasterises each visible pedestrian's footprint into a robot-centred map.
pub fn pedestrian_map(visible: &[PedestrianEstimate]) -> EgoMap {
    let mut map = EgoMap::default();
    let half = EGO_SIZE as f64 / 2.0;
    for ped in visible {
        let center = Vec2::from_angle(ped.bearing) * ped.distance;
        let lo = |c: f64| (((c - ped.radius) / EGO_RESOLUTION + half - 0.5).floor().max(0.0)) as usize;
        let hi = |c: f64| (((c + ped.radius) / EGO_RESOLUTION + half - 0.5).ceil().min(EGO_SIZE as f64 - 1.0)).max(0.0) as usize;
        for i in lo(center.x)..=hi(center.x) {
            for j in lo(center.y)..=hi(center.y) {
                if EgoMap::cell_center(i, j).distance(center) <= ped.radius {
                    map.set(i, j);
                }
            }
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crowd::{Agent, CrowdConfig};

    fn open(w: usize, h: usize) -> OccupancyGrid {
        OccupancyGrid::new(w, h, 0.1, Vec2::ZERO).unwrap()
    }

    pub(crate) fn ped(id: usize, p: Vec2, heading: f64) -> Pedestrian {
        Pedestrian {
            agent: Agent::new(id, p, p, &CrowdConfig::default()),
            route: vec![p],
            route_cursor: 0,
            goal_reached: false,
            heading,
        }
    }

    #[test]
    fn raycast_empty_map_hits_range() {
        let g = open(200, 200);
        assert_eq!(raycast(&g, Vec2::new(10.0, 10.0), 0.3, 5.0), 5.0);
    }

    #[test]
    fn raycast_wall_ahead() {
        let mut g = open(200, 100);
        for y in 0..100 {
            g.set(crate::gridmap::Cell::new(60, y), crate::gridmap::CellState::Occupied);
        }
        // wall face at x = 6.0; origin at x = 5.0
        let d = raycast(&g, Vec2::new(5.0, 5.05), 0.0, 5.0);
        assert!((d - 1.0).abs() <= 0.1, "{d}");
        // looking the other way the wall does not matter
        assert_eq!(raycast(&g, Vec2::new(6.5, 5.05), 0.0, 5.0), 5.0);
    }

    #[test]
    fn raycast_from_inside_wall_is_zero() {
        let mut g = open(10, 10);
        g.set(crate::gridmap::Cell::new(5, 5), crate::gridmap::CellState::Occupied);
        assert_eq!(raycast(&g, Vec2::new(0.55, 0.55), 1.0, 5.0), 0.0);
    }

    #[test]
    fn visibility_examples() {
        let g = open(200, 200);
        let robot = Pose::new(5.0, 5.0, 0.0);
        let spec = SensorSpec::default();
        let ahead = visible_pedestrians(&robot, &[ped(0, Vec2::new(7.0, 5.0), 0.0)], &g, &spec);
        assert_eq!(ahead.len(), 1);
        assert!((ahead[0].distance - 2.0).abs() < 1e-12 && ahead[0].bearing.abs() < 1e-12);

        let p = robot.to_world(Vec2::from_angle(0.8) * 2.0);
        assert!(visible_pedestrians(&robot, &[ped(0, p, 0.0)], &g, &spec).is_empty());
    }

    #[test]
    fn occluded_pedestrian_hidden() {
        let mut g = open(200, 200);
        for y in 0..200 {
            g.set(crate::gridmap::Cell::new(55, y), crate::gridmap::CellState::Occupied);
        }
        let robot = Pose::new(5.0, 10.0, 0.0);
        let out = visible_pedestrians(&robot, &[ped(0, Vec2::new(6.0, 10.0), 0.0)], &g, &SensorSpec::default());
        assert!(out.is_empty());
    }

    #[test]
    fn empty_room_ego_map_is_free() {
        let g = open(300, 300);
        let m = ego_local_map(&g, &Pose::new(15.0, 15.0, 0.4));
        assert_eq!(m.count(), 0);
    }

    #[test]
    fn no_pedestrians_empty_map() {
        assert_eq!(pedestrian_map(&[]).count(), 0);
    }
}
