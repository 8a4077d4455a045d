//! Episode start conditions and their sampling.

use crate::crowd::CrowdMode;
use crate::geometry::{Pose, Vec2};
use crate::gridmap::bfs_steps;
use crate::world::World;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub const MIN_GEODESIC: f64 = 5.0;
pub const MAX_GEODESIC: f64 = 15.0;
pub const MAX_ATTEMPTS: usize = 10_000;
/// Pedestrians spawn at least this far from the robot's start and goal.
pub const PEDESTRIAN_KEEPOUT: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("map has fewer than two traversable cells")]
    DegenerateMap,
    #[error("no start/goal pair within [{min}, {max}] m after {attempts} attempts")]
    AttemptsExceeded { min: f64, max: f64, attempts: usize },
    #[error("could not place pedestrian {0}")]
    PedestrianPlacement(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub robot_start: Pose,
    pub robot_goal: Vec2,
    pub pedestrian_starts: Vec<Vec2>,
    pub pedestrian_goals: Vec<Vec2>,
    pub mode: CrowdMode,
}

impl Scenario {
    pub fn n_pedestrians(&self) -> usize {
        self.pedestrian_starts.len()
    }
}

/// 4-connected BFS distance (cells x resolution) over the robot's traversable
/// cells, or `None` if either point is blocked or unreachable.
pub fn geodesic_distance(world: &World, from: Vec2, to: Vec2) -> Option<f64> {
    let base = &world.base;
    let s = base.world_to_cell(from).ok().filter(|&c| !base.is_lethal(c))?;
    let g = base.world_to_cell(to).ok().filter(|&c| !base.is_lethal(c))?;
    let steps = bfs_steps(&base.traversable_mask(), base.width(), base.height(), base.index(s));
    steps[base.index(g)].map(|n| n as f64 * base.resolution())
}

pub fn sample_scenario<R: Rng + ?Sized>(
    world: &World,
    rng: &mut R,
    n_pedestrians: usize,
    mode: CrowdMode,
) -> Result<Scenario, ScenarioError> {
    let base = &world.base;
    let mask = base.traversable_mask();
    let free: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if free.len() < 2 {
        return Err(ScenarioError::DegenerateMap);
    }
    let res = base.resolution();
    let mut attempts = 0;
    let (start_i, goal_i) = 'outer: loop {
        let s = free[rng.gen_range(0..free.len())];
        let steps = bfs_steps(&mask, base.width(), base.height(), s);
        for _ in 0..20 {
            if attempts >= MAX_ATTEMPTS {
                return Err(ScenarioError::AttemptsExceeded { min: MIN_GEODESIC, max: MAX_GEODESIC, attempts });
            }
            attempts += 1;
            let g = free[rng.gen_range(0..free.len())];
            if let Some(n) = steps[g] {
                let d = n as f64 * res;
                if (MIN_GEODESIC..=MAX_GEODESIC).contains(&d) {
                    break 'outer (s, g);
                }
            }
        }
    };
    let start = base.cell_to_world(base.cell_at(start_i));
    let goal = base.cell_to_world(base.cell_at(goal_i));
    let heading = rng.gen_range(-PI..PI);

    let nav = &world.crowd_nav;
    let reachable = nav.reachable_cells(start);
    let cm = &nav.costmap;
    let min_sep = 2.0 * nav.radius + 0.1;
    let mut starts: Vec<Vec2> = Vec::with_capacity(n_pedestrians);
    let mut goals = Vec::with_capacity(n_pedestrians);
    for k in 0..n_pedestrians {
        if reachable.is_empty() {
            return Err(ScenarioError::PedestrianPlacement(k));
        }
        let pick = |rng: &mut R| cm.cell_to_world(cm.cell_at(reachable[rng.gen_range(0..reachable.len())]));
        let mut placed = None;
        for _ in 0..1000 {
            let p = pick(rng);
            let clear_of_robot = p.distance(start) >= PEDESTRIAN_KEEPOUT && p.distance(goal) >= PEDESTRIAN_KEEPOUT;
            if clear_of_robot && starts.iter().all(|q| q.distance(p) >= min_sep) {
                placed = Some(p);
                break;
            }
        }
        let p = placed.ok_or(ScenarioError::PedestrianPlacement(k))?;
        starts.push(p);
        goals.push(pick(rng));
    }
    Ok(Scenario {
        seed: rng.gen(),
        robot_start: Pose::new(start.x, start.y, heading),
        robot_goal: goal,
        pedestrian_starts: starts,
        pedestrian_goals: goals,
        mode,
    })
}

/// Deterministic scenario from a seed.
pub fn sample_scenario_seeded(world: &World, seed: u64, n_pedestrians: usize, mode: CrowdMode) -> Result<Scenario, ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_scenario(world, &mut rng, n_pedestrians, mode)
}
