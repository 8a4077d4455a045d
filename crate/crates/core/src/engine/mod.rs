//! Episode simulation: robot kinematics, crowd stepping, sensing, replanning,
//! reward, termination and observations.

pub mod observation;
pub mod replay;
pub mod reward;

pub use observation::{normalize_observation, Normalization, Observation, RawObservation, OBSERVATION_LEN};
pub use reward::{compute_reward, RewardBreakdown, RewardConfig, RewardInputs, RewardTerms};

use crate::crowd::{Crowd, CrowdConfig, RobotBody};
use crate::geometry::{Pose, Vec2};
use crate::gridmap::OccupancyGrid;
use crate::kinematics::{integrate, Action, OMEGA_MAX, V_MAX};
use crate::planner::{
    inflate_pedestrians, mark_footprints, nearest_free, plan_waypoints, replan_or_keep, should_replan, GaussianParams,
    GlobalPlannerKind, KeepReason, PlanError, PlanOutcome, Waypoints,
};
use crate::scenario::Scenario;
use crate::sensing::{ego_local_map, pedestrian_map, visible_pedestrians, PedestrianEstimate, SensorSpec};
use crate::world::World;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

/// How far the planner may move a blocked start point to the nearest free cell.
const START_SNAP_DISTANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    /// Map identifier (informational; the map itself is passed separately).
    pub map: String,
    pub dt: f64,
    pub max_steps: usize,
    pub goal_radius: f64,
    pub ped_collision_dist: f64,
    pub robot_radius: f64,
    /// Clearance used to build the global planner's static costmap.
    pub planner_inflation: f64,
    pub wall_hit_limit: u32,
    pub global_planner: GlobalPlannerKind,
    pub waypoint_spacing: f64,
    /// The waypoint cursor advances past waypoints within this distance.
    pub waypoint_reach: f64,
    pub d_norm: f64,
    pub ped_norm: f64,
    /// Give pedestrians a fresh goal when they reach theirs.
    pub respawn_goals: bool,
    pub reward: RewardConfig,
    pub gaussian: GaussianParams,
    pub sensor: SensorSpec,
    pub crowd: CrowdConfig,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            map: String::new(),
            dt: 0.1,
            max_steps: 500,
            goal_radius: 0.3,
            ped_collision_dist: 0.3,
            robot_radius: 0.15,
            planner_inflation: 0.25,
            wall_hit_limit: 5,
            global_planner: GlobalPlannerKind::Ppp,
            waypoint_spacing: 0.5,
            waypoint_reach: 0.3,
            d_norm: 15.0,
            ped_norm: 5.0,
            respawn_goals: true,
            reward: RewardConfig::default(),
            gaussian: GaussianParams::default(),
            sensor: SensorSpec::default(),
            crowd: CrowdConfig::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), EpisodeError> {
        let positive = [
            ("dt", self.dt),
            ("goal_radius", self.goal_radius),
            ("ped_collision_dist", self.ped_collision_dist),
            ("robot_radius", self.robot_radius),
            ("planner_inflation", self.planner_inflation),
            ("waypoint_spacing", self.waypoint_spacing),
            ("waypoint_reach", self.waypoint_reach),
            ("d_norm", self.d_norm),
            ("ped_norm", self.ped_norm),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EpisodeError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_steps == 0 || self.wall_hit_limit == 0 {
            return Err(EpisodeError::InvalidConfig("max_steps and wall_hit_limit must be positive".into()));
        }
        if !self.reward.is_valid() {
            return Err(EpisodeError::InvalidConfig("reward thresholds must satisfy d_thresh > d_col > 0".into()));
        }
        if !self.gaussian.is_valid() || !self.sensor.is_valid() {
            return Err(EpisodeError::InvalidConfig("invalid gaussian or sensor parameters".into()));
        }
        Ok(())
    }

    /// Shared per-map data matching this configuration.
    pub fn build_world(&self, grid: OccupancyGrid) -> World {
        World::new(grid, self.planner_inflation, &self.crowd)
    }

    pub fn normalization(&self) -> Normalization {
        Normalization { d_norm: self.d_norm, ped_norm: self.ped_norm }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Running,
    Success,
    PedestrianCollision,
    Timeout,
}

impl Outcome {
    pub fn is_terminal(self) -> bool {
        self != Outcome::Running
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Running => "running",
            Self::Success => "success",
            Self::PedestrianCollision => "pedestrian_collision",
            Self::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpisodeError {
    #[error("invalid episode config: {0}")]
    InvalidConfig(String),
    #[error("scenario rejected: {0}")]
    Scenario(String),
    #[error("no initial plan: {0}")]
    Plan(#[from] PlanError),
    #[error("episode already ended ({})", .0.name())]
    Terminal(Outcome),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    /// Action applied on the last step (after clamping or substitution).
    pub action: Action,
    pub consecutive_wall_hits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplanEvent {
    NewPlan,
    Kept(KeepReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub step_index: usize,
    pub applied_action: Action,
    pub wall_collision: bool,
    pub random_action: Option<Action>,
    pub replan: Option<ReplanEvent>,
    /// Distance to the nearest pedestrian, visible or not.
    pub min_pedestrian_distance: Option<f64>,
    pub goal_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: RewardBreakdown,
    pub outcome: Outcome,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
pub struct Episode {
    world: Arc<World>,
    config: EpisodeConfig,
    scenario: Scenario,
    rng: ChaCha8Rng,
    robot: RobotState,
    crowd: Crowd,
    waypoints: Waypoints,
    paid: Vec<bool>,
    visible: Vec<PedestrianEstimate>,
    step_index: usize,
    outcome: Outcome,
    replans: usize,
    total_reward: f64,
}

impl Episode {
    /// Places the robot and crowd, computes the initial plan and returns the
    /// first observation.
    pub fn reset(world: Arc<World>, config: EpisodeConfig, scenario: Scenario) -> Result<(Self, Observation), EpisodeError> {
        config.validate()?;
        if scenario.pedestrian_starts.len() != scenario.pedestrian_goals.len() {
            return Err(EpisodeError::Scenario("pedestrian starts and goals differ in length".into()));
        }
        let start = scenario.robot_start;
        if world.grid.disc_collides(start.position(), config.robot_radius) {
            return Err(EpisodeError::Scenario(format!("robot start ({}, {}) collides with a wall", start.x, start.y)));
        }
        let plan_start = nearest_free(&world.base, start.position(), START_SNAP_DISTANCE).unwrap_or(start.position());
        let (mut waypoints, _) = plan_waypoints(&world.base, plan_start, scenario.robot_goal, config.waypoint_spacing)?;
        waypoints.advance(start.position(), config.waypoint_reach);

        let mut crowd = Crowd::new(world.crowd_nav.clone(), config.crowd);
        for (&s, &g) in scenario.pedestrian_starts.iter().zip(&scenario.pedestrian_goals) {
            crowd.spawn(s, g);
        }
        let robot = RobotState { pose: start, action: Action::default(), consecutive_wall_hits: 0 };
        let visible = visible_pedestrians(&start, &crowd.pedestrians, &world.grid, &config.sensor);
        let mut episode = Self {
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            world,
            config,
            scenario,
            robot,
            crowd,
            paid: Vec::new(),
            waypoints,
            visible,
            step_index: 0,
            outcome: Outcome::Running,
            replans: 0,
            total_reward: 0.0,
        };
        episode.paid = episode.initial_paid();
        let obs = episode.observe();
        Ok((episode, obs))
    }

    /// Waypoints already within the bonus radius when a plan is adopted earn nothing.
    fn initial_paid(&self) -> Vec<bool> {
        let p = self.robot.pose.position();
        let r = self.config.reward.waypoint_radius;
        self.waypoints.points.iter().map(|w| w.distance(p) <= r).collect()
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn world(&self) -> &Arc<World> {
        &self.world
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn crowd(&self) -> &Crowd {
        &self.crowd
    }

    pub fn waypoints(&self) -> &Waypoints {
        &self.waypoints
    }

    pub fn visible_pedestrians(&self) -> &[PedestrianEstimate] {
        &self.visible
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn replans(&self) -> usize {
        self.replans
    }

    pub fn total_reward(&self) -> f64 {
        self.total_reward
    }

    pub fn goal(&self) -> Vec2 {
        self.scenario.robot_goal
    }

    /// Moves pedestrian `i` (tests and scripted setups).
    pub fn place_pedestrian(&mut self, i: usize, position: Vec2) {
        self.crowd.pedestrians[i].agent.position = position;
    }

    /// Overrides the robot pose (tests and scripted setups).
    pub fn place_robot(&mut self, pose: Pose) {
        self.robot.pose = pose;
    }

    fn collides(&self, pose: &Pose) -> bool {
        self.world.grid.disc_collides(pose.position(), self.config.robot_radius)
    }

    pub fn observe(&self) -> Observation {
        let pose = &self.robot.pose;
        let grid = &self.world.grid;
        let upcoming: Vec<Vec2> = self.waypoints.remaining().iter().take(observation::WAYPOINT_SLOTS).copied().collect();
        let raw = RawObservation::new(
            pose,
            self.scenario.robot_goal,
            ego_local_map(grid, pose),
            pedestrian_map(&self.visible),
            self.robot.action,
            &upcoming,
            self.visible.iter().take(observation::PEDESTRIAN_SLOTS).copied().collect(),
        );
        normalize_observation(&raw, &self.config.normalization())
    }

    /// Plan costmap for replanning: Gaussian inflation (PPP only) plus lethal
    /// pedestrian footprints of the currently visible pedestrians.
    pub fn planning_costmap(&self) -> crate::gridmap::Costmap {
        let base = &self.world.base;
        let mut cm = match self.config.global_planner {
            GlobalPlannerKind::Ppp => inflate_pedestrians(base, &self.visible, &self.config.gaussian),
            _ => base.clone(),
        };
        for p in &self.visible {
            mark_footprints(&mut cm, std::slice::from_ref(p), p.radius + self.config.robot_radius);
        }
        cm
    }

    fn maybe_replan(&mut self) -> Option<ReplanEvent> {
        if !self.config.global_planner.replans() || !should_replan(&self.waypoints, &self.visible) {
            return None;
        }
        let cm = self.planning_costmap();
        let pose = self.robot.pose;
        let Some(start) = nearest_free(&cm, pose.position(), START_SNAP_DISTANCE) else {
            return Some(ReplanEvent::Kept(KeepReason::Infeasible));
        };
        let steps_remaining = self.config.max_steps.saturating_sub(self.step_index);
        let outcome = replan_or_keep(
            &cm,
            &Pose::new(start.x, start.y, pose.theta),
            self.scenario.robot_goal,
            steps_remaining,
            self.config.dt,
            V_MAX,
            self.config.waypoint_spacing,
        );
        match outcome {
            PlanOutcome::NewPlan(mut wp) => {
                wp.advance(pose.position(), self.config.waypoint_reach);
                self.waypoints = wp;
                self.paid = self.initial_paid();
                self.replans += 1;
                Some(ReplanEvent::NewPlan)
            }
            PlanOutcome::KeptOldPlan(reason) => Some(ReplanEvent::Kept(reason)),
            PlanOutcome::NoPath => Some(ReplanEvent::Kept(KeepReason::Infeasible)),
        }
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult, EpisodeError> {
        if self.outcome.is_terminal() {
            return Err(EpisodeError::Terminal(self.outcome));
        }
        let dt = self.config.dt;
        let before = self.robot.pose;
        let target = self.waypoints.current();
        let (d_prev, b_prev) = before.polar_to(target);

        let mut applied = action.clamped();
        let mut pose = integrate(&before, applied.v, applied.omega, dt);
        let mut wall_collision = false;
        let mut random_action = None;
        if self.collides(&pose) {
            wall_collision = true;
            pose = Pose::new(before.x, before.y, pose.theta);
            self.robot.consecutive_wall_hits += 1;
            if self.robot.consecutive_wall_hits >= self.config.wall_hit_limit {
                self.robot.consecutive_wall_hits = 0;
                let r = Action::new(self.rng.gen_range(-V_MAX..=V_MAX), self.rng.gen_range(-OMEGA_MAX..=OMEGA_MAX));
                random_action = Some(r);
                applied = r;
                pose = integrate(&before, r.v, r.omega, dt);
                if self.collides(&pose) {
                    pose = Pose::new(before.x, before.y, pose.theta);
                }
            }
        } else {
            self.robot.consecutive_wall_hits = 0;
        }
        self.robot.pose = pose;
        self.robot.action = applied;

        let body = RobotBody {
            position: pose.position(),
            velocity: (pose.position() - before.position()) / dt,
            radius: self.config.robot_radius,
        };
        self.crowd.step(Some(&body), self.scenario.mode, dt);
        if self.config.respawn_goals {
            for i in 0..self.crowd.pedestrians.len() {
                if self.crowd.pedestrians[i].goal_reached {
                    // A pedestrian with no reachable goal simply stays put.
                    let _ = self.crowd.reassign_goal(i, &mut self.rng);
                }
            }
        }
        self.visible = visible_pedestrians(&pose, &self.crowd.pedestrians, &self.world.grid, &self.config.sensor);

        let position = pose.position();
        let bonus_radius = self.config.reward.waypoint_radius;
        let mut entered = 0;
        for (w, paid) in self.waypoints.points.iter().zip(self.paid.iter_mut()) {
            if !*paid && w.distance(position) <= bonus_radius {
                *paid = true;
                entered += 1;
            }
        }
        self.waypoints.advance(position, self.config.waypoint_reach);
        self.step_index += 1;

        let replan = self.maybe_replan();

        let min_ped = self
            .crowd
            .agents()
            .map(|a| a.position.distance(position))
            .min_by(|a, b| a.total_cmp(b));
        let goal_distance = position.distance(self.scenario.robot_goal);
        let outcome = if min_ped.is_some_and(|d| d < self.config.ped_collision_dist) {
            Outcome::PedestrianCollision
        } else if goal_distance <= self.config.goal_radius {
            Outcome::Success
        } else if self.step_index >= self.config.max_steps {
            Outcome::Timeout
        } else {
            Outcome::Running
        };
        self.outcome = outcome;

        let (d_now, b_now) = pose.polar_to(target);
        let inputs = RewardInputs {
            waypoint_distance_prev: d_prev,
            waypoint_distance: d_now,
            waypoint_angle_prev: b_prev.abs(),
            waypoint_angle: b_now.abs(),
            nearest_pedestrian: self.visible.first().map(|p| p.distance),
            waypoints_entered: entered,
            reached_goal: outcome == Outcome::Success,
            ped_collision: outcome == Outcome::PedestrianCollision,
            wall_collision,
        };
        let reward = compute_reward(&inputs, &self.config.reward);
        self.total_reward += reward.total;

        Ok(StepResult {
            observation: self.observe(),
            reward,
            outcome,
            info: StepInfo {
                step_index: self.step_index,
                applied_action: applied,
                wall_collision,
                random_action,
                replan,
                min_pedestrian_distance: min_ped,
                goal_distance,
            },
        })
    }
}
