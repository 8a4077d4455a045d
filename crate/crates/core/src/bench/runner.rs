//! Episode execution for planner combinations.

use crate::crowd::CrowdMode;
use crate::engine::replay::ReplayRecorder;
use crate::engine::{Episode, EpisodeConfig, EpisodeError, Observation, Outcome, StepResult};
use crate::geometry::Vec2;
use crate::kinematics::Action;
use crate::local::{dwa_step, follow_guarded, DwaConfig, DwaWorld, FollowerConfig, LocalPlannerKind};
use crate::planner::GlobalPlannerKind;
use crate::scenario::Scenario;
use crate::world::World;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlannerCombo {
    pub global: GlobalPlannerKind,
    pub local: LocalPlannerKind,
}

impl PlannerCombo {
    pub const fn new(global: GlobalPlannerKind, local: LocalPlannerKind) -> Self {
        Self { global, local }
    }

    /// Parses `global+local`, e.g. `ppp+follower`.
    pub fn parse(s: &str) -> Option<Self> {
        let (g, l) = s.split_once('+')?;
        Some(Self { global: GlobalPlannerKind::parse(g)?, local: LocalPlannerKind::parse(l)? })
    }
}

impl fmt::Display for PlannerCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.global.name(), self.local.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("external policy unavailable: {0}")]
pub struct PolicyError(pub String);

/// A policy outside the simulator, e.g. a trained network behind a socket.
pub trait ExternalPolicy {
    /// Called once per episode with the first observation.
    fn begin(&mut self, observation: &Observation) -> Result<Action, PolicyError>;
    /// Called after every step with the step result.
    fn next(&mut self, result: &StepResult) -> Result<Action, PolicyError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPlannerConfig {
    pub dwa: DwaConfig,
    pub follower: FollowerConfig,
    /// DWA steers toward the first waypoint at least this far ahead.
    pub dwa_lookahead: f64,
}

impl Default for LocalPlannerConfig {
    fn default() -> Self {
        Self { dwa: DwaConfig::default(), follower: FollowerConfig::default(), dwa_lookahead: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub map: String,
    pub scenario_index: usize,
    pub seed: u64,
    pub pedestrians: usize,
    pub mode: CrowdMode,
    pub combo: PlannerCombo,
    /// `None` when the episode was aborted.
    pub outcome: Option<Outcome>,
    pub steps: usize,
    pub reward: f64,
    /// Steps whose nearest-pedestrian distance was below the PSV threshold.
    pub psv_steps: usize,
    pub min_distance: Option<f64>,
    pub replans: usize,
    pub wall_hits: usize,
    #[serde(skip)]
    pub min_distance_trace: Vec<Option<f64>>,
    #[serde(skip)]
    pub abort_reason: Option<String>,
}

impl EpisodeRecord {
    pub fn aborted(&self) -> bool {
        self.outcome.is_none()
    }

    /// Fraction of steps in personal-space violation.
    pub fn psv_fraction(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.psv_steps as f64 / self.steps as f64
        }
    }
}

/// Per-run settings shared by every episode of a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub episode: EpisodeConfig,
    pub local: LocalPlannerConfig,
    pub psv_distance: f64,
    /// Also produce a replay log.
    pub record: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self { episode: EpisodeConfig::default(), local: LocalPlannerConfig::default(), psv_distance: 0.45, record: false }
    }
}

fn local_action(episode: &Episode, kind: LocalPlannerKind, cfg: &LocalPlannerConfig) -> Action {
    let pose = episode.robot().pose;
    let remaining = episode.waypoints().remaining();
    match kind {
        LocalPlannerKind::ScriptedFollower | LocalPlannerKind::ExternalPolicy => follow_guarded(
            &pose,
            &episode.waypoints().points,
            episode.waypoints().cursor,
            &cfg.follower,
            &episode.world().grid,
            episode.config().robot_radius,
            episode.config().dt,
        ),
        LocalPlannerKind::Dwa => {
            let target: Vec2 = remaining
                .iter()
                .copied()
                .find(|w| w.distance(pose.position()) >= cfg.dwa_lookahead)
                .unwrap_or_else(|| *remaining.last().expect("plans are nonempty"));
            let world = episode.world();
            let ctx = DwaWorld {
                grid: &world.grid,
                distance: &world.distance,
                pedestrians: episode.visible_pedestrians(),
                robot_radius: episode.config().robot_radius,
                collision_distance: episode.config().ped_collision_dist,
            };
            dwa_step(&pose, episode.robot().action, target, &ctx, &cfg.dwa, episode.config().dt).action
        }
    }
}

/// Result of one episode plus its replay log when recording was requested.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRun {
    pub record: EpisodeRecord,
    pub replay: Option<String>,
}

/// Drives an episode to termination with the combo's planners. The external
/// policy is only consulted for `LocalPlannerKind::ExternalPolicy`.
pub fn run_episode(
    world: Arc<World>,
    map: &str,
    scenario_index: usize,
    combo: PlannerCombo,
    scenario: Scenario,
    settings: &RunSettings,
    mut policy: Option<&mut dyn ExternalPolicy>,
) -> Result<EpisodeRun, EpisodeError> {
    let mut config = settings.episode.clone();
    config.global_planner = combo.global;
    if config.map.is_empty() {
        config.map = map.to_string();
    }
    let mut record = EpisodeRecord {
        map: map.to_string(),
        scenario_index,
        seed: scenario.seed,
        pedestrians: scenario.n_pedestrians(),
        mode: scenario.mode,
        combo,
        outcome: None,
        steps: 0,
        reward: 0.0,
        psv_steps: 0,
        min_distance: None,
        replans: 0,
        wall_hits: 0,
        min_distance_trace: Vec::new(),
        abort_reason: None,
    };
    let (mut episode, first_obs) = Episode::reset(world, config, scenario)?;
    let mut recorder = settings.record.then(|| ReplayRecorder::new(&episode));
    let external = combo.local == LocalPlannerKind::ExternalPolicy;
    let mut pending = None;
    if external {
        let Some(p) = policy.as_deref_mut() else {
            record.abort_reason = Some("no external policy connected".into());
            return Ok(EpisodeRun { record, replay: None });
        };
        match p.begin(&first_obs) {
            Ok(a) => pending = Some(a),
            Err(e) => {
                record.abort_reason = Some(e.0);
                return Ok(EpisodeRun { record, replay: None });
            }
        }
    }
    while !episode.outcome().is_terminal() {
        let action = match pending.take() {
            Some(a) => a,
            None => local_action(&episode, combo.local, &settings.local),
        };
        let result = episode.step(action)?;
        if let Some(r) = recorder.as_mut() {
            r.record(action, &result, &episode);
        }
        let d = result.info.min_pedestrian_distance;
        record.min_distance_trace.push(d);
        if d.is_some_and(|d| d < settings.psv_distance) {
            record.psv_steps += 1;
        }
        if let Some(d) = d {
            record.min_distance = Some(record.min_distance.map_or(d, |m: f64| m.min(d)));
        }
        record.wall_hits += result.info.wall_collision as usize;
        record.reward += result.reward.total;
        if external && !result.outcome.is_terminal() {
            match policy.as_deref_mut().expect("checked above").next(&result) {
                Ok(a) => pending = Some(a),
                Err(e) => {
                    record.steps = episode.step_index();
                    record.abort_reason = Some(e.0);
                    return Ok(EpisodeRun { record, replay: None });
                }
            }
        }
    }
    record.outcome = Some(episode.outcome());
    record.steps = episode.step_index();
    record.replans = episode.replans();
    let replay = recorder.map(|r| r.finish(&episode));
    Ok(EpisodeRun { record, replay })
}
