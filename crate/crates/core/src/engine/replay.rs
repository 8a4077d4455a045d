//! Line-oriented episode replay logs and their verification by re-simulation.
//!
//! A log is UTF-8 text with one JSON object per line: a header, one record per
//! step, and an end record. See the README for the field-level schema.

use super::{Episode, EpisodeConfig, EpisodeError, Outcome, ReplanEvent, RewardBreakdown, StepResult};
use crate::geometry::Vec2;
use crate::gridmap::OccupancyGrid;
use crate::kinematics::Action;
use crate::scenario::Scenario;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

pub const REPLAY_FORMAT: &str = "crowdnav-replay";
pub const REPLAY_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("replay diverges at step {step} (line {line})")]
    Divergence { step: usize, line: usize },
    #[error("cannot re-simulate: {0}")]
    Episode(#[from] EpisodeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRecord {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: [f64; 2],
    /// Alternating free/occupied run lengths, row-major from the bottom row,
    /// starting with a free run.
    pub rle: Vec<usize>,
}

impl GridRecord {
    pub fn from_grid(grid: &OccupancyGrid) -> Self {
        Self {
            width: grid.width(),
            height: grid.height(),
            resolution: grid.resolution(),
            origin: [grid.origin().x, grid.origin().y],
            rle: grid.to_rle(),
        }
    }

    pub fn to_grid(&self) -> Result<OccupancyGrid, crate::gridmap::GridError> {
        OccupancyGrid::from_rle(self.width, self.height, self.resolution, Vec2::new(self.origin[0], self.origin[1]), &self.rle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub config: EpisodeConfig,
    pub scenario: Scenario,
    pub grid: GridRecord,
    pub waypoints: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub step: usize,
    /// Action as commanded, before clamping.
    pub action: [f64; 2],
    pub applied: [f64; 2],
    pub robot: [f64; 3],
    /// (x, y, heading) per pedestrian.
    pub pedestrians: Vec<[f64; 3]>,
    pub reward: RewardBreakdown,
    pub outcome: Outcome,
    pub wall_collision: bool,
    pub random_action: bool,
    pub replan: Option<ReplanEvent>,
    /// Present only when this step adopted a new plan.
    pub waypoints: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndRecord {
    pub end: bool,
    pub steps: usize,
    pub outcome: Outcome,
    pub total_reward: f64,
    pub replans: usize,
}

fn points(wps: &[Vec2]) -> Vec<[f64; 2]> {
    wps.iter().map(|p| [p.x, p.y]).collect()
}

fn to_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("replay records always serialize")
}

/// Accumulates the log of one episode as it runs.
#[derive(Debug, Clone)]
pub struct ReplayRecorder {
    lines: Vec<String>,
}

impl ReplayRecorder {
    /// Starts a log for an episode that has just been reset.
    pub fn new(episode: &Episode) -> Self {
        let header = Header {
            format: REPLAY_FORMAT.to_string(),
            version: REPLAY_VERSION,
            config: episode.config().clone(),
            scenario: episode.scenario().clone(),
            grid: GridRecord::from_grid(&episode.world().grid),
            waypoints: points(&episode.waypoints().points),
        };
        Self { lines: vec![to_line(&header)] }
    }

    pub fn record(&mut self, commanded: Action, result: &StepResult, episode: &Episode) {
        let pose = episode.robot().pose;
        let applied = result.info.applied_action;
        let rec = StepRecord {
            step: result.info.step_index,
            action: [commanded.v, commanded.omega],
            applied: [applied.v, applied.omega],
            robot: [pose.x, pose.y, pose.theta],
            pedestrians: episode
                .crowd()
                .pedestrians
                .iter()
                .map(|p| [p.agent.position.x, p.agent.position.y, p.heading])
                .collect(),
            reward: result.reward,
            outcome: result.outcome,
            wall_collision: result.info.wall_collision,
            random_action: result.info.random_action.is_some(),
            replan: result.info.replan,
            waypoints: (result.info.replan == Some(ReplanEvent::NewPlan)).then(|| points(&episode.waypoints().points)),
        };
        self.lines.push(to_line(&rec));
    }

    /// Appends the end record and returns the full log text.
    pub fn finish(mut self, episode: &Episode) -> String {
        let end = EndRecord {
            end: true,
            steps: episode.step_index(),
            outcome: episode.outcome(),
            total_reward: episode.total_reward(),
            replans: episode.replans(),
        };
        self.lines.push(to_line(&end));
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }
}

/// A parsed log.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayLog {
    pub header: Header,
    pub steps: Vec<StepRecord>,
    pub end: EndRecord,
}

impl ReplayLog {
    pub fn parse(text: &str) -> Result<Self, ReplayError> {
        let lines: Vec<&str> = text.lines().collect();
        let err = |line: usize, message: String| ReplayError::Parse { line, message };
        let first = lines.first().ok_or_else(|| err(1, "empty log".into()))?;
        let header: Header = serde_json::from_str(first).map_err(|e| err(1, format!("bad header: {e}")))?;
        if header.format != REPLAY_FORMAT || header.version != REPLAY_VERSION {
            return Err(err(1, format!("unsupported format {} v{}", header.format, header.version)));
        }
        let mut steps = Vec::new();
        let mut end = None;
        for (k, line) in lines.iter().enumerate().skip(1) {
            let n = k + 1;
            if end.is_some() {
                return Err(err(n, "content after end record".into()));
            }
            let value: serde_json::Value = serde_json::from_str(line).map_err(|e| err(n, format!("invalid JSON: {e}")))?;
            if value.get("end").is_some() {
                end = Some(serde_json::from_value::<EndRecord>(value).map_err(|e| err(n, format!("bad end record: {e}")))?);
            } else {
                let rec: StepRecord =
                    serde_json::from_value(value).map_err(|e| err(n, format!("bad step record: {e}")))?;
                if rec.step != steps.len() + 1 {
                    return Err(err(n, format!("expected step {}, found {}", steps.len() + 1, rec.step)));
                }
                steps.push(rec);
            }
        }
        let end = end.ok_or_else(|| err(lines.len() + 1, "missing end record (truncated log)".into()))?;
        Ok(Self { header, steps, end })
    }

    pub fn commanded_actions(&self) -> Vec<Action> {
        self.steps.iter().map(|s| Action::new(s.action[0], s.action[1])).collect()
    }
}

/// Re-runs an episode from a header and a list of commanded actions,
/// stopping early if the episode terminates.
pub fn simulate(header: &Header, actions: &[Action]) -> Result<String, ReplayError> {
    let grid = header.grid.to_grid().map_err(|e| ReplayError::Parse { line: 1, message: e.to_string() })?;
    let world = Arc::new(header.config.build_world(grid));
    let (mut episode, _) = Episode::reset(world, header.config.clone(), header.scenario.clone())?;
    let mut recorder = ReplayRecorder::new(&episode);
    for &a in actions {
        if episode.outcome().is_terminal() {
            break;
        }
        let result = episode.step(a)?;
        recorder.record(a, &result, &episode);
    }
    Ok(recorder.finish(&episode))
}

/// Episode state after re-running the first `steps` recorded actions.
pub fn episode_at(header: &Header, actions: &[Action], steps: usize) -> Result<Episode, ReplayError> {
    let grid = header.grid.to_grid().map_err(|e| ReplayError::Parse { line: 1, message: e.to_string() })?;
    let world = Arc::new(header.config.build_world(grid));
    let (mut episode, _) = Episode::reset(world, header.config.clone(), header.scenario.clone())?;
    for &a in actions.iter().take(steps) {
        if episode.outcome().is_terminal() {
            break;
        }
        episode.step(a)?;
    }
    Ok(episode)
}

pub const COSTMAP_FORMAT: &str = "crowdnav-costmap";

/// Snapshot of a planning costmap for rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostmapDump {
    pub format: String,
    pub version: u32,
    pub step: usize,
    pub grid: GridRecord,
    pub resolution: f64,
    /// Row-major from the bottom row; `null` marks lethal cells.
    pub costs: Vec<Option<f64>>,
    pub robot: [f64; 3],
    /// (x, y, heading) of each visible pedestrian.
    pub pedestrians: Vec<[f64; 3]>,
    pub waypoints: Vec<[f64; 2]>,
}

impl CostmapDump {
    pub fn from_episode(episode: &Episode) -> Self {
        let cm = episode.planning_costmap();
        let pose = episode.robot().pose;
        Self {
            format: COSTMAP_FORMAT.to_string(),
            version: REPLAY_VERSION,
            step: episode.step_index(),
            grid: GridRecord::from_grid(&episode.world().grid),
            resolution: cm.resolution(),
            costs: cm.costs().iter().map(|&c| c.is_finite().then_some(c)).collect(),
            robot: [pose.x, pose.y, pose.theta],
            pedestrians: episode.visible_pedestrians().iter().map(|p| [p.position.x, p.position.y, p.heading]).collect(),
            waypoints: points(&episode.waypoints().points),
        }
    }
}

/// Re-simulates `text` and checks the regenerated log is byte-identical.
/// Returns the number of verified steps.
pub fn verify(text: &str) -> Result<usize, ReplayError> {
    let log = ReplayLog::parse(text)?;
    let regenerated = simulate(&log.header, &log.commanded_actions())?;
    let mut original = text.lines();
    let mut fresh = regenerated.lines();
    let mut line: usize = 0;
    loop {
        line += 1;
        match (original.next(), fresh.next()) {
            (None, None) => break,
            (a, b) if a == b => continue,
            _ => return Err(ReplayError::Divergence { step: line.saturating_sub(1).min(log.steps.len() + 1), line }),
        }
    }
    if !text.ends_with('\n') {
        return Err(ReplayError::Divergence { step: log.steps.len() + 1, line });
    }
    Ok(log.steps.len())
}
