//! Benchmark sweeps: scenario seeding, parallel episode execution and
//! deterministic aggregation.

pub mod mapgen;
pub mod metrics;
pub mod runner;

pub use mapgen::{generate_indoor_map, MapGenParams};
pub use metrics::{aggregate, episodes_csv, summary_table, Metrics, MetricsError, MetricsReport, TsMode};
pub use runner::{run_episode, EpisodeRecord, EpisodeRun, ExternalPolicy, LocalPlannerConfig, PlannerCombo, PolicyError, RunSettings};

use crate::crowd::CrowdMode;
use crate::local::LocalPlannerKind;
use crate::scenario::{sample_scenario, Scenario, ScenarioError};
use crate::world::World;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("map {map}: {source}")]
    Scenario { map: String, source: ScenarioError },
    #[error("map {map} scenario {index}: {source}")]
    Episode { map: String, index: usize, source: crate::engine::EpisodeError },
    #[error("{0} needs an external policy; use `bench` with a policy connection")]
    ExternalUnsupported(PlannerCombo),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub maps: Vec<(String, Arc<World>)>,
    pub combos: Vec<PlannerCombo>,
    pub episodes_per_map: usize,
    pub densities: Vec<usize>,
    pub modes: Vec<CrowdMode>,
    pub master_seed: u64,
    pub settings: RunSettings,
    pub ts_mode: TsMode,
}

/// One sampled start condition shared by every combo.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Task {
    pub map: usize,
    pub index: usize,
    pub pedestrians: usize,
    pub mode: CrowdMode,
}

impl BenchPlan {
    /// Tasks in report order: map, then episode index, cycling densities and modes.
    pub fn tasks(&self) -> Vec<Task> {
        let mut out = Vec::new();
        let cells = self.densities.len() * self.modes.len();
        for map in 0..self.maps.len() {
            for index in 0..self.episodes_per_map {
                let c = index % cells.max(1);
                out.push(Task {
                    map,
                    index,
                    pedestrians: self.densities[c % self.densities.len()],
                    mode: self.modes[c / self.densities.len()],
                });
            }
        }
        out
    }

    /// Seed of a task's scenario: an independent ChaCha stream per task.
    pub fn task_seed(&self, task: &Task) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream((task.map as u64) << 32 | task.index as u64);
        rng.gen()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    pub records: Vec<EpisodeRecord>,
    /// Replay logs parallel to `records`; empty unless `settings.record`.
    pub replays: Vec<String>,
    pub report: MetricsReport,
}

fn sample_all(plan: &BenchPlan, tasks: &[Task]) -> Result<Vec<Scenario>, BenchError> {
    tasks
        .par_iter()
        .map(|t| {
            let (name, world) = &plan.maps[t.map];
            let mut rng = ChaCha8Rng::seed_from_u64(plan.task_seed(t));
            sample_scenario(world, &mut rng, t.pedestrians, t.mode)
                .map_err(|source| BenchError::Scenario { map: name.clone(), source })
        })
        .collect()
}

fn finish(plan: &BenchPlan, runs: Vec<EpisodeRun>) -> Result<BenchOutput, BenchError> {
    let (records, replays): (Vec<_>, Vec<_>) = runs.into_iter().map(|r| (r.record, r.replay)).unzip();
    let replays = replays.into_iter().flatten().collect();
    let report = aggregate(&records, plan.settings.psv_distance, plan.ts_mode)?;
    Ok(BenchOutput { records, replays, report })
}

/// Same sweep and ordering as [`run_bench`], run sequentially so that
/// `ExternalPolicy` combos can share one policy connection.
pub fn run_bench_with_policy(plan: &BenchPlan, policy: &mut dyn ExternalPolicy) -> Result<BenchOutput, BenchError> {
    let tasks = plan.tasks();
    let scenarios = sample_all(plan, &tasks)?;
    let mut runs = Vec::with_capacity(tasks.len() * plan.combos.len());
    for (t, scenario) in tasks.iter().zip(scenarios) {
        let (name, world) = &plan.maps[t.map];
        for &combo in &plan.combos {
            let p: Option<&mut dyn ExternalPolicy> = match combo.local {
                LocalPlannerKind::ExternalPolicy => Some(&mut *policy),
                _ => None,
            };
            let run = run_episode(world.clone(), name, t.index, combo, scenario.clone(), &plan.settings, p)
                .map_err(|source| BenchError::Episode { map: name.clone(), index: t.index, source })?;
            runs.push(run);
        }
    }
    finish(plan, runs)
}

/// Runs every combo on every task in parallel. Records come back in
/// (map, index, combo) order regardless of scheduling.
pub fn run_bench(plan: &BenchPlan) -> Result<BenchOutput, BenchError> {
    if let Some(c) = plan.combos.iter().find(|c| c.local == LocalPlannerKind::ExternalPolicy) {
        return Err(BenchError::ExternalUnsupported(*c));
    }
    let tasks = plan.tasks();
    let scenarios = sample_all(plan, &tasks)?;
    let jobs: Vec<(usize, PlannerCombo)> =
        (0..tasks.len()).flat_map(|i| plan.combos.iter().map(move |&c| (i, c))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(i, combo)| {
            let t = &tasks[i];
            let (name, world) = &plan.maps[t.map];
            run_episode(world.clone(), name, t.index, combo, scenarios[i].clone(), &plan.settings, None)
                .map_err(|source| BenchError::Episode { map: name.clone(), index: t.index, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    finish(plan, runs)
}
