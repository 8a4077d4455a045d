//! SR / TS / PSV / CO / TO aggregation and report serialization.

use super::runner::{EpisodeRecord, PlannerCombo};
use crate::crowd::CrowdMode;
use crate::engine::Outcome;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no episodes to aggregate")]
    Empty,
    #[error("all {0} episodes were aborted")]
    AllAborted(usize),
}

/// Which episodes TS averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsMode {
    #[default]
    Successful,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub episodes: usize,
    pub sr: f64,
    /// `None` when no episode qualifies (e.g. no successes).
    pub ts: Option<f64>,
    pub psv: f64,
    pub co: f64,
    pub to: f64,
}

fn percent(k: usize, n: usize) -> f64 {
    100.0 * k as f64 / n as f64
}

/// Metrics over non-aborted records; `None` if there are none.
pub fn metrics(records: &[&EpisodeRecord], ts_mode: TsMode) -> Option<Metrics> {
    let done: Vec<&EpisodeRecord> = records.iter().copied().filter(|r| !r.aborted()).collect();
    let n = done.len();
    if n == 0 {
        return None;
    }
    let count = |o: Outcome| done.iter().filter(|r| r.outcome == Some(o)).count();
    let ts_pool: Vec<usize> = done
        .iter()
        .filter(|r| ts_mode == TsMode::All || r.outcome == Some(Outcome::Success))
        .map(|r| r.steps)
        .collect();
    let ts = (!ts_pool.is_empty()).then(|| ts_pool.iter().sum::<usize>() as f64 / ts_pool.len() as f64);
    let psv = 100.0 * done.iter().map(|r| r.psv_fraction()).sum::<f64>() / n as f64;
    Some(Metrics {
        episodes: n,
        sr: percent(count(Outcome::Success), n),
        ts,
        psv,
        co: percent(count(Outcome::PedestrianCollision), n),
        to: percent(count(Outcome::Timeout), n),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboReport {
    pub combo: String,
    pub overall: Metrics,
    pub by_mode: BTreeMap<String, Metrics>,
    pub by_density: BTreeMap<usize, Metrics>,
    pub by_mode_density: BTreeMap<String, BTreeMap<usize, Metrics>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub episodes: usize,
    pub aborted: usize,
    pub psv_distance: f64,
    pub ts_mode: TsMode,
    pub combos: Vec<ComboReport>,
    /// (map, scenario index, combo, reason) of aborted episodes.
    pub aborted_episodes: Vec<(String, usize, String, String)>,
}

/// Deterministic aggregation: records are grouped by combo in sorted order.
pub fn aggregate(records: &[EpisodeRecord], psv_distance: f64, ts_mode: TsMode) -> Result<MetricsReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let aborted = records.iter().filter(|r| r.aborted()).count();
    if aborted == records.len() {
        return Err(MetricsError::AllAborted(aborted));
    }
    let mut by_combo: BTreeMap<PlannerCombo, Vec<&EpisodeRecord>> = BTreeMap::new();
    for r in records {
        by_combo.entry(r.combo).or_default().push(r);
    }
    let mut combos = Vec::new();
    for (combo, rs) in &by_combo {
        let Some(overall) = metrics(rs, ts_mode) else { continue };
        let mut by_mode = BTreeMap::new();
        let mut by_mode_density: BTreeMap<String, BTreeMap<usize, Metrics>> = BTreeMap::new();
        for mode in CrowdMode::ALL {
            let subset: Vec<&EpisodeRecord> = rs.iter().copied().filter(|r| r.mode == mode).collect();
            if let Some(m) = metrics(&subset, ts_mode) {
                by_mode.insert(mode.name().to_string(), m);
            }
            let mut densities: Vec<usize> = subset.iter().map(|r| r.pedestrians).collect();
            densities.sort_unstable();
            densities.dedup();
            for d in densities {
                let cell: Vec<&EpisodeRecord> = subset.iter().copied().filter(|r| r.pedestrians == d).collect();
                if let Some(m) = metrics(&cell, ts_mode) {
                    by_mode_density.entry(mode.name().to_string()).or_default().insert(d, m);
                }
            }
        }
        let mut by_density = BTreeMap::new();
        let mut densities: Vec<usize> = rs.iter().map(|r| r.pedestrians).collect();
        densities.sort_unstable();
        densities.dedup();
        for d in densities {
            let subset: Vec<&EpisodeRecord> = rs.iter().copied().filter(|r| r.pedestrians == d).collect();
            if let Some(m) = metrics(&subset, ts_mode) {
                by_density.insert(d, m);
            }
        }
        combos.push(ComboReport { combo: combo.to_string(), overall, by_mode, by_density, by_mode_density });
    }
    let aborted_episodes = records
        .iter()
        .filter(|r| r.aborted())
        .map(|r| (r.map.clone(), r.scenario_index, r.combo.to_string(), r.abort_reason.clone().unwrap_or_default()))
        .collect();
    Ok(MetricsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        episodes: records.len(),
        aborted,
        psv_distance,
        ts_mode,
        combos,
        aborted_episodes,
    })
}

pub const CSV_HEADER: &str =
    "map,scenario,seed,pedestrians,mode,global,local,outcome,steps,reward,psv_steps,min_distance,replans,wall_hits";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per episode, preceded by a schema comment and a header row.
pub fn episodes_csv(records: &[EpisodeRecord]) -> String {
    let mut out = format!("# crowdnav-episodes v{REPORT_SCHEMA_VERSION}\n{CSV_HEADER}\n");
    for r in records {
        let outcome = r.outcome.map_or("aborted", |o| o.name());
        let min_d = r.min_distance.map(|d| d.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.map),
            r.scenario_index,
            r.seed,
            r.pedestrians,
            r.mode.name(),
            r.combo.global.name(),
            r.combo.local.name(),
            outcome,
            r.steps,
            r.reward,
            r.psv_steps,
            min_d,
            r.replans,
            r.wall_hits
        )
        .unwrap();
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

/// Text table with SR/TS/PSV/CO/TO per combo, split by crowd mode.
pub fn summary_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    let modes = [("CoOp", "cooperative"), ("UnCoOp", "uncooperative")];
    write!(out, "{:<20}", "planner").unwrap();
    for (label, _) in modes {
        for col in ["SR", "TS", "PSV", "CO", "TO"] {
            write!(out, " {:>10}", format!("{label} {col}")).unwrap();
        }
    }
    out.push('\n');
    for c in &report.combos {
        write!(out, "{:<20}", c.combo).unwrap();
        for (_, key) in modes {
            match c.by_mode.get(key) {
                Some(m) => {
                    for v in [Some(m.sr), m.ts, Some(m.psv), Some(m.co), Some(m.to)] {
                        write!(out, " {:>10}", fmt_opt(v)).unwrap();
                    }
                }
                None => {
                    for _ in 0..5 {
                        write!(out, " {:>10}", "-").unwrap();
                    }
                }
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local::LocalPlannerKind;
    use crate::planner::GlobalPlannerKind;

    fn rec(outcome: Option<Outcome>, steps: usize) -> EpisodeRecord {
        EpisodeRecord {
            map: "m".into(),
            scenario_index: 0,
            seed: 0,
            pedestrians: 3,
            mode: CrowdMode::Uncooperative,
            combo: PlannerCombo::new(GlobalPlannerKind::Ppp, LocalPlannerKind::ScriptedFollower),
            outcome,
            steps,
            reward: 0.0,
            psv_steps: 0,
            min_distance: None,
            replans: 0,
            wall_hits: 0,
            min_distance_trace: Vec::new(),
            abort_reason: None,
        }
    }

    #[test]
    fn counting_example() {
        let mut rs = vec![rec(Some(Outcome::Success), 100); 7];
        rs.extend(vec![rec(Some(Outcome::PedestrianCollision), 40); 2]);
        rs.push(rec(Some(Outcome::Timeout), 500));
        rs.push(rec(None, 3));
        let report = aggregate(&rs, 0.45, TsMode::Successful).unwrap();
        let m = &report.combos[0].overall;
        assert_eq!((m.sr, m.co, m.to), (70.0, 20.0, 10.0));
        assert_eq!(m.ts, Some(100.0));
        assert_eq!(m.psv, 0.0);
        assert_eq!(report.aborted, 1);
    }

    #[test]
    fn all_aborted_is_an_error() {
        assert_eq!(aggregate(&[rec(None, 0)], 0.45, TsMode::All), Err(MetricsError::AllAborted(1)));
        assert_eq!(aggregate(&[], 0.45, TsMode::All), Err(MetricsError::Empty));
    }
}
