use crowdnav::bench::{run_episode, PlannerCombo, RunSettings};
use crowdnav::engine::replay::{verify, ReplayError, ReplayLog, ReplayRecorder};
use crowdnav::engine::{Episode, EpisodeConfig, EpisodeError, Outcome};
use crowdnav::local::LocalPlannerKind;
use crowdnav::planner::{GlobalPlannerKind, PlanError};
use crowdnav::scenario::sample_scenario_seeded;
use crowdnav::{Action, CrowdMode, OccupancyGrid, Pose, Scenario, Vec2, World};
use std::sync::Arc;

fn open_world(w: usize, h: usize) -> Arc<World> {
    let mut rows = vec!["#".repeat(w)];
    for _ in 0..h - 2 {
        rows.push(format!("#{}#", ".".repeat(w - 2)));
    }
    rows.push("#".repeat(w));
    let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
    let grid = OccupancyGrid::from_ascii(&refs, 0.1, Vec2::ZERO).unwrap();
    Arc::new(EpisodeConfig::default().build_world(grid))
}

fn scenario(start: Pose, goal: Vec2, peds: &[(Vec2, Vec2)]) -> Scenario {
    Scenario {
        seed: 11,
        robot_start: start,
        robot_goal: goal,
        pedestrian_starts: peds.iter().map(|p| p.0).collect(),
        pedestrian_goals: peds.iter().map(|p| p.1).collect(),
        mode: CrowdMode::Uncooperative,
    }
}

fn still_config() -> EpisodeConfig {
    EpisodeConfig { respawn_goals: false, global_planner: GlobalPlannerKind::FixedAtStart, ..Default::default() }
}

#[test]
fn success_at_029_from_goal() {
    let world = open_world(100, 60);
    let goal = Vec2::new(5.0, 3.0);
    let start = Pose::new(5.0 - 0.34, 3.0, 0.0);
    let (mut ep, _) = Episode::reset(world, still_config(), scenario(start, goal, &[])).unwrap();
    let r = ep.step(Action::new(0.5, 0.0)).unwrap();
    assert!((r.info.goal_distance - 0.29).abs() < 1e-9);
    assert_eq!(r.outcome, Outcome::Success);
    assert_eq!(r.reward.goal, 20.0);
    assert!(matches!(ep.step(Action::default()), Err(EpisodeError::Terminal(Outcome::Success))));
}

#[test]
fn pedestrian_collision_at_029() {
    let world = open_world(100, 60);
    let ped = Vec2::new(5.0, 3.0);
    let start = Pose::new(5.0 - 0.34, 3.0, 0.0);
    let sc = scenario(start, Vec2::new(1.0, 1.0), &[(ped, ped)]);
    let (mut ep, _) = Episode::reset(world, still_config(), sc).unwrap();
    let r = ep.step(Action::new(0.5, 0.0)).unwrap();
    assert!((r.info.min_pedestrian_distance.unwrap() - 0.29).abs() < 1e-9);
    assert_eq!(r.outcome, Outcome::PedestrianCollision);
    assert_eq!(r.reward.ped_collision, -20.0);
}

#[test]
fn timeout_at_step_500() {
    let world = open_world(100, 60);
    let sc = scenario(Pose::new(2.0, 3.0, 0.0), Vec2::new(8.0, 3.0), &[]);
    let (mut ep, _) = Episode::reset(world, still_config(), sc).unwrap();
    for k in 1..=500 {
        let r = ep.step(Action::default()).unwrap();
        assert_eq!(r.info.step_index, k);
        let expected = if k == 500 { Outcome::Timeout } else { Outcome::Running };
        assert_eq!(r.outcome, expected, "step {k}");
    }
}

#[test]
fn random_action_on_fifth_wall_hit() {
    let world = open_world(100, 60);
    // Wall cells start at x = 9.9; a 0.15 m disc at x = 9.7 touches it after 0.05 m.
    let start = Pose::new(9.72, 3.0, 0.0);
    let sc = scenario(start, Vec2::new(2.0, 3.0), &[]);
    let (mut ep, _) = Episode::reset(world, still_config(), sc).unwrap();
    for k in 1..=5 {
        let r = ep.step(Action::new(0.5, 0.0)).unwrap();
        assert!(r.info.wall_collision, "step {k}");
        assert_eq!(r.reward.wall_collision, -10.0);
        assert_eq!(r.outcome, Outcome::Running);
        assert_eq!(r.info.random_action.is_some(), k == 5, "step {k}");
        if k < 5 {
            assert_eq!(ep.robot().pose.position(), start.position());
            assert_eq!(ep.robot().consecutive_wall_hits, k as u32);
        } else {
            assert_eq!(ep.robot().consecutive_wall_hits, 0);
        }
    }
}

#[test]
fn goal_inside_wall_is_rejected() {
    let world = open_world(100, 60);
    let sc = scenario(Pose::new(2.0, 3.0, 0.0), Vec2::new(0.05, 3.0), &[]);
    let err = Episode::reset(world, still_config(), sc).unwrap_err();
    assert!(matches!(err, EpisodeError::Plan(PlanError::InvalidEndpoint { which: "goal", .. })), "{err}");
}

#[test]
fn repeated_resets_are_identical() {
    let world = open_world(120, 120);
    let sc = sample_scenario_seeded(&world, 4, 5, CrowdMode::Cooperative).unwrap();
    let (_, a) = Episode::reset(world.clone(), EpisodeConfig::default(), sc.clone()).unwrap();
    let (_, b) = Episode::reset(world, EpisodeConfig::default(), sc).unwrap();
    let (a, b) = (a.to_vec(), b.to_vec());
    assert_eq!(a.len(), 20034);
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
}

#[test]
fn follower_succeeds_on_empty_map() {
    let world = open_world(120, 120);
    let sc = sample_scenario_seeded(&world, 9, 0, CrowdMode::Uncooperative).unwrap();
    let combo = PlannerCombo::new(GlobalPlannerKind::Ppp, LocalPlannerKind::ScriptedFollower);
    let run = run_episode(world, "empty", 0, combo, sc, &RunSettings::default(), None).unwrap();
    assert_eq!(run.record.outcome, Some(Outcome::Success));
    assert!(run.record.steps < 400, "{}", run.record.steps);
}

#[test]
fn dwa_runs_to_termination() {
    let world = open_world(120, 120);
    let sc = sample_scenario_seeded(&world, 2, 3, CrowdMode::Cooperative).unwrap();
    let combo = PlannerCombo::new(GlobalPlannerKind::Ppp, LocalPlannerKind::Dwa);
    let run = run_episode(world, "empty", 0, combo, sc, &RunSettings::default(), None).unwrap();
    assert!(run.record.outcome.is_some());
}

fn recorded_log() -> String {
    let world = open_world(120, 120);
    let sc = sample_scenario_seeded(&world, 21, 4, CrowdMode::Cooperative).unwrap();
    let combo = PlannerCombo::new(GlobalPlannerKind::Ppp, LocalPlannerKind::ScriptedFollower);
    let settings = RunSettings { record: true, ..Default::default() };
    run_episode(world, "empty", 0, combo, sc, &settings, None).unwrap().replay.unwrap()
}

#[test]
fn replay_verifies_and_detects_tampering() {
    let log = recorded_log();
    let parsed = ReplayLog::parse(&log).unwrap();
    assert_eq!(verify(&log).unwrap(), parsed.steps.len());

    // Change one commanded action on step 3.
    let mut lines: Vec<String> = log.lines().map(str::to_string).collect();
    let old = format!("\"action\":[{},", parsed.steps[2].action[0]);
    assert!(lines[3].contains(&old));
    lines[3] = lines[3].replacen(&old, "\"action\":[0.125,", 1);
    let tampered = lines.join("\n") + "\n";
    match verify(&tampered) {
        Err(ReplayError::Divergence { step, .. }) => assert_eq!(step, 3),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn truncated_log_reports_line() {
    let log = recorded_log();
    let cut: String = log.lines().take(4).collect::<Vec<_>>().join("\n");
    let partial = format!("{cut}\n{{\"step\":4,\"act");
    match ReplayLog::parse(&partial) {
        Err(ReplayError::Parse { line, .. }) => assert_eq!(line, 5),
        other => panic!("expected parse error, got {other:?}"),
    }
    match ReplayLog::parse(&cut) {
        Err(ReplayError::Parse { line, .. }) => assert_eq!(line, 5),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn one_step_log_shape() {
    let world = open_world(100, 60);
    let sc = scenario(Pose::new(5.0 - 0.34, 3.0, 0.0), Vec2::new(5.0, 3.0), &[]);
    let (mut ep, _) = Episode::reset(world, still_config(), sc).unwrap();
    let mut rec = ReplayRecorder::new(&ep);
    let r = ep.step(Action::new(0.5, 0.0)).unwrap();
    rec.record(Action::new(0.5, 0.0), &r, &ep);
    let log = rec.finish(&ep);
    assert_eq!(log.lines().count(), 3);
    let parsed = ReplayLog::parse(&log).unwrap();
    assert_eq!(parsed.steps.len(), 1);
    assert_eq!(parsed.end.outcome, Outcome::Success);
}

