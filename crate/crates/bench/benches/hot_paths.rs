use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use crowdnav::bench::{generate_indoor_map, run_episode, MapGenParams, PlannerCombo, RunSettings};
use crowdnav::crowd::{solve_velocity_lp, ConstraintKind, HalfPlane};
use crowdnav::planner::{inflate_pedestrians, plan_astar};
use crowdnav::scenario::sample_scenario_seeded;
use crowdnav::sensing::PedestrianEstimate;
use crowdnav::{Action, CrowdMode, Episode, EpisodeConfig, GlobalPlannerKind, LocalPlannerKind, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_lps(n: usize) -> Vec<(Vec<HalfPlane>, Vec2)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=6);
            let lines = (0..k)
                .map(|_| HalfPlane {
                    point: Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    direction: Vec2::from_angle(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)),
                    kind: ConstraintKind::Agent,
                })
                .collect();
            (lines, Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
        })
        .collect()
}

fn lp(c: &mut Criterion) {
    let cases = random_lps(256);
    c.bench_function("orca_lp_256", |b| {
        b.iter(|| {
            for (lines, pref) in &cases {
                black_box(solve_velocity_lp(lines, *pref, 1.5));
            }
        })
    });
}

fn astar(c: &mut Criterion) {
    let config = EpisodeConfig::default();
    let world = config.build_world(generate_indoor_map(3, &MapGenParams::default()));
    let scenario = sample_scenario_seeded(&world, 5, 0, CrowdMode::Cooperative).unwrap();
    let (start, goal) = (scenario.robot_start.position(), scenario.robot_goal);
    c.bench_function("astar_indoor_200x160", |b| b.iter(|| black_box(plan_astar(&world.base, start, goal).unwrap())));

    let peds: Vec<PedestrianEstimate> = (0..5)
        .map(|i| {
            let position = start + (goal - start) * ((i + 1) as f64 / 6.0);
            PedestrianEstimate {
                id: i,
                distance: position.distance(start),
                bearing: 0.0,
                relative_heading: 0.0,
                position,
                heading: i as f64,
                velocity: Vec2::ZERO,
                radius: 0.15,
            }
        })
        .collect();
    let inflated = inflate_pedestrians(&world.base, &peds, &config.gaussian);
    c.bench_function("astar_indoor_gaussian", |b| b.iter(|| black_box(plan_astar(&inflated, start, goal))));
    c.bench_function("gaussian_inflation_5_peds", |b| {
        b.iter(|| black_box(inflate_pedestrians(&world.base, &peds, &config.gaussian)))
    });
}

fn episode(c: &mut Criterion) {
    let config = EpisodeConfig::default();
    let world = Arc::new(config.build_world(generate_indoor_map(3, &MapGenParams::default())));
    let scenario = sample_scenario_seeded(&world, 11, 8, CrowdMode::Uncooperative).unwrap();
    c.bench_function("episode_step_8_peds", |b| {
        b.iter_batched(
            || Episode::reset(world.clone(), config.clone(), scenario.clone()).unwrap().0,
            |mut ep| {
                for _ in 0..10 {
                    black_box(ep.step(Action::new(0.3, 0.2)).unwrap());
                }
            },
            BatchSize::SmallInput,
        )
    });
    let combo = PlannerCombo::new(GlobalPlannerKind::Ppp, LocalPlannerKind::ScriptedFollower);
    let settings = RunSettings::default();
    let mut group = c.benchmark_group("full_episode");
    group.sample_size(10);
    group.bench_function("ppp_follower_8_peds", |b| {
        b.iter(|| black_box(run_episode(world.clone(), "gen:3", 0, combo, scenario.clone(), &settings, None).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, lp, astar, episode);
criterion_main!(benches);
