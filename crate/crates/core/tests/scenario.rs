use std::collections::VecDeque;
use std::sync::Arc;

use crowdnav::bench::{generate_indoor_map, MapGenParams};
use crowdnav::scenario::{geodesic_distance, sample_scenario_seeded, MAX_GEODESIC, MIN_GEODESIC, PEDESTRIAN_KEEPOUT};
use crowdnav::{CrowdMode, EpisodeConfig, World};

/// Plain 4-connected BFS over `open`, returning step counts.
fn bfs(open: &[bool], w: usize, h: usize, start: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; open.len()];
    dist[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % w, i / w);
        let d = dist[i].unwrap();
        let mut push = |j: usize| {
            if open[j] && dist[j].is_none() {
                dist[j] = Some(d + 1);
                queue.push_back(j);
            }
        };
        if x > 0 {
            push(i - 1);
        }
        if x + 1 < w {
            push(i + 1);
        }
        if y > 0 {
            push(i - w);
        }
        if y + 1 < h {
            push(i + w);
        }
    }
    dist
}

fn world(seed: u64) -> Arc<World> {
    Arc::new(EpisodeConfig::default().build_world(generate_indoor_map(seed, &MapGenParams::default())))
}

#[test]
fn generated_maps_have_one_free_region() {
    for seed in 20..40 {
        let g = generate_indoor_map(seed, &MapGenParams::default());
        let open: Vec<bool> = g.occupied_cells().iter().map(|o| !o).collect();
        let first = open.iter().position(|&o| o).expect("some free cell");
        let dist = bfs(&open, g.width(), g.height(), first);
        let stray = open.iter().zip(&dist).filter(|(o, d)| **o && d.is_none()).count();
        assert_eq!(stray, 0, "seed {seed}: {stray} free cells cut off");
    }
}

#[test]
fn sampled_goals_lie_within_geodesic_band() {
    let mut samples = 0;
    for map in 0..4 {
        let world = world(map);
        let base = &world.base;
        let open = base.traversable_mask();
        for seed in 0..250 {
            let sc = sample_scenario_seeded(&world, seed, 6, CrowdMode::Cooperative).unwrap();
            let s = base.world_to_cell(sc.robot_start.position()).unwrap();
            let g = base.world_to_cell(sc.robot_goal).unwrap();
            let steps = bfs(&open, base.width(), base.height(), base.index(s))[base.index(g)].expect("goal reachable");
            let d = steps as f64 * base.resolution();
            assert!((MIN_GEODESIC..=MAX_GEODESIC).contains(&d), "map {map} seed {seed}: {d}");
            assert_eq!(geodesic_distance(&world, sc.robot_start.position(), sc.robot_goal), Some(d));
            for p in &sc.pedestrian_starts {
                assert!(p.distance(sc.robot_start.position()) >= PEDESTRIAN_KEEPOUT);
                assert!(p.distance(sc.robot_goal) >= PEDESTRIAN_KEEPOUT);
            }
            samples += 1;
        }
    }
    assert_eq!(samples, 1000);
}

#[test]
fn seeded_sampling_is_reproducible() {
    let world = world(5);
    for seed in 0..20 {
        assert_eq!(
            sample_scenario_seeded(&world, seed, 4, CrowdMode::Uncooperative),
            sample_scenario_seeded(&world, seed, 4, CrowdMode::Uncooperative)
        );
    }
}
