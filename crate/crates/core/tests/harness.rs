mod common;

use avs_core::environment::{Cell, FovParams, World};
use avs_core::harness::{
    cost_to_goal, generate_map, goal_set, read_records, run_suite, Preset, RunOptions, SuiteConfig,
};
use common::*;

#[test]
fn goal_set_and_costs_match_brute_force() {
    let w = World::build(parse(MAP_7X7), 90, FovParams::default()).unwrap();
    let poses = oracle_poses(&w.map, 90);
    for j in 0..w.num_locations() {
        let cell = w.map.candidate_cell(j);
        let goal = goal_set(&w, j, 2.0);
        let expect: Vec<usize> = poses
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                let d2 = (p.x as f64 - cell.0 as f64).powi(2) + (p.y as f64 - cell.1 as f64).powi(2);
                d2.sqrt() <= 2.0 && oracle_visible(&w.map, p, &w.fov).contains(&j)
            })
            .map(|(i, _)| i)
            .collect();
        assert_eq!(goal.nodes(), expect.as_slice(), "location {j}");

        let cost = cost_to_goal(&w.graph, &goal);
        for (i, src) in poses.iter().enumerate() {
            let dist = oracle_bfs(&w.map, 90, *src);
            let best = expect.iter().filter_map(|&g| dist.get(&poses[g]).copied()).min();
            assert_eq!(cost[i], best, "{src} to location {j}");
        }
    }
}

#[test]
fn hard_maps_hit_their_candidate_density() {
    let (_, _, _, density) = Preset::Hard.params();
    for seed in 0..8 {
        let map = Preset::Hard.generate(seed).unwrap();
        let interior = |x: usize, y: usize| x > 0 && y > 0 && x + 1 < map.width() && y + 1 < map.height();
        let sites = (0..map.height())
            .flat_map(|y| (0..map.width()).map(move |x| (x, y)))
            .filter(|&(x, y)| interior(x, y) && map.cell(x, y) != Cell::Occlusion)
            .filter(|&(x, y)| {
                [(0, 1), (2, 1), (1, 0), (1, 2)]
                    .iter()
                    .any(|&(dx, dy)| map.cell(x + dx - 1, y + dy - 1) == Cell::Occlusion)
            })
            .count();
        let expected = density * sites as f64;
        let k = map.num_candidates() as f64;
        assert!(
            (k - expected).abs() <= 0.2 * expected,
            "seed {seed}: k={k}, expected {expected:.1}"
        );
    }
}

#[test]
fn generated_maps_are_deterministic_and_walled() {
    let a = generate_map(16, 14, 2, 0.2, 5).unwrap();
    assert_eq!(a, generate_map(16, 14, 2, 0.2, 5).unwrap());
    for x in 0..a.width() {
        assert_eq!(a.cell(x, 0), Cell::Occlusion);
        assert_eq!(a.cell(x, a.height() - 1), Cell::Occlusion);
    }
}

const TWO_SCENARIOS: &str = r#"
[pomcp]
simulations = 64
particles = 128
[protocol]
seeds = "0..10"
variants = ["pomp", "pomp-be-pd"]
episode_cap = 60
[[scenario]]
name = "alpha"
map = "alpha.txt"
[[scenario.targets]]
location = 1
[[scenario]]
name = "beta"
preset = "easy"
map_seed = 4
random_targets = 1
"#;

fn suite(dir: &std::path::Path) -> SuiteConfig {
    std::fs::write(dir.join("alpha.txt"), MAP_7X7).unwrap();
    let path = dir.join("suite.toml");
    std::fs::write(&path, TWO_SCENARIOS).unwrap();
    SuiteConfig::load(&path).unwrap()
}

#[test]
fn csv_has_one_row_per_episode_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = suite(dir.path());
    let mut outputs = Vec::new();
    for (run, jobs) in [("a", 1), ("b", 4)] {
        let out = dir.path().join(run);
        let options = RunOptions {
            out_dir: Some(out.clone()),
            jobs: Some(jobs),
            ..RunOptions::default()
        };
        let report = run_suite(&config, &options).unwrap();
        assert_eq!(report.records.len(), 2 * 2 * 10);
        let rows = read_records(&out.join("episodes.csv")).unwrap();
        assert_eq!(rows, report.records);
        assert!(out.join("metrics.json").exists());
        outputs.push(std::fs::read(out.join("episodes.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn heatmaps_cover_every_exploration_step() {
    let dir = tempfile::tempdir().unwrap();
    let config = suite(dir.path());
    let out = dir.path().join("h");
    let options = RunOptions {
        out_dir: Some(out.clone()),
        dump_heatmaps: true,
        seeds: Some(0..1),
        ..RunOptions::default()
    };
    let report = run_suite(&config, &options).unwrap();
    for r in &report.records {
        let sub = out.join("heatmaps").join(&r.scenario).join(&r.variant).join(&r.target);
        let n = std::fs::read_dir(&sub).unwrap().count();
        assert_eq!(n, r.steps - r.docking_steps, "{sub:?}");
    }
}
