use std::fmt::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ConfigError, SuiteConfig};
use super::episode::{run_episode, EpisodeResult};
use super::metrics::{compute_metrics, EpisodeRecord, MetricsReport};
use crate::detection::ProbabilityField;
use crate::domain::PlannerVariant;
use crate::environment::GridMap;

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SuiteError + '_ {
    move |source| SuiteError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Command-line overrides of a suite file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub dump_heatmaps: bool,
    pub variants: Option<Vec<PlannerVariant>>,
    pub seeds: Option<Range<u64>>,
    /// Concurrent episodes; all cores when absent.
    pub jobs: Option<usize>,
    /// Force one search tree per planning call.
    pub sequential_planner: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    /// Scenario name, or `*` for the aggregate over all scenarios.
    pub scenario: String,
    pub variant: PlannerVariant,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub reports: Vec<VariantReport>,
    pub overall: Vec<VariantReport>,
    #[serde(skip)]
    pub records: Vec<EpisodeRecord>,
}

/// Plain PGM (P2) of `field` at map resolution: `round(65535 p)` on
/// candidate cells, 0 elsewhere.
pub fn write_pgm(map: &GridMap, field: &ProbabilityField) -> String {
    let mut value = vec![0u32; map.width() * map.height()];
    for (j, &(x, y)) in map.candidate_cells().iter().enumerate() {
        value[y * map.width() + x] = (65535.0 * field.get(j)).round() as u32;
    }
    let mut out = format!("P2\n{} {}\n65535\n", map.width(), map.height());
    for row in value.chunks(map.width()) {
        let line: Vec<String> = row.iter().map(u32::to_string).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

/// Reads per-episode rows written by [`run_suite`].
pub fn read_records(path: &Path) -> Result<Vec<EpisodeRecord>, SuiteError> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize().collect::<Result<_, _>>()?)
}

/// Runs every (scenario, variant, target, seed) episode and writes
/// `episodes.csv`, `metrics.json` and optional heatmaps under `out_dir`.
pub fn run_suite(config: &SuiteConfig, options: &RunOptions) -> Result<SuiteReport, SuiteError> {
    let scenarios = config.build_scenarios()?;
    let seeds = match &options.seeds {
        Some(r) => r.clone(),
        None => config.seeds()?,
    };
    let variants = options
        .variants
        .clone()
        .unwrap_or_else(|| config.protocol.variants.clone());
    let mut settings = config.episode_settings();
    settings.record_fields = options.dump_heatmaps && options.out_dir.is_some();
    if options.sequential_planner {
        settings.pomcp.workers = 1;
    }

    let mut jobs = Vec::new();
    for (si, s) in scenarios.iter().enumerate() {
        for &v in &variants {
            for ti in 0..s.targets.len() {
                for seed in seeds.clone() {
                    jobs.push((si, v, ti, seed));
                }
            }
        }
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = options.jobs {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build()?;
    let mut results: Vec<EpisodeResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(si, v, ti, seed)| run_episode(&scenarios[si], ti, v, seed, &settings))
            .collect()
    });
    results.sort_by(|a, b| {
        (&a.scenario, a.variant.name(), &a.target, a.seed).cmp(&(&b.scenario, b.variant.name(), &b.target, b.seed))
    });

    let mut report = SuiteReport {
        records: results.iter().map(EpisodeRecord::from).collect(),
        ..SuiteReport::default()
    };
    for s in &scenarios {
        for &v in &variants {
            let group: Vec<&EpisodeRecord> = report
                .records
                .iter()
                .filter(|r| r.scenario == s.name && r.variant == v.name())
                .collect();
            report.reports.push(VariantReport {
                scenario: s.name.clone(),
                variant: v,
                metrics: compute_metrics(group),
            });
        }
    }
    if !scenarios.is_empty() {
        for &v in &variants {
            let group: Vec<&EpisodeRecord> = report.records.iter().filter(|r| r.variant == v.name()).collect();
            report.overall.push(VariantReport {
                scenario: "*".into(),
                variant: v,
                metrics: compute_metrics(group),
            });
        }
    }

    if let Some(dir) = &options.out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let csv_path = dir.join("episodes.csv");
        let mut writer = csv::Writer::from_path(&csv_path)?;
        for r in &report.records {
            writer.serialize(r)?;
        }
        writer.flush().map_err(io_err(&csv_path))?;
        if report.records.is_empty() {
            // keep the header even without rows
            drop(writer);
            std::fs::write(
                &csv_path,
                "scenario,variant,target,seed,success,steps,shortest,spl_term,failure_class,exit_step,docking_steps\n",
            )
            .map_err(io_err(&csv_path))?;
        }
        let json_path = dir.join("metrics.json");
        std::fs::write(&json_path, serde_json::to_string_pretty(&report)?).map_err(io_err(&json_path))?;

        if settings.record_fields {
            for r in &results {
                let scenario = scenarios
                    .iter()
                    .find(|s| s.name == r.scenario)
                    .expect("result from a scenario");
                let sub = dir
                    .join("heatmaps")
                    .join(&r.scenario)
                    .join(r.variant.name())
                    .join(&r.target);
                std::fs::create_dir_all(&sub).map_err(io_err(&sub))?;
                for (t, field) in r.fields.iter().enumerate() {
                    let path = sub.join(format!("seed{}_step{:03}.pgm", r.seed, t + 1));
                    std::fs::write(&path, write_pgm(&scenario.world.map, field)).map_err(io_err(&path))?;
                }
            }
        }
    }
    Ok(report)
}
