use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use avs_core::domain::PlannerVariant;
use avs_core::harness::{compute_metrics, parse_seeds, read_records, run_suite, Preset, RunOptions, SuiteConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "avs", version, about = "Active visual search benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every episode of a suite file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for episodes.csv, metrics.json and heatmaps.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Write one PGM of the location posterior per real step.
        #[arg(long)]
        dump_heatmaps: bool,
        /// Restrict to one planner variant (pomp, pomp-be, pomp-pd, pomp-be-pd).
        #[arg(long)]
        variant: Option<PlannerVariant>,
        /// Seed range, e.g. 0..50 or 3..=7.
        #[arg(long)]
        seeds: Option<String>,
        /// Episodes run concurrently.
        #[arg(long)]
        jobs: Option<usize>,
        /// One search tree per planning call, regardless of the config.
        #[arg(long)]
        sequential_planner: bool,
    },
    /// Generate a synthetic map.
    Genmap {
        #[arg(long)]
        preset: Preset,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute metrics from a stored episodes.csv.
    Metrics {
        #[arg(long)]
        csv: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            dump_heatmaps,
            variant,
            seeds,
            jobs,
            sequential_planner,
        } => {
            let suite = SuiteConfig::load(&config)?;
            let options = RunOptions {
                out_dir: Some(out.clone()),
                dump_heatmaps,
                variants: variant.map(|v| vec![v]),
                seeds: seeds.as_deref().map(parse_seeds).transpose()?,
                jobs,
                sequential_planner,
            };
            let report = run_suite(&suite, &options)?;
            for r in report.reports.iter().chain(&report.overall) {
                let m = &r.metrics;
                println!(
                    "{:<20} {:<11} n={:<4} sr={:.3} apl={} spl={:.3} fail(loc/dock/other)={}/{}/{}",
                    r.scenario,
                    r.variant,
                    m.episodes,
                    m.sr,
                    m.apl.map_or("-".to_string(), |a| format!("{a:.2}")),
                    m.spl,
                    m.failures.localisation,
                    m.failures.docking,
                    m.failures.other
                );
            }
            println!("{} episodes written to {}", report.records.len(), out.display());
        }
        Command::Genmap { preset, seed, out } => {
            let map = preset.generate(seed)?;
            std::fs::write(&out, map.to_text()).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "{preset} map {}x{} with {} candidates written to {}",
                map.width(),
                map.height(),
                map.num_candidates(),
                out.display()
            );
        }
        Command::Metrics { csv } => {
            let records = read_records(&csv)?;
            println!("{}", serde_json::to_string_pretty(&compute_metrics(&records))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
