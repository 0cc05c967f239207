//! Experiment plumbing: episodes, metrics, synthetic maps, scenario files
//! and suite runs with CSV, JSON and PGM output.

mod config;
mod episode;
mod mapgen;
mod metrics;
mod suite;

pub use config::{
    parse_seeds, ConfigError, DetectorSection, ExitSection, GenerationSection, MapSection, MapSource, PomcpSection,
    ProtocolSection, ScenarioSpec, StartSpec, SuiteConfig, TargetSpec,
};
pub use episode::{
    classify_failure, cost_to_goal, episode_streams, goal_set, judge_success, run_episode, run_episode_with,
    sample_start, EpisodeResult, EpisodeSettings, FailureClass, FailureContext, GoalPoseSet,
};
pub use mapgen::{generate_map, MapGenError, Preset};
pub use metrics::{compute_metrics, EpisodeRecord, FailureCounts, MetricsReport, Outcome};
pub use suite::{read_records, run_suite, write_pgm, RunOptions, SuiteError, SuiteReport, VariantReport};
