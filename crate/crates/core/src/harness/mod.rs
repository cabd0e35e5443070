//! Monte Carlo batches: run many seeded episodes per scenario, then reduce
//! them to boxplot statistics and trend reports.

mod batch;
mod compare;
mod spec;
mod stats;

use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;

pub use batch::{
    collect_scenario, read_episode, run_batch, scenario_dirs, summarize_dir, summarize_scenario, write_summaries,
    BatchReport, EpisodeRow, SummaryRow, DISTANCE_PER_AGENT, DONE_MARKER, FAILED_MARKER, METRICS, MISSION_TIME,
    SUMMARY_ALL_CSV, SUMMARY_CSV, TREND_REPORT_CSV, WORKLOAD_PER_AGENT,
};
pub use compare::{compare, write_trend_report, TrendReport, TrendRow, WORKLOAD_SPREAD};
pub use spec::{deep_merge, run_seed, BatchSpec, ResolvedScenario, ScenarioSpec};
pub use stats::{quantile, summarize, Summary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid batch spec: {0}")]
    Spec(String),
    #[error("duplicate scenario name `{0}`")]
    DuplicateScenario(String),
    #[error("scenario `{scenario}`: {source}")]
    Config {
        scenario: String,
        #[source]
        source: ConfigError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    BadEpisode { path: PathBuf, reason: String },
    #[error("no values to summarize")]
    EmptyInput,
    #[error("need at least two communication ranges per (policy, n_a)")]
    InsufficientScenarios,
}
