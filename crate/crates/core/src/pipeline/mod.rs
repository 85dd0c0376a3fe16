//! End-to-end scenario orchestration: configuration, input ingestion, the
//! staged run with persisted intermediates, and report export.

mod config;
mod ingest;
mod lock;
mod records;
mod report;
mod run;
pub mod toy;

use std::fmt;
use std::path::Path;

use thiserror::Error;

pub use config::{InputPaths, ScenarioConfig, CONFIG_VERSION};
pub use ingest::{ingest_groups, load_params, weight_column, GroupInput, ParamTable};
pub use lock::OutputLock;
pub use records::{read_group_records, write_group_records, GroupRecord};
pub use report::{export_report, REPORT_FILES};
pub use run::{
    aggregate, compute_deltas, compute_skims, equity_for, evaluate_groups, load_skim_outputs, prepare_networks,
    report_from_records, run_evaluation, run_scenario, run_skim_stages, with_workers, welfare_records, Aggregates, EvalContext, Layout, ModeSwitch, Networks, ReportScope,
    ScenarioResult, ScopeAggregate, SkimOutputs,
};

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "TRANSIT_IMPACT_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Synth,
    Merge,
    Skim,
    Delta,
    Demand,
    Welfare,
    Equity,
    Report,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Synth => "synth-gtfs",
            Stage::Merge => "merge",
            Stage::Skim => "skim",
            Stage::Delta => "delta",
            Stage::Demand => "demand",
            Stage::Welfare => "welfare",
            Stage::Equity => "equity",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether a failure is the caller's input or a computation that broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Stage,
}

#[derive(Debug, Error)]
#[error("[{stage}] {source}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: ErrorKind,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

impl PipelineError {
    pub fn input(stage: Stage, source: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        PipelineError { stage, kind: ErrorKind::Input, source: source.into() }
    }

    pub fn failed(stage: Stage, source: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        PipelineError { stage, kind: ErrorKind::Stage, source: source.into() }
    }

    pub fn missing(stage: Stage, path: &Path) -> Self {
        Self::input(stage, format!("{} does not exist", path.display()))
    }

    /// Process exit code: 1 for input errors, 2 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Input => 1,
            ErrorKind::Stage => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Worker count from `WORKERS_ENV`, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}
