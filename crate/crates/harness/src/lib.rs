//! Experiment harness: seeded MDP generators, experiment orchestration over
//! the planner and learner crates, convergence-rate fitting, and the CSV/JSON
//! artifact formats consumed by external plotting.

mod experiment;
mod generate;
mod rates;

pub use experiment::{
    aggregate_rows, fit_from_csvs, read_run_csv, run_experiment, solve_mdp, Algorithm,
    ConcentrabilityReport, DistSpec, ExperimentConfig, ExperimentSummary, MdpSource, MeanStd,
    PerKStat, RateMetric, RunRow, CSV_COLUMNS,
};
pub use generate::{generate_chain, generate_garnet};
pub use rates::{fit_rate, RateFit, GAP_CLIP};

use geometry::GeometryError;
use mdp_core::MdpError;
use planners::PlannerError;
use sample_trpo::LearnerError;
use sampler::SamplerError;
use thiserror::Error;

/// Everything that can go wrong while generating, configuring, running, or
/// summarizing an experiment.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate rate fit: {0}")]
    DegenerateFit(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Stable machine-readable tag for the error JSON emitted by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::InvalidParameter(_) => "invalid_parameter",
            HarnessError::InvalidConfig(_) => "invalid_config",
            HarnessError::DegenerateFit(_) => "degenerate_fit",
            HarnessError::Mdp(_) => "mdp",
            HarnessError::Geometry(_) => "geometry",
            HarnessError::Planner(_) => "planner",
            HarnessError::Sampler(_) => "sampler",
            HarnessError::Learner(_) => "learner",
            HarnessError::Io(_) => "io",
            HarnessError::Json(_) => "json",
            HarnessError::Csv(_) => "csv",
        }
    }
}
