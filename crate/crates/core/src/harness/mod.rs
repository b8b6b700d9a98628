//! Scripted learning scenarios: run interactions over a task set, evaluate
//! after each one and report success ratios.

mod metrics;
mod plot;
mod scenario;
pub mod synthetic;

use thiserror::Error;

use crate::baselines::BaselineError;
use crate::geometry::GeometryError;
use crate::memory::MemoryError;
use crate::relation::ModelError;

pub use metrics::{aggregate, read_metrics_csv, write_metrics_csv, AggregateRow, MetricsRow, Stat};
pub use plot::render_svg;
pub use scenario::{
    evaluate, evaluate_model, read_demos_jsonl, run_interaction, run_learning_scenario, write_demos_jsonl, Environment,
    InteractionRecord, LearningScenario, Mode, ScenarioFile, Task,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("could not generate a feasible `{relation}` sample in {attempts} attempts")]
    InfeasibleGeneration { relation: String, attempts: usize },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path, e: impl ToString) -> Self {
        Self::Io { path: path.display().to_string(), message: e.to_string() }
    }
}
