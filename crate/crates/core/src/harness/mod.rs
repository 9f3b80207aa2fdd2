//! Manifest-driven orchestration: load model records, score them with every
//! requested method, evaluate against ground truth and render leaderboards.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::metrics::MetricError;
use crate::synth::SynthError;
use crate::tensor_io::TensorError;

pub mod cache;
pub mod eval;
pub mod leaderboard;
pub mod manifest;
pub mod records;
pub mod run;

pub use cache::ScoreCache;
pub use eval::{aggregate_dg, effective_count, evaluate, ground_truth, EvalTable, MethodEval};
pub use leaderboard::{render_leaderboard, Format};
pub use manifest::{load_manifest, LoadedModel, Manifest, ModelEntry};
pub use records::{emit_scatter_data, read_eval_tables, read_reports, write_eval_table, write_family, write_reports};
pub use run::{run_matrix, run_models, RunOutcome, Skip};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("referenced file does not exist: {0}")]
    MissingFile(PathBuf),
    #[error("duplicate model_id {0:?}")]
    DuplicateModel(String),
    #[error("{path}: {msg}")]
    Manifest { path: PathBuf, msg: String },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("aggregation error: {0}")]
    Aggregation(String),
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl HarnessError {
    pub(crate) fn manifest(path: &Path, msg: impl Into<String>) -> Self {
        HarnessError::Manifest {
            path: path.to_path_buf(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn parse(path: &Path, msg: impl ToString) -> Self {
        HarnessError::Parse {
            path: path.to_path_buf(),
            msg: msg.to_string(),
        }
    }
}
