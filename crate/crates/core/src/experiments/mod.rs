//! The note-transcription experiments: networks, training, frame-wise F1,
//! cost accounting, channel sweeps and f0 trajectory logs.

mod config;
mod costs;
mod metrics;
mod model;
mod plot;
mod sweep;
mod train;
mod trajectory;

pub use config::{load_network, save_network, RunConfig, RunOutputs};
pub use costs::{count_costs, CostReport, LayerCost};
pub use metrics::{evaluate_f1, predictions_from_logits, F1Counts};
pub use model::{Frontend, Gradients, ModelSpec, Network};
pub use plot::{render_line_svg, Series};
pub use sweep::{dominance_summary, plan_sweep, sweep_pareto, write_pareto_csv, Dominance, SweepRow, SWEEP_CHANNELS};
pub use train::{train_model, Schedule, TrainOutcome};
pub use trajectory::{cluster_sizes, TrajectoryLog, TrajectoryRow};

use thiserror::Error;

use crate::comb::CombError;
use crate::data::DataError;
use crate::layer::LayerError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Comb(#[from] CombError),
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Training produced a non-finite loss or gradient. `partial` holds the
    /// parameters from before the failing step plus the logs so far.
    #[error("training diverged at step {step}: {reason}")]
    Diverged {
        step: usize,
        reason: String,
        partial: Box<TrainOutcome>,
    },
}

impl ExperimentError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// True for failures caused by numerics rather than inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Self::Diverged { .. } | Self::Nn(NnError::NonFinite { .. }))
    }
}
