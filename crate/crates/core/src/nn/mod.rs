//! A deliberately small neural-network kit with hand-derived gradients.
//!
//! Only what the transcription networks need: 1-D convolution, dense layers,
//! ELU, max pooling with argmax routing, sigmoid / binary cross-entropy with
//! logits, Adam and global-norm clipping. Layers are generic over the float
//! type so gradient checks can run in double precision while training runs
//! in single precision.

mod activation;
mod archive;
mod conv;
mod dense;
mod loss;
mod matrix;
mod optim;
mod pool;

pub use activation::{elu, elu_backward, elu_derivative, elu_inplace, sigmoid};
pub use archive::{load_archive, read_archive, save_archive, write_archive, ArchiveEntry, Tensor};
pub use conv::{conv1d_forward, Conv1dGrads, Conv1dLayer};
pub use dense::{DenseGrads, DenseLayer};
pub use loss::bce_with_logits;
pub use matrix::Matrix;
pub use optim::{adam_step, clip_global_norm, global_norm, AdamState, Param, TrainConfig};
pub use pool::{max_pool1d, max_pool1d_backward, Pooled};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value in {tensor}")]
    NonFinite { tensor: String },
    #[error("archive error: {0}")]
    Archive(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Float types the kit runs on.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + std::iter::Sum
    + std::ops::AddAssign
    + std::fmt::Debug
    + Default
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(v).expect("finite conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
