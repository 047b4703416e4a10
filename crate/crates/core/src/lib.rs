//! Learnable comb filter banks for audio.
//!
//! The central piece is the combolutional layer ([`layer`]): a bank of
//! feedback comb filters whose fundamentals are trained by gradient descent,
//! followed by a fused absolute-value and max-pool envelope detector. Around
//! it sit the comb filter mathematics ([`comb`]), a small hand-differentiated
//! network kit ([`nn`]), a synthetic note dataset ([`data`]) and the
//! transcription experiments ([`experiments`]).

pub mod comb;
pub mod data;
pub mod experiments;
pub mod layer;
pub mod nn;
pub mod signal;

pub use comb::{CombError, ScalingConfig};
pub use data::{LabelGrid, NoteEvent};
pub use experiments::{CostReport, ModelSpec, TrajectoryLog};
pub use layer::{CombBankParams, FeatureMap};
pub use signal::AudioSignal;
