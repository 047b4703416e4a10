//! Synthetic monophonic note data: sequence sampling, additive synthesis,
//! frame-aligned labels, 16-bit PCM WAV files and dataset manifests.

mod dataset;
mod labels;
mod notes;
mod synth;
mod wav;

pub use dataset::{
    clip_seed, generate_dataset, generate_split, load_split, Clip, DatasetManifest, DatasetSpec, ManifestEntry,
    Split,
};
pub use labels::{events_to_labelgrid, read_labels_csv, write_labels_csv, LabelGrid, NUM_CLASSES};
pub use notes::{pitch_hz, sample_note_sequence, sample_note_sequence_with, NoteEvent, SynthesisParams};
pub use synth::{render_notes, synthesize_clip, synthesize_clip_with};
pub use wav::{decode_wav, encode_wav, wav_read, wav_write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed WAV: {0}")]
    Wav(String),
    #[error("invalid label file: {0}")]
    Labels(String),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl DataError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
