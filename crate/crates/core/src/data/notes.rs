use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One note of a monophonic sequence. Pitch classes run C = 0 to B = 11 in octave 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoteEvent {
    pub pitch_class: u8,
    pub onset: f64,
    pub duration: f64,
    pub velocity: f64,
}

impl NoteEvent {
    pub fn end(&self) -> f64 {
        self.onset + self.duration
    }

    pub fn frequency(&self) -> f64 {
        pitch_hz(self.pitch_class)
    }
}

/// Equal-tempered fundamental of pitch class `pc` in octave 4 (A4 = 440 Hz).
pub fn pitch_hz(pc: u8) -> f64 {
    let midi = 60.0 + f64::from(pc);
    440.0 * 2f64.powf((midi - 69.0) / 12.0)
}

/// Every knob of the note sampler and the additive synthesiser. Written
/// verbatim into dataset manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisParams {
    pub min_notes: usize,
    pub max_notes: usize,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub min_velocity: f64,
    pub max_velocity: f64,
    pub max_gap_s: f64,
    pub harmonics: usize,
    pub decay_rate: f64,
    pub onset_ramp_s: f64,
    pub peak: f64,
    pub tail_s: f64,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self {
            min_notes: 3,
            max_notes: 10,
            min_duration_s: 0.2,
            max_duration_s: 1.0,
            min_velocity: 0.3,
            max_velocity: 1.0,
            max_gap_s: 0.2,
            harmonics: 8,
            decay_rate: 3.0,
            onset_ramp_s: 0.005,
            peak: 0.9,
            tail_s: 0.1,
        }
    }
}

pub fn sample_note_sequence(seed: u64) -> Vec<NoteEvent> {
    sample_note_sequence_with(seed, &SynthesisParams::default())
}

/// Draws a sequence of back-to-back notes, each preceded by a silent gap.
pub fn sample_note_sequence_with(seed: u64, p: &SynthesisParams) -> Vec<NoteEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(p.min_notes..=p.max_notes);
    let mut cursor = 0.0;
    (0..count)
        .map(|_| {
            let gap = rng.gen_range(0.0..=p.max_gap_s);
            let pitch_class = rng.gen_range(0..12u8);
            let duration = rng.gen_range(p.min_duration_s..=p.max_duration_s);
            let velocity = rng.gen_range(p.min_velocity..=p.max_velocity);
            let onset = cursor + gap;
            cursor = onset + duration;
            NoteEvent {
                pitch_class,
                onset,
                duration,
                velocity,
            }
        })
        .collect()
}
