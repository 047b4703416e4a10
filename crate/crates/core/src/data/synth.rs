use std::f64::consts::PI;

use super::{DataError, NoteEvent, SynthesisParams};
use crate::signal::AudioSignal;

fn clip_len(events: &[NoteEvent], sample_rate: u32, p: &SynthesisParams) -> usize {
    let end = events.iter().map(NoteEvent::end).fold(0.0, f64::max);
    ((end + p.tail_s) * f64::from(sample_rate)).ceil() as usize
}

/// Additive rendering before peak normalisation.
///
/// Each note is a harmonic stack `sum_h (velocity / h) sin(2 pi h f t)` for
/// harmonics below Nyquist, shaped by a linear onset ramp and an exponential
/// decay `exp(-decay_rate * t / duration)`.
pub fn render_notes(events: &[NoteEvent], sample_rate: u32, p: &SynthesisParams) -> Vec<f64> {
    let fs = f64::from(sample_rate);
    let mut out = vec![0.0f64; clip_len(events, sample_rate, p)];
    for note in events {
        let f = note.frequency();
        let harmonics = (1..=p.harmonics).take_while(|&h| (h as f64) * f < fs / 2.0).count();
        let start = (note.onset * fs).round() as usize;
        let len = (note.duration * fs).round() as usize;
        let step = 2.0 * PI * f / fs;
        for (i, o) in out[start..].iter_mut().take(len).enumerate() {
            let t = i as f64 / fs;
            let ramp = if p.onset_ramp_s > 0.0 { (t / p.onset_ramp_s).min(1.0) } else { 1.0 };
            let env = ramp * (-p.decay_rate * t / note.duration).exp();
            // sin(h x) by the Chebyshev recurrence sin(h x) = 2 cos x sin((h-1) x) - sin((h-2) x).
            let x = step * i as f64;
            let (s1, c1) = x.sin_cos();
            let (mut prev, mut cur) = (0.0, s1);
            let mut acc = 0.0;
            for h in 1..=harmonics {
                acc += cur / h as f64;
                let next = 2.0 * c1 * cur - prev;
                prev = cur;
                cur = next;
            }
            *o += note.velocity * env * acc;
        }
    }
    out
}

pub fn synthesize_clip(events: &[NoteEvent], sample_rate: u32) -> Result<AudioSignal, DataError> {
    synthesize_clip_with(events, sample_rate, &SynthesisParams::default())
}

/// Renders `events` and peak-normalises the clip to `p.peak`.
pub fn synthesize_clip_with(events: &[NoteEvent], sample_rate: u32, p: &SynthesisParams) -> Result<AudioSignal, DataError> {
    let fs = f64::from(sample_rate);
    if let Some(n) = events.iter().find(|n| n.pitch_class >= 12) {
        return Err(DataError::Config(format!("pitch class {} out of range", n.pitch_class)));
    }
    if let Some(n) = events.iter().find(|n| !(n.duration > 0.0) || n.onset < 0.0) {
        return Err(DataError::Config(format!("invalid note timing {n:?}")));
    }
    // The highest fundamental must sit below Nyquist and the lowest must map to a delay of at least one sample.
    if let Some(n) = events.iter().find(|n| n.frequency() >= fs / 2.0 || fs / n.frequency() < 1.0) {
        return Err(DataError::Config(format!(
            "{:.2} Hz cannot be represented at {sample_rate} Hz",
            n.frequency()
        )));
    }
    let raw = render_notes(events, sample_rate, p);
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = if peak > 0.0 { p.peak / peak } else { 0.0 };
    let samples = raw.into_iter().map(|v| (v * gain) as f32).collect();
    AudioSignal::new(samples, sample_rate).map_err(|e| DataError::Config(e.to_string()))
}
