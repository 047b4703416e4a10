//! Mono 16-bit PCM WAV.

use std::fs;
use std::path::Path;

use super::DataError;
use crate::signal::AudioSignal;

const PCM: u16 = 1;
const EXTENSIBLE: u16 = 0xFFFE;

/// Encodes `signal` as a canonical 44-byte-header PCM16 mono WAV.
/// Samples are clamped to `[-1, 1)` and rounded to the nearest step of 1/32768.
pub fn encode_wav(signal: &AudioSignal) -> Vec<u8> {
    let data_len = 2 * signal.len() as u32;
    let rate = signal.sample_rate();
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in signal.samples() {
        let q = (f64::from(s) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn decode_wav(bytes: &[u8]) -> Result<AudioSignal, DataError> {
    let err = |m: &str| DataError::Wav(m.to_string());
    if bytes.len() < 12 || &bytes[..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(err("missing RIFF/WAVE header"));
    }
    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + size > bytes.len() {
                    return Err(err("truncated fmt chunk"));
                }
                let tag = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let rate = u32_at(bytes, body + 4);
                let bits = u16_at(bytes, body + 14);
                format = Some((tag, channels, rate, bits));
            }
            b"data" => {
                let (tag, channels, rate, bits) = format.ok_or_else(|| err("data chunk before fmt chunk"))?;
                if tag != PCM && tag != EXTENSIBLE {
                    return Err(DataError::Wav(format!("unsupported format tag {tag:#06x}, expected PCM")));
                }
                if channels != 1 {
                    return Err(DataError::Wav(format!("expected mono audio, found {channels} channels")));
                }
                if bits != 16 {
                    return Err(DataError::Wav(format!("unsupported bit depth {bits}, expected 16")));
                }
                if rate == 0 {
                    return Err(err("sample rate of zero"));
                }
                if body + size > bytes.len() {
                    return Err(DataError::Wav(format!(
                        "truncated data chunk: header declares {size} bytes, {} present",
                        bytes.len() - body
                    )));
                }
                if size % 2 != 0 {
                    return Err(err("data chunk holds a partial sample"));
                }
                let samples = bytes[body..body + size]
                    .chunks_exact(2)
                    .map(|c| f32::from(i16::from_le_bytes([c[0], c[1]])) / 32768.0)
                    .collect();
                return AudioSignal::new(samples, rate).map_err(|e| DataError::Wav(e.to_string()));
            }
            _ => {}
        }
        // Chunks are word aligned.
        pos = body + size + (size & 1);
    }
    Err(err("no data chunk"))
}

pub fn wav_write(path: &Path, signal: &AudioSignal) -> Result<(), DataError> {
    fs::write(path, encode_wav(signal)).map_err(|e| DataError::io(path, e))
}

pub fn wav_read(path: &Path) -> Result<AudioSignal, DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    decode_wav(&bytes).map_err(|e| match e {
        DataError::Wav(m) => DataError::Wav(format!("{}: {m}", path.display())),
        other => other,
    })
}
