use std::path::Path;

use super::{DataError, NoteEvent};
use crate::layer::EnvelopeConfig;
use crate::nn::Matrix;

pub const NUM_CLASSES: usize = 12;

/// Frame-wise note activity. Each frame holds at most one active pitch class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid {
    active: Vec<Option<u8>>,
    frame_rate: f64,
}

impl LabelGrid {
    pub fn new(active: Vec<Option<u8>>, frame_rate: f64) -> Result<Self, DataError> {
        if let Some(c) = active.iter().flatten().find(|&&c| usize::from(c) >= NUM_CLASSES) {
            return Err(DataError::Labels(format!("pitch class {c} out of range")));
        }
        Ok(Self { active, frame_rate })
    }

    pub fn frames(&self) -> usize {
        self.active.len()
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn active(&self) -> &[Option<u8>] {
        &self.active
    }

    /// `frames x 12` boolean view.
    pub fn binary(&self) -> Vec<[bool; NUM_CLASSES]> {
        self.active
            .iter()
            .map(|a| {
                let mut row = [false; NUM_CLASSES];
                if let Some(c) = a {
                    row[usize::from(*c)] = true;
                }
                row
            })
            .collect()
    }

    /// `12 x frames` target matrix, laid out like the network's logits.
    pub fn to_targets(&self) -> Matrix<f32> {
        let mut m = Matrix::zeros(NUM_CLASSES, self.frames());
        for (f, a) in self.active.iter().enumerate() {
            if let Some(c) = a {
                m.set(usize::from(*c), f, 1.0);
            }
        }
        m
    }

    /// Frames `[start, start + len)`, padding with silence past the end.
    pub fn window(&self, start: usize, len: usize) -> Self {
        let active = (start..start + len)
            .map(|f| self.active.get(f).copied().flatten())
            .collect();
        Self {
            active,
            frame_rate: self.frame_rate,
        }
    }
}

/// Frame `t` is labelled with class `c` iff its centre time lies in
/// `[onset, onset + duration)` of a note with pitch class `c`.
pub fn events_to_labelgrid(events: &[NoteEvent], env: &EnvelopeConfig, sample_rate: u32, clip_len: usize) -> LabelGrid {
    let fs = f64::from(sample_rate);
    let active = (0..env.frames(clip_len))
        .map(|f| {
            let t = env.frame_center(f) / fs;
            events
                .iter()
                .find(|n| n.onset <= t && t < n.end())
                .map(|n| n.pitch_class)
        })
        .collect();
    LabelGrid {
        active,
        frame_rate: fs / env.pool_stride as f64,
    }
}

/// Writes `frame_index,pitch_class` rows, with `-1` for silent frames.
pub fn write_labels_csv(grid: &LabelGrid, path: &Path) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| DataError::Labels(e.to_string()))?;
    w.write_record(["frame_index", "pitch_class"])
        .map_err(|e| DataError::Labels(e.to_string()))?;
    for (i, a) in grid.active.iter().enumerate() {
        let pc = a.map_or(-1, i32::from);
        w.write_record([i.to_string(), pc.to_string()])
            .map_err(|e| DataError::Labels(e.to_string()))?;
    }
    w.flush().map_err(|e| DataError::io(path, e))
}

pub fn read_labels_csv(path: &Path, frame_rate: f64) -> Result<LabelGrid, DataError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| DataError::Labels(format!("{}: {e}", path.display())))?;
    let mut active = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| DataError::Labels(format!("{}: {e}", path.display())))?;
        let parse = |i: usize| -> Result<i64, DataError> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| DataError::Labels(format!("{}: bad row {}", path.display(), row + 2)))
        };
        let (index, pc) = (parse(0)?, parse(1)?);
        if index != row as i64 {
            return Err(DataError::Labels(format!(
                "{}: frame index {index} out of sequence at row {}",
                path.display(),
                row + 2
            )));
        }
        active.push(match pc {
            -1 => None,
            0..=11 => Some(pc as u8),
            other => return Err(DataError::Labels(format!("{}: pitch class {other}", path.display()))),
        });
    }
    LabelGrid::new(active, frame_rate)
}
