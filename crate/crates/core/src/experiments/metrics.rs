use rayon::prelude::*;
use serde::Serialize;

use super::{ExperimentError, Network};
use crate::data::{Clip, LabelGrid, NUM_CLASSES};
use crate::layer::Mode;
use crate::nn::Matrix;

/// Confusion counts over (frame, class) cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct F1Counts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl F1Counts {
    /// Compares `predictions[frame][class]` with the label grid.
    pub fn from_predictions(predictions: &[[bool; NUM_CLASSES]], labels: &LabelGrid) -> Self {
        assert_eq!(predictions.len(), labels.frames(), "prediction and label frame counts differ");
        let mut c = Self::default();
        for (p, y) in predictions.iter().zip(labels.binary()) {
            for k in 0..NUM_CLASSES {
                match (p[k], y[k]) {
                    (true, true) => c.true_pos += 1,
                    (true, false) => c.false_pos += 1,
                    (false, true) => c.false_neg += 1,
                    (false, false) => {}
                }
            }
        }
        c
    }

    pub fn merge(self, o: Self) -> Self {
        Self {
            true_pos: self.true_pos + o.true_pos,
            false_pos: self.false_pos + o.false_pos,
            false_neg: self.false_neg + o.false_neg,
        }
    }

    pub fn precision(&self) -> f64 {
        let d = self.true_pos + self.false_pos;
        if d == 0 {
            1.0
        } else {
            self.true_pos as f64 / d as f64
        }
    }

    pub fn recall(&self) -> f64 {
        let d = self.true_pos + self.false_neg;
        if d == 0 {
            1.0
        } else {
            self.true_pos as f64 / d as f64
        }
    }

    /// Micro-averaged F1, `2 TP / (2 TP + FP + FN)`. A grid with no positive
    /// cells in either predictions or labels scores 1.0.
    pub fn f1(&self) -> f64 {
        let d = 2 * self.true_pos + self.false_pos + self.false_neg;
        if d == 0 {
            1.0
        } else {
            (2 * self.true_pos) as f64 / d as f64
        }
    }
}

/// Thresholds `sigmoid(logit) >= 0.5`, i.e. `logit >= 0`, on a `12 x frames` logit matrix.
pub fn predictions_from_logits(logits: &Matrix<f32>) -> Vec<[bool; NUM_CLASSES]> {
    assert_eq!(logits.rows(), NUM_CLASSES);
    (0..logits.cols())
        .map(|f| std::array::from_fn(|k| logits.get(k, f) >= 0.0))
        .collect()
}

/// Pools confusion counts over every clip. The result is independent of how
/// rayon schedules the clips.
pub fn evaluate_f1(net: &Network, clips: &[Clip], mode: Mode) -> Result<F1Counts, ExperimentError> {
    let counts = clips
        .par_iter()
        .map(|clip| -> Result<F1Counts, ExperimentError> {
            let logits = net.forward(&clip.audio, mode)?;
            if logits.cols() != clip.labels.frames() {
                return Err(ExperimentError::Config(format!(
                    "clip {} has {} label frames but the network produced {}; frame rates differ",
                    clip.seed,
                    clip.labels.frames(),
                    logits.cols()
                )));
            }
            Ok(F1Counts::from_predictions(&predictions_from_logits(&logits), &clip.labels))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(counts.into_iter().fold(F1Counts::default(), F1Counts::merge))
}
