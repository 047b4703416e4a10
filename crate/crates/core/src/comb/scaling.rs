use serde::{Deserialize, Serialize};

use super::CombError;

/// Frequency range that a learnable channel may cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub f_min: f64,
    pub f_max: f64,
}

impl ScalingConfig {
    pub fn new(f_min: f64, f_max: f64) -> Result<Self, CombError> {
        let cfg = Self { f_min, f_max };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CombError> {
        if self.f_min.is_finite() && self.f_max.is_finite() && 0.0 < self.f_min && self.f_min < self.f_max {
            Ok(())
        } else {
            Err(CombError::Domain(format!(
                "frequency range must satisfy 0 < f_min < f_max, got [{}, {}]",
                self.f_min, self.f_max
            )))
        }
    }

    /// Checks the range against the Nyquist limit of `sample_rate`.
    pub fn validate_for(&self, sample_rate: u32) -> Result<(), CombError> {
        self.validate()?;
        let nyquist = f64::from(sample_rate) / 2.0;
        if self.f_max > nyquist {
            return Err(CombError::Domain(format!(
                "f_max {} Hz exceeds Nyquist {nyquist} Hz",
                self.f_max
            )));
        }
        Ok(())
    }

    fn log_ratio(&self) -> f64 {
        (self.f_max / self.f_min).ln()
    }
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// In floating point the sigmoid rounds to exactly 0 or 1 once |w| passes
// about 37, which would put f0 on a range end. Holding it this far inside
// keeps f0 strictly within the open range for every finite w.
const SIGMOID_MARGIN: f64 = 1e-12;

fn interior_sigmoid(w: f64) -> f64 {
    sigmoid(w).clamp(SIGMOID_MARGIN, 1.0 - SIGMOID_MARGIN)
}

/// Maps a free parameter onto `(f_min, f_max)` with geometric spacing:
/// `f0 = f_min * (f_max / f_min)^sigmoid(w)`.
pub fn scale_to_f0(w: f64, cfg: &ScalingConfig) -> f64 {
    cfg.f_min * (interior_sigmoid(w) * cfg.log_ratio()).exp()
}

/// `d f0 / d w = f0 * ln(f_max / f_min) * s * (1 - s)` with `s = sigmoid(w)`.
pub fn scale_to_f0_gradient(w: f64, cfg: &ScalingConfig) -> f64 {
    let s = interior_sigmoid(w);
    scale_to_f0(w, cfg) * cfg.log_ratio() * s * (1.0 - s)
}

/// Continuous delay in samples for a fundamental `f0`.
pub fn continuous_delay(f0: f64, sample_rate: u32) -> Result<f64, CombError> {
    if !(f0 > 0.0) || !f0.is_finite() {
        return Err(CombError::Domain(format!(
            "fundamental must be positive and finite, got {f0}"
        )));
    }
    Ok(f64::from(sample_rate) / f0)
}

/// Integer delay for the recursive inference path: round half to even,
/// clamped to at least one sample.
pub fn discretize_for_inference(delay: f64) -> usize {
    let k = delay.round_ties_even();
    if k < 1.0 {
        1
    } else {
        k as usize
    }
}
