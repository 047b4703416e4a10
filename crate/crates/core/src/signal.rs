//! Mono audio buffers.

use crate::comb::CombError;

/// A mono, finite, real-valued sample sequence at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioSignal {
    /// Wraps `samples`, rejecting a zero sample rate or any non-finite sample.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, CombError> {
        if sample_rate == 0 {
            return Err(CombError::Domain("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(CombError::Domain(format!(
                "sample {i} is not finite ({})",
                samples[i]
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        assert!(sample_rate > 0, "sample rate must be positive");
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |m, s| m.max(s.abs()))
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }
}

/// Root-mean-square of a slice, accumulated in double precision. Empty slices give 0.
pub fn rms(samples: &[f32]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let sum: f64 = samples.iter().map(|&s| f64::from(s) * f64::from(s)).sum();
    (sum / samples.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_samples() {
        assert!(AudioSignal::new(vec![0.0, f32::NAN], 16_000).is_err());
        assert!(AudioSignal::new(vec![f32::INFINITY], 16_000).is_err());
        assert!(AudioSignal::new(vec![0.5], 0).is_err());
    }

    #[test]
    fn rms_of_constant() {
        assert!((rms(&[0.5; 10]) - 0.5).abs() < 1e-12);
        assert_eq!(rms(&[]), 0.0);
    }
}
