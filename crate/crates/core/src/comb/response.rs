use std::f64::consts::PI;

use super::{check_alpha, discretize_for_inference, iir_comb, CombError};
use crate::signal::rms;

/// One comb channel with a fixed fundamental.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombChannelConfig {
    pub f0: f64,
    pub alpha: f64,
    pub echo_count: usize,
    pub sample_rate: u32,
}

impl CombChannelConfig {
    pub fn new(f0: f64, alpha: f64, echo_count: usize, sample_rate: u32) -> Result<Self, CombError> {
        check_alpha(alpha)?;
        if sample_rate == 0 {
            return Err(CombError::Domain("sample rate must be positive".into()));
        }
        let nyquist = f64::from(sample_rate) / 2.0;
        if !(f0 > 0.0 && f0 <= nyquist) {
            return Err(CombError::Domain(format!(
                "f0 must lie in (0, {nyquist}] Hz, got {f0}"
            )));
        }
        if echo_count == 0 {
            return Err(CombError::Domain("echo count must be positive".into()));
        }
        Ok(Self {
            f0,
            alpha,
            echo_count,
            sample_rate,
        })
    }

    /// Continuous delay `fs / f0` in samples.
    pub fn delay(&self) -> f64 {
        f64::from(self.sample_rate) / self.f0
    }
}

/// `|H(f)| = 1 / sqrt(1 + a^2 - 2 a cos(2 pi f / f0))` for the infinite recursion.
pub fn magnitude_response(cfg: &CombChannelConfig, freq: f64) -> f64 {
    let a = cfg.alpha;
    1.0 / (1.0 + a * a - 2.0 * a * (2.0 * PI * freq / cfg.f0).cos()).sqrt()
}

/// Measures the steady-state gain of the recursive filter at `probe_hz` by
/// driving it with a unit-amplitude sinusoid and comparing output and input
/// RMS over a tail that starts after the feedback transient has decayed
/// below 1e-7 of its initial level.
///
/// The delay is `discretize_for_inference(cfg.delay())`, so the result only
/// matches [`magnitude_response`] when the configured delay is an integer.
pub fn measure_gain(cfg: &CombChannelConfig, probe_hz: f64) -> Result<f64, CombError> {
    let fs = f64::from(cfg.sample_rate);
    if !(probe_hz > 0.0 && probe_hz < fs / 2.0) {
        return Err(CombError::Domain(format!(
            "probe frequency must lie in (0, {}) Hz, got {probe_hz}",
            fs / 2.0
        )));
    }
    let k = discretize_for_inference(cfg.delay());
    let echoes_to_settle = ((1e-7f64).ln() / cfg.alpha.ln()).ceil() as usize;
    let settle = echoes_to_settle * k;
    let period = fs / probe_hz;
    let tail = ((200.0 * period).ceil() as usize).max(1 << 16);
    let n = settle + tail;
    let x: Vec<f32> = (0..n)
        .map(|i| (2.0 * PI * probe_hz * i as f64 / fs).sin() as f32)
        .collect();
    let y = iir_comb(&x, k, cfg.alpha)?;
    Ok(rms(&y[settle..]) / rms(&x[settle..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel(f0: f64) -> CombChannelConfig {
        CombChannelConfig::new(f0, 0.9, 10, 16_000).unwrap()
    }

    #[test]
    fn peaks_at_harmonics() {
        let c = channel(200.0);
        for h in 1..=5 {
            let g = magnitude_response(&c, h as f64 * 200.0);
            assert!((g - 10.0).abs() < 1e-9, "h={h}: {g}");
        }
    }

    #[test]
    fn trough_and_quarter_points() {
        let c = channel(200.0);
        assert!((magnitude_response(&c, 100.0) - 1.0 / 1.9).abs() < 1e-12);
        assert!((magnitude_response(&c, 100.0) - 0.52632).abs() < 1e-5);
        assert!((magnitude_response(&c, 50.0) - 0.74329).abs() < 1e-5);
    }

    #[test]
    fn periodic_in_f0() {
        let c = channel(250.0);
        for &f in &[13.0, 97.5, 180.0] {
            let a = magnitude_response(&c, f);
            let b = magnitude_response(&c, f + 3.0 * 250.0);
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn measured_gain_tracks_analytic_response() {
        let c = channel(160.0); // K = 100
        let g = measure_gain(&c, 320.0).unwrap();
        assert!((g / 10.0 - 1.0).abs() < 0.05, "{g}");
        let g = measure_gain(&c, 80.0).unwrap();
        assert!((g / (1.0 / 1.9) - 1.0).abs() < 0.05, "{g}");
    }

    #[test]
    fn config_validation() {
        assert!(CombChannelConfig::new(100.0, 1.0, 10, 16_000).is_err());
        assert!(CombChannelConfig::new(9_000.0, 0.9, 10, 16_000).is_err());
        assert!(CombChannelConfig::new(100.0, 0.9, 0, 16_000).is_err());
        assert_eq!(channel(100.0).delay(), 160.0);
    }
}
