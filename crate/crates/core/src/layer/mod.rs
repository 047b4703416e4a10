//! The combolutional layer: a bank of learnable feedback combs followed by a
//! fused absolute-value / max-pool envelope detector.
//!
//! Each channel owns one free parameter `w`. The forward pass maps it to a
//! fundamental with [`scale_to_f0`], to a continuous delay `fs / f0`, filters
//! the input, rectifies and max-pools. In training mode the filter is the
//! sparse fractional-delay comb so the output is differentiable in `w`; in
//! inference mode the delay is rounded and the recursive comb is used, one
//! multiply-accumulate per sample per channel.
//!
//! The training forward never materialises the full `M x T` response: each
//! channel is filtered into a scratch buffer, pooled immediately, and only
//! the pooled maxima with their argmax positions and signs are kept.

mod checkpoint;

pub use checkpoint::{load_params, save_params, CombCheckpoint};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::comb::{
    continuous_delay, discretize_for_inference, echo_taps, iir_comb, scale_to_f0,
    scale_to_f0_gradient, sparse_comb, sparse_comb_accumulate, sparse_comb_delay_derivative_at,
    CombError, ScalingConfig,
};
use crate::signal::AudioSignal;

#[derive(Debug, Error)]
pub enum LayerError {
    #[error(transparent)]
    Comb(#[from] CombError),
    #[error("channel {channel}: delay {delay:.4} samples is below one sample (f0 = {f0:.3} Hz)")]
    DelayTooShort { channel: usize, delay: f64, f0: f64 },
    #[error("invalid layer configuration: {0}")]
    Config(String),
    #[error("signal of {len} samples is shorter than the pooling window ({window})")]
    SignalTooShort { len: usize, window: usize },
    #[error("sample rate mismatch: layer expects {expected} Hz, signal is {actual} Hz")]
    SampleRate { expected: u32, actual: u32 },
    #[error("upstream gradient has shape {actual:?}, expected {expected:?}")]
    Shape {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("backward requires a training-mode forward pass")]
    NotTraining,
}

/// Fixed hyperparameters of a comb bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankHyperparams {
    pub scaling: ScalingConfig,
    pub alpha: f64,
    pub echo_count: usize,
    pub sample_rate: u32,
}

impl Default for BankHyperparams {
    fn default() -> Self {
        Self {
            scaling: ScalingConfig {
                f_min: 200.0,
                f_max: 500.0,
            },
            alpha: 0.9,
            echo_count: 10,
            sample_rate: 16_000,
        }
    }
}

/// Learnable state of a comb bank: exactly one free parameter per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CombBankParams {
    pub w: Vec<f64>,
    pub scaling: ScalingConfig,
    pub alpha: f64,
    pub echo_count: usize,
    pub sample_rate: u32,
}

impl CombBankParams {
    pub fn new(w: Vec<f64>, hyper: BankHyperparams) -> Result<Self, LayerError> {
        let p = Self {
            w,
            scaling: hyper.scaling,
            alpha: hyper.alpha,
            echo_count: hyper.echo_count,
            sample_rate: hyper.sample_rate,
        };
        p.validate()?;
        Ok(p)
    }

    /// Draws `w` i.i.d. uniform on `[-2, 2]`, deterministically from `seed`.
    pub fn init(channels: usize, hyper: BankHyperparams, seed: u64) -> Result<Self, LayerError> {
        if channels == 0 {
            return Err(LayerError::Config("a comb bank needs at least one channel".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = (0..channels).map(|_| rng.gen_range(-2.0..=2.0)).collect();
        Self::new(w, hyper)
    }

    pub fn validate(&self) -> Result<(), LayerError> {
        if self.w.is_empty() {
            return Err(LayerError::Config("a comb bank needs at least one channel".into()));
        }
        if let Some(i) = self.w.iter().position(|w| !w.is_finite()) {
            return Err(LayerError::Config(format!("parameter {i} is not finite")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(LayerError::Config(format!(
                "feedback gain must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.sample_rate == 0 {
            return Err(LayerError::Config("sample rate must be positive".into()));
        }
        self.scaling.validate_for(self.sample_rate)?;
        Ok(())
    }

    pub fn hyper(&self) -> BankHyperparams {
        BankHyperparams {
            scaling: self.scaling,
            alpha: self.alpha,
            echo_count: self.echo_count,
            sample_rate: self.sample_rate,
        }
    }

    pub fn channels(&self) -> usize {
        self.w.len()
    }

    /// Number of trainable scalars; always equal to the channel count.
    pub fn trainable_count(&self) -> usize {
        self.w.len()
    }

    pub fn f0s(&self) -> Vec<f64> {
        self.w.iter().map(|&w| scale_to_f0(w, &self.scaling)).collect()
    }

    /// Continuous per-channel delays, failing on the first channel whose
    /// delay falls below one sample.
    pub fn delays(&self) -> Result<Vec<f64>, LayerError> {
        self.f0s()
            .into_iter()
            .enumerate()
            .map(|(channel, f0)| {
                let delay = continuous_delay(f0, self.sample_rate)?;
                if delay < 1.0 {
                    Err(LayerError::DelayTooShort { channel, delay, f0 })
                } else {
                    Ok(delay)
                }
            })
            .collect()
    }
}

/// Convenience wrapper over [`CombBankParams::init`] with the transcription
/// defaults (`alpha = 0.9`, ten echoes, 16 kHz) and the given range.
pub fn init_params(channels: usize, scaling: ScalingConfig, seed: u64) -> Result<CombBankParams, LayerError> {
    CombBankParams::init(
        channels,
        BankHyperparams {
            scaling,
            ..BankHyperparams::default()
        },
        seed,
    )
}

/// Max-pool geometry of the envelope detector, in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvelopeConfig {
    pub pool_window: usize,
    pub pool_stride: usize,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            pool_window: 1024,
            pool_stride: 512,
        }
    }
}

impl EnvelopeConfig {
    pub fn new(pool_window: usize, pool_stride: usize) -> Result<Self, LayerError> {
        let env = Self {
            pool_window,
            pool_stride,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<(), LayerError> {
        if self.pool_stride == 0 || self.pool_window == 0 {
            return Err(LayerError::Config("pool window and stride must be positive".into()));
        }
        if self.pool_stride > self.pool_window {
            return Err(LayerError::Config(format!(
                "pool stride {} exceeds window {}",
                self.pool_stride, self.pool_window
            )));
        }
        Ok(())
    }

    /// `floor((len - window) / stride) + 1`, or zero when the signal is shorter than one window.
    pub fn frames(&self, len: usize) -> usize {
        if len < self.pool_window {
            0
        } else {
            (len - self.pool_window) / self.pool_stride + 1
        }
    }

    /// Sample index at the centre of frame `index`.
    pub fn frame_center(&self, index: usize) -> f64 {
        (index * self.pool_stride) as f64 + self.pool_window as f64 / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

/// Non-negative `channels x frames` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    values: Vec<f32>,
    channels: usize,
    frames: usize,
    frame_rate: f64,
}

impl FeatureMap {
    pub fn new(values: Vec<f32>, channels: usize, frames: usize, frame_rate: f64) -> Self {
        assert_eq!(values.len(), channels * frames, "feature map shape mismatch");
        Self {
            values,
            channels,
            frames,
            frame_rate,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn row(&self, channel: usize) -> &[f32] {
        &self.values[channel * self.frames..(channel + 1) * self.frames]
    }

    pub fn get(&self, channel: usize, frame: usize) -> f32 {
        self.values[channel * self.frames + frame]
    }
}

/// Per-call state kept by the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct SavedActivations {
    mode: Mode,
    params: CombBankParams,
    delays: Vec<f64>,
    input: Vec<f64>,
    frames: usize,
    argmax: Vec<usize>,
    signs: Vec<f64>,
}

impl SavedActivations {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    /// Sample index selected by max pooling for each `(channel, frame)`.
    pub fn argmax_index_map(&self) -> &[usize] {
        &self.argmax
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub d_w: Vec<f64>,
    /// `channels x frames` argmax positions, row-major.
    pub argmax_index_map: Vec<usize>,
}

struct PooledChannel {
    values: Vec<f32>,
    argmax: Vec<usize>,
    signs: Vec<f64>,
}

/// Rectify and max-pool one channel. Ties go to the earliest sample.
fn pool_abs(y: &[f64], env: &EnvelopeConfig, frames: usize) -> PooledChannel {
    let mut values = Vec::with_capacity(frames);
    let mut argmax = Vec::with_capacity(frames);
    let mut signs = Vec::with_capacity(frames);
    for f in 0..frames {
        let start = f * env.pool_stride;
        let window = &y[start..start + env.pool_window];
        let mut best = 0usize;
        let mut best_abs = window[0].abs();
        for (i, v) in window.iter().enumerate().skip(1) {
            let a = v.abs();
            if a > best_abs {
                best = i;
                best_abs = a;
            }
        }
        let v = window[best];
        values.push(best_abs as f32);
        argmax.push(start + best);
        signs.push(if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        });
    }
    PooledChannel {
        values,
        argmax,
        signs,
    }
}

fn check_input(x: &AudioSignal, params: &CombBankParams, env: &EnvelopeConfig) -> Result<usize, LayerError> {
    params.validate()?;
    env.validate()?;
    if x.sample_rate() != params.sample_rate {
        return Err(LayerError::SampleRate {
            expected: params.sample_rate,
            actual: x.sample_rate(),
        });
    }
    let frames = env.frames(x.len());
    if frames == 0 {
        return Err(LayerError::SignalTooShort {
            len: x.len(),
            window: env.pool_window,
        });
    }
    Ok(frames)
}

/// Filters `x` with every channel, rectifies and max-pools.
pub fn comb_layer_forward(
    x: &AudioSignal,
    params: &CombBankParams,
    env: &EnvelopeConfig,
    mode: Mode,
) -> Result<(FeatureMap, SavedActivations), LayerError> {
    let frames = check_input(x, params, env)?;
    let delays = params.delays()?;
    let input: Vec<f64> = x.samples().iter().map(|&v| f64::from(v)).collect();

    let pooled: Vec<PooledChannel> = delays
        .par_iter()
        .map(|&delay| -> Result<PooledChannel, LayerError> {
            let y = match mode {
                Mode::Training => {
                    let taps = echo_taps(delay, params.alpha, params.echo_count)?;
                    let mut acc = input.clone();
                    sparse_comb_accumulate(&input, &taps, &mut acc);
                    acc
                }
                Mode::Inference => {
                    let k = discretize_for_inference(delay);
                    iir_comb(x.samples(), k, params.alpha)?
                        .into_iter()
                        .map(f64::from)
                        .collect()
                }
            };
            Ok(pool_abs(&y, env, frames))
        })
        .collect::<Result<_, _>>()?;

    let channels = params.channels();
    let mut values = Vec::with_capacity(channels * frames);
    let mut argmax = Vec::with_capacity(channels * frames);
    let mut signs = Vec::with_capacity(channels * frames);
    for p in pooled {
        values.extend(p.values);
        argmax.extend(p.argmax);
        signs.extend(p.signs);
    }
    let frame_rate = f64::from(params.sample_rate) / env.pool_stride as f64;
    Ok((
        FeatureMap::new(values, channels, frames, frame_rate),
        SavedActivations {
            mode,
            params: params.clone(),
            delays,
            input,
            frames,
            argmax,
            signs,
        },
    ))
}

/// Unfused training-mode reference: full sparse comb response per channel,
/// then `|.|`, then max pooling. Used to check the fused path.
pub fn comb_layer_forward_unfused(
    x: &AudioSignal,
    params: &CombBankParams,
    env: &EnvelopeConfig,
) -> Result<FeatureMap, LayerError> {
    let frames = check_input(x, params, env)?;
    let delays = params.delays()?;
    let mut values = Vec::with_capacity(params.channels() * frames);
    for delay in delays {
        let rectified: Vec<f32> = sparse_comb(x.samples(), delay, params.alpha, params.echo_count)?
            .into_iter()
            .map(f32::abs)
            .collect();
        for f in 0..frames {
            let start = f * env.pool_stride;
            let m = rectified[start..start + env.pool_window]
                .iter()
                .fold(0.0f32, |a, &b| a.max(b));
            values.push(m);
        }
    }
    let frame_rate = f64::from(params.sample_rate) / env.pool_stride as f64;
    Ok(FeatureMap::new(values, params.channels(), frames, frame_rate))
}

/// Gradient of a scalar loss with respect to every `w`, given the loss
/// gradient with respect to the feature map (`channels x frames`, row-major).
pub fn comb_layer_backward(upstream: &[f32], saved: &SavedActivations) -> Result<LayerGradients, LayerError> {
    if saved.mode != Mode::Training {
        return Err(LayerError::NotTraining);
    }
    let channels = saved.params.channels();
    if upstream.len() != channels * saved.frames {
        return Err(LayerError::Shape {
            expected: (channels, saved.frames),
            actual: (upstream.len() / saved.frames.max(1), saved.frames),
        });
    }
    let p = &saved.params;
    let fs = f64::from(p.sample_rate);
    let d_w = (0..channels)
        .into_par_iter()
        .map(|m| -> Result<f64, LayerError> {
            let rows = m * saved.frames..(m + 1) * saved.frames;
            let derivs = sparse_comb_delay_derivative_at(
                &saved.input,
                saved.delays[m],
                p.alpha,
                p.echo_count,
                &saved.argmax[rows.clone()],
            )?;
            let d_delay: f64 = upstream[rows.clone()]
                .iter()
                .zip(&saved.signs[rows])
                .zip(&derivs)
                .map(|((&g, &s), &d)| f64::from(g) * s * d)
                .sum();
            let f0 = scale_to_f0(p.w[m], &p.scaling);
            let d_f0 = d_delay * (-fs / (f0 * f0));
            Ok(d_f0 * scale_to_f0_gradient(p.w[m], &p.scaling))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LayerGradients {
        d_w,
        argmax_index_map: saved.argmax.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comb::sparse_comb;

    fn noise(n: usize, seed: u64) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect()
    }

    fn bank(w: Vec<f64>) -> CombBankParams {
        CombBankParams::new(w, BankHyperparams::default()).unwrap()
    }

    #[test]
    fn zero_input_gives_zero_features_and_gradients() {
        let x = AudioSignal::silence(4096, 16_000);
        let p = bank(vec![-0.5, 0.7]);
        let (fm, saved) = comb_layer_forward(&x, &p, &EnvelopeConfig::default(), Mode::Training).unwrap();
        assert!(fm.values().iter().all(|&v| v == 0.0));
        let g = comb_layer_backward(&vec![1.0; fm.values().len()], &saved).unwrap();
        assert_eq!(g.d_w, vec![0.0, 0.0]);
    }

    #[test]
    fn unit_pool_equals_rectified_sparse_comb() {
        let x = AudioSignal::new(noise(2000, 1), 16_000).unwrap();
        let p = bank(vec![0.3]);
        let env = EnvelopeConfig::new(1, 1).unwrap();
        let (fm, _) = comb_layer_forward(&x, &p, &env, Mode::Training).unwrap();
        let delay = p.delays().unwrap()[0];
        let y = sparse_comb(x.samples(), delay, 0.9, 10).unwrap();
        let expected: Vec<f32> = y.iter().map(|v| v.abs()).collect();
        assert_eq!(fm.values(), expected.as_slice());
    }

    #[test]
    fn fused_matches_unfused_reference() {
        let x = AudioSignal::new(noise(9000, 2), 16_000).unwrap();
        let p = CombBankParams::init(6, BankHyperparams::default(), 9).unwrap();
        let env = EnvelopeConfig::default();
        let (fused, _) = comb_layer_forward(&x, &p, &env, Mode::Training).unwrap();
        let unfused = comb_layer_forward_unfused(&x, &p, &env).unwrap();
        assert_eq!(fused, unfused);
    }

    #[test]
    fn frame_count_formula() {
        let env = EnvelopeConfig::default();
        assert_eq!(env.frames(1023), 0);
        assert_eq!(env.frames(1024), 1);
        assert_eq!(env.frames(32768), 63);
        assert!(EnvelopeConfig::new(256, 512).is_err());
    }

    #[test]
    fn upstream_zero_gives_zero_gradient() {
        let x = AudioSignal::new(noise(4096, 3), 16_000).unwrap();
        let p = bank(vec![0.1, -1.0, 1.5]);
        let (fm, saved) = comb_layer_forward(&x, &p, &EnvelopeConfig::default(), Mode::Training).unwrap();
        let g = comb_layer_backward(&vec![0.0; fm.values().len()], &saved).unwrap();
        assert!(g.d_w.iter().all(|&d| d == 0.0));
        assert_eq!(g.argmax_index_map.len(), 3 * fm.frames());
    }

    #[test]
    fn inference_saved_state_rejects_backward() {
        let x = AudioSignal::new(noise(2048, 4), 16_000).unwrap();
        let p = bank(vec![0.0]);
        let (fm, saved) = comb_layer_forward(&x, &p, &EnvelopeConfig::default(), Mode::Inference).unwrap();
        assert!(matches!(
            comb_layer_backward(&vec![1.0; fm.values().len()], &saved),
            Err(LayerError::NotTraining)
        ));
    }

    #[test]
    fn short_delay_names_channel() {
        let hyper = BankHyperparams {
            scaling: ScalingConfig::new(100.0, 400.0).unwrap(),
            sample_rate: 1000,
            ..BankHyperparams::default()
        };
        let p = CombBankParams::new(vec![0.0, 0.0], hyper).unwrap();
        assert!(p.delays().is_ok());
        // Fundamentals above the sample rate are only reachable through a bad range.
        let bad = CombBankParams {
            scaling: ScalingConfig { f_min: 1500.0, f_max: 1800.0 },
            ..p
        };
        match bad.delays() {
            Err(LayerError::DelayTooShort { channel: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn init_is_deterministic_and_rejects_empty() {
        let s = ScalingConfig::new(200.0, 500.0).unwrap();
        assert_eq!(init_params(16, s, 5).unwrap(), init_params(16, s, 5).unwrap());
        assert_ne!(init_params(16, s, 5).unwrap(), init_params(16, s, 6).unwrap());
        assert!(init_params(0, s, 5).is_err());
        let p = init_params(200, s, 1).unwrap();
        assert!(p.w.iter().all(|w| (-2.0..=2.0).contains(w)));
        assert_eq!(p.trainable_count(), 200);
    }

    #[test]
    fn sample_rate_mismatch_rejected() {
        let x = AudioSignal::new(noise(4096, 4), 8_000).unwrap();
        let p = bank(vec![0.0]);
        assert!(matches!(
            comb_layer_forward(&x, &p, &EnvelopeConfig::default(), Mode::Training),
            Err(LayerError::SampleRate { .. })
        ));
    }
}
