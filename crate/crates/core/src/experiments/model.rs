//! CombNet and ConvNet transcription networks.
//!
//! Both end in the head `conv(C -> C) -> ELU -> conv(C -> 12)` over pooled
//! frames (pointwise for CombNet, length 9 for ConvNet). The first layer is:
//!
//! - CombNet: a combolutional layer with `C` channels (fused `|.|` + max pool).
//! - ConvNet: a causal `1 -> C` convolution at the sample rate, ELU, then the
//!   same max pool so both produce frames on the same grid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::comb::ScalingConfig;
use crate::data::{LabelGrid, NUM_CLASSES};
use crate::layer::{
    comb_layer_backward, comb_layer_forward, BankHyperparams, CombBankParams, EnvelopeConfig, Mode, SavedActivations,
};
use crate::nn::{
    bce_with_logits, elu_backward, elu_inplace, max_pool1d, max_pool1d_backward, Conv1dLayer, Matrix, Param, Pooled,
    Tensor,
};
use crate::signal::AudioSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frontend {
    Comb,
    Conv,
}

impl Frontend {
    pub fn name(self) -> &'static str {
        match self {
            Frontend::Comb => "comb",
            Frontend::Conv => "conv",
        }
    }
}

/// Architecture of one transcription network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub frontend: Frontend,
    /// Channels of the first and second layers.
    pub channels: usize,
    pub sample_rate_hz: u32,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub alpha: f64,
    pub echo_count: usize,
    pub pool_window_samples: usize,
    pub pool_stride_samples: usize,
    /// First-layer kernel length of the conv frontend.
    pub conv_kernel_len: usize,
    /// Kernel length of the two head layers (odd; padded to keep the frame count).
    pub head_kernel_len: usize,
}

impl ModelSpec {
    pub fn comb(channels: usize) -> Self {
        Self {
            frontend: Frontend::Comb,
            channels,
            sample_rate_hz: 16_000,
            f_min_hz: 200.0,
            f_max_hz: 500.0,
            alpha: 0.9,
            echo_count: 10,
            pool_window_samples: 1024,
            pool_stride_samples: 512,
            conv_kernel_len: 251,
            head_kernel_len: 1,
        }
    }

    pub fn conv(channels: usize) -> Self {
        Self {
            frontend: Frontend::Conv,
            head_kernel_len: 9,
            ..Self::comb(channels)
        }
    }

    pub fn envelope(&self) -> EnvelopeConfig {
        EnvelopeConfig {
            pool_window: self.pool_window_samples,
            pool_stride: self.pool_stride_samples,
        }
    }

    pub fn bank_hyper(&self) -> BankHyperparams {
        BankHyperparams {
            scaling: ScalingConfig {
                f_min: self.f_min_hz,
                f_max: self.f_max_hz,
            },
            alpha: self.alpha,
            echo_count: self.echo_count,
            sample_rate: self.sample_rate_hz,
        }
    }

    pub fn label(&self) -> String {
        let name = match self.frontend {
            Frontend::Comb => "CombNet",
            Frontend::Conv => "ConvNet",
        };
        format!("{name}_{}", self.channels)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.channels == 0 {
            return bad("channel count must be positive".into());
        }
        if self.head_kernel_len == 0 || self.head_kernel_len % 2 == 0 {
            return bad(format!("head kernel length must be odd, got {}", self.head_kernel_len));
        }
        if self.frontend == Frontend::Conv && self.conv_kernel_len == 0 {
            return bad("conv kernel length must be positive".into());
        }
        self.envelope().validate()?;
        if self.frontend == Frontend::Comb {
            self.bank_hyper().scaling.validate_for(self.sample_rate_hz)?;
            if !(self.alpha > 0.0 && self.alpha < 1.0) {
                return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum FrontendLayer {
    Comb { w: Vec<f32> },
    Conv(Conv1dLayer<f32>),
}

/// A trainable transcription network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: ModelSpec,
    frontend: FrontendLayer,
    hidden: Conv1dLayer<f32>,
    output: Conv1dLayer<f32>,
}

/// Gradients of every parameter tensor, in [`Network::param_names`] order.
pub type Gradients = Vec<Vec<f32>>;

enum FrontendCache {
    Comb(SavedActivations),
    Conv { pre: Matrix<f32>, pooled: Pooled<f32>, input: Matrix<f32> },
}

struct ForwardCache {
    frontend: FrontendCache,
    features: Matrix<f32>,
    hidden_pre: Matrix<f32>,
    hidden: Matrix<f32>,
}

impl Network {
    pub fn new(spec: &ModelSpec, seed: u64) -> Result<Self, ExperimentError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = spec.channels;
        let frontend = match spec.frontend {
            Frontend::Comb => {
                let p = CombBankParams::init(c, spec.bank_hyper(), seed)?;
                FrontendLayer::Comb {
                    w: p.w.iter().map(|&w| w as f32).collect(),
                }
            }
            Frontend::Conv => {
                let l = spec.conv_kernel_len;
                FrontendLayer::Conv(Conv1dLayer::init(c, 1, l, 1, &mut rng).with_padding(l - 1, 0))
            }
        };
        let pad = (spec.head_kernel_len - 1) / 2;
        let hidden = Conv1dLayer::init(c, c, spec.head_kernel_len, 1, &mut rng).with_padding(pad, pad);
        let output = Conv1dLayer::init(NUM_CLASSES, c, spec.head_kernel_len, 1, &mut rng).with_padding(pad, pad);
        Ok(Self {
            spec: spec.clone(),
            frontend,
            hidden,
            output,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// Comb bank parameters, for comb frontends.
    pub fn comb_params(&self) -> Option<CombBankParams> {
        match &self.frontend {
            FrontendLayer::Comb { w } => Some(CombBankParams {
                w: w.iter().map(|&v| f64::from(v)).collect(),
                scaling: self.spec.bank_hyper().scaling,
                alpha: self.spec.alpha,
                echo_count: self.spec.echo_count,
                sample_rate: self.spec.sample_rate_hz,
            }),
            FrontendLayer::Conv(_) => None,
        }
    }

    pub fn f0s(&self) -> Option<Vec<f64>> {
        self.comb_params().map(|p| p.f0s())
    }

    fn layer_tensors(prefix: &str, l: &Conv1dLayer<f32>) -> [Tensor; 2] {
        [
            Tensor::new(format!("{prefix}.kernels"), vec![l.c_out, l.c_in, l.len], l.kernels.clone()),
            Tensor::new(format!("{prefix}.bias"), vec![l.c_out], l.bias.clone()),
        ]
    }

    /// All parameters as named tensors (checkpoint order).
    pub fn tensors(&self) -> Vec<Tensor> {
        let mut out = Vec::new();
        match &self.frontend {
            FrontendLayer::Comb { w } => out.push(Tensor::new("comb.w", vec![w.len()], w.clone())),
            FrontendLayer::Conv(l) => out.extend(Self::layer_tensors("conv1", l)),
        }
        out.extend(Self::layer_tensors("conv2", &self.hidden));
        out.extend(Self::layer_tensors("conv3", &self.output));
        out
    }

    pub fn param_names(&self) -> Vec<String> {
        self.tensors().into_iter().map(|t| t.name).collect()
    }

    /// Restores parameters from tensors produced by [`Network::tensors`] for the same spec.
    pub fn from_tensors(spec: &ModelSpec, tensors: &[Tensor]) -> Result<Self, ExperimentError> {
        let mut net = Self::new(spec, 0)?;
        let expected = net.tensors();
        if expected.len() != tensors.len() {
            return Err(ExperimentError::Config(format!(
                "checkpoint holds {} tensors, {} expects {}",
                tensors.len(),
                spec.label(),
                expected.len()
            )));
        }
        for (e, t) in expected.iter().zip(tensors) {
            if e.name != t.name || e.shape != t.shape {
                return Err(ExperimentError::Config(format!(
                    "checkpoint tensor {} {:?} does not match expected {} {:?}",
                    t.name, t.shape, e.name, e.shape
                )));
            }
        }
        for (slot, t) in net.params_mut().into_iter().zip(tensors) {
            slot.value.copy_from_slice(&t.data);
        }
        Ok(net)
    }

    /// Mutable views of every parameter tensor, in checkpoint order.
    pub fn params_mut(&mut self) -> Vec<Param<'_>> {
        let mut out = Vec::new();
        match &mut self.frontend {
            FrontendLayer::Comb { w } => out.push(Param {
                name: "comb.w",
                value: w.as_mut_slice(),
            }),
            FrontendLayer::Conv(l) => {
                out.push(Param {
                    name: "conv1.kernels",
                    value: l.kernels.as_mut_slice(),
                });
                out.push(Param {
                    name: "conv1.bias",
                    value: l.bias.as_mut_slice(),
                });
            }
        }
        out.push(Param {
            name: "conv2.kernels",
            value: self.hidden.kernels.as_mut_slice(),
        });
        out.push(Param {
            name: "conv2.bias",
            value: self.hidden.bias.as_mut_slice(),
        });
        out.push(Param {
            name: "conv3.kernels",
            value: self.output.kernels.as_mut_slice(),
        });
        out.push(Param {
            name: "conv3.bias",
            value: self.output.bias.as_mut_slice(),
        });
        out
    }

    fn check_audio(&self, x: &AudioSignal) -> Result<(), ExperimentError> {
        if x.sample_rate() != self.spec.sample_rate_hz {
            return Err(ExperimentError::Config(format!(
                "{} expects {} Hz audio, got {} Hz",
                self.spec.label(),
                self.spec.sample_rate_hz,
                x.sample_rate()
            )));
        }
        Ok(())
    }

    fn frontend_forward(&self, x: &AudioSignal, mode: Mode) -> Result<(Matrix<f32>, FrontendCache), ExperimentError> {
        self.check_audio(x)?;
        let env = self.spec.envelope();
        match &self.frontend {
            FrontendLayer::Comb { .. } => {
                let params = self.comb_params().expect("comb frontend");
                let (fm, saved) = comb_layer_forward(x, &params, &env, mode)?;
                let (c, t) = (fm.channels(), fm.frames());
                Ok((Matrix::from_vec(c, t, fm.into_values()), FrontendCache::Comb(saved)))
            }
            FrontendLayer::Conv(layer) => {
                let input = Matrix::from_vec(1, x.len(), x.samples().to_vec());
                let pre = layer.forward(&input)?;
                let mut act = pre.clone();
                elu_inplace(act.data_mut());
                let pooled = max_pool1d(&act, env.pool_window, env.pool_stride)?;
                Ok((pooled.values.clone(), FrontendCache::Conv { pre, pooled, input }))
            }
        }
    }

    fn forward_cached(&self, x: &AudioSignal, mode: Mode) -> Result<(Matrix<f32>, ForwardCache), ExperimentError> {
        let (features, frontend) = self.frontend_forward(x, mode)?;
        let hidden_pre = self.hidden.forward(&features)?;
        let mut hidden = hidden_pre.clone();
        elu_inplace(hidden.data_mut());
        let logits = self.output.forward(&hidden)?;
        Ok((
            logits,
            ForwardCache {
                frontend,
                features,
                hidden_pre,
                hidden,
            },
        ))
    }

    /// Frame logits (`12 x frames`).
    pub fn forward(&self, x: &AudioSignal, mode: Mode) -> Result<Matrix<f32>, ExperimentError> {
        Ok(self.forward_cached(x, mode)?.0)
    }

    /// Frontend feature map (`channels x frames`).
    pub fn features(&self, x: &AudioSignal, mode: Mode) -> Result<Matrix<f32>, ExperimentError> {
        Ok(self.frontend_forward(x, mode)?.0)
    }

    /// Mean BCE of one clip and the gradient of that loss for every parameter.
    pub fn loss_and_gradients(&self, x: &AudioSignal, labels: &LabelGrid) -> Result<(f64, Gradients), ExperimentError> {
        let (logits, cache) = self.forward_cached(x, Mode::Training)?;
        let targets = labels.to_targets();
        if targets.cols() != logits.cols() {
            return Err(ExperimentError::Config(format!(
                "labels have {} frames but the network produced {}",
                targets.cols(),
                logits.cols()
            )));
        }
        let (loss, d_logits) = bce_with_logits(&logits, &targets)?;

        let g_out = self.output.backward(&cache.hidden, &d_logits, true)?;
        let mut d_hidden = g_out.d_input.expect("input gradient requested");
        elu_backward(cache.hidden_pre.data(), d_hidden.data_mut());
        let g_hidden = self.hidden.backward(&cache.features, &d_hidden, true)?;
        let d_features = g_hidden.d_input.expect("input gradient requested");

        let mut grads = Vec::with_capacity(6);
        match (&cache.frontend, &self.frontend) {
            (FrontendCache::Comb(saved), FrontendLayer::Comb { .. }) => {
                let g = comb_layer_backward(d_features.data(), saved)?;
                grads.push(g.d_w.iter().map(|&v| v as f32).collect());
            }
            (FrontendCache::Conv { pre, pooled, input }, FrontendLayer::Conv(layer)) => {
                let mut d_act = max_pool1d_backward(pooled, &d_features);
                elu_backward(pre.data(), d_act.data_mut());
                let g = layer.backward(input, &d_act, false)?;
                grads.push(g.d_kernels);
                grads.push(g.d_bias);
            }
            _ => unreachable!("cache always matches the frontend"),
        }
        grads.push(g_hidden.d_kernels);
        grads.push(g_hidden.d_bias);
        grads.push(g_out.d_kernels);
        grads.push(g_out.d_bias);
        Ok((loss, grads))
    }

    /// Mean loss and mean gradients over a batch. Clips run in parallel; the
    /// reduction order is fixed so results are bit-reproducible.
    pub fn batch_gradients(&self, batch: &[(AudioSignal, LabelGrid)]) -> Result<(f64, Gradients), ExperimentError> {
        assert!(!batch.is_empty(), "empty batch");
        let per_clip: Vec<(f64, Gradients)> = batch
            .par_iter()
            .map(|(x, y)| self.loss_and_gradients(x, y))
            .collect::<Result<_, _>>()?;
        let scale = 1.0 / batch.len() as f64;
        let mut iter = per_clip.into_iter();
        let (mut loss, mut grads) = iter.next().expect("non-empty");
        let mut acc: Vec<Vec<f64>> = grads.iter().map(|g| g.iter().map(|&v| f64::from(v)).collect()).collect();
        for (l, g) in iter {
            loss += l;
            for (a, b) in acc.iter_mut().zip(&g) {
                for (x, &y) in a.iter_mut().zip(b) {
                    *x += f64::from(y);
                }
            }
        }
        for (dst, src) in grads.iter_mut().zip(&acc) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = (s * scale) as f32;
            }
        }
        loss *= scale;
        Ok((loss, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{events_to_labelgrid, sample_note_sequence, synthesize_clip};

    #[test]
    fn parameter_counts_match_closed_form() {
        for c in [8usize, 16, 32, 64, 128] {
            let comb = Network::new(&ModelSpec::comb(c), 0).unwrap();
            assert_eq!(comb.param_count(), c + c * (c + 1) + NUM_CLASSES * (c + 1));
            let conv = Network::new(&ModelSpec::conv(c), 0).unwrap();
            assert_eq!(conv.param_count(), c * 252 + c * (9 * c + 1) + NUM_CLASSES * (9 * c + 1));
        }
        // CombNet_8 and CombNet_16 sizes reported for the transcription task.
        assert_eq!(Network::new(&ModelSpec::comb(8), 0).unwrap().param_count(), 188);
        assert_eq!(Network::new(&ModelSpec::comb(16), 0).unwrap().param_count(), 492);
    }

    #[test]
    fn tensor_round_trip() {
        let net = Network::new(&ModelSpec::conv(4), 3).unwrap();
        let back = Network::from_tensors(net.spec(), &net.tensors()).unwrap();
        assert_eq!(back, net);
        assert!(Network::from_tensors(&ModelSpec::conv(5), &net.tensors()).is_err());
    }

    #[test]
    fn forward_shapes() {
        let events = sample_note_sequence(1);
        let x = synthesize_clip(&events, 16_000).unwrap();
        for spec in [ModelSpec::comb(4), ModelSpec::conv(4)] {
            let net = Network::new(&spec, 1).unwrap();
            let y = net.forward(&x, Mode::Training).unwrap();
            assert_eq!(y.shape(), (NUM_CLASSES, spec.envelope().frames(x.len())));
            let labels = events_to_labelgrid(&events, &spec.envelope(), 16_000, x.len());
            let (loss, grads) = net.loss_and_gradients(&x, &labels).unwrap();
            assert!(loss.is_finite());
            assert_eq!(grads.len(), net.param_names().len());
        }
    }
}
