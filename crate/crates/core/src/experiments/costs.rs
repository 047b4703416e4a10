use serde::Serialize;

use super::{Frontend, ModelSpec};
use crate::data::NUM_CLASSES;

/// Cost of one layer. A layer producing one output column per `input_stride`
/// input samples costs `macs_per_output / input_stride` MACs per input sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerCost {
    pub name: String,
    pub params: u64,
    pub macs_per_output: u64,
    pub input_stride: u64,
}

impl LayerCost {
    pub fn macs_per_sample(&self) -> f64 {
        self.macs_per_output as f64 / self.input_stride as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub model: String,
    pub layers: Vec<LayerCost>,
}

impl CostReport {
    pub fn first_layer(&self) -> &LayerCost {
        &self.layers[0]
    }

    pub fn total_params(&self) -> u64 {
        self.layers.iter().map(|l| l.params).sum()
    }

    pub fn total_macs_per_sample(&self) -> f64 {
        self.layers.iter().map(LayerCost::macs_per_sample).sum()
    }
}

fn conv_cost(name: &str, c_out: u64, c_in: u64, len: u64, stride: u64) -> LayerCost {
    LayerCost {
        name: name.into(),
        params: c_out * (c_in * len + 1),
        macs_per_output: c_out * c_in * len,
        input_stride: stride,
    }
}

/// Parameter and inference MAC counts, read off the layer shapes.
///
/// The comb frontend is costed in its recursive inference form: one MAC per
/// output sample per channel, and one parameter per channel. Convolutions cost
/// `C_out * C_in * L` MACs per output column; the head layers run at the frame
/// rate, so their per-sample cost is divided by the pooling stride.
///
/// A SincNet-style frontend with symmetric kernels would cost half of the
/// equivalent convolution, `C_out * C_in * L / (2 * stride)`, by folding
/// mirrored taps; it is not modelled here.
pub fn count_costs(spec: &ModelSpec) -> CostReport {
    let c = spec.channels as u64;
    let hop = spec.pool_stride_samples as u64;
    let head = spec.head_kernel_len as u64;
    let first = match spec.frontend {
        Frontend::Comb => LayerCost {
            name: "comb".into(),
            params: c,
            macs_per_output: c,
            input_stride: 1,
        },
        Frontend::Conv => conv_cost("conv1", c, 1, spec.conv_kernel_len as u64, 1),
    };
    CostReport {
        model: spec.label(),
        layers: vec![
            first,
            conv_cost("conv2", c, c, head, hop),
            conv_cost("conv3", NUM_CLASSES as u64, c, head, hop),
        ],
    }
}
