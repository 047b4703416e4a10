use rand::Rng;

use super::{Matrix, NnError, Scalar};

/// Fully connected layer applied to each row of a `batch x in` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    /// `out x in`, row-major.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub inputs: usize,
    pub outputs: usize,
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub d_weights: Vec<T>,
    pub d_bias: Vec<T>,
    pub d_input: Matrix<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn init<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = (1.0 / inputs as f64).sqrt();
        let mut draw = || T::of(rng.gen_range(-bound..=bound));
        Self {
            weights: (0..inputs * outputs).map(|_| draw()).collect(),
            bias: (0..outputs).map(|_| draw()).collect(),
            inputs,
            outputs,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>, NnError> {
        if x.cols() != self.inputs {
            return Err(NnError::Shape(format!(
                "dense layer expects {} features, got {}",
                self.inputs,
                x.cols()
            )));
        }
        let mut out = Matrix::zeros(x.rows(), self.outputs);
        for b in 0..x.rows() {
            let xin = x.row(b);
            for o in 0..self.outputs {
                let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                let mut acc = self.bias[o];
                for (a, c) in w.iter().zip(xin) {
                    acc += *a * *c;
                }
                out.set(b, o, acc);
            }
        }
        Ok(out)
    }

    pub fn backward(&self, x: &Matrix<T>, grad_out: &Matrix<T>) -> Result<DenseGrads<T>, NnError> {
        if grad_out.shape() != (x.rows(), self.outputs) || x.cols() != self.inputs {
            return Err(NnError::Shape(format!(
                "dense backward: input {:?}, upstream {:?}",
                x.shape(),
                grad_out.shape()
            )));
        }
        let mut d_weights = vec![T::zero(); self.weights.len()];
        let mut d_bias = vec![T::zero(); self.outputs];
        let mut d_input = Matrix::zeros(x.rows(), self.inputs);
        for b in 0..x.rows() {
            for o in 0..self.outputs {
                let g = grad_out.get(b, o);
                d_bias[o] += g;
                for i in 0..self.inputs {
                    d_weights[o * self.inputs + i] += g * x.get(b, i);
                    let cur = d_input.get(b, i);
                    d_input.set(b, i, cur + g * self.weights[o * self.inputs + i]);
                }
            }
        }
        Ok(DenseGrads {
            d_weights,
            d_bias,
            d_input,
        })
    }
}
