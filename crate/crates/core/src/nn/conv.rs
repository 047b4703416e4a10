use rand::Rng;

use super::{Matrix, NnError, Scalar};

/// 1-D cross-correlation layer with stride and zero padding.
///
/// Kernels are stored `c_out x c_in x len`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dLayer<T> {
    pub kernels: Vec<T>,
    pub bias: Vec<T>,
    pub c_out: usize,
    pub c_in: usize,
    pub len: usize,
    pub stride: usize,
    /// Zeros added before and after the input.
    pub padding: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct Conv1dGrads<T> {
    pub d_kernels: Vec<T>,
    pub d_bias: Vec<T>,
    pub d_input: Option<Matrix<T>>,
}

/// Dot product with eight independent partial sums, which lets the compiler vectorise it.
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut lanes = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..8 {
            lanes[i] += x[i] * y[i];
        }
    }
    let mut acc = T::zero();
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        acc += *x * *y;
    }
    lanes.iter().fold(acc, |s, &v| s + v)
}

impl<T: Scalar> Conv1dLayer<T> {
    /// Uniform fan-in initialisation in `+-sqrt(1 / (c_in * len))` for kernels and bias.
    pub fn init<R: Rng>(c_out: usize, c_in: usize, len: usize, stride: usize, rng: &mut R) -> Self {
        assert!(c_out > 0 && c_in > 0 && len > 0 && stride > 0, "empty convolution");
        let bound = (1.0 / (c_in * len) as f64).sqrt();
        let mut draw = || T::of(rng.gen_range(-bound..=bound));
        let kernels = (0..c_out * c_in * len).map(|_| draw()).collect();
        let bias = (0..c_out).map(|_| draw()).collect();
        Self {
            kernels,
            bias,
            c_out,
            c_in,
            len,
            stride,
            padding: (0, 0),
        }
    }

    pub fn with_padding(mut self, left: usize, right: usize) -> Self {
        self.padding = (left, right);
        self
    }

    pub fn param_count(&self) -> usize {
        self.kernels.len() + self.bias.len()
    }

    /// `floor((T + pad - len) / stride) + 1`, or `None` when the padded input is shorter than a kernel.
    pub fn output_len(&self, input_len: usize) -> Option<usize> {
        let padded = input_len + self.padding.0 + self.padding.1;
        (padded >= self.len).then(|| (padded - self.len) / self.stride + 1)
    }

    #[inline]
    fn kernel(&self, co: usize, ci: usize) -> &[T] {
        let start = (co * self.c_in + ci) * self.len;
        &self.kernels[start..start + self.len]
    }

    fn padded(&self, x: &Matrix<T>) -> Matrix<T> {
        if self.padding == (0, 0) {
            return x.clone();
        }
        let cols = x.cols() + self.padding.0 + self.padding.1;
        let mut out = Matrix::zeros(x.rows(), cols);
        for r in 0..x.rows() {
            out.row_mut(r)[self.padding.0..self.padding.0 + x.cols()].copy_from_slice(x.row(r));
        }
        out
    }

    fn check(&self, x: &Matrix<T>) -> Result<usize, NnError> {
        if x.rows() != self.c_in {
            return Err(NnError::Shape(format!(
                "convolution expects {} input channels, got {}",
                self.c_in,
                x.rows()
            )));
        }
        self.output_len(x.cols()).ok_or_else(|| {
            NnError::Shape(format!(
                "input length {} (padded {}) is shorter than kernel length {}",
                x.cols(),
                x.cols() + self.padding.0 + self.padding.1,
                self.len
            ))
        })
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>, NnError> {
        let t_out = self.check(x)?;
        let xp = self.padded(x);
        let mut out = Matrix::zeros(self.c_out, t_out);
        for co in 0..self.c_out {
            let row = out.row_mut(co);
            row.fill(self.bias[co]);
            for ci in 0..self.c_in {
                let k = self.kernel(co, ci);
                let src = xp.row(ci);
                for (t, o) in row.iter_mut().enumerate() {
                    *o += dot(k, &src[t * self.stride..t * self.stride + self.len]);
                }
            }
        }
        Ok(out)
    }

    /// Gradients for kernels and bias, plus the input gradient when requested.
    /// Zero entries of `grad_out` are skipped, so sparse upstream gradients
    /// (e.g. from max pooling) are cheap.
    pub fn backward(&self, x: &Matrix<T>, grad_out: &Matrix<T>, want_input: bool) -> Result<Conv1dGrads<T>, NnError> {
        let t_out = self.check(x)?;
        if grad_out.shape() != (self.c_out, t_out) {
            return Err(NnError::Shape(format!(
                "upstream gradient has shape {:?}, expected {:?}",
                grad_out.shape(),
                (self.c_out, t_out)
            )));
        }
        let xp = self.padded(x);
        let mut d_kernels = vec![T::zero(); self.kernels.len()];
        let mut d_bias = vec![T::zero(); self.c_out];
        let mut d_xp = want_input.then(|| Matrix::zeros(xp.rows(), xp.cols()));
        for co in 0..self.c_out {
            let g_row = grad_out.row(co);
            d_bias[co] = g_row.iter().copied().sum();
            for ci in 0..self.c_in {
                let base = (co * self.c_in + ci) * self.len;
                let src = xp.row(ci);
                for (t, &g) in g_row.iter().enumerate() {
                    if g == T::zero() {
                        continue;
                    }
                    let start = t * self.stride;
                    let dk = &mut d_kernels[base..base + self.len];
                    for (d, &s) in dk.iter_mut().zip(&src[start..start + self.len]) {
                        *d += g * s;
                    }
                    if let Some(dx) = d_xp.as_mut() {
                        let k = &self.kernels[base..base + self.len];
                        let dst = &mut dx.row_mut(ci)[start..start + self.len];
                        for (d, &w) in dst.iter_mut().zip(k) {
                            *d += g * w;
                        }
                    }
                }
            }
        }
        let d_input = d_xp.map(|dxp| {
            let mut dx = Matrix::zeros(x.rows(), x.cols());
            for r in 0..x.rows() {
                dx.row_mut(r)
                    .copy_from_slice(&dxp.row(r)[self.padding.0..self.padding.0 + x.cols()]);
            }
            dx
        });
        Ok(Conv1dGrads {
            d_kernels,
            d_bias,
            d_input,
        })
    }
}

/// Free-function form of [`Conv1dLayer::forward`].
pub fn conv1d_forward<T: Scalar>(x: &Matrix<T>, layer: &Conv1dLayer<T>) -> Result<Matrix<T>, NnError> {
    layer.forward(x)
}
