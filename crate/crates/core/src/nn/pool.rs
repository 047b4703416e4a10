use super::{Matrix, NnError, Scalar};

/// Output of [`max_pool1d`]: pooled values and, per cell, the input column
/// that won (earliest on ties).
#[derive(Debug, Clone)]
pub struct Pooled<T> {
    pub values: Matrix<T>,
    pub argmax: Vec<usize>,
    pub input_len: usize,
}

pub fn max_pool1d<T: Scalar>(x: &Matrix<T>, window: usize, stride: usize) -> Result<Pooled<T>, NnError> {
    if window == 0 || stride == 0 {
        return Err(NnError::Shape("pool window and stride must be positive".into()));
    }
    if x.cols() < window {
        return Err(NnError::Shape(format!(
            "input length {} is shorter than pool window {window}",
            x.cols()
        )));
    }
    let frames = (x.cols() - window) / stride + 1;
    let mut values = Matrix::zeros(x.rows(), frames);
    let mut argmax = Vec::with_capacity(x.rows() * frames);
    for r in 0..x.rows() {
        let row = x.row(r);
        for f in 0..frames {
            let start = f * stride;
            let mut best = start;
            for i in start + 1..start + window {
                if row[i] > row[best] {
                    best = i;
                }
            }
            values.set(r, f, row[best]);
            argmax.push(best);
        }
    }
    Ok(Pooled {
        values,
        argmax,
        input_len: x.cols(),
    })
}

/// Routes each pooled gradient to the column that produced the maximum.
pub fn max_pool1d_backward<T: Scalar>(pooled: &Pooled<T>, grad_out: &Matrix<T>) -> Matrix<T> {
    let (rows, frames) = pooled.values.shape();
    assert_eq!(grad_out.shape(), (rows, frames), "pool gradient shape mismatch");
    let mut dx = Matrix::zeros(rows, pooled.input_len);
    for r in 0..rows {
        for f in 0..frames {
            let col = pooled.argmax[r * frames + f];
            let cur = dx.get(r, col);
            dx.set(r, col, cur + grad_out.get(r, f));
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_earliest_maximum() {
        let x = Matrix::from_vec(1, 6, vec![1.0f32, 3.0, 3.0, 0.0, 2.0, 2.0]);
        let p = max_pool1d(&x, 3, 2).unwrap();
        assert_eq!(p.values.data(), &[3.0, 3.0]);
        assert_eq!(p.argmax, vec![1, 2]);
    }

    #[test]
    fn backward_accumulates_overlaps() {
        let x = Matrix::from_vec(1, 5, vec![0.0f64, 5.0, 1.0, 0.0, 0.0]);
        let p = max_pool1d(&x, 3, 1).unwrap();
        let g = Matrix::from_vec(1, 3, vec![1.0, 2.0, 4.0]);
        let dx = max_pool1d_backward(&p, &g);
        assert_eq!(dx.data(), &[0.0, 3.0, 4.0, 0.0, 0.0]);
    }
}
