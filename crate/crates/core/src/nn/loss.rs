use super::{Matrix, NnError, Scalar};

/// Mean binary cross-entropy over every cell, from logits.
///
/// Uses `max(z, 0) - z*y + ln(1 + exp(-|z|))`, which never overflows.
/// Returns the loss and its gradient `(sigmoid(z) - y) / N`.
pub fn bce_with_logits<T: Scalar>(logits: &Matrix<T>, targets: &Matrix<T>) -> Result<(f64, Matrix<T>), NnError> {
    if logits.shape() != targets.shape() {
        return Err(NnError::Shape(format!(
            "logits {:?} vs targets {:?}",
            logits.shape(),
            targets.shape()
        )));
    }
    let n = logits.data().len();
    if n == 0 {
        return Ok((0.0, Matrix::zeros(logits.rows(), logits.cols())));
    }
    let inv_n = 1.0 / n as f64;
    let mut total = 0.0f64;
    let mut grad = Vec::with_capacity(n);
    for (&z, &y) in logits.data().iter().zip(targets.data()) {
        let z = z.to_f64().unwrap_or(f64::NAN);
        let y = y.to_f64().unwrap_or(f64::NAN);
        total += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        let s = if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        };
        grad.push(T::of((s - y) * inv_n));
    }
    Ok((total * inv_n, Matrix::from_vec(logits.rows(), logits.cols(), grad)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_logit_costs_ln2() {
        let (l, _) = bce_with_logits(&Matrix::from_vec(1, 1, vec![0.0f64]), &Matrix::from_vec(1, 1, vec![1.0])).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let z = Matrix::from_vec(1, 2, vec![50.0f32, -50.0]);
        let y = Matrix::from_vec(1, 2, vec![1.0f32, 0.0]);
        let (l, g) = bce_with_logits(&z, &y).unwrap();
        assert!(l.is_finite() && l < 1e-20);
        assert!(g.data().iter().all(|v| v.is_finite()));
        let (l, _) = bce_with_logits(&Matrix::from_vec(1, 1, vec![1000.0f32]), &Matrix::from_vec(1, 1, vec![0.0])).unwrap();
        assert!((l - 1000.0).abs() < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let z = Matrix::from_vec(2, 3, vec![-2.0f64, -0.3, 0.0, 0.4, 1.1, 3.0]);
        let y = Matrix::from_vec(2, 3, vec![0.0f64, 1.0, 1.0, 0.0, 1.0, 0.0]);
        let (_, g) = bce_with_logits(&z, &y).unwrap();
        let h = 1e-6;
        for i in 0..6 {
            let (mut p, mut m) = (z.clone(), z.clone());
            p.data_mut()[i] += h;
            m.data_mut()[i] -= h;
            let fd = (bce_with_logits(&p, &y).unwrap().0 - bce_with_logits(&m, &y).unwrap().0) / (2.0 * h);
            assert!(((fd - g.data()[i]) / g.data()[i]).abs() < 1e-5, "cell {i}");
        }
    }

    #[test]
    fn shape_mismatch() {
        assert!(bce_with_logits(&Matrix::<f32>::zeros(2, 3), &Matrix::zeros(3, 2)).is_err());
    }
}
