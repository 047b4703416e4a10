use super::{check_alpha, check_delay, CombError};

/// Per-echo terms of `dy[n]/dD`: echo `t` contributes
/// `t * alpha^t * (x[n - floor(tD) - 1] - x[n - floor(tD)])`.
///
/// At integer `tD` this is the right-sided derivative, where the weight on
/// the upper tap grows from zero.
#[derive(Debug, Clone)]
struct DelayDerivative {
    /// `(floor(t D), t alpha^t)` for `t = 1..=echo_count`.
    terms: Vec<(usize, f64)>,
}

impl DelayDerivative {
    fn new(delay: f64, alpha: f64, echo_count: usize) -> Result<Self, CombError> {
        check_delay(delay)?;
        check_alpha(alpha)?;
        let mut gain = 1.0;
        let terms = (1..=echo_count)
            .map(|t| {
                gain *= alpha;
                ((t as f64 * delay).floor() as usize, t as f64 * gain)
            })
            .collect();
        Ok(Self { terms })
    }

    #[inline]
    fn at<F: Fn(usize) -> f64>(&self, n: usize, x: F) -> f64 {
        let read = |k: usize| if k <= n { x(n - k) } else { 0.0 };
        self.terms
            .iter()
            .map(|&(lo, scale)| scale * (read(lo + 1) - read(lo)))
            .sum()
    }
}

/// `<upstream, d sparse_comb(x) / dD>`.
pub fn sparse_comb_grad_delay(
    x: &[f32],
    delay: f64,
    alpha: f64,
    echo_count: usize,
    upstream: &[f32],
) -> Result<f64, CombError> {
    if upstream.len() != x.len() {
        return Err(CombError::LengthMismatch {
            expected: x.len(),
            actual: upstream.len(),
        });
    }
    let d = DelayDerivative::new(delay, alpha, echo_count)?;
    Ok(upstream
        .iter()
        .enumerate()
        .filter(|(_, &g)| g != 0.0)
        .map(|(n, &g)| f64::from(g) * d.at(n, |i| f64::from(x[i])))
        .sum())
}

/// `dy[n]/dD` at each of `positions`; used by the layer backward, which only
/// needs the derivative where max pooling selected a sample.
pub fn sparse_comb_delay_derivative_at(
    x: &[f64],
    delay: f64,
    alpha: f64,
    echo_count: usize,
    positions: &[usize],
) -> Result<Vec<f64>, CombError> {
    let d = DelayDerivative::new(delay, alpha, echo_count)?;
    Ok(positions.iter().map(|&n| d.at(n, |i| x[i])).collect())
}
