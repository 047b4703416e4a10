use super::{check_alpha, check_delay, CombError};

/// Sparse truncated impulse response of a feedback comb.
///
/// Taps are sorted by offset. The first tap is always the passthrough
/// `(0, 1.0)`; echo `t` sits at offset `t * K` with weight `alpha^t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirKernel {
    taps: Vec<(usize, f64)>,
}

impl FirKernel {
    pub fn taps(&self) -> &[(usize, f64)] {
        &self.taps
    }

    /// Length of the kernel written out densely.
    pub fn len(&self) -> usize {
        self.taps.last().map_or(0, |&(o, _)| o + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.len()];
        for &(offset, weight) in &self.taps {
            dense[offset] += weight;
        }
        dense
    }
}

pub fn build_fir_kernel(delay: usize, alpha: f64, echo_count: usize) -> Result<FirKernel, CombError> {
    if delay < 1 {
        return Err(CombError::Domain("integer delay must be at least 1".into()));
    }
    check_alpha(alpha)?;
    let mut taps = Vec::with_capacity(echo_count + 1);
    taps.push((0, 1.0));
    let mut weight = 1.0;
    for t in 1..=echo_count {
        weight *= alpha;
        taps.push((t * delay, weight));
    }
    Ok(FirKernel { taps })
}

/// Recursive feedback comb `y[n] = x[n] + alpha * y[n - K]` with zero initial state.
pub fn iir_comb(x: &[f32], delay: usize, alpha: f64) -> Result<Vec<f32>, CombError> {
    if delay < 1 {
        return Err(CombError::Domain("integer delay must be at least 1".into()));
    }
    check_alpha(alpha)?;
    let mut y = vec![0.0f64; x.len()];
    for n in 0..x.len() {
        let fb = if n >= delay { y[n - delay] } else { 0.0 };
        y[n] = f64::from(x[n]) + alpha * fb;
    }
    Ok(y.into_iter().map(|v| v as f32).collect())
}

/// Causal convolution with the kernel written densely, "same" length,
/// left zero padding.
pub fn fir_comb_dense(x: &[f32], kernel: &FirKernel) -> Vec<f32> {
    dense_convolve(x, &kernel.to_dense())
        .into_iter()
        .map(|v| v as f32)
        .collect()
}

fn dense_convolve(x: &[f32], h: &[f64]) -> Vec<f64> {
    let n_out = x.len();
    let mut y = vec![0.0f64; n_out];
    for (n, out) in y.iter_mut().enumerate() {
        let taps = h.len().min(n + 1);
        let mut acc = 0.0;
        for (j, &hj) in h[..taps].iter().enumerate() {
            acc += hj * f64::from(x[n - j]);
        }
        *out = acc;
    }
    y
}

/// Linear interpolation between the two whole integer-delay kernels that
/// bracket `delay`:
/// `(1 - b) * (h_floor * x) + b * (h_ceil * x)` with `b = frac(delay)`.
///
/// For `echo_count >= 2` this differs from [`sparse_comb`], which
/// interpolates each echo at its own fractional position `t * delay`.
pub fn interp_comb_wholekernel(
    x: &[f32],
    delay: f64,
    alpha: f64,
    echo_count: usize,
) -> Result<Vec<f32>, CombError> {
    check_delay(delay)?;
    let lo = delay.floor();
    let beta = delay - lo;
    let lo = lo as usize;
    let low = dense_convolve(x, &build_fir_kernel(lo, alpha, echo_count)?.to_dense());
    if beta == 0.0 {
        return Ok(low.into_iter().map(|v| v as f32).collect());
    }
    let high = dense_convolve(x, &build_fir_kernel(lo + 1, alpha, echo_count)?.to_dense());
    Ok(low
        .iter()
        .zip(&high)
        .map(|(&a, &b)| ((1.0 - beta) * a + beta * b) as f32)
        .collect())
}

/// One scaled shifted slice of the sparse comb: `weight * x[n - offset]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoTap {
    pub offset: usize,
    pub weight: f64,
}

/// The `2 * echo_count` slices (fewer where a fractional part vanishes) of the
/// per-echo linearly interpolated comb, excluding the passthrough.
///
/// Echo `t` lands at `d = t * delay` and is split as `(1 - b) alpha^t` at
/// `floor(d)` and `b alpha^t` at `floor(d) + 1`, with `b = d - floor(d)`.
pub fn echo_taps(delay: f64, alpha: f64, echo_count: usize) -> Result<Vec<EchoTap>, CombError> {
    check_delay(delay)?;
    check_alpha(alpha)?;
    let mut taps = Vec::with_capacity(2 * echo_count);
    let mut gain = 1.0;
    for t in 1..=echo_count {
        gain *= alpha;
        let d = t as f64 * delay;
        let lo = d.floor();
        let beta = d - lo;
        let lo = lo as usize;
        taps.push(EchoTap {
            offset: lo,
            weight: (1.0 - beta) * gain,
        });
        if beta > 0.0 {
            taps.push(EchoTap {
                offset: lo + 1,
                weight: beta * gain,
            });
        }
    }
    Ok(taps)
}

/// Adds every echo slice of `x` into `acc` (which should already hold the
/// passthrough). Reads before the signal start contribute zero.
pub fn sparse_comb_accumulate(x: &[f64], taps: &[EchoTap], acc: &mut [f64]) {
    debug_assert_eq!(x.len(), acc.len());
    let n = x.len();
    for tap in taps {
        if tap.offset >= n {
            continue;
        }
        let w = tap.weight;
        for (out, &src) in acc[tap.offset..].iter_mut().zip(&x[..n - tap.offset]) {
            *out += w * src;
        }
    }
}

/// Per-echo fractional-delay comb evaluated as a sum of scaled slices:
/// `y[n] = x[n] + sum_t (1 - b_t) a^t x[n - floor(t D)] + b_t a^t x[n - ceil(t D)]`.
pub fn sparse_comb(x: &[f32], delay: f64, alpha: f64, echo_count: usize) -> Result<Vec<f32>, CombError> {
    let taps = echo_taps(delay, alpha, echo_count)?;
    let x64: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
    let mut acc = x64.clone();
    sparse_comb_accumulate(&x64, &taps, &mut acc);
    Ok(acc.into_iter().map(|v| v as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn impulse(n: usize) -> Vec<f32> {
        let mut x = vec![0.0; n];
        x[0] = 1.0;
        x
    }

    fn assert_close(a: &[f32], b: &[f32], tol: f32) {
        assert_eq!(a.len(), b.len());
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            assert!((x - y).abs() <= tol, "index {i}: {x} vs {y}");
        }
    }

    #[test]
    fn iir_impulse_response() {
        let y = iir_comb(&impulse(10), 3, 0.5).unwrap();
        assert_close(&y, &[1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.25, 0.0, 0.0, 0.125], 0.0);
    }

    #[test]
    fn iir_constant_input_converges() {
        let y = iir_comb(&[1.0; 30], 1, 0.5).unwrap();
        for (n, v) in y.iter().enumerate() {
            let expected = 2.0 - 0.5f64.powi(n as i32);
            assert!((f64::from(*v) - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn iir_zero_in_zero_out() {
        assert!(iir_comb(&[0.0; 64], 5, 0.9).unwrap().iter().all(|&v| v == 0.0));
        assert!(iir_comb(&[1.0], 0, 0.9).is_err());
        assert!(iir_comb(&[1.0], 1, 1.2).is_err());
    }

    #[test]
    fn kernel_examples() {
        let k = build_fir_kernel(2, 0.9, 2).unwrap();
        assert_eq!(k.taps(), &[(0, 1.0), (2, 0.9), (4, 0.9 * 0.9)]);
        assert_eq!(build_fir_kernel(7, 0.3, 1).unwrap().taps(), &[(0, 1.0), (7, 0.3)]);
        assert_eq!(
            build_fir_kernel(1, 0.5, 3).unwrap().to_dense(),
            vec![1.0, 0.5, 0.25, 0.125]
        );
    }

    #[test]
    fn kernel_invariants() {
        let k = build_fir_kernel(5, 0.9, 10).unwrap();
        assert_eq!(k.taps()[0], (0, 1.0));
        for pair in k.taps()[1..].windows(2) {
            assert!(pair[0].0 < pair[1].0);
            assert!(pair[0].1 > pair[1].1 && pair[1].1 > 0.0);
        }
    }

    #[test]
    fn dense_impulse_is_kernel() {
        let k = build_fir_kernel(3, 0.9, 4).unwrap();
        let y = fir_comb_dense(&impulse(20), &k);
        let dense: Vec<f32> = k.to_dense().iter().map(|&v| v as f32).collect();
        assert_close(&y[..dense.len()], &dense, 0.0);
        assert!(y[dense.len()..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wholekernel_single_echo_half_delay() {
        let x: Vec<f32> = (0..12).map(|i| (i as f32 * 0.37).sin()).collect();
        let a = 0.9;
        let y = interp_comb_wholekernel(&x, 2.5, a, 1).unwrap();
        for n in 0..x.len() {
            let at = |k: usize| if n >= k { f64::from(x[n - k]) } else { 0.0 };
            let expected = f64::from(x[n]) + 0.5 * a * at(2) + 0.5 * a * at(3);
            assert!((f64::from(y[n]) - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn wholekernel_second_echo_differs_from_sparse() {
        let a = 0.9;
        let whole = interp_comb_wholekernel(&impulse(8), 2.5, a, 2).unwrap();
        // h_2 puts its second echo at 4 and h_3 at 6.
        assert!((whole[4] - (0.5 * a * a) as f32).abs() < 1e-7);
        assert_eq!(whole[5], 0.0);
        assert!((whole[6] - (0.5 * a * a) as f32).abs() < 1e-7);
        let sparse = sparse_comb(&impulse(8), 2.5, a, 2).unwrap();
        assert_eq!(sparse[4], 0.0);
        assert!((sparse[5] - (a * a) as f32).abs() < 1e-7);
    }

    #[test]
    fn sparse_fractional_impulse() {
        let y = sparse_comb(&impulse(8), 2.5, 0.9, 2).unwrap();
        assert_close(&y[..6], &[1.0, 0.0, 0.45, 0.45, 0.0, 0.81], 1e-7);
        assert_close(&y[6..], &[0.0, 0.0], 0.0);
    }

    #[test]
    fn sparse_without_echoes_is_identity() {
        let x: Vec<f32> = (0..50).map(|i| (i as f32).cos()).collect();
        assert_eq!(sparse_comb(&x, 3.7, 0.9, 0).unwrap(), x);
    }

    #[test]
    fn sparse_rejects_short_delay() {
        assert!(sparse_comb(&[1.0], 0.5, 0.9, 3).is_err());
        assert!(sparse_comb(&[1.0], f64::NAN, 0.9, 3).is_err());
    }

    #[test]
    fn echo_taps_skip_zero_fraction() {
        let taps = echo_taps(4.0, 0.5, 3).unwrap();
        assert_eq!(taps.len(), 3);
        assert_eq!(taps[2], EchoTap { offset: 12, weight: 0.125 });
        assert_eq!(echo_taps(2.5, 0.5, 2).unwrap().len(), 3);
    }
}
