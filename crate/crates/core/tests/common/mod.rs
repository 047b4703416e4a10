//! Independent double-precision reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

/// Direct evaluation of the per-echo linearly interpolated comb.
pub fn sparse_comb_f64(x: &[f64], delay: f64, alpha: f64, echoes: usize) -> Vec<f64> {
    let at = |n: usize, k: usize| if k <= n { x[n - k] } else { 0.0 };
    (0..x.len())
        .map(|n| {
            let mut y = x[n];
            for t in 1..=echoes {
                let d = t as f64 * delay;
                let lo = d.floor() as usize;
                let beta = d - lo as f64;
                y += alpha.powi(t as i32) * ((1.0 - beta) * at(n, lo) + beta * at(n, lo + 1));
            }
            y
        })
        .collect()
}

pub fn f0_from_w(w: f64, f_min: f64, f_max: f64) -> f64 {
    f_min * (f_max / f_min).powf(1.0 / (1.0 + (-w).exp()))
}

pub fn w_from_f0(f0: f64, f_min: f64, f_max: f64) -> f64 {
    let s = (f0 / f_min).ln() / (f_max / f_min).ln();
    (s / (1.0 - s)).ln()
}

/// Smallest distance from any `t * delay` (t = 1..=echoes) to an integer.
pub fn fractional_margin(delay: f64, echoes: usize) -> f64 {
    (1..=echoes)
        .map(|t| {
            let f = (t as f64 * delay).fract();
            f.min(1.0 - f)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Sum over frames of the windowed max of `|y|`, and the smallest gap between
/// the largest and second-largest value in any window.
pub fn pooled_sum(y: &[f64], window: usize, stride: usize) -> (f64, f64) {
    let frames = (y.len() - window) / stride + 1;
    let mut total = 0.0;
    let mut gap = f64::INFINITY;
    for f in 0..frames {
        let (mut a, mut b) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &y[f * stride..f * stride + window] {
            let v = v.abs();
            if v > a {
                b = a;
                a = v;
            } else if v > b {
                b = v;
            }
        }
        total += a;
        gap = gap.min(a - b);
    }
    (total, gap)
}
