//! Feedback comb filter mathematics.
//!
//! A feedback comb with integer delay `K` and gain `0 < alpha < 1` computes
//! `y[n] = x[n] + alpha * y[n - K]`. Its magnitude response peaks at every
//! multiple of `f0 = fs / K`. This module provides:
//!
//! - the log-sigmoid mapping from an unconstrained parameter to `f0`
//!   ([`scale_to_f0`]) and its derivative,
//! - the analytic magnitude response and an empirical gain probe,
//! - four evaluation paths with the same impulse response prefix:
//!   the recursive filter ([`iir_comb`]), a dense convolution with the
//!   truncated kernel ([`fir_comb_dense`]), the whole-kernel interpolated
//!   relaxation ([`interp_comb_wholekernel`]), and the sparse per-echo
//!   fractional-delay form ([`sparse_comb`]) that is differentiable in the
//!   continuous delay,
//! - the analytic derivative of the sparse path with respect to the delay.
//!
//! Storage is single precision; every inner accumulation is double precision.

mod filters;
mod grad;
mod response;
mod scaling;

pub use filters::{
    build_fir_kernel, echo_taps, fir_comb_dense, iir_comb, interp_comb_wholekernel, sparse_comb,
    sparse_comb_accumulate, EchoTap, FirKernel,
};
pub use grad::{sparse_comb_delay_derivative_at, sparse_comb_grad_delay};
pub use response::{magnitude_response, measure_gain, CombChannelConfig};
pub use scaling::{
    continuous_delay, discretize_for_inference, scale_to_f0, scale_to_f0_gradient, sigmoid,
    ScalingConfig,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CombError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("length mismatch: expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), CombError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CombError::Domain(format!(
            "feedback gain must lie in (0, 1), got {alpha}"
        )))
    }
}

pub(crate) fn check_delay(delay: f64) -> Result<(), CombError> {
    if delay.is_finite() && delay >= 1.0 {
        Ok(())
    } else {
        Err(CombError::Domain(format!(
            "delay must be at least one sample, got {delay}"
        )))
    }
}
