use serde::{Deserialize, Serialize};

use super::NnError;

/// A named trainable tensor, borrowed from its owning layer.
pub struct Param<'a> {
    pub name: &'a str,
    pub value: &'a mut [f32],
}

/// Optimisation hyperparameters shared by every experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_steps: usize,
    pub batch_size: usize,
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            max_steps: 20_000,
            batch_size: 8,
            grad_clip: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(format!("learning rate must be finite and non-negative, got {}", self.lr));
        }
        if !(self.grad_clip > 0.0) {
            return Err(format!("gradient clip must be positive, got {}", self.grad_clip));
        }
        if self.batch_size == 0 {
            return Err("batch size must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }
}

/// One bias-corrected Adam update. Moments are created (zeroed) on the first
/// call and must stay congruent with `params` afterwards.
pub fn adam_step(params: &mut [Param<'_>], grads: &[Vec<f32>], state: &mut AdamState) -> Result<(), NnError> {
    if params.len() != grads.len() {
        return Err(NnError::Shape(format!(
            "{} parameter tensors but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.value.len() != g.len() {
            return Err(NnError::Shape(format!(
                "{}: parameter has {} entries, gradient {}",
                p.name,
                p.value.len(),
                g.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite {
                tensor: format!("gradient of {}", p.name),
            });
        }
    }
    if state.m.is_empty() {
        state.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
        state.v = state.m.clone();
    } else if state.m.len() != grads.len() || state.m.iter().zip(grads).any(|(m, g)| m.len() != g.len()) {
        return Err(NnError::Shape("optimizer state does not match parameters".into()));
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        for i in 0..g.len() {
            let gi = f64::from(g[i]);
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            let updated = f64::from(p.value[i]) - state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
            p.value[i] = updated as f32;
        }
    }
    Ok(())
}

pub fn global_norm(grads: &[Vec<f32>]) -> f64 {
    grads
        .iter()
        .flatten()
        .map(|&g| f64::from(g) * f64::from(g))
        .sum::<f64>()
        .sqrt()
}

/// Rescales all gradients so their joint L2 norm does not exceed `threshold`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Vec<f32>], threshold: f64) -> f64 {
    assert!(threshold > 0.0, "clip threshold must be positive");
    let norm = global_norm(grads);
    if norm > threshold {
        // Slightly under-scale so the clipped norm cannot round above the threshold.
        let scale = threshold / norm * (1.0 - 1e-7);
        for g in grads.iter_mut().flatten() {
            *g = (f64::from(*g) * scale) as f32;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut w = vec![1.0f32, -2.0];
        let mut state = AdamState::new(0.1);
        adam_step(&mut [Param { name: "w", value: &mut w }], &[vec![0.0, 0.0]], &mut state).unwrap();
        assert_eq!(w, vec![1.0, -2.0]);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut w = vec![0.0f32];
        let mut state = AdamState::new(0.1);
        adam_step(&mut [Param { name: "w", value: &mut w }], &[vec![1.0]], &mut state).unwrap();
        // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
        assert!((f64::from(w[0]) + 0.1).abs() < 1e-6, "{}", w[0]);
    }

    #[test]
    fn nan_gradient_names_tensor() {
        let mut w = vec![0.0f32];
        let mut state = AdamState::new(0.1);
        let err = adam_step(&mut [Param { name: "conv2.kernels", value: &mut w }], &[vec![f32::NAN]], &mut state)
            .unwrap_err();
        assert!(err.to_string().contains("conv2.kernels"));
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut w = vec![0.3f32, -0.7, 1.1];
            let mut state = AdamState::new(0.01);
            for step in 0..50 {
                let g: Vec<f32> = w.iter().map(|&x| x * 2.0 + step as f32 * 1e-3).collect();
                adam_step(&mut [Param { name: "w", value: &mut w }], &[g], &mut state).unwrap();
            }
            w
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn clipping_examples() {
        let mut g = vec![vec![0.6f32], vec![0.8]];
        let norm = clip_global_norm(&mut g, 0.5);
        assert!((norm - 1.0).abs() < 1e-6);
        assert!((g[0][0] - 0.3).abs() < 1e-6 && (g[1][0] - 0.4).abs() < 1e-6);
        let mut g = vec![vec![0.3f32]];
        clip_global_norm(&mut g, 0.5);
        assert_eq!(g[0][0], 0.3);
    }

    proptest! {
        #[test]
        fn clipped_norm_never_exceeds_threshold(
            values in proptest::collection::vec(-100.0f32..100.0, 1..64),
            threshold in 0.01f64..5.0,
        ) {
            let mut g = vec![values];
            clip_global_norm(&mut g, threshold);
            prop_assert!(global_norm(&g) <= threshold + 1e-7);
        }
    }
}
