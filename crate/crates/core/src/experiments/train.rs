use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate_f1, ExperimentError, ModelSpec, Network, TrajectoryLog};
use crate::data::{Clip, LabelGrid};
use crate::layer::Mode;
use crate::nn::{adam_step, clip_global_norm, AdamState, TrainConfig};
use crate::signal::AudioSignal;

/// Everything about a run besides the optimiser settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    /// Length of the random training crops.
    pub crop_samples: usize,
    pub eval_interval_steps: usize,
    /// Evaluations without a validation F1 improvement before stopping.
    pub patience_evals: usize,
    pub trajectory_interval_steps: usize,
    /// Validate on the first N validation clips; 0 uses all of them.
    pub max_valid_clips: usize,
    /// A mean batch loss above this counts as divergence, as does any
    /// non-finite loss or gradient.
    pub divergence_loss: f64,
    /// Progress lines on stderr.
    pub verbose: bool,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            crop_samples: 32_768,
            eval_interval_steps: 100,
            patience_evals: 10,
            trajectory_interval_steps: 10,
            max_valid_clips: 0,
            divergence_loss: 100.0,
            verbose: false,
        }
    }
}

impl Schedule {
    pub fn validate(&self, spec: &ModelSpec) -> Result<(), ExperimentError> {
        if self.crop_samples < spec.pool_window_samples {
            return Err(ExperimentError::Config(format!(
                "crop of {} samples is shorter than the pooling window ({})",
                self.crop_samples, spec.pool_window_samples
            )));
        }
        if !(self.divergence_loss > 0.0) {
            return Err(ExperimentError::Config(format!(
                "divergence loss threshold must be positive, got {}",
                self.divergence_loss
            )));
        }
        if self.eval_interval_steps == 0 || self.trajectory_interval_steps == 0 || self.patience_evals == 0 {
            return Err(ExperimentError::Config(
                "evaluation interval, trajectory interval and patience must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the best validation F1.
    pub network: Network,
    pub best_valid_f1: f64,
    pub best_step: usize,
    pub steps_run: usize,
    /// Mean batch loss of each step.
    pub losses: Vec<f64>,
    /// `(step, validation F1)` of every evaluation.
    pub evaluations: Vec<(usize, f64)>,
    /// f0 trajectory, for comb frontends.
    pub trajectory: Option<TrajectoryLog>,
    pub stopped_early: bool,
}

fn crop(clip: &Clip, start_frame: usize, crop_samples: usize, crop_frames: usize, hop: usize) -> (AudioSignal, LabelGrid) {
    let x = clip.audio.samples();
    let start = (start_frame * hop).min(x.len());
    let mut samples = vec![0.0f32; crop_samples];
    let n = crop_samples.min(x.len() - start);
    samples[..n].copy_from_slice(&x[start..start + n]);
    let audio = AudioSignal::new(samples, clip.audio.sample_rate()).expect("cropped samples are finite");
    (audio, clip.labels.window(start_frame, crop_frames))
}

/// Trains `spec` with BCE, Adam and global-norm clipping on random crops of
/// `train`, early-stopping on validation F1.
///
/// Deterministic for a given `cfg.seed`: initialisation, batch order and crop
/// offsets all derive from it, and batch gradients are reduced in a fixed order.
pub fn train_model(
    spec: &ModelSpec,
    train: &[Clip],
    valid: &[Clip],
    cfg: &TrainConfig,
    schedule: &Schedule,
) -> Result<TrainOutcome, ExperimentError> {
    cfg.validate().map_err(ExperimentError::Config)?;
    schedule.validate(spec)?;
    if train.is_empty() || valid.is_empty() {
        return Err(ExperimentError::Config("training and validation sets must be non-empty".into()));
    }
    let valid = match schedule.max_valid_clips {
        0 => valid,
        n => &valid[..n.min(valid.len())],
    };
    let env = spec.envelope();
    let crop_frames = env.frames(schedule.crop_samples);
    let started = Instant::now();

    let mut net = Network::new(spec, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut adam = AdamState::new(cfg.lr);
    let mut trajectory = spec
        .frontend
        .eq(&super::Frontend::Comb)
        .then(|| TrajectoryLog::new(spec.f_min_hz, spec.f_max_hz));
    if let (Some(t), Some(f0)) = (trajectory.as_mut(), net.f0s()) {
        t.observe(&f0);
    }

    let mut out = TrainOutcome {
        network: net.clone(),
        best_valid_f1: f64::NEG_INFINITY,
        best_step: 0,
        steps_run: 0,
        losses: Vec::new(),
        evaluations: Vec::new(),
        trajectory: None,
        stopped_early: false,
    };
    let mut since_best = 0usize;

    let evaluate = |net: &Network, step: usize, out: &mut TrainOutcome, since_best: &mut usize| -> Result<(), ExperimentError> {
        let f1 = evaluate_f1(net, valid, Mode::Training)?.f1();
        out.evaluations.push((step, f1));
        if f1 > out.best_valid_f1 {
            out.best_valid_f1 = f1;
            out.best_step = step;
            out.network = net.clone();
            *since_best = 0;
        } else {
            *since_best += 1;
        }
        if schedule.verbose {
            let loss = out.losses.last().copied().unwrap_or(f64::NAN);
            eprintln!(
                "[{}] step {step:>6}  loss {loss:.5}  valid F1 {f1:.4}  best {:.4} @ {}  ({:.0} s)",
                spec.label(),
                out.best_valid_f1,
                out.best_step,
                started.elapsed().as_secs_f64()
            );
        }
        Ok(())
    };

    for step in 1..=cfg.max_steps {
        let batch: Vec<(AudioSignal, LabelGrid)> = (0..cfg.batch_size)
            .map(|_| {
                let clip = &train[rng.gen_range(0..train.len())];
                let max_start = clip.labels.frames().saturating_sub(crop_frames);
                let start = rng.gen_range(0..=max_start);
                crop(clip, start, schedule.crop_samples, crop_frames, env.pool_stride)
            })
            .collect();
        let (loss, mut grads) = net.batch_gradients(&batch)?;
        let norm = clip_global_norm(&mut grads, cfg.grad_clip);
        if !(loss <= schedule.divergence_loss) || !norm.is_finite() {
            let reason = if norm.is_finite() {
                format!("loss {loss}")
            } else {
                format!("gradient norm {norm}")
            };
            out.network = net;
            out.trajectory = trajectory;
            out.steps_run = step - 1;
            return Err(ExperimentError::Diverged {
                step,
                reason,
                partial: Box::new(out),
            });
        }
        out.losses.push(loss);
        let before = net.clone();
        if let Err(e) = adam_step(&mut net.params_mut(), &grads, &mut adam) {
            out.network = before;
            out.trajectory = trajectory;
            out.steps_run = step - 1;
            return Err(ExperimentError::Diverged {
                step,
                reason: e.to_string(),
                partial: Box::new(out),
            });
        }
        out.steps_run = step;
        if let (Some(t), Some(f0)) = (trajectory.as_mut(), net.f0s()) {
            if step % schedule.trajectory_interval_steps == 0 {
                t.record(step, started.elapsed().as_secs_f64(), f0);
            } else {
                t.observe(&f0);
            }
        }
        if step % schedule.eval_interval_steps == 0 {
            evaluate(&net, step, &mut out, &mut since_best)?;
            if since_best >= schedule.patience_evals {
                out.stopped_early = true;
                break;
            }
        }
    }
    if out.evaluations.last().map(|e| e.0) != Some(out.steps_run) {
        evaluate(&net, out.steps_run, &mut out, &mut since_best)?;
    }
    out.trajectory = trajectory;
    Ok(out)
}
