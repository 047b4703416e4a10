use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentError, ModelSpec, Network, Schedule, TrainOutcome};
use crate::layer::save_params;
use crate::nn::{load_archive, save_archive, TrainConfig};

/// A training run as written in a TOML config file.
///
/// ```toml
/// dataset_dir = "data"
/// output_dir = "runs/combnet32"
///
/// [model]
/// frontend = "comb"
/// channels = 32
/// sample_rate_hz = 16000
/// f_min_hz = 200.0
/// f_max_hz = 500.0
/// alpha = 0.9
/// echo_count = 10
/// pool_window_samples = 1024
/// pool_stride_samples = 512
/// conv_kernel_len = 251
/// head_kernel_len = 1
///
/// [train]
/// lr = 0.001
/// max_steps = 20000
/// batch_size = 8
/// grad_clip = 0.5
/// seed = 0
///
/// [schedule]
/// crop_samples = 32768
/// eval_interval_steps = 100
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Used in output file names; defaults to the model label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_name: Option<String>,
    /// Directory holding `manifest_{train,valid,test}.toml`.
    pub dataset_dir: PathBuf,
    pub output_dir: PathBuf,
    pub model: ModelSpec,
    pub train: TrainConfig,
    #[serde(default)]
    pub schedule: Schedule,
}

impl RunConfig {
    pub fn run_name(&self) -> String {
        self.run_name.clone().unwrap_or_else(|| self.model.label())
    }

    /// Parses and validates a config. Parse errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.model.validate()?;
        cfg.train.validate().map_err(ExperimentError::Config)?;
        cfg.schedule.validate(&cfg.model)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            ExperimentError::Config(m) => ExperimentError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always representable")
    }
}

const MODEL_FILE: &str = "model.toml";
const WEIGHTS_FILE: &str = "weights.cnta";
const COMB_FILE: &str = "comb.toml";

/// Writes `model.toml` and `weights.cnta` (plus `comb.toml` for comb
/// frontends) into `dir`.
pub fn save_network(net: &Network, dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let model = toml::to_string(net.spec()).expect("model spec is always representable");
    let path = dir.join(MODEL_FILE);
    fs::write(&path, model).map_err(|e| ExperimentError::io(&path, e))?;
    save_archive(&dir.join(WEIGHTS_FILE), &net.tensors())?;
    if let Some(p) = net.comb_params() {
        let path = dir.join(COMB_FILE);
        save_params(&p, &path).map_err(|e| ExperimentError::io(&path, e))?;
    }
    Ok(())
}

pub fn load_network(dir: &Path) -> Result<Network, ExperimentError> {
    let path = dir.join(MODEL_FILE);
    let text = fs::read_to_string(&path).map_err(|e| ExperimentError::io(&path, e))?;
    let spec: ModelSpec =
        toml::from_str(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
    let tensors = load_archive(&dir.join(WEIGHTS_FILE))?;
    Network::from_tensors(&spec, &tensors)
}

/// Files written for one run.
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub checkpoint_dir: PathBuf,
    pub losses_csv: PathBuf,
    pub trajectory_csv: Option<PathBuf>,
    pub summary: PathBuf,
}

#[derive(Serialize)]
struct Summary<'a> {
    run_name: &'a str,
    model: &'a str,
    steps_run: usize,
    best_step: usize,
    best_valid_f1: f64,
    stopped_early: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    diverged_at_step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f0_range_violations: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_f0_clusters: Option<Vec<usize>>,
}

impl RunOutputs {
    /// Writes the checkpoint, `losses_<run>.csv`, `trajectory_<run>.csv`
    /// (comb frontends) and `summary.toml` under `dir`.
    pub fn write(
        dir: &Path,
        run_name: &str,
        outcome: &TrainOutcome,
        diverged_at_step: Option<usize>,
    ) -> Result<Self, ExperimentError> {
        let checkpoint_dir = dir.join("checkpoint");
        save_network(&outcome.network, &checkpoint_dir)?;

        let losses_csv = dir.join(format!("losses_{run_name}.csv"));
        let err = |e: csv::Error| ExperimentError::Config(format!("{}: {e}", losses_csv.display()));
        let mut w = csv::Writer::from_path(&losses_csv).map_err(err)?;
        w.write_record(["step", "loss"]).map_err(err)?;
        for (i, l) in outcome.losses.iter().enumerate() {
            w.write_record([(i + 1).to_string(), format!("{l:.8}")]).map_err(err)?;
        }
        w.flush().map_err(|e| ExperimentError::io(&losses_csv, e))?;

        let trajectory_csv = match &outcome.trajectory {
            Some(t) => {
                let p = dir.join(format!("trajectory_{run_name}.csv"));
                t.write_csv(&p)?;
                Some(p)
            }
            None => None,
        };

        let summary = dir.join("summary.toml");
        let s = Summary {
            run_name,
            model: &outcome.network.spec().label(),
            steps_run: outcome.steps_run,
            best_step: outcome.best_step,
            best_valid_f1: outcome.best_valid_f1,
            stopped_early: outcome.stopped_early,
            diverged_at_step,
            f0_range_violations: outcome.trajectory.as_ref().map(|t| t.range_violations()),
            final_f0_clusters: outcome.trajectory.as_ref().map(|t| t.final_clusters()),
        };
        let text = toml::to_string(&s).expect("summary is always representable");
        fs::write(&summary, text).map_err(|e| ExperimentError::io(&summary, e))?;
        Ok(Self {
            checkpoint_dir,
            losses_csv,
            trajectory_csv,
            summary,
        })
    }
}
