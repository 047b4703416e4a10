use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{count_costs, evaluate_f1, train_model, ExperimentError, Frontend, ModelSpec, Schedule};
use crate::data::Clip;
use crate::layer::Mode;
use crate::nn::TrainConfig;

pub const SWEEP_CHANNELS: [usize; 5] = [8, 16, 32, 64, 128];

/// CombNet then ConvNet specs for every channel count, ascending.
pub fn plan_sweep(channels: &[usize]) -> Vec<ModelSpec> {
    let mut c = channels.to_vec();
    c.sort_unstable();
    let comb = c.iter().map(|&n| ModelSpec::comb(n));
    let conv = c.iter().map(|&n| ModelSpec::conv(n));
    comb.chain(conv).collect()
}

/// One line of `pareto.csv`. `macs_per_sample` is the first layer's cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub frontend: Frontend,
    pub channels: usize,
    pub params: u64,
    pub macs_per_sample: f64,
    /// Test F1, or `None` when the run failed.
    pub f1: Option<f64>,
    #[serde(skip)]
    pub error: Option<String>,
}

fn run_one(
    spec: &ModelSpec,
    train: &[Clip],
    valid: &[Clip],
    test: &[Clip],
    cfg: &TrainConfig,
    schedule: &Schedule,
) -> Result<f64, ExperimentError> {
    let out = train_model(spec, train, valid, cfg, schedule)?;
    Ok(evaluate_f1(&out.network, test, Mode::Training)?.f1())
}

/// Trains and tests every spec with the same seed. A failing run is
/// recorded in its row and the sweep carries on. `parallel` runs the
/// configurations on separate rayon workers; results are identical either way.
pub fn sweep_pareto(
    specs: &[ModelSpec],
    train: &[Clip],
    valid: &[Clip],
    test: &[Clip],
    cfg: &TrainConfig,
    schedule: &Schedule,
    parallel: bool,
) -> Vec<SweepRow> {
    let run = |spec: &ModelSpec| {
        let cost = count_costs(spec);
        let result = run_one(spec, train, valid, test, cfg, schedule);
        SweepRow {
            frontend: spec.frontend,
            channels: spec.channels,
            params: cost.total_params(),
            macs_per_sample: cost.first_layer().macs_per_sample(),
            f1: result.as_ref().ok().copied(),
            error: result.err().map(|e| e.to_string()),
        }
    };
    if parallel {
        specs.par_iter().map(run).collect()
    } else {
        specs.iter().map(run).collect()
    }
}

/// `frontend,channels,params,macs_per_sample,f1`; failed runs leave `f1` empty.
pub fn write_pareto_csv(rows: &[SweepRow], path: &Path) -> Result<(), ExperimentError> {
    let err = |e: csv::Error| ExperimentError::Config(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["frontend", "channels", "params", "macs_per_sample", "f1"])
        .map_err(err)?;
    for r in rows {
        w.write_record([
            r.frontend.name().to_string(),
            r.channels.to_string(),
            r.params.to_string(),
            r.macs_per_sample.to_string(),
            r.f1.map_or_else(String::new, |f| format!("{f:.6}")),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| ExperimentError::io(path, e))
}

/// Best F1 of each frontend among runs within a parameter budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dominance {
    pub budget_params: u64,
    pub comb_f1: Option<f64>,
    pub conv_f1: Option<f64>,
    /// `comb`, `conv`, `tie`, or `n/a` when only one frontend fits the budget.
    pub winner: &'static str,
}

/// One entry per distinct parameter count in the sweep.
pub fn dominance_summary(rows: &[SweepRow]) -> Vec<Dominance> {
    let mut budgets: Vec<u64> = rows.iter().filter(|r| r.f1.is_some()).map(|r| r.params).collect();
    budgets.sort_unstable();
    budgets.dedup();
    let best = |fe: Frontend, budget: u64| {
        rows.iter()
            .filter(|r| r.frontend == fe && r.params <= budget)
            .filter_map(|r| r.f1)
            .fold(None, |m: Option<f64>, f| Some(m.map_or(f, |m| m.max(f))))
    };
    budgets
        .into_iter()
        .map(|b| {
            let (comb, conv) = (best(Frontend::Comb, b), best(Frontend::Conv, b));
            let winner = match (comb, conv) {
                (Some(a), Some(c)) if a > c => "comb",
                (Some(a), Some(c)) if c > a => "conv",
                (Some(_), Some(_)) => "tie",
                _ => "n/a",
            };
            Dominance {
                budget_params: b,
                comb_f1: comb,
                conv_f1: conv,
                winner,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_has_ten_configurations() {
        let plan = plan_sweep(&SWEEP_CHANNELS);
        assert_eq!(plan.len(), 10);
        assert!(plan[..5].iter().all(|s| s.frontend == Frontend::Comb));
        assert_eq!(plan[5].channels, 8);
    }

    fn row(frontend: Frontend, params: u64, f1: Option<f64>) -> SweepRow {
        SweepRow {
            frontend,
            channels: 0,
            params,
            macs_per_sample: 0.0,
            f1,
            error: None,
        }
    }

    #[test]
    fn dominance_uses_best_within_budget() {
        let rows = vec![
            row(Frontend::Comb, 100, Some(0.8)),
            row(Frontend::Comb, 500, Some(0.9)),
            row(Frontend::Conv, 400, Some(0.85)),
            row(Frontend::Conv, 900, None),
        ];
        let d = dominance_summary(&rows);
        assert_eq!(d.iter().map(|x| x.budget_params).collect::<Vec<_>>(), vec![100, 400, 500]);
        assert_eq!(d[0].winner, "n/a");
        assert_eq!(d[1].winner, "conv");
        assert_eq!(d[2].winner, "comb");
    }

    #[test]
    fn csv_leaves_failed_f1_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pareto.csv");
        write_pareto_csv(&[row(Frontend::Conv, 7, None)], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "frontend,channels,params,macs_per_sample,f1\nconv,0,7,0,\n");
    }
}
