use std::path::Path;

use serde::Serialize;

use super::ExperimentError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub wall_time_s: f64,
    pub f0_hz: Vec<f64>,
}

/// Comb fundamentals over training, one row per logging interval.
///
/// Every observed bank (logged or not) is also range-checked against
/// `(f_min, f_max)`; see [`TrajectoryLog::range_violations`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryLog {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub rows: Vec<TrajectoryRow>,
    checked: u64,
    violations: u64,
}

impl TrajectoryLog {
    pub fn new(f_min_hz: f64, f_max_hz: f64) -> Self {
        Self {
            f_min_hz,
            f_max_hz,
            rows: Vec::new(),
            checked: 0,
            violations: 0,
        }
    }

    /// Range-checks one bank without logging it.
    pub fn observe(&mut self, f0_hz: &[f64]) {
        self.checked += 1;
        let (lo, hi) = (self.f_min_hz, self.f_max_hz);
        self.violations += f0_hz.iter().filter(|&&f| !(f > lo && f < hi)).count() as u64;
    }

    /// Range-checks and logs one bank.
    pub fn record(&mut self, step: usize, wall_time_s: f64, f0_hz: Vec<f64>) {
        self.observe(&f0_hz);
        self.rows.push(TrajectoryRow {
            step,
            wall_time_s,
            f0_hz,
        });
    }

    /// Number of f0 values, across every observed bank, outside the open range.
    pub fn range_violations(&self) -> u64 {
        self.violations
    }

    /// Number of banks observed.
    pub fn banks_checked(&self) -> u64 {
        self.checked
    }

    /// Sizes of the 1 Hz clusters in the last logged row, largest first.
    pub fn final_clusters(&self) -> Vec<usize> {
        self.rows.last().map_or_else(Vec::new, |r| cluster_sizes(&r.f0_hz, 1.0))
    }

    /// `step, wall_time_s, f0_1 .. f0_M, clusters`; the cluster count is
    /// filled in on the final row only.
    pub fn write_csv(&self, path: &Path) -> Result<(), ExperimentError> {
        let err = |e: csv::Error| ExperimentError::Config(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        let m = self.rows.first().map_or(0, |r| r.f0_hz.len());
        let mut header = vec!["step".to_string(), "wall_time_s".to_string()];
        header.extend((1..=m).map(|i| format!("f0_{i}")));
        header.push("clusters".into());
        w.write_record(&header).map_err(err)?;
        let clusters = self.final_clusters().len();
        for (i, r) in self.rows.iter().enumerate() {
            let mut rec = vec![r.step.to_string(), format!("{:.3}", r.wall_time_s)];
            rec.extend(r.f0_hz.iter().map(|f| format!("{f:.6}")));
            rec.push(if i + 1 == self.rows.len() { clusters.to_string() } else { String::new() });
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| ExperimentError::io(path, e))
    }
}

/// Single-linkage clusters of `values`: neighbours closer than `tol` merge.
/// Returns cluster sizes, largest first.
pub fn cluster_sizes(values: &[f64], tol: f64) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut sizes = Vec::new();
    let mut run = 0usize;
    for (i, &x) in v.iter().enumerate() {
        if i > 0 && x - v[i - 1] >= tol {
            sizes.push(run);
            run = 0;
        }
        run += 1;
    }
    if run > 0 {
        sizes.push(run);
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}
