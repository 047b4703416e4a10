use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BankHyperparams, CombBankParams, LayerError};
use crate::comb::ScalingConfig;

/// Human-readable TOML form of a comb bank. `f0_hz` is written for
/// inspection only and is recomputed from `w` on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombCheckpoint {
    pub channels: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub alpha: f64,
    pub echo_count: usize,
    pub sample_rate_hz: u32,
    pub w: Vec<f64>,
    #[serde(default)]
    pub f0_hz: Vec<f64>,
}

impl From<&CombBankParams> for CombCheckpoint {
    fn from(p: &CombBankParams) -> Self {
        Self {
            channels: p.channels(),
            f_min_hz: p.scaling.f_min,
            f_max_hz: p.scaling.f_max,
            alpha: p.alpha,
            echo_count: p.echo_count,
            sample_rate_hz: p.sample_rate,
            w: p.w.clone(),
            f0_hz: p.f0s(),
        }
    }
}

impl CombCheckpoint {
    pub fn into_params(self) -> Result<CombBankParams, LayerError> {
        if self.w.len() != self.channels {
            return Err(LayerError::Config(format!(
                "checkpoint declares {} channels but stores {} parameters",
                self.channels,
                self.w.len()
            )));
        }
        CombBankParams::new(
            self.w,
            BankHyperparams {
                scaling: ScalingConfig {
                    f_min: self.f_min_hz,
                    f_max: self.f_max_hz,
                },
                alpha: self.alpha,
                echo_count: self.echo_count,
                sample_rate: self.sample_rate_hz,
            },
        )
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("checkpoint fields are always representable")
    }

    pub fn from_toml(text: &str) -> Result<Self, LayerError> {
        toml::from_str(text).map_err(|e| LayerError::Config(format!("bad comb checkpoint: {e}")))
    }
}

pub fn save_params(params: &CombBankParams, path: &Path) -> std::io::Result<()> {
    fs::write(path, CombCheckpoint::from(params).to_toml())
}

pub fn load_params(path: &Path) -> Result<CombBankParams, LayerError> {
    let text = fs::read_to_string(path)
        .map_err(|e| LayerError::Config(format!("cannot read {}: {e}", path.display())))?;
    CombCheckpoint::from_toml(&text)?.into_params()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::init_params;

    #[test]
    fn text_round_trip_is_exact() {
        let p = init_params(12, ScalingConfig::new(200.0, 500.0).unwrap(), 77).unwrap();
        let text = CombCheckpoint::from(&p).to_toml();
        assert!(text.contains("f_min_hz = 200.0"));
        let back = CombCheckpoint::from_toml(&text).unwrap().into_params().unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn derived_f0_is_ignored_on_load() {
        let p = init_params(2, ScalingConfig::new(200.0, 500.0).unwrap(), 1).unwrap();
        let mut ck = CombCheckpoint::from(&p);
        ck.f0_hz = vec![1.0, 2.0];
        let back = ck.into_params().unwrap();
        assert_eq!(back.f0s(), p.f0s());
    }

    #[test]
    fn channel_count_mismatch_is_rejected() {
        let p = init_params(3, ScalingConfig::new(200.0, 500.0).unwrap(), 1).unwrap();
        let mut ck = CombCheckpoint::from(&p);
        ck.channels = 4;
        assert!(ck.into_params().is_err());
    }
}
