//! Experiment configuration file (TOML). Unknown keys are rejected.
//!
//! ```toml
//! [system]
//! n_bs_antennas = 8
//! n_users = 3
//! n_ris_elements = 16
//! tx_power_dbm = 30.0
//! noise_variance = 1.0
//! rng_seed = 1
//!
//! [channels]
//! q_train = 4
//! e_eval = 20
//! seed = 1
//! model = { kind = "iid_rayleigh" }
//!
//! [inner]
//! max_outer_alternations = 50
//! ris_gradient_steps_per_alternation = 5
//! ris_step_size = 1.0
//! rel_tolerance = 1e-6
//! phase_init = { kind = "uniform_random", seed = 0 }
//!
//! [outer]
//! max_iterations = 30
//! step_size = 0.05
//! init_sigma_aa = 0.0
//!
//! [baseline]
//! fixed_c = 0.5
//! infeasible = false
//!
//! [sweep]
//! axis = "power_dbm"
//! grid = [0.0, 10.0, 20.0, 30.0]
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channels::ChannelModel;
use crate::error::{Error, Result};
use crate::inner::InnerSolverConfig;
use crate::outer::OuterSolverConfig;
use crate::system::{validate_params, SystemParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub q_train: usize,
    pub e_eval: usize,
    pub seed: u64,
    pub model: ChannelModel,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            q_train: 4,
            e_eval: 20,
            seed: 1,
            model: ChannelModel::IidRayleigh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    /// `Σ_αα = c·I`, `Σ_αβ = √(1−c²)·I` for the fixed-coupling baseline.
    pub fixed_c: f64,
    /// Use `S_αβ = I` literally with `S_αα = c·I` (not lossless).
    pub infeasible: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            fixed_c: 0.5,
            infeasible: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    PowerDbm,
    NRisElements,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::PowerDbm => "power_dbm",
            SweepAxis::NRisElements => "n_ris_elements",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            axis: SweepAxis::PowerDbm,
            grid: vec![0.0, 10.0, 20.0, 30.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub system: SystemParams,
    pub channels: ChannelConfig,
    pub inner: InnerSolverConfig,
    pub outer: OuterSolverConfig,
    pub baseline: BaselineConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            system: SystemParams::new(8, 3, 16, 30.0).with_seed(1),
            channels: ChannelConfig::default(),
            inner: InnerSolverConfig::default(),
            outer: OuterSolverConfig::default(),
            baseline: BaselineConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        validate_params(self.system.clone())?;
        self.inner.validate()?;
        self.outer.validate()?;
        if self.channels.q_train == 0 {
            return Err(Error::Config("channels.q_train must be at least 1".into()));
        }
        if !(self.baseline.fixed_c.abs() <= 1.0) {
            return Err(Error::Config("baseline.fixed_c must lie in [-1, 1]".into()));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    let digest = Sha256::digest(&json);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn module_example_parses() {
        let doc: String = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        let cfg = ExperimentConfig::from_toml(&doc).unwrap();
        assert_eq!(cfg.system.n_ris_elements, 16);
        assert_eq!(cfg.sweep.grid.len(), 4);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let e = ExperimentConfig::from_toml("[outer]\nstep_sise = 0.1\n").unwrap_err();
        assert!(matches!(e, Error::Config(ref s) if s.contains("step_sise")), "{e}");
    }

    #[test]
    fn invalid_dimensions_are_rejected() {
        let e = ExperimentConfig::from_toml(
            "[system]\nn_bs_antennas = 8\nn_users = 3\nn_ris_elements = 15\ntx_power_dbm = 30.0\nnoise_variance = 1.0\nrng_seed = 0\n",
        );
        assert!(matches!(e, Err(Error::Dimension(_))));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.outer.step_size = 0.1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
