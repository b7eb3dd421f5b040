//! Flat JSON run configuration shared by every subcommand.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sls_core::ensemble::{EnsembleConfig, DEFAULT_BINS, DEFAULT_QUANTILES};
use sls_core::sim::{GbmParams, LeverageConfig, DEFAULT_INITIAL_PRICE};
use sls_core::{ControllerParams, Horizon, MarketRealization, UncertaintySet};

use crate::CliError;

pub const DEFAULT_PATHS: u64 = 100_000;

/// Every field is optional in the file; each subcommand checks for the ones it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s1_0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s2_0: Option<f64>,
    /// Leverage multiple; absent means no cap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Initial account value; defaults to `i0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max_scan: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_horizons: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_sets: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_ks: Option<usize>,
}

fn need<T: Copy>(value: Option<T>, name: &'static str) -> Result<T, CliError> {
    value.ok_or(CliError::Missing(name))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn uncertainty(&self) -> Result<UncertaintySet, CliError> {
        Ok(UncertaintySet::new(
            need(self.mu_min, "mu_min")?,
            need(self.mu_max, "mu_max")?,
            need(self.eps_max, "eps_max")?,
            need(self.beta_0, "beta_0")?,
        )?)
    }

    pub fn beta_0(&self) -> f64 {
        self.beta_0.unwrap_or(1.0)
    }

    pub fn horizon(&self) -> Result<Horizon, CliError> {
        Ok(Horizon::new(need(self.n, "n")?)?)
    }

    pub fn i0(&self) -> Result<f64, CliError> {
        need(self.i0, "i0")
    }

    pub fn controller(&self) -> Result<ControllerParams, CliError> {
        Ok(ControllerParams::new(self.i0()?, need(self.k, "k")?, self.beta_0())?)
    }

    pub fn mu1(&self) -> Result<f64, CliError> {
        need(self.mu1, "mu1")
    }

    pub fn eps(&self) -> Result<f64, CliError> {
        need(self.eps, "eps")
    }

    pub fn theta(&self) -> Result<f64, CliError> {
        need(self.theta, "theta")
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        need(self.seed, "seed")
    }

    pub fn leverage(&self) -> Result<LeverageConfig, CliError> {
        let v0 = match self.v0 {
            Some(v) => v,
            None => self.i0()?,
        };
        Ok(LeverageConfig::new(self.gamma, v0)?)
    }

    fn initial_prices(&self) -> (f64, f64) {
        (
            self.s1_0.unwrap_or(DEFAULT_INITIAL_PRICE),
            self.s2_0.unwrap_or(DEFAULT_INITIAL_PRICE),
        )
    }

    /// GBM drifts for the concrete realization `(mu1, eps)`, which must be admissible.
    pub fn gbm(&self) -> Result<GbmParams, CliError> {
        let set = self.uncertainty()?;
        let real = MarketRealization::new(self.mu1()?, self.eps()?, &set)?;
        let (s1, s2) = self.initial_prices();
        Ok(GbmParams::for_realization(
            &real,
            set.beta_0(),
            need(self.sigma_1, "sigma_1")?,
            need(self.sigma_2, "sigma_2")?,
            s1,
            s2,
        )?)
    }

    pub fn ensemble(&self) -> Result<EnsembleConfig, CliError> {
        let (s1_0, s2_0) = self.initial_prices();
        Ok(EnsembleConfig {
            n_paths: self.paths.unwrap_or(DEFAULT_PATHS),
            master_seed: self.seed()?,
            set: self.uncertainty()?,
            params: self.controller()?,
            leverage: self.leverage()?,
            horizon: self.horizon()?,
            sigma_1: need(self.sigma_1, "sigma_1")?,
            sigma_2: need(self.sigma_2, "sigma_2")?,
            s1_0,
            s2_0,
            bins: self.bins.unwrap_or(DEFAULT_BINS),
            quantiles: DEFAULT_QUANTILES.to_vec(),
        })
    }
}
