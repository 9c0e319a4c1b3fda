//! TOML experiment configuration.
//!
//! ```toml
//! [scenario]
//! M = 64
//! N = 12
//! K = 4
//! snr_db = 0.0
//! scatterers = 3
//! seed = 7
//!
//! [hyper]
//! nu = 1.0
//! theta = 0.01
//! phi = 0.01
//!
//! [policy]
//! tol = 1e-6
//! max_iter = 500
//!
//! [sweep]
//! variable = "snr_db"
//! values = [-10.0, 0.0, 10.0]
//! trials = 200
//! estimators = ["sbl", "esbl", "mesbl"]
//! ```
//!
//! Everything except `scenario.M`, `scenario.N`, `scenario.K` and
//! `scenario.snr_db` has a default. A config without a `[sweep]` section
//! describes a single estimation run.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelScenario;
use crate::error::{Error, Result};
use crate::estimators::{ConvergencePolicy, ESblHyper, SblHyper};
use crate::experiments::{EstimatorKind, Hypers, NmseMode, SweepSpec, SweepVariable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSection {
    #[serde(default = "defaults::nu")]
    pub nu: f64,
    #[serde(default = "defaults::theta_phi")]
    pub theta: f64,
    #[serde(default = "defaults::theta_phi")]
    pub phi: f64,
    /// Optional inverse-gamma prior on the baseline SBL weights.
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
}

impl Default for HyperSection {
    fn default() -> Self {
        Self::from(Hypers::default())
    }
}

impl From<Hypers> for HyperSection {
    fn from(h: Hypers) -> Self {
        Self {
            nu: h.esbl.nu,
            theta: h.esbl.theta,
            phi: h.esbl.phi,
            alpha: h.sbl.alpha,
            beta: h.sbl.beta,
        }
    }
}

impl HyperSection {
    pub fn hypers(&self) -> Hypers {
        Hypers {
            sbl: SblHyper { alpha: self.alpha, beta: self.beta },
            esbl: ESblHyper { nu: self.nu, theta: self.theta, phi: self.phi },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    #[serde(default = "defaults::trials")]
    pub trials: usize,
    #[serde(default = "defaults::estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub nmse: NmseMode,
    /// Record wall time per estimator. Off by default because timings make
    /// the CSV non-reproducible.
    #[serde(default)]
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ChannelScenario,
    #[serde(default)]
    pub hyper: HyperSection,
    #[serde(default)]
    pub policy: ConvergencePolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

mod defaults {
    use crate::experiments::EstimatorKind;

    pub fn nu() -> f64 {
        1.0
    }
    pub fn theta_phi() -> f64 {
        0.01
    }
    pub fn trials() -> usize {
        1000
    }
    pub fn estimators() -> Vec<EstimatorKind> {
        vec![EstimatorKind::Esbl, EstimatorKind::Mesbl, EstimatorKind::Sbl]
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let hypers = self.hyper.hypers();
        hypers.sbl.validate()?;
        hypers.esbl.validate()?;
        self.policy.validate()?;
        if self.sweep.is_some() {
            self.sweep_spec()?.validate()?;
        } else if self.scenario.noise_variance() <= 0.0 {
            return Err(Error::Config("scenario.snr_db must be finite".into()));
        }
        Ok(())
    }

    /// The sweep described by this config. Errors if there is no `[sweep]`.
    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("missing [sweep] section".into()))?;
        let mut spec = SweepSpec::new(
            self.scenario.clone(),
            sweep.variable,
            sweep.values.clone(),
            sweep.estimators.clone(),
            sweep.trials,
        );
        spec.hypers = self.hyper.hypers();
        spec.policy = self.policy;
        spec.nmse_mode = sweep.nmse;
        spec.record_timing = sweep.timing;
        Ok(spec)
    }

    /// Estimators for a single run: the sweep list if present, else all four.
    pub fn estimators(&self) -> Vec<EstimatorKind> {
        match &self.sweep {
            Some(s) => s.estimators.clone(),
            None => EstimatorKind::ALL.to_vec(),
        }
    }
}

/// Parses and validates a config. Errors name the offending key.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn serialize_config(config: &ExperimentConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Config(e.to_string()))
}
