//! Flat key-value parameter file for experiment runs.
//!
//! ```text
//! d = 0.5
//! sigma = 0.25
//! prepopulation = 15
//! attack_regular = 10
//! probe_honeypot = -5
//! ```
//!
//! Every key is optional; absent keys keep their defaults.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::game::{Payoffs, Points};
use crate::ibl::AgentParams;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing parameter file: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub d: Option<f64>,
    pub sigma: Option<f64>,
    pub temperature: Option<f64>,
    pub prepopulation: Option<Points>,
    pub attack_regular: Option<Points>,
    pub attack_honeypot: Option<Points>,
    pub probe_regular: Option<Points>,
    pub probe_honeypot: Option<Points>,
}

impl ParamsFile {
    pub fn parse(text: &str) -> Result<Self, ParamsError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ParamsError> {
        let text = std::fs::read_to_string(path).map_err(|source| ParamsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn apply_agent<F: Scalar>(&self, params: &mut AgentParams<F>) {
        if let Some(d) = self.d {
            params.decay = F::of(d);
        }
        if let Some(sigma) = self.sigma {
            params.noise = F::of(sigma);
        }
        if let Some(t) = self.temperature {
            params.temperature = Some(F::of(t));
        }
        if let Some(p) = self.prepopulation {
            params.prepopulation = p;
        }
    }

    pub fn apply_payoffs(&self, payoffs: &mut Payoffs) {
        let overrides = [
            (self.attack_regular, &mut payoffs.attack_regular),
            (self.attack_honeypot, &mut payoffs.attack_honeypot),
            (self.probe_regular, &mut payoffs.probe_regular),
            (self.probe_honeypot, &mut payoffs.probe_honeypot),
        ];
        for (value, slot) in overrides {
            if let Some(v) = value {
                *slot = v;
            }
        }
    }
}
