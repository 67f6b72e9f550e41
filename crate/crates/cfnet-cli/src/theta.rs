//! Versioned parameter file written by `fit` and read by every other command.

use crate::config::RunConfig;
use crate::error::{config, CliError};
use cfnet::charlib::{LinearTransform, ModelSpec};
use cfnet::gaussnet::{NetParams1D, NetParams2D};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Network {
    OneDim(NetParams1D),
    TwoDim(NetParams2D),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaFile {
    pub format_version: u32,
    /// SHA-256 of the model section as canonical JSON.
    pub model_hash: String,
    pub transform: LinearTransform,
    pub partition_digest: String,
    pub seed: u64,
    /// Fourier half-width per axis.
    pub eta_prime: Vec<f64>,
    pub network: Network,
}

pub fn model_hash(model: &ModelSpec) -> String {
    let json = serde_json::to_string(model).expect("model specs always serialize");
    hex::encode(Sha256::digest(json.as_bytes()))
}

impl ThetaFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameter files always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let t: ThetaFile = serde_json::from_str(text).map_err(|e| config(format!("theta file: {e}")))?;
        if t.format_version != FORMAT_VERSION {
            return Err(config(format!("theta file: format version {} is not supported", t.format_version)));
        }
        let valid = match &t.network {
            Network::OneDim(n) => n.validate(),
            Network::TwoDim(n) => n.validate(),
        };
        valid.map_err(|e| config(format!("theta file: {e}")))?;
        Ok(t)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Refuses parameters fitted for another model or transform.
    pub fn check_matches(&self, cfg: &RunConfig) -> Result<(), CliError> {
        if self.model_hash != model_hash(&cfg.model) {
            return Err(config("theta file was fitted for a different model; rerun `fit`"));
        }
        if self.transform != cfg.transform() {
            return Err(config(format!(
                "theta file was fitted with transform (scale {}, shift {}), config has (scale {}, shift {})",
                self.transform.scale,
                self.transform.shift,
                cfg.transform().scale,
                cfg.transform().shift
            )));
        }
        Ok(())
    }

    pub fn one_dim(&self) -> Result<&NetParams1D, CliError> {
        match &self.network {
            Network::OneDim(n) => Ok(n),
            Network::TwoDim(_) => Err(config("this command needs a one-dimensional fit")),
        }
    }
}
