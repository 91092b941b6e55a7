//! TOML configuration file. Flat key-value schema mirroring the long
//! command-line flags; unknown keys are rejected. Precedence is
//! command-line flag, then config file, then built-in default.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub format: Option<String>,
    pub out: Option<String>,
    pub theta: Option<f64>,
    pub phi: Option<f64>,
    pub mode: Option<String>,
    pub points: Option<usize>,
    pub periods: Option<f64>,
    pub omega: Option<f64>,
    pub contrast: Option<f64>,
    pub offset: Option<f64>,
    pub sigma: Option<f64>,
    pub drift: Option<f64>,
    pub decay_t: Option<f64>,
    pub method: Option<String>,
    pub eps: Option<f64>,
    pub quantity: Option<String>,
    pub sweep_phi: Option<f64>,
    pub signs: Option<String>,
    pub n: Option<usize>,
    pub u3: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
