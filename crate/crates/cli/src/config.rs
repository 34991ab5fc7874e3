use std::path::{Path, PathBuf};

use coopcr_core::experiments::SweepSpec;
use coopcr_core::Error;
use serde::Deserialize;

/// Contents of a `sweep --config` TOML file.
///
/// ```toml
/// output = "out/lambda_p_sweep.csv"
///
/// [sweep]
/// swept = "lambda_p"
/// objective = "delay"
/// psi = [20.0, 10.0]
/// baseline = true
/// range = { start = 0.01, stop = 0.4, step = 0.01 }
/// base = { lambda_p = 0.2, lambda_s = 0.2, h_pd = 0.3, h_ps = 0.4, h_sd = 0.8 }
/// simulation = { horizon = 100000, seed = 1 }
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// CSV destination; `--out` overrides it and stdout is used when neither is set.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub sweep: SweepSpec,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        cfg.sweep.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }
}
