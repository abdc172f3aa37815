use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::MetricParams;

/// Parses the TOML parameter file:
///
/// ```toml
/// [splat]
/// photo = 1.0
/// flow = 1.0
/// varia = 1.0
///
/// [merge]
/// photo = 1.0
/// flow = 1.0
/// varia = 1.0
/// ```
///
/// All six keys are required.
pub fn parse_params(text: &str) -> Result<MetricParams> {
    let p: MetricParams = toml::from_str(text).map_err(|e| Error::Params(e.message().to_owned()))?;
    p.validate()?;
    Ok(p)
}

pub fn load_params(path: impl AsRef<Path>) -> Result<MetricParams> {
    parse_params(&fs::read_to_string(path)?)
}

pub fn save_params(params: &MetricParams, path: impl AsRef<Path>) -> Result<()> {
    let text = toml::to_string(params).map_err(|e| Error::Params(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}
