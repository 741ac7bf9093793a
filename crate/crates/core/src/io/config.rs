//! TOML run configuration with located errors.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pipeline::ExperimentSpec;

/// Parses and validates a run configuration. Unknown keys are errors.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let spec: ExperimentSpec = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::Config {
            line,
            message: e.message().trim().to_string(),
        }
    })?;
    spec.validate().map_err(|e| match e {
        Error::InvalidArgument(message) => Error::Config { line: 0, message },
        other => other,
    })?;
    Ok(spec)
}

pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}
