//! Solver-parameter defaults, optionally overridden by a JSON config file,
//! in turn overridden by CLI flags.

use std::path::Path;

use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_C: f64 = 1e-4;
pub const DEFAULT_A0: f64 = 1e-4;
pub const DEFAULT_A0P: f64 = 1e-4;
pub const DEFAULT_EPS: f64 = 1e-4;

/// Optional config file: `{"c": .., "a0": .., "a0p": .., "eps": .., "lazy": ..}`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    c: Option<f64>,
    a0: Option<f64>,
    a0p: Option<f64>,
    eps: Option<f64>,
    lazy: Option<bool>,
}

/// Fully resolved defaults for the current invocation (before CLI flags,
/// which each command applies on top).
#[derive(Copy, Clone, Debug)]
pub struct Params {
    pub c: f64,
    pub a0: f64,
    pub a0p: f64,
    pub eps: f64,
    pub lazy: bool,
}

pub fn resolve(config_path: Option<&Path>) -> Result<Params, CliError> {
    let file = match config_path {
        None => ConfigFile::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::Usage(format!("config file {}: {e}", path.display()))
            })?
        }
    };
    Ok(Params {
        c: file.c.unwrap_or(DEFAULT_C),
        a0: file.a0.unwrap_or(DEFAULT_A0),
        a0p: file.a0p.unwrap_or(DEFAULT_A0P),
        eps: file.eps.unwrap_or(DEFAULT_EPS),
        lazy: file.lazy.unwrap_or(false),
    })
}
