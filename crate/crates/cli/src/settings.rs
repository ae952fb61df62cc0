use std::path::Path;

use freshreplay::RunConfig;

use crate::error::{CliError, CliResult};

pub fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::ReadInput {
        path: path.to_path_buf(),
        source,
    })
}

/// Applies `key=value` overrides in order.
pub fn apply_overrides(cfg: &mut RunConfig, overrides: &[String]) -> CliResult<()> {
    for o in overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{o}` is not key=value")))?;
        cfg.set(key.trim(), value)
            .map_err(|e| CliError::Config(format!("--set {o}: {e}")))?;
    }
    Ok(())
}

/// Defaults, then the file, then overrides, then `--seed`; validated.
pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> CliResult<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::parse(&read(p)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut cfg, overrides)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(CliError::Invalid)?;
    Ok(cfg)
}
