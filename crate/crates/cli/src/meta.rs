//! Per-run metadata and overwrite protection.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::errors::{CliError, CliResult};

/// Refuse to clobber an existing artifact unless --force was given.
pub fn ensure_writable(path: &Path, force: bool) -> CliResult<()> {
    if path.exists() && !force {
        return Err(CliError::WouldOverwrite(path.to_path_buf()));
    }
    Ok(())
}

#[derive(Serialize)]
struct RunMeta<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a T,
}

/// Write `run_meta.json` into the output directory: command, crate version,
/// the seed, and the full flag set of the invocation.
pub fn write_run_meta<T: Serialize>(
    dir: &Path,
    command: &str,
    seed: u64,
    config: &T,
    force: bool,
) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let path = dir.join("run_meta.json");
    ensure_writable(&path, force)?;
    let meta = RunMeta {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config,
    };
    let json = serde_json::to_string_pretty(&meta)
        .map_err(|e| CliError::Invalid(format!("metadata serialization: {e}")))?;
    fs::write(&path, json).map_err(|e| CliError::Io {
        path,
        source: e,
    })
}
