pub mod bag;
pub mod diag;
pub mod evaluate;
pub mod explain;
pub mod fit;
pub mod score;
pub mod synth;

use std::path::Path;

use hanslens_core::data::{load_manifest, Dataset};
use hanslens_core::detectors::{load_detector, Detector};

use crate::errors::{CliError, CliResult};

pub fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let grid: Vec<f64> = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Invalid(format!("bad grid entry {t:?}")))
        })
        .collect::<CliResult<_>>()?;
    if grid.is_empty() {
        return Err(CliError::Invalid("empty grid".into()));
    }
    Ok(grid)
}

pub fn load_data(path: &Path) -> CliResult<Dataset> {
    Ok(load_manifest(path)?)
}

pub fn load_model(path: &Path) -> CliResult<(Detector, String)> {
    Ok(load_detector(path)?)
}

/// Turn a split-relative sample id into a flat file stem.
pub fn flat_id(id: &str) -> String {
    id.replace(['/', '\\'], "_")
}
