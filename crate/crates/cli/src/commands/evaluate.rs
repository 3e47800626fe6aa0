use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use hanslens_core::eval::{evaluate_class, EvaluationReport};
use hanslens_core::lrp::LrpConfig;

use crate::commands::{load_data, load_model};
use crate::errors::{CliError, CliResult};
use crate::meta::{ensure_writable, write_run_meta};

/// Evaluate over one or more class datasets: detection accuracy, explanation
/// accuracy and Clever Hans score per class.
#[derive(Args, Serialize)]
pub struct EvaluateArgs {
    /// Dataset manifest; repeat for multiple classes.
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    /// Fitted detector envelope (detector.json). Give one to share across
    /// all datasets, or one per dataset (same kind) for per-class models.
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    /// Output directory for report.json and report.txt.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    pub lrp_gamma: f64,
    /// Classes listed in the ranking section.
    #[arg(long, default_value_t = 3)]
    pub top_k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub force: bool,
}

pub fn run(args: &EvaluateArgs) -> CliResult<()> {
    if args.model.len() != 1 && args.model.len() != args.data.len() {
        return Err(CliError::Invalid(format!(
            "--model must be given once or once per --data ({} datasets, {} models)",
            args.data.len(),
            args.model.len()
        )));
    }
    let detectors: Vec<_> = args
        .model
        .iter()
        .map(|path| load_model(path).map(|(d, _)| d))
        .collect::<CliResult<_>>()?;
    let kind = detectors[0].kind();
    if detectors.iter().any(|d| d.kind() != kind) {
        return Err(CliError::Invalid(
            "all models in one report must share the detector kind".into(),
        ));
    }
    let config = LrpConfig {
        gamma: args.lrp_gamma,
        ..LrpConfig::default()
    };
    let json_path = args.out.join("report.json");
    let table_path = args.out.join("report.txt");
    ensure_writable(&json_path, args.force)?;
    ensure_writable(&table_path, args.force)?;

    let mut classes = Vec::new();
    for (i, manifest) in args.data.iter().enumerate() {
        let detector = if detectors.len() == 1 { &detectors[0] } else { &detectors[i] };
        let dataset = load_data(manifest)?;
        classes.push(evaluate_class(detector, &dataset, &config)?);
    }
    let report = EvaluationReport::new(kind.as_str().to_string(), classes);

    fs::create_dir_all(&args.out).map_err(|e| CliError::Io {
        path: args.out.clone(),
        source: e,
    })?;

    fs::write(&json_path, report.to_json()?).map_err(|e| CliError::Io {
        path: json_path.clone(),
        source: e,
    })?;
    let table = report.render_table(args.top_k);
    fs::write(&table_path, &table).map_err(|e| CliError::Io {
        path: table_path.clone(),
        source: e,
    })?;
    write_run_meta(&args.out, "evaluate", args.seed, args, args.force)?;

    print!("{table}");
    println!("report written to {}", json_path.display());
    Ok(())
}
