use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use hanslens_core::data::Dataset;
use hanslens_core::detectors::{kde::mean_pairwise_sq_dist, Detector, KdeModel};

use crate::commands::{load_data, load_model, parse_grid};
use crate::errors::{CliError, CliResult};
use crate::meta::{ensure_writable, write_run_meta};

/// Stiffness multipliers of the default diagnostic grid, applied on top of
/// the inverse mean pairwise squared training distance.
pub const DEFAULT_DIAG_MULTIPLIERS: [f64; 5] = [1.0, 0.3, 0.1, 0.03, 0.01];

/// Tabulate the distance-to-the-mean approximation of the KDE score over a
/// stiffness grid: the residual shrinks as the pool softens.
#[derive(Args, Serialize)]
pub struct DiagKdeArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Optional fitted kde envelope; its training points replace the
    /// manifest's train split.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output directory for diag_kde.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated stiffness values; defaults to a logarithmic grid
    /// scaled by the training spread.
    #[arg(long)]
    pub gamma_grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub force: bool,
}

pub fn run(args: &DiagKdeArgs) -> CliResult<()> {
    let dataset = load_data(&args.data)?;
    let train = match &args.model {
        Some(path) => {
            let (detector, _) = load_model(path)?;
            let Detector::Kde(model) = detector else {
                return Err(CliError::Invalid("--model must point at a kde detector".into()));
            };
            model.training_points().clone()
        }
        None => Dataset::matrix(&dataset.train)?,
    };

    let path = args.out.join("diag_kde.csv");
    ensure_writable(&path, args.force)?;

    let grid = match &args.gamma_grid {
        Some(text) => parse_grid(text)?,
        None => {
            let scale = mean_pairwise_sq_dist(&train);
            DEFAULT_DIAG_MULTIPLIERS.iter().map(|m| m / scale).collect()
        }
    };

    let mut csv = String::from("gamma,mean_exact,mean_approx,mean_abs_residual\n");
    let mut table = String::from("gamma        mean_exact   mean_approx  mean_abs_residual\n");
    for &gamma in &grid {
        let model = KdeModel::new(train.clone(), gamma)?;
        let (mut exact, mut approx, mut abs_residual) = (0.0, 0.0, 0.0);
        for sample in &dataset.test {
            let diag = model.mean_approximation(&sample.image)?;
            exact += diag.exact_score;
            approx += diag.approx_score;
            abs_residual += diag.residual.abs();
        }
        let n = dataset.test.len() as f64;
        let (exact, approx, abs_residual) = (exact / n, approx / n, abs_residual / n);
        csv.push_str(&format!("{gamma:.16e},{exact:.16e},{approx:.16e},{abs_residual:.16e}\n"));
        table.push_str(&format!("{gamma:<12.5e} {exact:<12.5e} {approx:<12.5e} {abs_residual:.5e}\n"));
    }

    fs::create_dir_all(&args.out).map_err(|e| CliError::Io {
        path: args.out.clone(),
        source: e,
    })?;
    fs::write(&path, csv).map_err(|e| CliError::Io {
        path: path.clone(),
        source: e,
    })?;
    write_run_meta(&args.out, "diag-kde", args.seed, args, args.force)?;
    print!("{table}");
    println!("residual table written to {}", path.display());
    Ok(())
}
