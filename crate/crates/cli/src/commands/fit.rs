use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use hanslens_core::data::Dataset;
use hanslens_core::detectors::{
    default_stiffness_grid, fit_autoencoder, fit_deep_one_class, fit_kde, random_backbone,
    save_detector, AutoencoderConfig, Detector, DetectorKind,
};
use hanslens_core::neural::weights::load_stack;

use crate::commands::{load_data, parse_grid};
use crate::errors::{CliError, CliResult};
use crate::meta::{ensure_writable, write_run_meta};

/// Default ridge shifts tried when fitting the deep model.
pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [0.001, 0.01, 0.1, 1.0, 10.0];
/// Default hidden widths of generated feature extractors.
pub const DEFAULT_BACKBONE_WIDTHS: [usize; 2] = [64, 32];

/// Fit one detector on a class dataset.
#[derive(Args, Serialize)]
pub struct FitArgs {
    /// Dataset manifest path.
    #[arg(long)]
    pub data: PathBuf,
    /// Detector kind: kde, auto, deep.
    #[arg(long)]
    pub model: String,
    /// Output directory for detector.json / detector.hlw.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated stiffness candidates for kde.
    #[arg(long)]
    pub gamma_grid: Option<String>,
    /// Comma-separated ridge shifts for deep.
    #[arg(long)]
    pub lambda_grid: Option<String>,
    /// Autoencoder training epochs.
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    /// HLW1 feature extractor for deep; a seeded random projection stack is
    /// generated when absent.
    #[arg(long)]
    pub backbone: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

pub fn fit_one(
    kind: DetectorKind,
    dataset: &Dataset,
    args: &FitArgs,
) -> CliResult<Detector> {
    let train = Dataset::matrix(&dataset.train)?;
    let validation = Dataset::matrix(&dataset.validation)?;
    match kind {
        DetectorKind::Kde => {
            let grid = match &args.gamma_grid {
                Some(text) => parse_grid(text)?,
                None => default_stiffness_grid(&train),
            };
            Ok(Detector::Kde(fit_kde(&train, &validation, &grid)?))
        }
        DetectorKind::Autoencoder => {
            let config = AutoencoderConfig {
                epochs: args.epochs,
                seed: args.seed,
                ..AutoencoderConfig::default()
            };
            let (model, report) = fit_autoencoder(&train, &validation, &config)?;
            println!(
                "autoencoder: best validation loss {:.6e} at epoch {}",
                report.best_validation_loss, report.best_epoch
            );
            Ok(Detector::Autoencoder(model))
        }
        DetectorKind::Deep => {
            let input_dim = train.cols();
            let extractor = match &args.backbone {
                Some(path) => load_stack(path)?,
                None => random_backbone(input_dim, &DEFAULT_BACKBONE_WIDTHS, args.seed)?,
            };
            let grid = match &args.lambda_grid {
                Some(text) => parse_grid(text)?,
                None => DEFAULT_LAMBDA_GRID.to_vec(),
            };
            let mixed = dataset.validation_mixed();
            if mixed.iter().all(|s| s.label == 0) {
                return Err(CliError::Invalid(
                    "deep fitting needs validation outliers (val_outliers split)".into(),
                ));
            }
            let samples: Vec<_> = mixed.iter().map(|s| (*s).clone()).collect();
            let val_matrix = Dataset::matrix(&samples)?;
            let labels = Dataset::labels(&samples);
            Ok(Detector::Deep(fit_deep_one_class(
                extractor, input_dim, &train, &val_matrix, &labels, &grid,
            )?))
        }
        DetectorKind::Bagged => Err(CliError::Invalid(
            "use the bag subcommand to build a bagged detector".into(),
        )),
    }
}

pub fn run(args: &FitArgs) -> CliResult<()> {
    let kind: DetectorKind = args.model.parse()?;
    let dataset = load_data(&args.data)?;
    ensure_writable(&args.out.join("detector.json"), args.force)?;
    let detector = fit_one(kind, &dataset, args)?;
    let envelope = save_detector(&args.out, "detector", &detector, &dataset.class_name)?;
    write_run_meta(&args.out, "fit", args.seed, args, args.force)?;
    println!("fitted {} on class {} -> {}", kind, dataset.class_name, envelope.display());
    Ok(())
}
