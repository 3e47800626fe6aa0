use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use hanslens_core::data::Dataset;
use hanslens_core::detectors::{save_detector, BaggedModel, Detector, DetectorKind};

use crate::commands::fit::{fit_one, FitArgs};
use crate::commands::{load_data, load_model};
use crate::errors::{CliError, CliResult};
use crate::meta::{ensure_writable, write_run_meta};

/// Build the bagged detector: fit the three members (or accept fitted ones)
/// and standardize their scores on the training split.
#[derive(Args, Serialize)]
pub struct BagArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for bag.json and member files.
    #[arg(long)]
    pub out: PathBuf,
    /// Fitted member envelopes (exactly three: kde, autoencoder, deep).
    /// When absent, the members are fitted here.
    #[arg(long)]
    pub member: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub gamma_grid: Option<String>,
    #[arg(long)]
    pub lambda_grid: Option<String>,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long)]
    pub backbone: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

pub fn run(args: &BagArgs) -> CliResult<()> {
    let dataset = load_data(&args.data)?;
    ensure_writable(&args.out.join("bag.json"), args.force)?;

    let members: Vec<Detector> = if args.member.is_empty() {
        let fit_args = FitArgs {
            data: args.data.clone(),
            model: String::new(),
            out: args.out.clone(),
            seed: args.seed,
            gamma_grid: args.gamma_grid.clone(),
            lambda_grid: args.lambda_grid.clone(),
            epochs: args.epochs,
            backbone: args.backbone.clone(),
            force: args.force,
        };
        [DetectorKind::Kde, DetectorKind::Autoencoder, DetectorKind::Deep]
            .into_iter()
            .map(|kind| fit_one(kind, &dataset, &fit_args))
            .collect::<CliResult<_>>()?
    } else if args.member.len() == 3 {
        args.member
            .iter()
            .map(|path| load_model(path).map(|(d, _)| d))
            .collect::<CliResult<_>>()?
    } else {
        return Err(CliError::Invalid(format!(
            "--member must be given exactly three times, got {}",
            args.member.len()
        )));
    };

    let mut kde = None;
    let mut auto = None;
    let mut deep = None;
    for member in members {
        match member {
            Detector::Kde(m) => kde = Some(m),
            Detector::Autoencoder(m) => auto = Some(m),
            Detector::Deep(m) => deep = Some(m),
            Detector::Bagged(_) => {
                return Err(CliError::Invalid("a bag cannot contain another bag".into()))
            }
        }
    }
    let (Some(kde), Some(auto), Some(deep)) = (kde, auto, deep) else {
        return Err(CliError::Invalid(
            "members must cover kde, autoencoder and deep".into(),
        ));
    };

    let train = Dataset::matrix(&dataset.train)?;
    let standardizers = BaggedModel::fit_standardizers(&kde, &auto, &deep, &train)?;
    let bag = Detector::Bagged(BaggedModel::new(kde, auto, deep, standardizers));
    let envelope = save_detector(&args.out, "bag", &bag, &dataset.class_name)?;
    write_run_meta(&args.out, "bag", args.seed, args, args.force)?;
    println!("bagged detector written to {}", envelope.display());
    Ok(())
}
