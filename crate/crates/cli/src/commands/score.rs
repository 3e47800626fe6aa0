use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use hanslens_core::data::Sample;

use crate::commands::{load_data, load_model};
use crate::errors::{CliError, CliResult};
use crate::meta::{ensure_writable, write_run_meta};
use crate::par::parallel_map;

/// Score one split and write `scores.csv`.
#[derive(Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Fitted detector envelope (detector.json).
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Split to score: train, val, test.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub force: bool,
}

pub fn run(args: &ScoreArgs) -> CliResult<()> {
    let dataset = load_data(&args.data)?;
    let (detector, _) = load_model(&args.model)?;
    let samples: &[Sample] = match args.split.as_str() {
        "train" => &dataset.train,
        "val" => &dataset.validation,
        "test" => &dataset.test,
        other => {
            return Err(CliError::Invalid(format!(
                "unknown split {other:?} (expected train, val or test)"
            )))
        }
    };

    let path = args.out.join("scores.csv");
    ensure_writable(&path, args.force)?;

    let scored = parallel_map(samples, |s| {
        detector.score(&s.image).map(|v| (s.id.clone(), v))
    });
    // 17 significant digits round-trip exactly
    let mut csv = String::from("sample_id,score\n");
    for row in scored {
        let (id, score) = row?;
        csv.push_str(&format!("{id},{score:.16e}\n"));
    }

    fs::create_dir_all(&args.out).map_err(|e| CliError::Io {
        path: args.out.clone(),
        source: e,
    })?;
    fs::write(&path, csv).map_err(|e| CliError::Io {
        path: path.clone(),
        source: e,
    })?;
    write_run_meta(&args.out, "score", args.seed, args, args.force)?;
    println!("wrote {} scores to {}", samples.len(), path.display());
    Ok(())
}
