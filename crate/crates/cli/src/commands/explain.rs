use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use hanslens_core::data::write_heatmap;
use hanslens_core::lrp::{explain, LrpConfig};

use crate::commands::{flat_id, load_data, load_model};
use crate::errors::{CliError, CliResult};
use crate::meta::{ensure_writable, write_run_meta};
use crate::par::parallel_map;

/// Explain every test outlier and write heatmap file pairs.
#[derive(Args, Serialize)]
pub struct ExplainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Fitted detector envelope (detector.json).
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory; one <id>.hm / <id>.pgm pair per outlier.
    #[arg(long)]
    pub out: PathBuf,
    /// Gamma-rule parameter of the backward pass.
    #[arg(long, default_value_t = 0.25)]
    pub lrp_gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub force: bool,
}

pub fn run(args: &ExplainArgs) -> CliResult<()> {
    let dataset = load_data(&args.data)?;
    let (detector, _) = load_model(&args.model)?;
    let config = LrpConfig {
        gamma: args.lrp_gamma,
        ..LrpConfig::default()
    };

    let outliers: Vec<_> = dataset.test.iter().filter(|s| s.label == 1).collect();
    fs::create_dir_all(&args.out).map_err(|e| CliError::Io {
        path: args.out.clone(),
        source: e,
    })?;
    for sample in &outliers {
        let stem = flat_id(&sample.id);
        ensure_writable(&args.out.join(format!("{stem}.hm")), args.force)?;
        ensure_writable(&args.out.join(format!("{stem}.pgm")), args.force)?;
    }

    let heatmaps = parallel_map(&outliers, |s| {
        explain(&detector, &s.image, &config, &s.id)
    });
    let mut written = 0;
    for heatmap in heatmaps {
        let heatmap = heatmap?;
        let stem = args.out.join(flat_id(&heatmap.sample_id));
        write_heatmap(&heatmap, &stem)?;
        written += 1;
    }
    write_run_meta(&args.out, "explain", args.seed, args, args.force)?;
    println!("wrote {written} heatmap pairs under {}", args.out.display());
    Ok(())
}
