use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use hanslens_core::data::{write_dataset, CorruptionKind, SynthSpec};

use crate::errors::{CliError, CliResult};
use crate::meta::{ensure_writable, write_run_meta};

/// Generate a seeded synthetic class dataset.
#[derive(Args, Serialize)]
pub struct SynthArgs {
    /// Corruption kind: stripe, dotted_line, brightness, spatter_noise, cartoon2d.
    #[arg(long)]
    pub kind: String,
    /// Image size as HxW (ignored by cartoon2d).
    #[arg(long, default_value = "16x16")]
    pub size: String,
    #[arg(long, default_value_t = 100)]
    pub n_train: usize,
    #[arg(long, default_value_t = 40)]
    pub n_val: usize,
    #[arg(long, default_value_t = 40)]
    pub n_test: usize,
    /// Rows inverted by the stripe corruption.
    #[arg(long, default_value_t = 2)]
    pub stripe_width: usize,
    /// Dots placed by the dotted_line corruption.
    #[arg(long, default_value_t = 8)]
    pub dot_count: usize,
    /// 8-bit brightness shift.
    #[arg(long, default_value_t = 48)]
    pub brightness_offset: u8,
    /// Per-pixel inversion probability of spatter_noise.
    #[arg(long, default_value_t = 0.05)]
    pub noise_prob: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for images, masks and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

fn parse_size(text: &str) -> CliResult<(usize, usize)> {
    let (h, w) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| CliError::Invalid(format!("size must look like 16x16, got {text:?}")))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| CliError::Invalid(format!("bad size component {t:?}")))
    };
    Ok((parse(h)?, parse(w)?))
}

pub fn run(args: &SynthArgs) -> CliResult<()> {
    let spec = SynthSpec {
        kind: args.kind.parse::<CorruptionKind>()?,
        image_size: parse_size(&args.size)?,
        n_train: args.n_train,
        n_val: args.n_val,
        n_test: args.n_test,
        stripe_width: args.stripe_width,
        dot_count: args.dot_count,
        brightness_offset: args.brightness_offset,
        noise_prob: args.noise_prob,
        seed: args.seed,
    };
    ensure_writable(&args.out.join("manifest.json"), args.force)?;
    let dataset = hanslens_core::data::generate_dataset(&spec)?;
    let manifest = write_dataset(&dataset, &args.out)?;
    write_run_meta(&args.out, "synth", args.seed, args, args.force)?;
    let total = dataset.train.len()
        + dataset.validation.len()
        + dataset.validation_outliers.len()
        + dataset.test.len();
    println!(
        "wrote {total} samples of class {} under {}",
        dataset.class_name,
        manifest.display()
    );
    Ok(())
}
