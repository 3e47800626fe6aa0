//! Seeded synthetic datasets: procedurally drawn inlier images, corrupted
//! outlier copies, and exact change masks.
//!
//! Base inliers are random stroke/blob drawings on a dark canvas. An outlier
//! is a fresh base image passed through one corruption; its mask marks
//! exactly the pixels the corruption changed. The `cartoon2d` class instead
//! emits 2-D points (as 1x2 images) from an off-origin blob, with outliers
//! displaced along one coordinate axis.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::rng::DetRng;
use crate::tensor::Tensor;

/// Brightest value the base-image generator emits; leaves headroom so the
/// brightness corruption changes saturated pixels too.
pub const MAX_BASE_INTENSITY: u8 = 200;

/// Inlier blob center of the `cartoon2d` class.
pub const CARTOON_MEAN: (f64, f64) = (0.6, 0.65);
/// Inlier blob standard deviation of the `cartoon2d` class.
pub const CARTOON_STD: f64 = 0.05;
/// Axis-aligned outlier displacement of the `cartoon2d` class.
pub const CARTOON_SHIFT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    Stripe,
    DottedLine,
    Brightness,
    SpatterNoise,
    Cartoon2d,
}

impl CorruptionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CorruptionKind::Stripe => "stripe",
            CorruptionKind::DottedLine => "dotted_line",
            CorruptionKind::Brightness => "brightness",
            CorruptionKind::SpatterNoise => "spatter_noise",
            CorruptionKind::Cartoon2d => "cartoon2d",
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stripe" => Ok(CorruptionKind::Stripe),
            "dotted_line" => Ok(CorruptionKind::DottedLine),
            "brightness" => Ok(CorruptionKind::Brightness),
            "spatter_noise" => Ok(CorruptionKind::SpatterNoise),
            "cartoon2d" => Ok(CorruptionKind::Cartoon2d),
            other => Err(Error::InvalidArgument(format!(
                "unknown corruption kind {other:?}"
            ))),
        }
    }
}

/// Full recipe for one synthetic class; generation is a pure function of it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: CorruptionKind,
    /// (height, width); ignored by `cartoon2d`, which always emits 1x2.
    pub image_size: (usize, usize),
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub stripe_width: usize,
    pub dot_count: usize,
    pub brightness_offset: u8,
    pub noise_prob: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            kind: CorruptionKind::Stripe,
            image_size: (16, 16),
            n_train: 100,
            n_val: 40,
            n_test: 40,
            stripe_width: 2,
            dot_count: 8,
            brightness_offset: 48,
            noise_prob: 0.05,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.dims();
        if h == 0 || w == 0 {
            return Err(Error::InvalidArgument("zero image dimension".into()));
        }
        if self.n_train == 0 || self.n_val == 0 || self.n_test == 0 {
            return Err(Error::InvalidArgument("split counts must be positive".into()));
        }
        match self.kind {
            CorruptionKind::Stripe => {
                if self.stripe_width == 0 || self.stripe_width > h {
                    return Err(Error::InvalidArgument(format!(
                        "stripe width {} out of range for height {h}",
                        self.stripe_width
                    )));
                }
            }
            CorruptionKind::DottedLine => {
                if self.dot_count == 0 || self.dot_count > w {
                    return Err(Error::InvalidArgument(format!(
                        "dot count {} out of range for width {w}",
                        self.dot_count
                    )));
                }
            }
            CorruptionKind::Brightness => {
                if self.brightness_offset == 0
                    || self.brightness_offset as u16 + MAX_BASE_INTENSITY as u16 > 255
                {
                    return Err(Error::InvalidArgument(format!(
                        "brightness offset must be in 1..={}",
                        255 - MAX_BASE_INTENSITY
                    )));
                }
            }
            CorruptionKind::SpatterNoise => {
                if !(self.noise_prob > 0.0 && self.noise_prob <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "noise probability {} out of (0, 1]",
                        self.noise_prob
                    )));
                }
            }
            CorruptionKind::Cartoon2d => {}
        }
        Ok(())
    }

    /// Effective image dimensions.
    pub fn dims(&self) -> (usize, usize) {
        match self.kind {
            CorruptionKind::Cartoon2d => (1, 2),
            _ => self.image_size,
        }
    }

    pub fn class_name(&self) -> &'static str {
        self.kind.as_str()
    }
}

/// 8-bit canvas used during generation; samples quantize here so files and
/// in-memory tensors agree exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

impl ImageBuffer {
    fn dark(height: usize, width: usize) -> Self {
        ImageBuffer {
            height,
            width,
            pixels: vec![0; height * width],
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        let values = self.pixels.iter().map(|&p| p as f64 / 255.0).collect();
        Tensor::new(vec![self.height, self.width], values).expect("pixel range")
    }
}

/// Random strokes plus an occasional blob on a dark canvas.
pub fn base_image(height: usize, width: usize, rng: &mut DetRng) -> ImageBuffer {
    let mut img = ImageBuffer::dark(height, width);
    let strokes = 2 + rng.below(3);
    for _ in 0..strokes {
        let intensity = 120 + rng.below((MAX_BASE_INTENSITY - 120 + 1) as usize) as u8;
        let mut r = rng.below(height) as f64;
        let mut c = rng.below(width) as f64;
        let mut angle = rng.uniform(0.0, std::f64::consts::TAU);
        let steps = (height + width) / 2 + rng.below((height + width) / 2 + 1);
        for _ in 0..steps {
            let (ri, ci) = (r.round() as isize, c.round() as isize);
            if ri < 0 || ci < 0 || ri >= height as isize || ci >= width as isize {
                break;
            }
            let px = &mut img.pixels[ri as usize * width + ci as usize];
            *px = (*px).max(intensity);
            angle += rng.uniform(-0.45, 0.45);
            r += angle.sin();
            c += angle.cos();
        }
    }
    if rng.next_f64() < 0.5 {
        let cr = rng.below(height) as f64;
        let cc = rng.below(width) as f64;
        let radius = 1.0 + 2.0 * rng.next_f64();
        let peak = 130.0 + rng.next_f64() * (MAX_BASE_INTENSITY as f64 - 130.0);
        for r in 0..height {
            for c in 0..width {
                let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
                let v = peak * (-d2 / (2.0 * radius * radius)).exp();
                let px = &mut img.pixels[r * width + c];
                *px = (*px).max(v.round().min(MAX_BASE_INTENSITY as f64) as u8);
            }
        }
    }
    img
}

/// Apply the corruption for `spec.kind` to a copy of `base`. Canvas kinds
/// only; `cartoon2d` outliers are produced by [`cartoon_point`].
pub fn corrupt_image(base: &ImageBuffer, spec: &SynthSpec, rng: &mut DetRng) -> ImageBuffer {
    let mut out = base.clone();
    let (h, w) = (base.height, base.width);
    match spec.kind {
        CorruptionKind::Stripe => {
            for r in 0..spec.stripe_width.min(h) {
                for c in 0..w {
                    let px = &mut out.pixels[r * w + c];
                    *px = 255 - *px;
                }
            }
        }
        CorruptionKind::DottedLine => {
            let row = rng.below(h);
            let spacing = w / spec.dot_count;
            let offset = if spacing > 1 { rng.below(spacing) } else { 0 };
            for k in 0..spec.dot_count {
                let c = (offset + k * spacing).min(w - 1);
                let px = &mut out.pixels[row * w + c];
                *px = 255 - *px;
            }
        }
        CorruptionKind::Brightness => {
            // headroom is validated in SynthSpec for generated bases; saturate
            // anyway so foreign images cannot overflow
            for px in out.pixels.iter_mut() {
                *px = px.saturating_add(spec.brightness_offset);
            }
        }
        CorruptionKind::SpatterNoise => {
            for px in out.pixels.iter_mut() {
                if rng.next_f64() < spec.noise_prob {
                    *px = 255 - *px;
                }
            }
        }
        CorruptionKind::Cartoon2d => unreachable!("cartoon2d does not corrupt canvases"),
    }
    out
}

/// Pixel-exact change mask between a base image and its corrupted copy.
pub fn change_mask(base: &ImageBuffer, corrupted: &ImageBuffer) -> Tensor {
    let values = base
        .pixels
        .iter()
        .zip(&corrupted.pixels)
        .map(|(a, b)| if a == b { 0.0 } else { 1.0 })
        .collect();
    Tensor::new(vec![base.height, base.width], values).expect("mask shape")
}

/// One `cartoon2d` point as a quantized 1x2 image; outliers are displaced
/// along the axis `index % 2` and masked on that coordinate.
fn cartoon_point(rng: &mut DetRng, outlier_axis: Option<usize>) -> (ImageBuffer, Option<Tensor>) {
    let coord = |rng: &mut DetRng, mean: f64| loop {
        let v: f64 = mean + CARTOON_STD * rng.normal();
        if (0.0..=1.0).contains(&v) {
            return v;
        }
    };
    let mut x = [coord(rng, CARTOON_MEAN.0), coord(rng, CARTOON_MEAN.1)];
    let mask = outlier_axis.map(|axis| {
        x[axis] = if x[axis] + CARTOON_SHIFT <= 0.98 {
            x[axis] + CARTOON_SHIFT
        } else {
            x[axis] - CARTOON_SHIFT
        };
        let mut m = [0.0, 0.0];
        m[axis] = 1.0;
        Tensor::new(vec![1, 2], m.to_vec()).expect("mask shape")
    });
    let img = ImageBuffer {
        height: 1,
        width: 2,
        pixels: x.iter().map(|v| (v * 255.0).round() as u8).collect(),
    };
    (img, mask)
}

fn inlier_sample(spec: &SynthSpec, stream: &str, index: usize, id: String) -> Sample {
    let mut rng = DetRng::stream(spec.seed, stream, index as u64);
    let (h, w) = spec.dims();
    let image = match spec.kind {
        CorruptionKind::Cartoon2d => cartoon_point(&mut rng, None).0,
        _ => base_image(h, w, &mut rng),
    };
    Sample {
        id,
        image: image.to_tensor(),
        label: 0,
        mask: None,
    }
}

fn outlier_sample(spec: &SynthSpec, stream: &str, index: usize, id: String) -> Result<Sample> {
    let mut rng = DetRng::stream(spec.seed, stream, index as u64);
    let (h, w) = spec.dims();
    for _attempt in 0..100 {
        let (image, mask) = match spec.kind {
            CorruptionKind::Cartoon2d => {
                let (img, mask) = cartoon_point(&mut rng, Some(index % 2));
                (img, mask.expect("outlier mask"))
            }
            _ => {
                let base = base_image(h, w, &mut rng);
                let corrupted = corrupt_image(&base, spec, &mut rng);
                let mask = change_mask(&base, &corrupted);
                (corrupted, mask)
            }
        };
        if mask.values().iter().any(|&v| v == 1.0) {
            return Ok(Sample {
                id,
                image: image.to_tensor(),
                label: 1,
                mask: Some(mask),
            });
        }
        // corruption changed nothing; take a fresh draw from the same stream
    }
    Err(Error::Dataset(format!(
        "corruption changed zero pixels in 100 draws for sample {index} of {}",
        spec.class_name()
    )))
}

/// Build the full dataset in memory. Pure in the spec: identical specs give
/// identical datasets.
pub fn generate_dataset(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let train = (0..spec.n_train)
        .map(|i| inlier_sample(spec, "synth/train", i, format!("train/inlier_{i:04}")))
        .collect();
    let validation = (0..spec.n_val)
        .map(|i| inlier_sample(spec, "synth/val", i, format!("val/inlier_{i:04}")))
        .collect();
    let validation_outliers = (0..spec.n_val)
        .map(|i| outlier_sample(spec, "synth/val-out", i, format!("val_out/outlier_{i:04}")))
        .collect::<Result<_>>()?;
    let mut test: Vec<Sample> = (0..spec.n_test)
        .map(|i| inlier_sample(spec, "synth/test-in", i, format!("test/inlier_{i:04}")))
        .collect();
    for i in 0..spec.n_test {
        test.push(outlier_sample(
            spec,
            "synth/test-out",
            i,
            format!("test/outlier_{i:04}"),
        )?);
    }

    let dataset = Dataset {
        class_name: spec.class_name().to_string(),
        train,
        validation,
        validation_outliers,
        test,
    };
    dataset.validate()?;
    Ok(dataset)
}
