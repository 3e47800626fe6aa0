//! Dataset ingestion and serialization: samples, split manifests, graymap
//! image files and heatmap sidecars.

pub mod heatmap_io;
pub mod pgm;
pub mod synth;

pub use heatmap_io::{read_heatmap_sidecar, write_heatmap};
pub use synth::{generate_dataset, CorruptionKind, SynthSpec};

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One labeled image, optionally with a ground-truth anomaly mask.
#[derive(Debug, Clone)]
pub struct Sample {
    /// Stable identifier; for file-backed datasets, the image path without
    /// its extension.
    pub id: String,
    /// (H, W) values in [0, 1].
    pub image: Tensor,
    /// 0 = inlier, 1 = outlier.
    pub label: u8,
    /// (H, W) values in {0, 1}; outliers only.
    pub mask: Option<Tensor>,
}

impl Sample {
    pub fn validate(&self) -> Result<()> {
        if self.label > 1 {
            return Err(Error::Dataset(format!(
                "sample {}: label must be 0 or 1, got {}",
                self.id, self.label
            )));
        }
        if !self.image.values().iter().all(|&v| (0.0..=1.0).contains(&v)) {
            return Err(Error::Dataset(format!(
                "sample {}: image values outside [0, 1]",
                self.id
            )));
        }
        match (&self.mask, self.label) {
            (Some(_), 0) => {
                return Err(Error::Dataset(format!(
                    "sample {}: inlier carries a mask",
                    self.id
                )));
            }
            (Some(mask), _) => {
                if mask.shape() != self.image.shape() {
                    return Err(Error::Dataset(format!(
                        "sample {}: mask shape {:?} does not match image shape {:?}",
                        self.id,
                        mask.shape(),
                        self.image.shape()
                    )));
                }
                if !mask.values().iter().all(|&v| v == 0.0 || v == 1.0) {
                    return Err(Error::Dataset(format!(
                        "sample {}: mask is not binary",
                        self.id
                    )));
                }
            }
            (None, _) => {}
        }
        Ok(())
    }
}

/// A class dataset split into train, validation (with optional outliers for
/// model tuning) and test.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub class_name: String,
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub validation_outliers: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        for sample in self
            .train
            .iter()
            .chain(&self.validation)
            .chain(&self.validation_outliers)
            .chain(&self.test)
        {
            sample.validate()?;
        }
        if self.train.is_empty() {
            return Err(Error::Dataset("train split is empty".into()));
        }
        if let Some(bad) = self.train.iter().find(|s| s.label != 0) {
            return Err(Error::Dataset(format!(
                "train split must contain only inliers; {} is labeled 1",
                bad.id
            )));
        }
        if let Some(bad) = self.validation.iter().find(|s| s.label != 0) {
            return Err(Error::Dataset(format!(
                "validation split must contain only inliers; {} is labeled 1",
                bad.id
            )));
        }
        if let Some(bad) = self.validation_outliers.iter().find(|s| s.label != 1) {
            return Err(Error::Dataset(format!(
                "validation outlier split must contain only outliers; {} is labeled 0",
                bad.id
            )));
        }
        if !self.test.iter().any(|s| s.label == 1) {
            return Err(Error::Dataset("test split requires outliers".into()));
        }
        if !self.test.iter().any(|s| s.label == 0) {
            return Err(Error::Dataset("test split requires inliers".into()));
        }
        Ok(())
    }

    /// Flattened (N × d) matrix of the given samples.
    pub fn matrix(samples: &[Sample]) -> Result<Tensor> {
        if samples.is_empty() {
            return Err(Error::Dataset("cannot build a matrix from zero samples".into()));
        }
        let d = samples[0].image.len();
        let mut values = Vec::with_capacity(samples.len() * d);
        for s in samples {
            if s.image.len() != d {
                return Err(Error::ShapeMismatch(format!(
                    "sample {} has {} pixels, expected {d}",
                    s.id,
                    s.image.len()
                )));
            }
            values.extend_from_slice(s.image.values());
        }
        Tensor::from_rows(samples.len(), d, values)
    }

    pub fn labels(samples: &[Sample]) -> Vec<u8> {
        samples.iter().map(|s| s.label).collect()
    }

    /// Validation inliers plus validation outliers, in that order.
    pub fn validation_mixed(&self) -> Vec<&Sample> {
        self.validation
            .iter()
            .chain(&self.validation_outliers)
            .collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    image: String,
    label: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    class: String,
    train: Vec<ManifestEntry>,
    val: Vec<ManifestEntry>,
    val_outliers: Vec<ManifestEntry>,
    test: Vec<ManifestEntry>,
}

fn sample_entry(sample: &Sample) -> ManifestEntry {
    ManifestEntry {
        image: format!("{}.pgm", sample.id),
        label: sample.label,
        mask: sample.mask.as_ref().map(|_| format!("{}_mask.pgm", sample.id)),
    }
}

fn tensor_pixels(t: &Tensor, scale: f64) -> Vec<u8> {
    t.values().iter().map(|&v| (v * scale).round() as u8).collect()
}

fn write_sample(root: &Path, sample: &Sample) -> Result<()> {
    let (h, w) = (sample.image.shape()[0], sample.image.shape()[1]);
    let image_path = root.join(format!("{}.pgm", sample.id));
    if let Some(parent) = image_path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    pgm::write_pgm(&image_path, h, w, &tensor_pixels(&sample.image, 255.0))?;
    if let Some(mask) = &sample.mask {
        let mask_path = root.join(format!("{}_mask.pgm", sample.id));
        pgm::write_pgm(&mask_path, h, w, &tensor_pixels(mask, 255.0))?;
    }
    Ok(())
}

/// Materialize a dataset under `root`: one graymap per image/mask plus a
/// `manifest.json` naming the splits. Returns the manifest path.
pub fn write_dataset(dataset: &Dataset, root: &Path) -> Result<PathBuf> {
    dataset.validate()?;
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    for sample in dataset
        .train
        .iter()
        .chain(&dataset.validation)
        .chain(&dataset.validation_outliers)
        .chain(&dataset.test)
    {
        write_sample(root, sample)?;
    }
    let manifest = ManifestFile {
        class: dataset.class_name.clone(),
        train: dataset.train.iter().map(sample_entry).collect(),
        val: dataset.validation.iter().map(sample_entry).collect(),
        val_outliers: dataset.validation_outliers.iter().map(sample_entry).collect(),
        test: dataset.test.iter().map(sample_entry).collect(),
    };
    let path = root.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Dataset(format!("manifest serialization: {e}")))?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn load_sample(root: &Path, entry: &ManifestEntry) -> Result<Sample> {
    let image_path = root.join(&entry.image);
    let (h, w, pixels) = pgm::read_pgm(&image_path)?;
    let image = Tensor::new(
        vec![h, w],
        pixels.iter().map(|&p| p as f64 / 255.0).collect(),
    )?;
    let mask = match &entry.mask {
        Some(rel) => {
            let mask_path = root.join(rel);
            let (mh, mw, mpx) = pgm::read_pgm(&mask_path)?;
            if (mh, mw) != (h, w) {
                return Err(Error::Dataset(format!(
                    "sample {}: mask shape {mh}x{mw} does not match image {h}x{w}",
                    entry.image
                )));
            }
            // binarize at the midpoint
            Some(Tensor::new(
                vec![mh, mw],
                mpx.iter().map(|&p| if p >= 128 { 1.0 } else { 0.0 }).collect(),
            )?)
        }
        None => None,
    };
    let id = entry.image.strip_suffix(".pgm").unwrap_or(&entry.image).to_string();
    let sample = Sample {
        id,
        image,
        label: entry.label,
        mask,
    };
    sample.validate()?;
    Ok(sample)
}

/// Load a manifest and every image it references, enforcing all split and
/// sample invariants.
pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: ManifestFile = serde_json::from_str(&text)
        .map_err(|e| Error::format(path, format!("manifest parse: {e}")))?;
    let root = path.parent().unwrap_or_else(|| Path::new("."));

    let load_split = |entries: &[ManifestEntry]| -> Result<Vec<Sample>> {
        entries.iter().map(|e| load_sample(root, e)).collect()
    };
    let dataset = Dataset {
        class_name: manifest.class.clone(),
        train: load_split(&manifest.train)?,
        validation: load_split(&manifest.val)?,
        validation_outliers: load_split(&manifest.val_outliers)?,
        test: load_split(&manifest.test)?,
    };
    dataset.validate()?;
    Ok(dataset)
}
