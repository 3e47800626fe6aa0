//! The four outlier detectors, their common scoring surface, and their
//! on-disk form (an HLW1 layer stack plus a small JSON envelope).

pub mod autoencoder;
pub mod bagging;
pub mod deep;
pub mod kde;

pub use autoencoder::{fit_autoencoder, AutoencoderConfig, AutoencoderFitReport, AutoencoderModel};
pub use bagging::{BaggedModel, Standardizer};
pub use deep::{fit_deep_one_class, random_backbone, DeepOneClassModel};
pub use kde::{default_stiffness_grid, fit_kde, KdeApproxDiagnostics, KdeModel};

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{weights, Layer, NeuralizedModel};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Kde,
    Autoencoder,
    Deep,
    Bagged,
}

impl DetectorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetectorKind::Kde => "kde",
            DetectorKind::Autoencoder => "autoencoder",
            DetectorKind::Deep => "deep",
            DetectorKind::Bagged => "bagged",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kde" => Ok(DetectorKind::Kde),
            "autoencoder" | "auto" => Ok(DetectorKind::Autoencoder),
            "deep" => Ok(DetectorKind::Deep),
            "bagged" | "bag" => Ok(DetectorKind::Bagged),
            other => Err(Error::InvalidArgument(format!(
                "unknown detector kind {other:?}"
            ))),
        }
    }
}

/// Any fitted detector, scoring a flat sample to a scalar.
#[derive(Debug, Clone)]
pub enum Detector {
    Kde(KdeModel),
    Autoencoder(AutoencoderModel),
    Deep(DeepOneClassModel),
    Bagged(BaggedModel),
}

impl Detector {
    pub fn kind(&self) -> DetectorKind {
        match self {
            Detector::Kde(_) => DetectorKind::Kde,
            Detector::Autoencoder(_) => DetectorKind::Autoencoder,
            Detector::Deep(_) => DetectorKind::Deep,
            Detector::Bagged(_) => DetectorKind::Bagged,
        }
    }

    pub fn score(&self, x: &Tensor) -> Result<f64> {
        match self {
            Detector::Kde(m) => m.score(x),
            Detector::Autoencoder(m) => m.score(x),
            Detector::Deep(m) => m.score(x),
            Detector::Bagged(m) => m.score(x),
        }
    }

    /// Sequential layered form of this detector. The autoencoder's stack
    /// depends on the sample (its reconstruction becomes the template); the
    /// bagged model is a parallel composition and has no single stack.
    pub fn neuralize(&self, x: &Tensor, class_name: &str) -> Result<NeuralizedModel> {
        match self {
            Detector::Kde(m) => m.neuralize(class_name),
            Detector::Autoencoder(m) => m.neuralize(x, class_name),
            Detector::Deep(m) => m.neuralize(class_name),
            Detector::Bagged(_) => Err(Error::InvalidArgument(
                "a bagged model is not a single sequential stack; score or explain it directly"
                    .into(),
            )),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Envelope {
    kind: DetectorKind,
    class: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    standardizers: Option<Vec<Standardizer>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    members: Option<Vec<String>>,
}

fn write_envelope(path: &Path, envelope: &Envelope) -> Result<()> {
    let json = serde_json::to_string_pretty(envelope)
        .map_err(|e| Error::Dataset(format!("envelope serialization: {e}")))?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Persist a detector as `<stem>.json` (envelope) plus `<stem>.hlw` weight
/// stacks; a bagged detector saves its members under `<stem>_<kind>`.
/// Returns the envelope path.
pub fn save_detector(dir: &Path, stem: &str, detector: &Detector, class: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let envelope_path = dir.join(format!("{stem}.json"));
    let weights_name = format!("{stem}.hlw");

    let envelope = match detector {
        Detector::Kde(m) => {
            let stack = vec![
                Layer::squared_distance(m.training_points().clone())?,
                Layer::neg_log_sum_exp(m.stiffness())?,
            ];
            weights::save_stack(&dir.join(&weights_name), &stack)?;
            Envelope {
                kind: DetectorKind::Kde,
                class: class.into(),
                gamma: Some(m.stiffness()),
                lambda: None,
                weights: Some(weights_name),
                standardizers: None,
                members: None,
            }
        }
        Detector::Autoencoder(m) => {
            weights::save_stack(&dir.join(&weights_name), m.layers())?;
            Envelope {
                kind: DetectorKind::Autoencoder,
                class: class.into(),
                gamma: None,
                lambda: None,
                weights: Some(weights_name),
                standardizers: None,
                members: None,
            }
        }
        Detector::Deep(m) => {
            let mut stack = m.extractor().to_vec();
            stack.push(Layer::linear(m.whitening().clone(), None)?);
            stack.push(Layer::squared_distance(Tensor::zeros(vec![
                1,
                m.whitening().rows(),
            ]))?);
            weights::save_stack(&dir.join(&weights_name), &stack)?;
            Envelope {
                kind: DetectorKind::Deep,
                class: class.into(),
                gamma: None,
                lambda: Some(m.regularization()),
                weights: Some(weights_name),
                standardizers: None,
                members: None,
            }
        }
        Detector::Bagged(m) => {
            let mut members = Vec::new();
            for (member_stem, det) in [
                (format!("{stem}_kde"), Detector::Kde(m.kde.clone())),
                (
                    format!("{stem}_autoencoder"),
                    Detector::Autoencoder(m.autoencoder.clone()),
                ),
                (format!("{stem}_deep"), Detector::Deep(m.deep.clone())),
            ] {
                save_detector(dir, &member_stem, &det, class)?;
                members.push(format!("{member_stem}.json"));
            }
            Envelope {
                kind: DetectorKind::Bagged,
                class: class.into(),
                gamma: None,
                lambda: None,
                weights: None,
                standardizers: Some(m.standardizers.to_vec()),
                members: Some(members),
            }
        }
    };
    write_envelope(&envelope_path, &envelope)?;
    Ok(envelope_path)
}

fn stack_input_dim(layers: &[Layer], path: &Path) -> Result<usize> {
    match layers.first() {
        Some(Layer::Linear { weights, .. }) => Ok(weights.cols()),
        Some(Layer::SquaredDistance { templates }) => Ok(templates.cols()),
        _ => Err(Error::format(path, "cannot infer input dimension of stack")),
    }
}

/// Load a detector saved by [`save_detector`]. Returns the detector and its
/// class name.
pub fn load_detector(envelope_path: &Path) -> Result<(Detector, String)> {
    let text = fs::read_to_string(envelope_path).map_err(|e| Error::io(envelope_path, e))?;
    let envelope: Envelope = serde_json::from_str(&text)
        .map_err(|e| Error::format(envelope_path, format!("envelope parse: {e}")))?;
    let dir = envelope_path.parent().unwrap_or_else(|| Path::new("."));

    let load_weights = || -> Result<Vec<Layer>> {
        let name = envelope
            .weights
            .as_ref()
            .ok_or_else(|| Error::format(envelope_path, "envelope names no weight file"))?;
        weights::load_stack(&dir.join(name))
    };

    let detector = match envelope.kind {
        DetectorKind::Kde => {
            let stack = load_weights()?;
            let [Layer::SquaredDistance { templates }, Layer::NegLogSumExp { stiffness }] =
                stack.as_slice()
            else {
                return Err(Error::format(
                    envelope_path,
                    "kde stack must be squared-distance then soft-min pooling",
                ));
            };
            Detector::Kde(KdeModel::new(templates.clone(), *stiffness)?)
        }
        DetectorKind::Autoencoder => {
            Detector::Autoencoder(AutoencoderModel::from_layers(load_weights()?)?)
        }
        DetectorKind::Deep => {
            let mut stack = load_weights()?;
            let Some(Layer::SquaredDistance { templates }) = stack.pop() else {
                return Err(Error::format(
                    envelope_path,
                    "deep stack must end in a squared-distance layer",
                ));
            };
            if templates.rows() != 1 || templates.values().iter().any(|&v| v != 0.0) {
                return Err(Error::format(
                    envelope_path,
                    "deep distance layer must hold the single origin template",
                ));
            }
            let Some(Layer::Linear {
                weights: whitening,
                bias: None,
            }) = stack.pop()
            else {
                return Err(Error::format(
                    envelope_path,
                    "deep stack must have a bias-free whitening layer before the distance",
                ));
            };
            let input_dim = if stack.is_empty() {
                whitening.cols()
            } else {
                stack_input_dim(&stack, envelope_path)?
            };
            let lambda = envelope.lambda.unwrap_or(0.0);
            Detector::Deep(DeepOneClassModel::new(stack, input_dim, whitening, lambda)?)
        }
        DetectorKind::Bagged => {
            let member_names = envelope
                .members
                .as_ref()
                .ok_or_else(|| Error::format(envelope_path, "bagged envelope names no members"))?;
            let standardizers = envelope
                .standardizers
                .as_ref()
                .ok_or_else(|| Error::format(envelope_path, "bagged envelope lacks standardizers"))?;
            if member_names.len() != 3 || standardizers.len() != 3 {
                return Err(Error::format(
                    envelope_path,
                    "bagged envelope needs exactly three members and standardizers",
                ));
            }
            let mut kde = None;
            let mut auto = None;
            let mut deep = None;
            for name in member_names {
                let (member, _) = load_detector(&dir.join(name))?;
                match member {
                    Detector::Kde(m) => kde = Some(m),
                    Detector::Autoencoder(m) => auto = Some(m),
                    Detector::Deep(m) => deep = Some(m),
                    Detector::Bagged(_) => {
                        return Err(Error::format(envelope_path, "nested bagged members"))
                    }
                }
            }
            let (Some(kde), Some(auto), Some(deep)) = (kde, auto, deep) else {
                return Err(Error::format(
                    envelope_path,
                    "bagged members must cover kde, autoencoder and deep",
                ));
            };
            Detector::Bagged(BaggedModel::new(
                kde,
                auto,
                deep,
                [
                    standardizers[0].clone(),
                    standardizers[1].clone(),
                    standardizers[2].clone(),
                ],
            ))
        }
    };
    Ok((detector, envelope.class))
}
