//! Deep one-class detector: a frozen dense feature extractor followed by a
//! regularized whitening transform; the score is the squared norm of the
//! whitened features.

use crate::error::{Error, Result};
use crate::eval::roc_auc;
use crate::linalg::inverse_sqrt_shifted;
use crate::neural::{stack_forward, Layer, ModelMeta, NeuralizedModel};
use crate::rng::DetRng;
use crate::tensor::Tensor;

/// Fitted deep one-class detector.
#[derive(Debug, Clone)]
pub struct DeepOneClassModel {
    extractor: Vec<Layer>,
    /// Symmetric (f × f) whitening matrix, folded into the final linear layer.
    whitening: Tensor,
    regularization: f64,
    input_dim: usize,
}

/// Extractors must be dense Linear/ReLU stacks without bias.
pub fn validate_extractor(layers: &[Layer]) -> Result<()> {
    for layer in layers {
        match layer {
            Layer::Relu => {}
            Layer::Linear { bias: None, .. } => {}
            Layer::Linear { bias: Some(_), .. } => {
                return Err(Error::InvalidArgument(
                    "feature extractor linear layers must be bias-free".into(),
                ))
            }
            _ => {
                return Err(Error::InvalidArgument(
                    "feature extractor may contain only Linear and ReLU layers".into(),
                ))
            }
        }
    }
    Ok(())
}

fn extractor_dims(layers: &[Layer], input_dim: usize) -> Result<usize> {
    let mut dim = input_dim;
    for layer in layers {
        dim = layer.output_dim(dim)?;
    }
    Ok(dim)
}

impl DeepOneClassModel {
    pub fn new(
        extractor: Vec<Layer>,
        input_dim: usize,
        whitening: Tensor,
        regularization: f64,
    ) -> Result<Self> {
        validate_extractor(&extractor)?;
        let feature_dim = extractor_dims(&extractor, input_dim)?;
        if whitening.shape() != [feature_dim, feature_dim] {
            return Err(Error::ShapeMismatch(format!(
                "whitening must be {feature_dim}x{feature_dim}, got {:?}",
                whitening.shape()
            )));
        }
        if regularization < 0.0 {
            return Err(Error::InvalidArgument(
                "regularization must be nonnegative".into(),
            ));
        }
        Ok(DeepOneClassModel {
            extractor,
            whitening,
            regularization,
            input_dim,
        })
    }

    pub fn extractor(&self) -> &[Layer] {
        &self.extractor
    }

    pub fn whitening(&self) -> &Tensor {
        &self.whitening
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        let flat = x.reshaped(vec![x.len()])?;
        if self.extractor.is_empty() {
            return Ok(flat);
        }
        let (out, _) = stack_forward(&self.extractor, &flat)?;
        Ok(out)
    }

    /// Squared norm of the whitened feature vector.
    pub fn score(&self, x: &Tensor) -> Result<f64> {
        if x.len() != self.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "sample has {} features, model expects {}",
                x.len(),
                self.input_dim
            )));
        }
        let phi = self.features(x)?;
        let a = phi.values();
        let mut total = 0.0;
        for k in 0..self.whitening.rows() {
            let row = self.whitening.row(k);
            let mut z = 0.0;
            for (w, v) in row.iter().zip(a) {
                z += w * v;
            }
            total += z * z;
        }
        Ok(total)
    }

    /// Full stack: extractor layers, the whitening linear layer, and a
    /// single squared distance to the origin.
    pub fn neuralize(&self, class_name: &str) -> Result<NeuralizedModel> {
        let f = self.whitening.rows();
        let mut layers = self.extractor.clone();
        layers.push(Layer::linear(self.whitening.clone(), None)?);
        layers.push(Layer::squared_distance(Tensor::zeros(vec![1, f]))?);
        NeuralizedModel::new(
            layers,
            self.input_dim,
            ModelMeta {
                detector: "deep".into(),
                class_name: class_name.into(),
            },
        )
    }
}

/// Uncentered second moment of the feature rows, `(1/N) sum phi phi^T`.
fn second_moment(features: &[Tensor]) -> Tensor {
    let f = features[0].len();
    let mut s = vec![0.0; f * f];
    for phi in features {
        let v = phi.values();
        for i in 0..f {
            let vi = v[i];
            if vi != 0.0 {
                for j in 0..f {
                    s[i * f + j] += vi * v[j];
                }
            }
        }
    }
    let inv_n = 1.0 / features.len() as f64;
    for x in s.iter_mut() {
        *x *= inv_n;
    }
    Tensor::from_rows(f, f, s).expect("finite moment")
}

/// Fit the whitening transform: pick the ridge shift maximizing validation
/// ROC of the whitened-norm score. Ties (including an all-tied ROC) go to
/// the smallest shift.
pub fn fit_deep_one_class(
    extractor: Vec<Layer>,
    input_dim: usize,
    train: &Tensor,
    validation: &Tensor,
    validation_labels: &[u8],
    lambda_grid: &[f64],
) -> Result<DeepOneClassModel> {
    validate_extractor(&extractor)?;
    if train.shape().len() != 2 || train.rows() == 0 {
        return Err(Error::Dataset("empty training split".into()));
    }
    if validation.rows() != validation_labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} validation rows but {} labels",
            validation.rows(),
            validation_labels.len()
        )));
    }
    if lambda_grid.is_empty() {
        return Err(Error::InvalidArgument("empty regularization grid".into()));
    }

    let probe = DeepOneClassModel {
        extractor: extractor.clone(),
        whitening: Tensor::zeros(vec![1, 1]), // placeholder, not used by features()
        regularization: 0.0,
        input_dim,
    };
    let train_features: Vec<Tensor> = (0..train.rows())
        .map(|i| probe.features(&Tensor::from_vec(train.row(i).to_vec())?))
        .collect::<Result<_>>()?;
    let val_features: Vec<Tensor> = (0..validation.rows())
        .map(|i| probe.features(&Tensor::from_vec(validation.row(i).to_vec())?))
        .collect::<Result<_>>()?;

    let moment = second_moment(&train_features);

    let mut candidates = lambda_grid.to_vec();
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));

    let mut best: Option<(f64, f64, Tensor)> = None; // (lambda, roc, whitening)
    for &lambda in &candidates {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "regularization grid entries must be nonnegative, got {lambda}"
            )));
        }
        let w = inverse_sqrt_shifted(&moment, lambda)?;
        let scores: Vec<f64> = val_features
            .iter()
            .map(|phi| whitened_norm_sq(&w, phi))
            .collect();
        let roc = roc_auc(&scores, validation_labels)?;
        let better = match &best {
            None => true,
            Some((_, best_roc, _)) => roc > *best_roc,
        };
        if better {
            best = Some((lambda, roc, w));
        }
    }
    let (lambda, _, whitening) = best.expect("non-empty grid");
    DeepOneClassModel::new(extractor, input_dim, whitening, lambda)
}

fn whitened_norm_sq(w: &Tensor, phi: &Tensor) -> f64 {
    let a = phi.values();
    let mut total = 0.0;
    for k in 0..w.rows() {
        let mut z = 0.0;
        for (wv, v) in w.row(k).iter().zip(a) {
            z += wv * v;
        }
        total += z * z;
    }
    total
}

/// Seeded random Linear/ReLU projection stack; stands in for a pretrained
/// feature extractor in tests and default CLI runs.
pub fn random_backbone(input_dim: usize, widths: &[usize], seed: u64) -> Result<Vec<Layer>> {
    let mut dims = vec![input_dim];
    dims.extend_from_slice(widths);
    let mut layers = Vec::new();
    for (idx, pair) in dims.windows(2).enumerate() {
        let (d_in, d_out) = (pair[0], pair[1]);
        if d_in == 0 || d_out == 0 {
            return Err(Error::InvalidArgument("zero-width backbone layer".into()));
        }
        let mut rng = DetRng::stream(seed, "backbone/init", idx as u64);
        let scale = (2.0 / d_in as f64).sqrt();
        let weights: Vec<f64> = (0..d_in * d_out).map(|_| rng.normal() * scale).collect();
        layers.push(Layer::linear(Tensor::from_rows(d_out, d_in, weights)?, None)?);
        layers.push(Layer::Relu);
    }
    Ok(layers)
}
