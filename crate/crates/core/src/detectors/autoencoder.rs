//! Reconstruction-based detector: a dense Linear/ReLU autoencoder scored by
//! squared reconstruction distance.

use crate::error::{Error, Result};
use crate::neural::train::{reconstruction_gradient, reconstruction_loss, Adam, AdamConfig};
use crate::neural::{stack_forward, Layer, ModelMeta, NeuralizedModel};
use crate::rng::DetRng;
use crate::tensor::{squared_distance, Tensor};

/// Architecture and optimization settings for fitting an autoencoder.
#[derive(Debug, Clone)]
pub struct AutoencoderConfig {
    /// Encoder hidden widths; the decoder mirrors them.
    pub hidden: Vec<usize>,
    pub bottleneck: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            hidden: vec![128],
            bottleneck: 16,
            epochs: 30,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// Fitted reconstruction model.
#[derive(Debug, Clone)]
pub struct AutoencoderModel {
    layers: Vec<Layer>,
}

impl AutoencoderModel {
    /// Wrap an existing Linear/ReLU stack whose output dim equals its input dim.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("empty reconstruction stack".into()));
        }
        for layer in &layers {
            if !matches!(layer, Layer::Linear { .. } | Layer::Relu) {
                return Err(Error::InvalidArgument(
                    "autoencoder stacks may contain only Linear and ReLU layers".into(),
                ));
            }
        }
        let input_dim = match &layers[0] {
            Layer::Linear { weights, .. } => weights.cols(),
            _ => {
                return Err(Error::InvalidArgument(
                    "autoencoder must start with a Linear layer".into(),
                ))
            }
        };
        let mut dim = input_dim;
        for layer in &layers {
            dim = layer.output_dim(dim)?;
        }
        if dim != input_dim {
            return Err(Error::ShapeMismatch(format!(
                "decoder output dim {dim} does not match input dim {input_dim}"
            )));
        }
        Ok(AutoencoderModel { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        match &self.layers[0] {
            Layer::Linear { weights, .. } => weights.cols(),
            _ => unreachable!("validated in from_layers"),
        }
    }

    pub fn reconstruct(&self, x: &Tensor) -> Result<Tensor> {
        let flat = x.reshaped(vec![x.len()])?;
        let (out, _) = stack_forward(&self.layers, &flat)?;
        Ok(out)
    }

    /// Squared distance between the sample and its reconstruction.
    pub fn score(&self, x: &Tensor) -> Result<f64> {
        let recon = self.reconstruct(x)?;
        Ok(squared_distance(x.values(), recon.values()))
    }

    /// Single squared-distance layer with the reconstruction of `x` as its
    /// template (the reconstruction is treated as constant).
    pub fn neuralize(&self, x: &Tensor, class_name: &str) -> Result<NeuralizedModel> {
        let recon = self.reconstruct(x)?;
        let template = Tensor::from_rows(1, recon.len(), recon.into_values())?;
        NeuralizedModel::new(
            vec![Layer::squared_distance(template)?],
            x.len(),
            ModelMeta {
                detector: "autoencoder".into(),
                class_name: class_name.into(),
            },
        )
    }
}

/// Outcome of a fit: which epoch's snapshot was kept and the losses seen.
#[derive(Debug, Clone)]
pub struct AutoencoderFitReport {
    pub best_epoch: usize,
    pub initial_validation_loss: f64,
    pub best_validation_loss: f64,
}

fn build_layers(input_dim: usize, config: &AutoencoderConfig) -> Result<Vec<Layer>> {
    let mut dims = vec![input_dim];
    dims.extend(&config.hidden);
    dims.push(config.bottleneck);
    dims.extend(config.hidden.iter().rev());
    dims.push(input_dim);
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArgument("zero-width layer".into()));
    }

    let mut layers = Vec::new();
    for (idx, pair) in dims.windows(2).enumerate() {
        let (d_in, d_out) = (pair[0], pair[1]);
        let mut rng = DetRng::stream(config.seed, "autoencoder/init", idx as u64);
        let scale = (2.0 / d_in as f64).sqrt();
        let weights: Vec<f64> = (0..d_in * d_out).map(|_| rng.normal() * scale).collect();
        let bias = Tensor::zeros(vec![d_out]);
        layers.push(Layer::linear(
            Tensor::from_rows(d_out, d_in, weights)?,
            Some(bias),
        )?);
        layers.push(Layer::Relu);
    }
    layers.pop(); // linear output
    Ok(layers)
}

/// Fit by minimizing mean squared reconstruction error on the training rows,
/// keeping the parameter snapshot with the lowest validation loss.
pub fn fit_autoencoder(
    train: &Tensor,
    validation: &Tensor,
    config: &AutoencoderConfig,
) -> Result<(AutoencoderModel, AutoencoderFitReport)> {
    if train.shape().len() != 2 || train.rows() == 0 {
        return Err(Error::Dataset("empty training split".into()));
    }
    if validation.shape().len() != 2 || validation.rows() == 0 {
        return Err(Error::Dataset("empty validation split".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }

    let dim = train.cols();
    let train_rows: Vec<Tensor> = (0..train.rows())
        .map(|i| Tensor::from_vec(train.row(i).to_vec()))
        .collect::<Result<_>>()?;
    let val_rows: Vec<Tensor> = (0..validation.rows())
        .map(|i| Tensor::from_vec(validation.row(i).to_vec()))
        .collect::<Result<_>>()?;

    let mut layers = build_layers(dim, config)?;
    let initial_val = match reconstruction_loss(&layers, &val_rows) {
        Ok(l) => l,
        Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch: 0 }),
        Err(e) => return Err(e),
    };
    let mut best = (initial_val, layers.clone(), 0usize);
    let mut adam = Adam::new(config.adam, &layers);

    let mut order: Vec<usize> = (0..train_rows.len()).collect();
    for epoch in 1..=config.epochs {
        let mut rng = DetRng::stream(config.seed, "autoencoder/shuffle", epoch as u64);
        rng.shuffle(&mut order);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Tensor> = chunk.iter().map(|&i| train_rows[i].clone()).collect();
            let (loss, grads) = match reconstruction_gradient(&layers, &batch) {
                Ok(r) => r,
                Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch }),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            adam.apply(&mut layers, &grads)?;
        }
        let val_loss = match reconstruction_loss(&layers, &val_rows) {
            Ok(l) => l,
            Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch }),
            Err(e) => return Err(e),
        };
        if val_loss < best.0 {
            best = (val_loss, layers.clone(), epoch);
        }
    }

    let (best_validation_loss, best_layers, best_epoch) = best;
    Ok((
        AutoencoderModel::from_layers(best_layers)?,
        AutoencoderFitReport {
            best_epoch,
            initial_validation_loss: initial_val,
            best_validation_loss,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t1(vals: &[f64]) -> Tensor {
        Tensor::from_vec(vals.to_vec()).unwrap()
    }

    fn t2(rows: usize, cols: usize, vals: &[f64]) -> Tensor {
        Tensor::from_rows(rows, cols, vals.to_vec()).unwrap()
    }

    #[test]
    fn perfect_reconstruction_scores_zero() {
        let identity =
            AutoencoderModel::from_layers(vec![
                Layer::linear(t2(2, 2, &[1.0, 0.0, 0.0, 1.0]), None).unwrap()
            ])
            .unwrap();
        assert_eq!(identity.score(&t1(&[0.3, -0.7])).unwrap(), 0.0);
    }

    #[test]
    fn zero_reconstruction_scores_norm() {
        let zero = AutoencoderModel::from_layers(vec![
            Layer::linear(t2(2, 2, &[0.0; 4]), None).unwrap()
        ])
        .unwrap();
        assert_eq!(zero.score(&t1(&[1.0, 0.0])).unwrap(), 1.0);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let data = t2(3, 2, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let config = AutoencoderConfig {
            hidden: vec![4],
            bottleneck: 2,
            epochs: 0,
            seed: 9,
            ..AutoencoderConfig::default()
        };
        let (model, report) = fit_autoencoder(&data, &data, &config).unwrap();
        assert_eq!(report.best_epoch, 0);
        assert_eq!(report.best_validation_loss, report.initial_validation_loss);

        // same seed, zero epochs: identical parameters
        let (again, _) = fit_autoencoder(&data, &data, &config).unwrap();
        for (a, b) in model.layers().iter().zip(again.layers()) {
            if let (Layer::Linear { weights: wa, .. }, Layer::Linear { weights: wb, .. }) = (a, b) {
                assert_eq!(wa.values(), wb.values());
            }
        }
    }

    #[test]
    fn scalar_weight_converges_to_identity() {
        // single scalar weight, data {1, 2, 3}: minimizer is w = 1
        let data = t2(3, 1, &[1.0, 2.0, 3.0]);
        let config = AutoencoderConfig {
            hidden: vec![],
            bottleneck: 1,
            epochs: 400,
            batch_size: 3,
            adam: AdamConfig {
                step_size: 0.02,
                ..AdamConfig::default()
            },
            seed: 3,
        };
        let (model, report) = fit_autoencoder(&data, &data, &config).unwrap();
        assert!(report.best_validation_loss < 1e-4, "{report:?}");
        assert!((model.score(&t1(&[5.0])).unwrap()).abs() < 1e-2);
    }

    #[test]
    fn subspace_data_is_learned_by_matching_bottleneck() {
        // rank-2 data in 4 dimensions, bottleneck 2, linear stack
        let mut rows = Vec::new();
        let mut rng = crate::rng::DetRng::stream(5, "auto/subspace", 0);
        for _ in 0..40 {
            let (a, b) = (rng.normal(), rng.normal());
            rows.extend_from_slice(&[a, b, a + b, a - b]);
        }
        let data = t2(40, 4, &rows);
        let config = AutoencoderConfig {
            hidden: vec![],
            bottleneck: 2,
            epochs: 600,
            batch_size: 8,
            adam: AdamConfig {
                step_size: 0.01,
                ..AdamConfig::default()
            },
            seed: 6,
        };
        let (_, report) = fit_autoencoder(&data, &data, &config).unwrap();
        assert!(report.best_validation_loss < 1e-3, "{report:?}");
    }

    #[test]
    fn best_validation_never_exceeds_initial() {
        let mut rng = crate::rng::DetRng::stream(8, "auto/best", 0);
        let vals: Vec<f64> = (0..60).map(|_| rng.next_f64()).collect();
        let data = t2(20, 3, &vals);
        let config = AutoencoderConfig {
            hidden: vec![6],
            bottleneck: 2,
            epochs: 5,
            seed: 1,
            ..AutoencoderConfig::default()
        };
        let (_, report) = fit_autoencoder(&data, &data, &config).unwrap();
        assert!(report.best_validation_loss <= report.initial_validation_loss);
    }

    #[test]
    fn rejects_non_square_stacks() {
        let narrow = Layer::linear(t2(1, 2, &[1.0, 1.0]), None).unwrap();
        assert!(AutoencoderModel::from_layers(vec![narrow]).is_err());
    }

    #[test]
    fn divergence_reports_the_epoch() {
        // values near the representable limit overflow the squared loss
        let data = t2(2, 1, &[1e200, -1e200]);
        let config = AutoencoderConfig {
            hidden: vec![2],
            bottleneck: 1,
            epochs: 3,
            batch_size: 2,
            seed: 2,
            ..AutoencoderConfig::default()
        };
        match fit_autoencoder(&data, &data, &config) {
            Err(crate::error::Error::Diverged { epoch }) => assert!(epoch <= 3),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
