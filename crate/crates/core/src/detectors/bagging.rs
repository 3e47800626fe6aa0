//! Bagged detector: the mean of the three members' standardized scores.

use serde::{Deserialize, Serialize};

use crate::detectors::autoencoder::AutoencoderModel;
use crate::detectors::deep::DeepOneClassModel;
use crate::detectors::kde::KdeModel;
use crate::error::{Error, Result};
use crate::neural::{stack_forward, Layer};
use crate::tensor::Tensor;

/// Affine map making a score population zero-mean, unit-variance.
/// Applied as `score * scale + offset` so the same arithmetic runs in the
/// direct scorer and in the layered head.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub std_dev: f64,
}

impl Standardizer {
    /// Population mean and standard deviation of the training scores.
    pub fn fit(scores: &[f64]) -> Result<Self> {
        if scores.len() < 2 {
            return Err(Error::InvalidArgument(
                "standardization needs at least two scores".into(),
            ));
        }
        if !scores.iter().all(|s| s.is_finite()) {
            return Err(Error::NonFinite("training scores".into()));
        }
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        let std_dev = var.sqrt();
        if std_dev <= 1e-12 {
            return Err(Error::DegenerateScores);
        }
        Ok(Standardizer { mean, std_dev })
    }

    pub fn scale(&self) -> f64 {
        1.0 / self.std_dev
    }

    pub fn offset(&self) -> f64 {
        -self.mean / self.std_dev
    }

    pub fn apply(&self, score: f64) -> f64 {
        score * self.scale() + self.offset()
    }
}

/// The three fitted members plus their per-member standardizers.
#[derive(Debug, Clone)]
pub struct BaggedModel {
    pub kde: KdeModel,
    pub autoencoder: AutoencoderModel,
    pub deep: DeepOneClassModel,
    pub standardizers: [Standardizer; 3],
}

impl BaggedModel {
    pub fn new(
        kde: KdeModel,
        autoencoder: AutoencoderModel,
        deep: DeepOneClassModel,
        standardizers: [Standardizer; 3],
    ) -> Self {
        BaggedModel {
            kde,
            autoencoder,
            deep,
            standardizers,
        }
    }

    /// Member scores over the training population, in (kde, autoencoder,
    /// deep) order. The kde member is scored leave-one-out over its own
    /// training points; the other members score the given training rows.
    pub fn member_training_scores(
        kde: &KdeModel,
        autoencoder: &AutoencoderModel,
        deep: &DeepOneClassModel,
        train: &Tensor,
    ) -> Result<[Vec<f64>; 3]> {
        let n = train.rows();
        let mut auto_scores = Vec::with_capacity(n);
        let mut deep_scores = Vec::with_capacity(n);
        for i in 0..n {
            let x = Tensor::from_vec(train.row(i).to_vec())?;
            auto_scores.push(autoencoder.score(&x)?);
            deep_scores.push(deep.score(&x)?);
        }
        Ok([kde.leave_one_out_scores()?, auto_scores, deep_scores])
    }

    /// Fit the standardizers from the members' scores on the training rows.
    pub fn fit_standardizers(
        kde: &KdeModel,
        autoencoder: &AutoencoderModel,
        deep: &DeepOneClassModel,
        train: &Tensor,
    ) -> Result<[Standardizer; 3]> {
        let scores = Self::member_training_scores(kde, autoencoder, deep, train)?;
        Ok([
            Standardizer::fit(&scores[0])?,
            Standardizer::fit(&scores[1])?,
            Standardizer::fit(&scores[2])?,
        ])
    }

    /// Raw member scores in (kde, autoencoder, deep) order.
    pub fn member_scores(&self, x: &Tensor) -> Result<[f64; 3]> {
        Ok([
            self.kde.score(x)?,
            self.autoencoder.score(x)?,
            self.deep.score(x)?,
        ])
    }

    /// The layered head applied on top of the member scores: an affine
    /// standardization layer followed by a 3-way average pool.
    pub fn head_layers(&self) -> Vec<Layer> {
        let mut weights = vec![0.0; 9];
        let mut offsets = vec![0.0; 3];
        for (m, s) in self.standardizers.iter().enumerate() {
            weights[m * 3 + m] = s.scale();
            offsets[m] = s.offset();
        }
        vec![
            Layer::linear(
                Tensor::from_rows(3, 3, weights).expect("finite standardizers"),
                Some(Tensor::from_vec(offsets).expect("finite standardizers")),
            )
            .expect("3x3 affine"),
            Layer::average_pool(3).expect("pool of 3"),
        ]
    }

    /// Mean of the three standardized member scores.
    pub fn score(&self, x: &Tensor) -> Result<f64> {
        let raw = self.member_scores(x)?;
        let (out, _) = stack_forward(&self.head_layers(), &Tensor::from_vec(raw.to_vec())?)?;
        out.scalar_value()
    }
}
