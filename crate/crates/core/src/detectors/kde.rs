//! Kernel density estimation as an outlier scorer: soft minimum over
//! squared distances to the training points, with the stiffness selected
//! by validation likelihood.

use crate::error::{Error, Result};
use crate::neural::{neg_log_sum_exp, Layer, ModelMeta, NeuralizedModel};
use crate::tensor::{squared_distance, Tensor};

/// Fitted KDE detector: the training points and the selected stiffness.
#[derive(Debug, Clone)]
pub struct KdeModel {
    /// (N × d) training points; the distance templates of the neuralized stack.
    training_points: Tensor,
    stiffness: f64,
}

impl KdeModel {
    pub fn new(training_points: Tensor, stiffness: f64) -> Result<Self> {
        if training_points.shape().len() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "training points must be (N x d), got {:?}",
                training_points.shape()
            )));
        }
        if !(stiffness.is_finite() && stiffness > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "stiffness must be positive, got {stiffness}"
            )));
        }
        Ok(KdeModel {
            training_points,
            stiffness,
        })
    }

    pub fn training_points(&self) -> &Tensor {
        &self.training_points
    }

    pub fn stiffness(&self) -> f64 {
        self.stiffness
    }

    fn check_dim(&self, x: &Tensor) -> Result<()> {
        if x.len() != self.training_points.cols() {
            return Err(Error::ShapeMismatch(format!(
                "sample has {} features, model expects {}",
                x.len(),
                self.training_points.cols()
            )));
        }
        Ok(())
    }

    /// Soft minimum of squared distances to the training points.
    pub fn score(&self, x: &Tensor) -> Result<f64> {
        self.check_dim(x)?;
        let distances = self.distances(x);
        Ok(neg_log_sum_exp(&distances, self.stiffness))
    }

    fn distances(&self, x: &Tensor) -> Vec<f64> {
        (0..self.training_points.rows())
            .map(|j| squared_distance(x.values(), self.training_points.row(j)))
            .collect()
    }

    /// Score of each training point against the other training points. The
    /// self-distance is excluded: with a stiff kernel it pins every training
    /// score to zero, which says nothing about the population spread.
    pub fn leave_one_out_scores(&self) -> Result<Vec<f64>> {
        let n = self.training_points.rows();
        if n < 2 {
            return Err(Error::InvalidArgument(
                "leave-one-out scoring needs at least two training points".into(),
            ));
        }
        let mut scores = Vec::with_capacity(n);
        for i in 0..n {
            let x = self.training_points.row(i);
            let distances: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| squared_distance(x, self.training_points.row(j)))
                .collect();
            scores.push(neg_log_sum_exp(&distances, self.stiffness));
        }
        Ok(scores)
    }

    /// The two-layer stack equivalent: distances to all training points,
    /// then the soft-min pool.
    pub fn neuralize(&self, class_name: &str) -> Result<NeuralizedModel> {
        NeuralizedModel::new(
            vec![
                Layer::squared_distance(self.training_points.clone())?,
                Layer::neg_log_sum_exp(self.stiffness)?,
            ],
            self.training_points.cols(),
            ModelMeta {
                detector: "kde".into(),
                class_name: class_name.into(),
            },
        )
    }

    /// Distance-to-the-mean approximation of the score, with the exact score
    /// and the residual between the two.
    pub fn mean_approximation(&self, x: &Tensor) -> Result<KdeApproxDiagnostics> {
        self.check_dim(x)?;
        let points = &self.training_points;
        let (n, d) = (points.rows(), points.cols());

        let mut mean = vec![0.0; d];
        let mut mean_sq_norm = 0.0;
        for j in 0..n {
            let row = points.row(j);
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
            mean_sq_norm += row.iter().map(|v| v * v).sum::<f64>();
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        mean_sq_norm /= n as f64;

        let dist_to_mean = squared_distance(x.values(), &mean);
        let mean_norm_sq: f64 = mean.iter().map(|v| v * v).sum();
        // constant term of the expansion: average squared point norm minus
        // the squared norm of the mean
        let constant = mean_sq_norm - mean_norm_sq;
        let approx_score = dist_to_mean - (n as f64).ln() / self.stiffness + constant;

        let distances = self.distances(x);
        let mean_sq_distance = distances.iter().sum::<f64>() / n as f64;
        let exact_score = neg_log_sum_exp(&distances, self.stiffness);

        Ok(KdeApproxDiagnostics {
            inlier_mean: mean,
            mean_sq_distance,
            approx_score,
            exact_score,
            residual: exact_score - approx_score,
        })
    }
}

/// Diagnostics of the distance-to-the-mean reduction of a KDE score.
#[derive(Debug, Clone)]
pub struct KdeApproxDiagnostics {
    pub inlier_mean: Vec<f64>,
    /// Mean squared distance of the query to the training points.
    pub mean_sq_distance: f64,
    pub approx_score: f64,
    pub exact_score: f64,
    /// `exact - approx`.
    pub residual: f64,
}

/// Mean validation log-likelihood of a Gaussian KDE with the given stiffness,
/// including the kernel normalizer so the criterion is not monotone in the
/// stiffness.
pub fn validation_log_likelihood(train: &Tensor, validation: &Tensor, stiffness: f64) -> f64 {
    let (n, d) = (train.rows(), train.cols());
    let normalizer = -(n as f64).ln() + d as f64 / 2.0 * (stiffness / std::f64::consts::PI).ln();
    let mut total = 0.0;
    for v in 0..validation.rows() {
        let x = validation.row(v);
        let distances: Vec<f64> = (0..n).map(|j| squared_distance(x, train.row(j))).collect();
        // log sum_j exp(-g d_j) = -g * softmin
        let log_kernel_sum = -stiffness * neg_log_sum_exp(&distances, stiffness);
        total += log_kernel_sum + normalizer;
    }
    total / validation.rows() as f64
}

/// Mean pairwise squared distance among the rows of `points`; 1.0 when there
/// are fewer than two rows or the points coincide.
pub fn mean_pairwise_sq_dist(points: &Tensor) -> f64 {
    let n = points.rows();
    if n < 2 {
        return 1.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += squared_distance(points.row(i), points.row(j));
        }
    }
    let mean = total / (n * (n - 1) / 2) as f64;
    if mean > 0.0 {
        mean
    } else {
        1.0
    }
}

/// Default stiffness grid: 17 logarithmic points spanning 2^-8 .. 2^8 over
/// the inverse mean pairwise squared distance of the training set.
pub fn default_stiffness_grid(train: &Tensor) -> Vec<f64> {
    let scale = mean_pairwise_sq_dist(train);
    (-8..=8).map(|i| (2.0_f64).powi(i) / scale).collect()
}

/// Select the stiffness maximizing mean validation log-likelihood.
/// Ties go to the smallest candidate.
pub fn fit_kde(train: &Tensor, validation: &Tensor, grid: &[f64]) -> Result<KdeModel> {
    if train.shape().len() != 2 || train.rows() == 0 {
        return Err(Error::Dataset("empty training split".into()));
    }
    if validation.shape().len() != 2 || validation.rows() == 0 {
        return Err(Error::Dataset("empty validation split".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty stiffness grid".into()));
    }
    let mut candidates = grid.to_vec();
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));

    let mut best: Option<(f64, f64)> = None; // (stiffness, log-likelihood)
    for &gamma in &candidates {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "stiffness grid entries must be positive, got {gamma}"
            )));
        }
        let ll = validation_log_likelihood(train, validation, gamma);
        let better = match best {
            None => true,
            Some((_, best_ll)) => ll > best_ll,
        };
        if better {
            best = Some((gamma, ll));
        }
    }
    let (gamma, _) = best.expect("non-empty grid");
    KdeModel::new(train.clone(), gamma)
}
