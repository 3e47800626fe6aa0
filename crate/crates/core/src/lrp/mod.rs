//! Backward relevance propagation.
//!
//! Per-layer rules redistribute the scalar outlier score down a recorded
//! activation trace, one rule per layer kind, composing into pixel-level
//! heatmaps. Each rule conserves relevance exactly in exact arithmetic;
//! the ratio rules carry a small signed stabilizer for near-zero
//! denominators.

mod explain;

pub use explain::explain;

use crate::error::{Error, Result};
use crate::neural::{ActivationTrace, Layer};
use crate::tensor::Tensor;

/// Knobs of the backward pass.
#[derive(Debug, Clone, Copy)]
pub struct LrpConfig {
    /// Gamma-rule parameter for Linear/ReLU layers (>= 0); larger values
    /// favor positive contributions. Distinct from any pooling stiffness.
    pub gamma: f64,
    /// Signed stabilizer added to ratio-rule denominators.
    pub epsilon: f64,
}

impl Default for LrpConfig {
    fn default() -> Self {
        LrpConfig {
            gamma: 0.25,
            epsilon: 1e-9,
        }
    }
}

impl LrpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lrp gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lrp epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Per-input-feature relevance attribution with provenance.
#[derive(Debug, Clone)]
pub struct Heatmap {
    /// Relevance values, shaped like the model input.
    pub values: Tensor,
    pub detector: String,
    pub sample_id: String,
}

/// Clamp a denominator's magnitude away from zero, keeping its sign. Leaves
/// anything with |denom| >= epsilon untouched so conservation stays exact
/// outside the stabilized regime.
fn stabilized(denom: f64, epsilon: f64) -> f64 {
    if denom.abs() >= epsilon {
        denom
    } else if denom >= 0.0 {
        epsilon
    } else {
        -epsilon
    }
}

/// Average-pool rule: redistribute proportionally to each pooled activation.
pub fn propagate_average_pool(r_out: f64, activations: &Tensor, epsilon: f64) -> Tensor {
    let denom = stabilized(activations.values().iter().sum(), epsilon);
    let values = activations.values().iter().map(|a| r_out * a / denom).collect();
    Tensor::from_vec(values).expect("finite redistribution")
}

/// Softargmin weights of a distance pool: `exp(-g d_j) / sum exp(-g d_j')`,
/// computed with the min-shift.
pub fn softargmin(distances: &[f64], stiffness: f64) -> Vec<f64> {
    let m = distances.iter().cloned().fold(f64::INFINITY, f64::min);
    let exps: Vec<f64> = distances
        .iter()
        .map(|&d| (-stiffness * (d - m)).exp())
        .collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Soft-min pool rule: redistribute by softargmin weight. Weights are
/// nonnegative and sum to one, so the pool conserves relevance.
pub fn propagate_neg_lse(r_out: f64, distances: &Tensor, stiffness: f64) -> Result<Tensor> {
    if !(stiffness.is_finite() && stiffness > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "pooling stiffness must be positive, got {stiffness}"
        )));
    }
    let weights = softargmin(distances.values(), stiffness);
    Tensor::from_vec(weights.into_iter().map(|w| w * r_out).collect())
}

/// Squared-distance rule: second-order terms `c_k (a_j - t_jk)^2` with
/// `c_k = R_k / ||a - t_k||^2`, aggregated over templates.
pub fn propagate_squared_distance(
    r_templates: &Tensor,
    activations: &Tensor,
    templates: &Tensor,
) -> Result<Tensor> {
    let k_count = templates.rows();
    let dim = templates.cols();
    if r_templates.len() != k_count || activations.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "distance rule: relevance {} / templates {}x{} / activations {}",
            r_templates.len(),
            k_count,
            dim,
            activations.len()
        )));
    }
    let a = activations.values();
    let mut out = vec![0.0; dim];
    for k in 0..k_count {
        let r_k = r_templates.values()[k];
        if r_k == 0.0 {
            continue;
        }
        let t = templates.row(k);
        let dist = crate::tensor::squared_distance(a, t);
        if dist == 0.0 {
            return Err(Error::Numeric(format!(
                "relevance {r_k} on a zero-distance template {k}: attribution undefined"
            )));
        }
        let c_k = r_k / dist;
        for j in 0..dim {
            let d = a[j] - t[j];
            out[j] += c_k * d * d;
        }
    }
    Tensor::from_vec(out)
}

/// Linear-transition rule for the layer feeding a distance computation:
/// share `a_j w_kj / sum_j' a_j' w_kj'` of each upstream relevance.
pub fn propagate_whitening_transition(
    r_out: &Tensor,
    activations: &Tensor,
    weights: &Tensor,
    epsilon: f64,
) -> Result<Tensor> {
    let (k_count, dim) = (weights.rows(), weights.cols());
    if r_out.len() != k_count || activations.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "transition rule: relevance {} / weights {}x{} / activations {}",
            r_out.len(),
            k_count,
            dim,
            activations.len()
        )));
    }
    let a = activations.values();
    let mut out = vec![0.0; dim];
    for k in 0..k_count {
        let r_k = r_out.values()[k];
        if r_k == 0.0 {
            continue;
        }
        let row = weights.row(k);
        let mut denom = 0.0;
        for (x, w) in a.iter().zip(row) {
            denom += x * w;
        }
        let denom = stabilized(denom, epsilon);
        for j in 0..dim {
            out[j] += a[j] * row[j] / denom * r_k;
        }
    }
    Tensor::from_vec(out)
}

/// Gamma rule for Linear/ReLU pairs: positive weight components are
/// up-weighted by `1 + gamma` in both numerator and denominator.
pub fn propagate_linear_relu_gamma(
    r_out: &Tensor,
    activations: &Tensor,
    weights: &Tensor,
    config: &LrpConfig,
) -> Result<Tensor> {
    let (k_count, dim) = (weights.rows(), weights.cols());
    if r_out.len() != k_count || activations.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "gamma rule: relevance {} / weights {}x{} / activations {}",
            r_out.len(),
            k_count,
            dim,
            activations.len()
        )));
    }
    let a = activations.values();
    let gamma = config.gamma;
    let mut out = vec![0.0; dim];
    let mut nums = vec![0.0; dim];
    for k in 0..k_count {
        let r_k = r_out.values()[k];
        if r_k == 0.0 {
            continue;
        }
        let row = weights.row(k);
        let mut denom = 0.0;
        for j in 0..dim {
            let boosted = row[j] + gamma * row[j].max(0.0);
            let num = a[j] * boosted;
            nums[j] = num;
            denom += num;
        }
        let denom = stabilized(denom, config.epsilon);
        for j in 0..dim {
            out[j] += nums[j] / denom * r_k;
        }
    }
    Tensor::from_vec(out)
}

/// Backward pass over a recorded trace: dispatches the matching rule per
/// layer, treating each Linear/ReLU pair as one unit, and returns relevance
/// over the model input.
pub fn propagate_stack(
    layers: &[Layer],
    trace: &ActivationTrace,
    output_relevance: f64,
    config: &LrpConfig,
) -> Result<Tensor> {
    config.validate()?;
    if layers.len() != trace.steps.len() {
        return Err(Error::ShapeMismatch(format!(
            "trace length {} does not match layer count {}",
            trace.steps.len(),
            layers.len()
        )));
    }
    if !output_relevance.is_finite() {
        return Err(Error::NonFinite("output relevance".into()));
    }

    let mut relevance = Tensor::from_vec(vec![output_relevance])?;
    let mut i = layers.len();
    while i > 0 {
        i -= 1;
        let step = &trace.steps[i];
        relevance = match &layers[i] {
            Layer::AveragePool { .. } => {
                propagate_average_pool(relevance.scalar_value()?, &step.input, config.epsilon)
            }
            Layer::NegLogSumExp { stiffness } => {
                propagate_neg_lse(relevance.scalar_value()?, &step.input, *stiffness)?
            }
            Layer::SquaredDistance { templates } => {
                propagate_squared_distance(&relevance, &step.input, templates)?
            }
            Layer::Relu => {
                // fold the ReLU with the Linear beneath it
                let Some(Layer::Linear { weights, .. }) = i.checked_sub(1).map(|p| &layers[p])
                else {
                    return Err(Error::InvalidArgument(
                        "relevance propagation needs a Linear layer beneath every ReLU".into(),
                    ));
                };
                i -= 1;
                propagate_linear_relu_gamma(&relevance, &trace.steps[i].input, weights, config)?
            }
            Layer::Linear { weights, .. } => {
                propagate_whitening_transition(&relevance, &step.input, weights, config.epsilon)?
            }
        };
    }
    relevance.check_finite("propagated relevance")?;
    Ok(relevance)
}
