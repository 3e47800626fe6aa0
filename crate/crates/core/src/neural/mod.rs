//! Layered numeric models: forward evaluation with activation tracing.
//!
//! Every detector in this crate is expressible as an ordered stack of the
//! five layer kinds below ending in a scalar outlier score. The recorded
//! activation trace is what the relevance backward pass consumes.

pub mod train;
pub mod weights;

use crate::error::{Error, Result};
use crate::tensor::{squared_distance, Tensor};

/// One layer of a neuralized detector.
#[derive(Debug, Clone)]
pub enum Layer {
    /// Dense affine map, `out_k = sum_j w[k,j] a[j] + b[k]`.
    Linear {
        /// (out × in) weight matrix.
        weights: Tensor,
        /// Optional (out) bias.
        bias: Option<Tensor>,
    },
    /// Elementwise `max(0, a)`.
    Relu,
    /// Squared Euclidean distances to K templates, `d_k = ||a - t_k||^2`.
    SquaredDistance {
        /// (K × in) template matrix.
        templates: Tensor,
    },
    /// Soft minimum: `-log(sum_j exp(-stiffness * d_j)) / stiffness`.
    NegLogSumExp { stiffness: f64 },
    /// Arithmetic mean over a pool of fixed size.
    AveragePool { size: usize },
}

impl Layer {
    pub fn linear(weights: Tensor, bias: Option<Tensor>) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "linear weights must be 2-D, got {:?}",
                weights.shape()
            )));
        }
        if let Some(b) = &bias {
            if b.len() != weights.rows() {
                return Err(Error::ShapeMismatch(format!(
                    "bias length {} does not match output dim {}",
                    b.len(),
                    weights.rows()
                )));
            }
        }
        Ok(Layer::Linear { weights, bias })
    }

    pub fn squared_distance(templates: Tensor) -> Result<Self> {
        if templates.shape().len() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "distance templates must be 2-D, got {:?}",
                templates.shape()
            )));
        }
        Ok(Layer::SquaredDistance { templates })
    }

    pub fn neg_log_sum_exp(stiffness: f64) -> Result<Self> {
        if !(stiffness.is_finite() && stiffness > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "pooling stiffness must be positive, got {stiffness}"
            )));
        }
        Ok(Layer::NegLogSumExp { stiffness })
    }

    pub fn average_pool(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument("empty pool".into()));
        }
        Ok(Layer::AveragePool { size })
    }

    /// Output dimensionality for a given input dimensionality.
    pub fn output_dim(&self, input_dim: usize) -> Result<usize> {
        match self {
            Layer::Linear { weights, .. } => {
                if weights.cols() != input_dim {
                    return Err(Error::ShapeMismatch(format!(
                        "linear expects {} inputs, got {}",
                        weights.cols(),
                        input_dim
                    )));
                }
                Ok(weights.rows())
            }
            Layer::Relu => Ok(input_dim),
            Layer::SquaredDistance { templates } => {
                if templates.cols() != input_dim {
                    return Err(Error::ShapeMismatch(format!(
                        "distance templates expect {} inputs, got {}",
                        templates.cols(),
                        input_dim
                    )));
                }
                Ok(templates.rows())
            }
            Layer::NegLogSumExp { .. } => {
                if input_dim == 0 {
                    return Err(Error::InvalidArgument("empty pool".into()));
                }
                Ok(1)
            }
            Layer::AveragePool { size } => {
                if *size != input_dim {
                    return Err(Error::ShapeMismatch(format!(
                        "average pool of size {size} fed {input_dim} values"
                    )));
                }
                Ok(1)
            }
        }
    }

    /// Evaluate the layer on a flat activation vector.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.output_dim(input.len())?;
        let a = input.values();
        let out = match self {
            Layer::Linear { weights, bias } => {
                let mut out = Vec::with_capacity(weights.rows());
                for k in 0..weights.rows() {
                    let row = weights.row(k);
                    let mut acc = 0.0;
                    for (w, x) in row.iter().zip(a) {
                        acc += w * x;
                    }
                    if let Some(b) = bias {
                        acc += b.values()[k];
                    }
                    out.push(acc);
                }
                out
            }
            Layer::Relu => a.iter().map(|&v| v.max(0.0)).collect(),
            Layer::SquaredDistance { templates } => (0..templates.rows())
                .map(|k| squared_distance(a, templates.row(k)))
                .collect(),
            Layer::NegLogSumExp { stiffness } => vec![neg_log_sum_exp(a, *stiffness)],
            Layer::AveragePool { size } => {
                let mut acc = 0.0;
                for &v in a {
                    acc += v;
                }
                vec![acc / *size as f64]
            }
        };
        let t = Tensor::from_vec(out)?;
        t.check_finite("layer forward")?;
        Ok(t)
    }
}

/// Soft minimum of `values` with the given stiffness, computed with the
/// min-shift so that no exponential overflows.
pub fn neg_log_sum_exp(values: &[f64], stiffness: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let m = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for &v in values {
        sum += (-stiffness * (v - m)).exp();
    }
    m - sum.ln() / stiffness
}

/// Per-layer input/output pair recorded during a forward pass.
#[derive(Debug, Clone)]
pub struct TraceStep {
    pub input: Tensor,
    pub output: Tensor,
}

/// Full record of one forward pass; consumed by the relevance backward pass.
#[derive(Debug, Clone)]
pub struct ActivationTrace {
    pub steps: Vec<TraceStep>,
}

impl ActivationTrace {
    pub fn output(&self) -> &Tensor {
        &self.steps.last().expect("non-empty trace").output
    }
}

/// Run a layer stack on a flat input, recording every intermediate.
pub fn stack_forward(layers: &[Layer], input: &Tensor) -> Result<(Tensor, ActivationTrace)> {
    if layers.is_empty() {
        return Err(Error::InvalidArgument("empty layer stack".into()));
    }
    let mut steps = Vec::with_capacity(layers.len());
    let mut current = input.clone();
    for layer in layers {
        let out = layer.forward(&current)?;
        steps.push(TraceStep {
            input: current,
            output: out.clone(),
        });
        current = out;
    }
    Ok((current, ActivationTrace { steps }))
}

/// Identifying metadata carried by a neuralized model.
#[derive(Debug, Clone, Default)]
pub struct ModelMeta {
    pub detector: String,
    pub class_name: String,
}

/// An ordered layer stack mapping a flat input to a scalar outlier score.
#[derive(Debug, Clone)]
pub struct NeuralizedModel {
    layers: Vec<Layer>,
    input_dim: usize,
    pub meta: ModelMeta,
}

impl NeuralizedModel {
    /// Validates that layer shapes chain and the final output is scalar.
    pub fn new(layers: Vec<Layer>, input_dim: usize, meta: ModelMeta) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidArgument("zero-dimensional input".into()));
        }
        let mut dim = input_dim;
        for layer in &layers {
            dim = layer.output_dim(dim)?;
        }
        if dim != 1 {
            return Err(Error::ShapeMismatch(format!(
                "model must end in a scalar score, final dim is {dim}"
            )));
        }
        Ok(NeuralizedModel {
            layers,
            input_dim,
            meta,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Scalar score plus the activation trace of the pass.
    pub fn forward(&self, input: &Tensor) -> Result<(f64, ActivationTrace)> {
        if input.len() != self.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} inputs, got {}",
                self.input_dim,
                input.len()
            )));
        }
        let flat = input.reshaped(vec![self.input_dim])?;
        let (out, trace) = stack_forward(&self.layers, &flat)?;
        Ok((out.scalar_value()?, trace))
    }
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
    fn linear_identity_and_sum() {
        let id = Layer::linear(t2(2, 2, &[1.0, 0.0, 0.0, 1.0]), None).unwrap();
        assert_eq!(id.forward(&t1(&[3.0, -1.0])).unwrap().values(), &[3.0, -1.0]);

        let sum = Layer::linear(t2(1, 2, &[1.0, 1.0]), None).unwrap();
        assert_eq!(sum.forward(&t1(&[2.0, 3.0])).unwrap().values(), &[5.0]);

        let zero = Layer::linear(t2(2, 2, &[0.0; 4]), None).unwrap();
        assert_eq!(zero.forward(&t1(&[7.0, 8.0])).unwrap().values(), &[0.0, 0.0]);
    }

    #[test]
    fn linear_bias_and_shape_errors() {
        let l = Layer::linear(t2(1, 2, &[1.0, 1.0]), Some(t1(&[10.0]))).unwrap();
        assert_eq!(l.forward(&t1(&[2.0, 3.0])).unwrap().values(), &[15.0]);
        assert!(l.forward(&t1(&[1.0])).is_err());
        assert!(Layer::linear(t2(1, 2, &[1.0, 1.0]), Some(t1(&[1.0, 2.0]))).is_err());
    }

    #[test]
    fn relu_cases() {
        let r = Layer::Relu;
        assert_eq!(r.forward(&t1(&[-1.0, 2.0])).unwrap().values(), &[0.0, 2.0]);
        assert_eq!(r.forward(&t1(&[-3.0, -0.5])).unwrap().values(), &[0.0, 0.0]);
        let x = t1(&[0.5, 1.5]);
        assert_eq!(r.forward(&x).unwrap().values(), x.values());
    }

    #[test]
    fn squared_distance_cases() {
        let single = Layer::squared_distance(t2(1, 2, &[0.0, 0.0])).unwrap();
        assert_eq!(single.forward(&t1(&[3.0, 4.0])).unwrap().values(), &[25.0]);

        let coincident = Layer::squared_distance(t2(1, 2, &[3.0, 4.0])).unwrap();
        assert_eq!(coincident.forward(&t1(&[3.0, 4.0])).unwrap().values(), &[0.0]);

        let two = Layer::squared_distance(t2(2, 2, &[1.0, 0.0, 0.0, 2.0])).unwrap();
        assert_eq!(two.forward(&t1(&[0.0, 0.0])).unwrap().values(), &[1.0, 4.0]);
    }

    #[test]
    fn neg_lse_singleton_is_exact() {
        for gamma in [0.1, 1.0, 42.0] {
            let l = Layer::neg_log_sum_exp(gamma).unwrap();
            assert_eq!(l.forward(&t1(&[5.0])).unwrap().values(), &[5.0]);
        }
    }

    #[test]
    fn neg_lse_analytic_values() {
        // two zero distances: -ln 2
        let l = Layer::neg_log_sum_exp(1.0).unwrap();
        let v = l.forward(&t1(&[0.0, 0.0])).unwrap().values()[0];
        assert!((v + std::f64::consts::LN_2).abs() < 1e-15);

        // d = (1, 2): 1 - ln(1 + e^-1)
        let v = l.forward(&t1(&[1.0, 2.0])).unwrap().values()[0];
        assert!((v - 0.6867383124817772).abs() < 1e-15);
    }

    #[test]
    fn neg_lse_bounds_and_shift() {
        let mut rng = crate::rng::DetRng::stream(3, "neural/test", 0);
        for _ in 0..200 {
            let n = 1 + rng.below(6);
            let gamma = 0.2 + 4.0 * rng.next_f64();
            let d: Vec<f64> = (0..n).map(|_| rng.uniform(-3.0, 9.0)).collect();
            let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
            let v = neg_log_sum_exp(&d, gamma);
            assert!(v <= min + 1e-12);
            assert!(v >= min - (n as f64).ln() / gamma - 1e-12);

            // shift equivariance
            let c = rng.uniform(-5.0, 5.0);
            let shifted: Vec<f64> = d.iter().map(|x| x + c).collect();
            let vs = neg_log_sum_exp(&shifted, gamma);
            assert!((vs - (v + c)).abs() < 1e-9, "shift gap {}", vs - (v + c));
        }
    }

    #[test]
    fn neg_lse_approaches_hard_min() {
        let d = [2.0, 2.5, 4.0];
        for gamma in [10.0, 100.0, 1000.0] {
            let v = neg_log_sum_exp(&d, gamma);
            assert!((v - 2.0).abs() <= (3.0_f64).ln() / gamma + 1e-15);
        }
    }

    #[test]
    fn average_pool_cases() {
        let p = Layer::average_pool(2).unwrap();
        assert_eq!(p.forward(&t1(&[2.0, 4.0])).unwrap().values(), &[3.0]);
        assert_eq!(p.forward(&t1(&[7.0, 7.0])).unwrap().values(), &[7.0]);
        let p3 = Layer::average_pool(3).unwrap();
        assert_eq!(p3.forward(&t1(&[0.0, 0.0, 0.0])).unwrap().values(), &[0.0]);
        assert!(p3.forward(&t1(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn model_forward_singleton_kde_stack() {
        // one template: the pool collapses and the score is the distance
        let model = NeuralizedModel::new(
            vec![
                Layer::squared_distance(t2(1, 2, &[1.0, 2.0])).unwrap(),
                Layer::neg_log_sum_exp(3.0).unwrap(),
            ],
            2,
            ModelMeta::default(),
        )
        .unwrap();
        let (score, trace) = model.forward(&t1(&[4.0, 6.0])).unwrap();
        assert_eq!(score, 25.0);
        assert_eq!(trace.steps.len(), 2);
    }

    #[test]
    fn model_forward_identity_deep_stack() {
        let model = NeuralizedModel::new(
            vec![
                Layer::linear(t2(2, 2, &[1.0, 0.0, 0.0, 1.0]), None).unwrap(),
                Layer::squared_distance(t2(1, 2, &[0.0, 0.0])).unwrap(),
            ],
            2,
            ModelMeta::default(),
        )
        .unwrap();
        let (score, _) = model.forward(&t1(&[3.0, 4.0])).unwrap();
        assert_eq!(score, 25.0);
    }

    #[test]
    fn model_forward_equidistant_two_point_kde() {
        // x equidistant at d^2 from both templates: score = d^2 - ln(2)/gamma
        let gamma = 2.0;
        let model = NeuralizedModel::new(
            vec![
                Layer::squared_distance(t2(2, 1, &[-1.0, 1.0])).unwrap(),
                Layer::neg_log_sum_exp(gamma).unwrap(),
            ],
            1,
            ModelMeta::default(),
        )
        .unwrap();
        let (score, _) = model.forward(&t1(&[0.0])).unwrap();
        let expect = 1.0 - (2.0_f64).ln() / gamma;
        assert!((score - expect).abs() < 1e-15);
    }

    #[test]
    fn model_rejects_non_scalar_output() {
        let err = NeuralizedModel::new(
            vec![Layer::squared_distance(t2(2, 2, &[0.0; 4])).unwrap()],
            2,
            ModelMeta::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn model_forward_is_deterministic() {
        let model = NeuralizedModel::new(
            vec![
                Layer::squared_distance(t2(3, 2, &[0.1, 0.2, -0.4, 0.9, 2.0, -1.0])).unwrap(),
                Layer::neg_log_sum_exp(0.7).unwrap(),
            ],
            2,
            ModelMeta::default(),
        )
        .unwrap();
        let x = t1(&[0.3, -0.8]);
        let (a, _) = model.forward(&x).unwrap();
        let (b, _) = model.forward(&x).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn trace_replay_reproduces_outputs() {
        let layers = vec![
            Layer::linear(t2(3, 2, &[0.5, -1.0, 2.0, 0.25, -0.75, 1.5]), None).unwrap(),
            Layer::Relu,
            Layer::squared_distance(t2(1, 3, &[0.0, 0.0, 0.0])).unwrap(),
        ];
        let (_, trace) = stack_forward(&layers, &t1(&[1.0, -2.0])).unwrap();
        for (layer, step) in layers.iter().zip(&trace.steps) {
            let replay = layer.forward(&step.input).unwrap();
            assert_eq!(replay.values(), step.output.values());
        }
    }
}
