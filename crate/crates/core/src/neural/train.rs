//! Reverse-mode gradients for dense Linear/ReLU stacks and the Adam update
//! rule used to fit reconstruction models.

use crate::error::{Error, Result};
use crate::neural::{stack_forward, Layer};
use crate::tensor::Tensor;

/// Gradient of the loss with respect to one Linear layer.
#[derive(Debug, Clone)]
pub struct LinearGradient {
    pub weights: Tensor,
    pub bias: Option<Tensor>,
}

/// Mean squared reconstruction error of a Linear/ReLU stack over a batch,
/// together with the gradient for every Linear layer (None for ReLU slots).
///
/// Loss: `(1/B) * sum_b ||f(x_b) - x_b||^2`.
pub fn reconstruction_gradient(
    layers: &[Layer],
    batch: &[Tensor],
) -> Result<(f64, Vec<Option<LinearGradient>>)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    for layer in layers {
        if !matches!(layer, Layer::Linear { .. } | Layer::Relu) {
            return Err(Error::InvalidArgument(
                "gradients are defined only for Linear/ReLU stacks".into(),
            ));
        }
    }

    let mut grads: Vec<Option<LinearGradient>> = layers
        .iter()
        .map(|layer| match layer {
            Layer::Linear { weights, bias } => Some(LinearGradient {
                weights: Tensor::zeros(weights.shape().to_vec()),
                bias: bias.as_ref().map(|b| Tensor::zeros(b.shape().to_vec())),
            }),
            _ => None,
        })
        .collect();

    let inv_b = 1.0 / batch.len() as f64;
    let mut loss = 0.0;

    for x in batch {
        let flat = x.reshaped(vec![x.len()])?;
        let (out, trace) = stack_forward(layers, &flat)?;
        if out.len() != flat.len() {
            return Err(Error::ShapeMismatch(format!(
                "reconstruction output dim {} does not match input dim {}",
                out.len(),
                flat.len()
            )));
        }
        let mut sample_loss = 0.0;
        // upstream gradient of the per-sample squared distance, batch-averaged
        let mut g: Vec<f64> = out
            .values()
            .iter()
            .zip(flat.values())
            .map(|(o, t)| {
                let d = o - t;
                sample_loss += d * d;
                2.0 * d * inv_b
            })
            .collect();
        loss += sample_loss * inv_b;

        for (idx, layer) in layers.iter().enumerate().rev() {
            let step = &trace.steps[idx];
            match layer {
                Layer::Relu => {
                    for (gi, o) in g.iter_mut().zip(step.output.values()) {
                        if *o <= 0.0 {
                            *gi = 0.0;
                        }
                    }
                }
                Layer::Linear { weights, .. } => {
                    let grad = grads[idx].as_mut().expect("linear slot");
                    let a_in = step.input.values();
                    let (rows, cols) = (weights.rows(), weights.cols());
                    {
                        let gw = grad.weights.values_mut();
                        for k in 0..rows {
                            let gk = g[k];
                            if gk != 0.0 {
                                let row = &mut gw[k * cols..(k + 1) * cols];
                                for (w, a) in row.iter_mut().zip(a_in) {
                                    *w += gk * a;
                                }
                            }
                        }
                    }
                    if let Some(gb) = grad.bias.as_mut() {
                        for (b, gk) in gb.values_mut().iter_mut().zip(&g) {
                            *b += gk;
                        }
                    }
                    let mut g_in = vec![0.0; cols];
                    for k in 0..rows {
                        let gk = g[k];
                        if gk != 0.0 {
                            for (gi, w) in g_in.iter_mut().zip(weights.row(k)) {
                                *gi += w * gk;
                            }
                        }
                    }
                    g = g_in;
                }
                _ => unreachable!("validated above"),
            }
        }
    }

    if !loss.is_finite() {
        return Err(Error::NonFinite("reconstruction loss".into()));
    }
    Ok((loss, grads))
}

/// Mean squared reconstruction error without gradients.
pub fn reconstruction_loss(layers: &[Layer], batch: &[Tensor]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut loss = 0.0;
    for x in batch {
        let flat = x.reshaped(vec![x.len()])?;
        let (out, _) = stack_forward(layers, &flat)?;
        loss += crate::tensor::squared_distance(out.values(), flat.values());
    }
    let loss = loss / batch.len() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("reconstruction loss".into()));
    }
    Ok(loss)
}

/// Adam configuration; defaults are the optimizer's standard constants.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            step_size: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam state over the Linear layers of a stack.
#[derive(Debug)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    moments: Vec<Option<Moments>>,
}

#[derive(Debug)]
struct Moments {
    m_w: Vec<f64>,
    v_w: Vec<f64>,
    m_b: Vec<f64>,
    v_b: Vec<f64>,
}

impl Adam {
    pub fn new(config: AdamConfig, layers: &[Layer]) -> Self {
        let moments = layers
            .iter()
            .map(|layer| match layer {
                Layer::Linear { weights, bias } => Some(Moments {
                    m_w: vec![0.0; weights.len()],
                    v_w: vec![0.0; weights.len()],
                    m_b: vec![0.0; bias.as_ref().map_or(0, Tensor::len)],
                    v_b: vec![0.0; bias.as_ref().map_or(0, Tensor::len)],
                }),
                _ => None,
            })
            .collect();
        Adam {
            config,
            step: 0,
            moments,
        }
    }

    /// One in-place parameter update from a gradient.
    pub fn apply(&mut self, layers: &mut [Layer], grads: &[Option<LinearGradient>]) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let c = self.config;
        let bias_corr1 = 1.0 - c.beta1.powi(t);
        let bias_corr2 = 1.0 - c.beta2.powi(t);

        for (idx, layer) in layers.iter_mut().enumerate() {
            let Layer::Linear { weights, bias } = layer else {
                continue;
            };
            let grad = grads[idx]
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("missing gradient for linear layer".into()))?;
            let mom = self.moments[idx].as_mut().expect("moment slot");

            update_slice(
                weights.values_mut(),
                grad.weights.values(),
                &mut mom.m_w,
                &mut mom.v_w,
                c,
                bias_corr1,
                bias_corr2,
            );
            if let (Some(b), Some(gb)) = (bias.as_mut(), grad.bias.as_ref()) {
                update_slice(
                    b.values_mut(),
                    gb.values(),
                    &mut mom.m_b,
                    &mut mom.v_b,
                    c,
                    bias_corr1,
                    bias_corr2,
                );
            }
        }
        Ok(())
    }
}

fn update_slice(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    c: AdamConfig,
    bias_corr1: f64,
    bias_corr2: f64,
) {
    for i in 0..params.len() {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grads[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
        let m_hat = m[i] / bias_corr1;
        let v_hat = v[i] / bias_corr2;
        params[i] -= c.step_size * m_hat / (v_hat.sqrt() + c.epsilon);
    }
}
