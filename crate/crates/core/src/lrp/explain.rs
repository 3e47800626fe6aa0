//! End-to-end explanation: forward pass, relevance initialization at the
//! score, and the composed backward rules, per detector kind.

use crate::detectors::{BaggedModel, Detector};
use crate::error::Result;
use crate::lrp::{propagate_stack, stabilized, Heatmap, LrpConfig};
use crate::neural::NeuralizedModel;
use crate::tensor::Tensor;

fn explain_model(model: &NeuralizedModel, x: &Tensor, config: &LrpConfig) -> Result<(f64, Tensor)> {
    let (score, trace) = model.forward(x)?;
    let relevance = propagate_stack(model.layers(), &trace, score, config)?;
    Ok((score, relevance))
}

/// Pixel-level relevance for the detector's score on `x`. The heatmap keeps
/// the sample's shape and sums to the outlier score (up to stabilizer
/// leakage; bagged models additionally drop members that judge the sample
/// inlying).
pub fn explain(
    detector: &Detector,
    x: &Tensor,
    config: &LrpConfig,
    sample_id: &str,
) -> Result<Heatmap> {
    config.validate()?;
    let values = match detector {
        Detector::Bagged(bag) => explain_bagged(bag, x, config)?,
        sequential => {
            let model = sequential.neuralize(x, "")?;
            explain_model(&model, x, config)?.1
        }
    };
    Ok(Heatmap {
        values: values.reshaped(x.shape().to_vec())?,
        detector: detector.kind().as_str().to_string(),
        sample_id: sample_id.to_string(),
    })
}

/// The bag's pool redistributes the bagged score across members in
/// proportion to their rectified standardized scores; members that judge
/// the sample inlying contribute no anomaly evidence. Each contributing
/// member's internal heatmap is then rescaled from its raw score to its
/// share.
fn explain_bagged(bag: &BaggedModel, x: &Tensor, config: &LrpConfig) -> Result<Tensor> {
    let raw = bag.member_scores(x)?;
    let standardized: Vec<f64> = raw
        .iter()
        .zip(&bag.standardizers)
        .map(|(&r, s)| s.apply(r))
        .collect();
    let bag_score = bag.score(x)?;

    let positive: Vec<f64> = standardized.iter().map(|&z| z.max(0.0)).collect();
    let total: f64 = positive.iter().sum();
    let mut combined = vec![0.0; x.len()];
    if total == 0.0 {
        return Tensor::from_vec(combined);
    }

    let members: [NeuralizedModel; 3] = [
        bag.kde.neuralize("")?,
        bag.autoencoder.neuralize(x, "")?,
        bag.deep.neuralize("")?,
    ];
    for (m, model) in members.iter().enumerate() {
        let share = bag_score * positive[m] / total;
        if share == 0.0 {
            continue;
        }
        let (member_score, heatmap) = explain_model(model, x, config)?;
        let rescale = share / stabilized(member_score, config.epsilon);
        for (acc, v) in combined.iter_mut().zip(heatmap.values()) {
            *acc += rescale * v;
        }
    }
    Tensor::from_vec(combined)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::bagging::Standardizer;
    use crate::detectors::{AutoencoderModel, DeepOneClassModel, KdeModel};
    use crate::neural::Layer;
    use crate::rng::DetRng;

    fn t1(vals: &[f64]) -> Tensor {
        Tensor::from_vec(vals.to_vec()).unwrap()
    }

    fn t2(rows: usize, cols: usize, vals: &[f64]) -> Tensor {
        Tensor::from_rows(rows, cols, vals.to_vec()).unwrap()
    }

    #[test]
    fn kde_with_one_training_point_attributes_squared_differences() {
        let detector = Detector::Kde(KdeModel::new(t2(1, 2, &[1.0, 3.0]), 2.0).unwrap());
        let x = t1(&[4.0, 7.0]);
        let h = explain(&detector, &x, &LrpConfig::default(), "s").unwrap();
        assert!((h.values.values()[0] - 9.0).abs() < 1e-12);
        assert!((h.values.values()[1] - 16.0).abs() < 1e-12);
    }

    #[test]
    fn autoencoder_heatmap_is_squared_residual() {
        // reconstruction halves the input: heatmap_j = (x_j - x_j/2)^2
        let detector = Detector::Autoencoder(
            AutoencoderModel::from_layers(vec![Layer::linear(
                t2(2, 2, &[0.5, 0.0, 0.0, 0.5]),
                None,
            )
            .unwrap()])
            .unwrap(),
        );
        let x = t1(&[2.0, -4.0]);
        let h = explain(&detector, &x, &LrpConfig::default(), "s").unwrap();
        assert!((h.values.values()[0] - 1.0).abs() < 1e-12);
        assert!((h.values.values()[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn deep_identity_features_attribute_squared_coordinates() {
        let detector = Detector::Deep(
            DeepOneClassModel::new(vec![], 2, t2(2, 2, &[1.0, 0.0, 0.0, 1.0]), 0.0).unwrap(),
        );
        let x = t1(&[0.6, -0.8]);
        let h = explain(&detector, &x, &LrpConfig::default(), "s").unwrap();
        assert!((h.values.values()[0] - 0.36).abs() < 1e-9);
        assert!((h.values.values()[1] - 0.64).abs() < 1e-9);
    }

    #[test]
    fn heatmap_keeps_the_sample_shape() {
        let detector = Detector::Kde(KdeModel::new(t2(1, 4, &[0.0; 4]), 1.0).unwrap());
        let x = Tensor::new(vec![2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let h = explain(&detector, &x, &LrpConfig::default(), "s").unwrap();
        assert_eq!(h.values.shape(), &[2, 2]);
    }

    #[test]
    fn kde_and_autoencoder_conserve_tightly() {
        let mut rng = DetRng::stream(81, "explain/conserve", 0);
        let pts: Vec<f64> = (0..40).map(|_| rng.normal()).collect();
        let kde = Detector::Kde(KdeModel::new(t2(10, 4, &pts), 0.5).unwrap());
        let auto = Detector::Autoencoder(
            AutoencoderModel::from_layers(vec![Layer::linear(
                t2(4, 4, &(0..16).map(|_| rng.normal() * 0.4).collect::<Vec<_>>()),
                None,
            )
            .unwrap()])
            .unwrap(),
        );
        for detector in [kde, auto] {
            for _ in 0..50 {
                let x = t1(&(0..4).map(|_| rng.normal() + 2.0).collect::<Vec<_>>());
                let score = detector.score(&x).unwrap();
                let h = explain(&detector, &x, &LrpConfig::default(), "s").unwrap();
                let total: f64 = h.values.values().iter().sum();
                assert!(
                    (total - score).abs() <= 1e-6 * score.abs().max(1e-9),
                    "{}: {total} vs {score}",
                    detector.kind()
                );
            }
        }
    }

    #[test]
    fn nonnegative_heatmaps_for_nonnegative_scores() {
        let mut rng = DetRng::stream(82, "explain/nonneg", 0);
        let pts: Vec<f64> = (0..20).map(|_| rng.normal()).collect();
        let detector = Detector::Kde(KdeModel::new(t2(10, 2, &pts), 1.0).unwrap());
        for _ in 0..50 {
            let x = t1(&[rng.normal() + 4.0, rng.normal() - 4.0]);
            let score = detector.score(&x).unwrap();
            assert!(score > 0.0, "sample placed far from the training points");
            let h = explain(&detector, &x, &LrpConfig::default(), "s").unwrap();
            assert!(h.values.values().iter().all(|&v| v >= 0.0));
        }
    }

    fn bag_fixture() -> Detector {
        let kde = KdeModel::new(t2(2, 2, &[0.2, 0.3, 0.5, 0.5]), 1.2).unwrap();
        let auto = AutoencoderModel::from_layers(vec![Layer::linear(
            t2(2, 2, &[0.7, 0.0, 0.0, 0.7]),
            None,
        )
        .unwrap()])
        .unwrap();
        let deep = DeepOneClassModel::new(vec![], 2, t2(2, 2, &[1.0, 0.0, 0.0, 0.5]), 0.0).unwrap();
        let standardizers = [
            Standardizer::fit(&[0.05, 0.1, 0.2, 0.12]).unwrap(),
            Standardizer::fit(&[0.02, 0.05, 0.08, 0.04]).unwrap(),
            Standardizer::fit(&[0.3, 0.5, 0.4, 0.45]).unwrap(),
        ];
        Detector::Bagged(BaggedModel::new(kde, auto, deep, standardizers))
    }

    #[test]
    fn bagged_heatmap_conserves_for_flagged_samples() {
        let detector = bag_fixture();
        let mut rng = DetRng::stream(83, "explain/bag", 0);
        let mut checked = 0;
        for _ in 0..200 {
            let x = t1(&[rng.normal() * 2.0 + 2.0, rng.normal() * 2.0 - 1.0]);
            let score = detector.score(&x).unwrap();
            if score <= 0.1 {
                continue; // not flagged as anomalous
            }
            checked += 1;
            let h = explain(&detector, &x, &LrpConfig::default(), "s").unwrap();
            let total: f64 = h.values.values().iter().sum();
            assert!(
                (total - score).abs() <= 1e-3 * score.abs(),
                "{total} vs {score}"
            );
            assert!(h.values.values().iter().all(|&v| v >= 0.0));
        }
        assert!(checked > 20, "fixture produced too few flagged samples");
    }

    #[test]
    fn kde_heatmap_matches_direct_weighted_sum() {
        // independent route: h_j = sum_k softargmin_k * (score / d_k) * (x_j - t_kj)^2
        let mut rng = DetRng::stream(85, "explain/direct", 0);
        for _ in 0..20 {
            let (n, dim) = (6, 4);
            let pts: Vec<f64> = (0..n * dim).map(|_| rng.normal()).collect();
            let gamma = 0.2 + rng.next_f64();
            let detector = Detector::Kde(KdeModel::new(t2(n, dim, &pts), gamma).unwrap());
            let x: Vec<f64> = (0..dim).map(|_| rng.normal() + 1.0).collect();
            let xt = t1(&x);

            let score = detector.score(&xt).unwrap();
            let h = explain(&detector, &xt, &LrpConfig::default(), "s").unwrap();

            let distances: Vec<f64> = (0..n)
                .map(|k| {
                    (0..dim)
                        .map(|j| (x[j] - pts[k * dim + j]) * (x[j] - pts[k * dim + j]))
                        .sum()
                })
                .collect();
            let weights = crate::lrp::softargmin(&distances, gamma);
            for j in 0..dim {
                let direct: f64 = (0..n)
                    .map(|k| {
                        let d = x[j] - pts[k * dim + j];
                        weights[k] * score / distances[k] * d * d
                    })
                    .sum();
                let got = h.values.values()[j];
                assert!(
                    (got - direct).abs() <= 1e-9 * direct.abs().max(1e-9),
                    "{got} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn soft_weighted_sum_tends_to_mean_pattern() {
        // at vanishing stiffness the softargmin-weighted sum of squared
        // differences approaches the distance-to-the-mean pattern plus the
        // per-coordinate variance
        let mut rng = DetRng::stream(86, "explain/meanlimit", 0);
        let (n, dim) = (40, 24);
        let pts: Vec<f64> = (0..n * dim).map(|_| rng.normal()).collect();
        let x: Vec<f64> = (0..dim).map(|_| rng.normal() * 1.5).collect();

        let distances: Vec<f64> = (0..n)
            .map(|k| {
                (0..dim)
                    .map(|j| (x[j] - pts[k * dim + j]) * (x[j] - pts[k * dim + j]))
                    .sum()
            })
            .collect();
        let weights = crate::lrp::softargmin(&distances, 1e-6);

        let mut mean = vec![0.0; dim];
        for k in 0..n {
            for j in 0..dim {
                mean[j] += pts[k * dim + j] / n as f64;
            }
        }
        let mut pattern = vec![0.0; dim];
        for j in 0..dim {
            let var: f64 = (0..n)
                .map(|k| (pts[k * dim + j] - mean[j]) * (pts[k * dim + j] - mean[j]))
                .sum::<f64>()
                / n as f64;
            pattern[j] = (x[j] - mean[j]) * (x[j] - mean[j]) + var;
        }
        let weighted: Vec<f64> = (0..dim)
            .map(|j| {
                (0..n)
                    .map(|k| {
                        let d = x[j] - pts[k * dim + j];
                        weights[k] * d * d
                    })
                    .sum()
            })
            .collect();
        let cos = crate::tensor::cosine_similarity(&weighted, &pattern);
        assert!(cos >= 0.999, "cosine {cos}");
    }

    #[test]
    fn bagged_heatmap_is_zero_when_no_member_flags() {
        let detector = bag_fixture();
        let Detector::Bagged(bag) = &detector else { unreachable!() };
        let mut rng = DetRng::stream(84, "explain/bag-zero", 0);
        let mut found = false;
        for _ in 0..500 {
            let x = t1(&[rng.uniform(0.0, 0.6), rng.uniform(0.0, 0.6)]);
            let standardized: Vec<f64> = bag
                .member_scores(&x)
                .unwrap()
                .iter()
                .zip(&bag.standardizers)
                .map(|(&r, s)| s.apply(r))
                .collect();
            if standardized.iter().all(|&z| z <= 0.0) {
                let h = explain(&detector, &x, &LrpConfig::default(), "s").unwrap();
                assert!(h.values.values().iter().all(|&v| v == 0.0));
                found = true;
                break;
            }
        }
        assert!(found, "no all-inlying sample found");
    }
}
