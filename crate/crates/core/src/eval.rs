//! Detection accuracy, explanation accuracy, Clever Hans scoring and class
//! ranking reports.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::detectors::Detector;
use crate::error::{Error, Result};
use crate::lrp::{explain, LrpConfig};
use crate::tensor::{cosine_similarity, Tensor};

/// Area under the ROC curve via the rank statistic: the fraction of
/// (outlier, inlier) pairs where the outlier scores strictly higher, ties
/// counted one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if !scores.iter().all(|s| s.is_finite()) {
        return Err(Error::NonFinite("roc scores".into()));
    }
    let mut pos = 0usize;
    let mut neg = 0usize;
    for &l in labels {
        match l {
            0 => neg += 1,
            1 => pos += 1,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "labels must be 0 or 1, got {other}"
                )))
            }
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument(
            "roc needs at least one sample of each label".into(),
        ));
    }

    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // 1-based ranks with ties averaged
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }

    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 1)
        .map(|(r, _)| r)
        .sum();
    let p = pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// Cosine similarity between the rectified heatmap and a binary ground-truth
/// mask; zero when the rectified heatmap vanishes.
pub fn explanation_accuracy(heatmap: &Tensor, mask: &Tensor) -> Result<f64> {
    if heatmap.shape() != mask.shape() {
        return Err(Error::ShapeMismatch(format!(
            "heatmap shape {:?} does not match mask shape {:?}",
            heatmap.shape(),
            mask.shape()
        )));
    }
    if !mask.values().iter().all(|&v| v == 0.0 || v == 1.0) {
        return Err(Error::InvalidArgument("mask is not binary".into()));
    }
    if !mask.values().iter().any(|&v| v == 1.0) {
        return Err(Error::InvalidArgument("mask has no marked pixels".into()));
    }
    let rectified: Vec<f64> = heatmap.values().iter().map(|&v| v.max(0.0)).collect();
    if rectified.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    // the cosine of nonnegative vectors lies in [0, 1]; clamp away the
    // final-ulp excess that rounding can introduce
    Ok(cosine_similarity(&rectified, mask.values()).clamp(0.0, 1.0))
}

/// Detection accuracy minus explanation accuracy; both on the [0, 1] scale.
pub fn clever_hans_score(detection: f64, explanation: f64) -> Result<f64> {
    for (name, v) in [("detection", detection), ("explanation", explanation)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!(
                "{name} accuracy {v} outside [0, 1]"
            )));
        }
    }
    Ok(detection - explanation)
}

/// Per-class evaluation outcome. The explanation fields are absent when the
/// class has no masked test outliers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassRecord {
    pub class: String,
    #[serde(skip)]
    pub detector: String,
    pub roc: f64,
    pub expl: Option<f64>,
    pub ch: Option<f64>,
    pub n_test: usize,
    pub n_explained: usize,
}

/// Score the test split, explain every masked test outlier, and combine the
/// two accuracies into the Clever Hans score.
pub fn evaluate_class(
    detector: &Detector,
    dataset: &Dataset,
    config: &LrpConfig,
) -> Result<ClassRecord> {
    let mut scores = Vec::with_capacity(dataset.test.len());
    for sample in &dataset.test {
        scores.push(detector.score(&sample.image)?);
    }
    let labels = Dataset::labels(&dataset.test);
    let roc = roc_auc(&scores, &labels)?;

    let mut cosines = Vec::new();
    for sample in &dataset.test {
        let (1, Some(mask)) = (sample.label, &sample.mask) else {
            continue;
        };
        let heatmap = explain(detector, &sample.image, config, &sample.id)?;
        cosines.push(explanation_accuracy(&heatmap.values, mask)?);
    }

    let (expl, ch) = if cosines.is_empty() {
        (None, None)
    } else {
        // deterministic reduction: plain sum in index order
        let mean = cosines.iter().sum::<f64>() / cosines.len() as f64;
        (Some(mean), Some(clever_hans_score(roc, mean)?))
    };

    Ok(ClassRecord {
        class: dataset.class_name.clone(),
        detector: detector.kind().as_str().to_string(),
        roc,
        expl,
        ch,
        n_test: dataset.test.len(),
        n_explained: cosines.len(),
    })
}

/// Top-k records by Clever Hans score, descending, ties broken by class
/// name. Records without a score are not ranked.
pub fn rank_classes(records: &[ClassRecord], k: usize) -> Vec<ClassRecord> {
    let mut ranked: Vec<ClassRecord> = records.iter().filter(|r| r.ch.is_some()).cloned().collect();
    ranked.sort_by(|a, b| {
        let (ca, cb) = (a.ch.expect("filtered"), b.ch.expect("filtered"));
        cb.partial_cmp(&ca)
            .expect("finite scores")
            .then_with(|| a.class.cmp(&b.class))
    });
    ranked.truncate(k);
    ranked
}

/// Evaluation results for one detector over a set of classes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub detector: String,
    pub classes: Vec<ClassRecord>,
}

impl EvaluationReport {
    pub fn new(detector: String, classes: Vec<ClassRecord>) -> Self {
        EvaluationReport { detector, classes }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Dataset(format!("report serialization: {e}")))
    }

    /// Aligned plain-text table; accuracies on the percentage scale.
    pub fn render_table(&self, top_k: usize) -> String {
        let pct = |v: Option<f64>| match v {
            Some(v) => format!("{:.1}", v * 100.0),
            None => "-".to_string(),
        };
        let mut out = String::new();
        out.push_str(&format!("detector: {}\n", self.detector));
        out.push_str(&format!(
            "{:<16} {:>10} {:>12} {:>12} {:>7} {:>7}\n",
            "class", "detection", "explanation", "clever-hans", "n_test", "n_expl"
        ));
        for r in &self.classes {
            out.push_str(&format!(
                "{:<16} {:>10} {:>12} {:>12} {:>7} {:>7}\n",
                r.class,
                pct(Some(r.roc)),
                pct(r.expl),
                pct(r.ch),
                r.n_test,
                r.n_explained
            ));
        }
        let top = rank_classes(&self.classes, top_k);
        if !top.is_empty() {
            out.push_str("\ntop classes by clever-hans score:\n");
            for (i, r) in top.iter().enumerate() {
                out.push_str(&format!("{}. {:<16} {}\n", i + 1, r.class, pct(r.ch)));
            }
        }
        out
    }
}
