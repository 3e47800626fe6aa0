//! Neuralized anomaly detectors with relevance-based explanations and
//! Clever Hans auditing.
//!
//! Four detectors (kernel density, autoencoder, deep one-class, and their
//! bag) share a common layered form: feature extraction, distance
//! computation, pooling. Scoring runs the stack forward; explanation runs a
//! per-layer relevance backward pass over the recorded activations. The
//! evaluation module compares pixel explanations against ground-truth
//! anomaly masks and reports the gap between detection and explanation
//! accuracy.

pub mod data;
pub mod detectors;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod lrp;
pub mod neural;
pub mod rng;
pub mod tensor;

pub use data::{Dataset, Sample, SynthSpec};
pub use detectors::{Detector, DetectorKind};
pub use error::{Error, Result};
pub use eval::{ClassRecord, EvaluationReport};
pub use lrp::{explain, Heatmap, LrpConfig};
pub use neural::{ActivationTrace, Layer, NeuralizedModel};
pub use tensor::Tensor;
