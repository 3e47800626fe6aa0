use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use hanslens_core::detectors::{
    random_backbone, AutoencoderModel, BaggedModel, DeepOneClassModel, KdeModel,
};
use hanslens_core::eval::roc_auc;
use hanslens_core::linalg::inverse_sqrt_shifted;
use hanslens_core::lrp::{explain, LrpConfig};
use hanslens_core::neural::train::reconstruction_gradient;
use hanslens_core::neural::Layer;
use hanslens_core::rng::DetRng;
use hanslens_core::tensor::Tensor;
use hanslens_core::Detector;

fn t2(rows: usize, cols: usize, rng: &mut DetRng) -> Tensor {
    Tensor::from_rows(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
}

fn fixtures() -> (Detector, Detector, Tensor) {
    let mut rng = DetRng::stream(99, "bench/fixtures", 0);
    let dim = 256;
    let kde = KdeModel::new(t2(100, dim, &mut rng), 0.3).unwrap();

    let auto = AutoencoderModel::from_layers(vec![
        Layer::linear(t2(64, dim, &mut rng), Some(Tensor::zeros(vec![64]))).unwrap(),
        Layer::Relu,
        Layer::linear(t2(dim, 64, &mut rng), Some(Tensor::zeros(vec![dim]))).unwrap(),
    ])
    .unwrap();
    let deep = {
        let extractor = random_backbone(dim, &[64, 32], 5).unwrap();
        let mut eye = Tensor::zeros(vec![32, 32]);
        for i in 0..32 {
            eye.values_mut()[i * 32 + i] = 1.0;
        }
        DeepOneClassModel::new(extractor, dim, eye, 0.1).unwrap()
    };
    let train = t2(100, dim, &mut rng);
    let standardizers = BaggedModel::fit_standardizers(&kde, &auto, &deep, &train).unwrap();
    let bag = BaggedModel::new(kde.clone(), auto, deep, standardizers);
    let x = t2(1, dim, &mut rng).reshaped(vec![dim]).unwrap();
    (Detector::Kde(kde), Detector::Bagged(bag), x)
}

fn bench_scoring(c: &mut Criterion) {
    let (kde, bag, x) = fixtures();
    c.bench_function("kde_score_100x256", |b| {
        b.iter(|| kde.score(black_box(&x)).unwrap())
    });
    c.bench_function("bag_score_100x256", |b| {
        b.iter(|| bag.score(black_box(&x)).unwrap())
    });
}

fn bench_explanation(c: &mut Criterion) {
    let (kde, bag, x) = fixtures();
    let config = LrpConfig::default();
    c.bench_function("kde_explain_100x256", |b| {
        b.iter(|| explain(black_box(&kde), black_box(&x), &config, "bench").unwrap())
    });
    c.bench_function("bag_explain_100x256", |b| {
        b.iter(|| explain(black_box(&bag), black_box(&x), &config, "bench").unwrap())
    });
}

fn bench_whitening(c: &mut Criterion) {
    let mut rng = DetRng::stream(99, "bench/whitening", 0);
    let dim = 64;
    let a = t2(4 * dim, dim, &mut rng);
    let mut s = vec![0.0; dim * dim];
    for r in 0..4 * dim {
        let row = a.row(r);
        for i in 0..dim {
            for j in 0..dim {
                s[i * dim + j] += row[i] * row[j] / (4 * dim) as f64;
            }
        }
    }
    let moment = Tensor::from_rows(dim, dim, s).unwrap();
    c.bench_function("whitening_inverse_sqrt_64", |b| {
        b.iter(|| inverse_sqrt_shifted(black_box(&moment), 0.1).unwrap())
    });
}

fn bench_training_step(c: &mut Criterion) {
    let mut rng = DetRng::stream(99, "bench/train", 0);
    let dim = 256;
    let layers = vec![
        Layer::linear(t2(128, dim, &mut rng), Some(Tensor::zeros(vec![128]))).unwrap(),
        Layer::Relu,
        Layer::linear(t2(dim, 128, &mut rng), Some(Tensor::zeros(vec![dim]))).unwrap(),
    ];
    let batch: Vec<Tensor> = (0..32)
        .map(|_| t2(1, dim, &mut rng).reshaped(vec![dim]).unwrap())
        .collect();
    c.bench_function("reconstruction_gradient_batch32", |b| {
        b.iter(|| reconstruction_gradient(black_box(&layers), black_box(&batch)).unwrap())
    });
}

fn bench_roc(c: &mut Criterion) {
    let mut rng = DetRng::stream(99, "bench/roc", 0);
    let scores: Vec<f64> = (0..2000).map(|_| rng.normal()).collect();
    let labels: Vec<u8> = (0..2000).map(|i| (i % 3 == 0) as u8).collect();
    c.bench_function("roc_auc_2000", |b| {
        b.iter(|| roc_auc(black_box(&scores), black_box(&labels)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_scoring,
    bench_explanation,
    bench_whitening,
    bench_training_step,
    bench_roc
);
criterion_main!(benches);
