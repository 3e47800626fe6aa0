//! Exit codes, overwrite protection, and the score CSV checked against a
//! by-hand recomputation of the outlier score.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use hanslens_core::detectors::{load_detector, Detector};
use hanslens_core::data::load_manifest;

fn hanslens() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hanslens"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hanslens_cli_{name}"));
    fs::remove_dir_all(&dir).ok();
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn synth(dir: &Path, kind: &str, seed: u64) -> PathBuf {
    let out = dir.join("data");
    let status = hanslens()
        .args(["synth", "--kind", kind, "--seed", &seed.to_string()])
        .args(["--n-train", "30", "--n-val", "12", "--n-test", "12"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    out.join("manifest.json")
}

#[test]
fn unknown_flags_exit_with_usage_code() {
    let code = hanslens()
        .args(["synth", "--mystery-flag", "1"])
        .output()
        .unwrap()
        .status
        .code();
    assert_eq!(code, Some(2));
}

#[test]
fn bad_kind_exits_with_config_code() {
    let dir = workdir("bad_kind");
    let code = hanslens()
        .args(["synth", "--kind", "mystery", "--out"])
        .arg(dir.join("d"))
        .output()
        .unwrap()
        .status
        .code();
    assert_eq!(code, Some(3));
}

#[test]
fn missing_data_exits_with_io_code() {
    let dir = workdir("missing_data");
    let code = hanslens()
        .args(["fit", "--model", "kde", "--data"])
        .arg(dir.join("absent.json"))
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
        .status
        .code();
    assert_eq!(code, Some(4));
}

#[test]
fn shape_mismatch_between_model_and_data_exits_with_data_code() {
    let dir = workdir("shape_mismatch");
    let images = synth(&dir, "stripe", 2);
    let fit = hanslens()
        .args(["fit", "--model", "kde", "--data"])
        .arg(&images)
        .arg("--out")
        .arg(dir.join("fit"))
        .status()
        .unwrap();
    assert!(fit.success());

    // 1x2 samples cannot be scored by a model fitted on 16x16 images
    let points = hanslens()
        .args(["synth", "--kind", "cartoon2d", "--seed", "2"])
        .args(["--n-train", "10", "--n-val", "4", "--n-test", "4"])
        .arg("--out")
        .arg(dir.join("points"))
        .status()
        .unwrap();
    assert!(points.success());
    let code = hanslens()
        .args(["score", "--data"])
        .arg(dir.join("points/manifest.json"))
        .arg("--model")
        .arg(dir.join("fit/detector.json"))
        .arg("--out")
        .arg(dir.join("scores"))
        .output()
        .unwrap()
        .status
        .code();
    assert_eq!(code, Some(5));
}

#[test]
fn overwrite_without_force_is_refused() {
    let dir = workdir("overwrite");
    synth(&dir, "stripe", 3);
    let rerun = hanslens()
        .args(["synth", "--kind", "stripe", "--seed", "3", "--out"])
        .arg(dir.join("data"))
        .output()
        .unwrap();
    assert_eq!(rerun.status.code(), Some(7));

    let forced = hanslens()
        .args(["synth", "--kind", "stripe", "--seed", "3", "--force"])
        .args(["--n-train", "30", "--n-val", "12", "--n-test", "12"])
        .arg("--out")
        .arg(dir.join("data"))
        .status()
        .unwrap();
    assert!(forced.success());
}

#[test]
fn score_csv_matches_hand_recomputation() {
    let dir = workdir("hand_score");
    let manifest = synth(&dir, "stripe", 11);
    let fit = hanslens()
        .args(["fit", "--model", "kde", "--seed", "11", "--data"])
        .arg(&manifest)
        .arg("--out")
        .arg(dir.join("fit"))
        .status()
        .unwrap();
    assert!(fit.success());
    let score = hanslens()
        .args(["score", "--data"])
        .arg(&manifest)
        .arg("--model")
        .arg(dir.join("fit/detector.json"))
        .arg("--out")
        .arg(dir.join("scores"))
        .status()
        .unwrap();
    assert!(score.success());

    let (detector, _) = load_detector(&dir.join("fit/detector.json")).unwrap();
    let Detector::Kde(model) = detector else { panic!("expected kde") };
    let dataset = load_manifest(&manifest).unwrap();

    let csv = fs::read_to_string(dir.join("scores/scores.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("sample_id,score"));
    let mut checked = 0;
    for (line, sample) in lines.zip(&dataset.test) {
        let (id, printed) = line.split_once(',').unwrap();
        assert_eq!(id, sample.id);
        let printed: f64 = printed.parse().unwrap();

        // the score definition, written out by hand: soft minimum over
        // squared distances to the stored training points
        let gamma = model.stiffness();
        let points = model.training_points();
        let x = sample.image.values();
        let distances: Vec<f64> = (0..points.rows())
            .map(|j| {
                points
                    .row(j)
                    .iter()
                    .zip(x)
                    .map(|(t, v)| (v - t) * (v - t))
                    .sum::<f64>()
            })
            .collect();
        let min = distances.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for d in &distances {
            total += (-gamma * (d - min)).exp();
        }
        let by_hand = min - total.ln() / gamma;
        assert_eq!(
            printed.to_bits(),
            by_hand.to_bits(),
            "sample {}: csv {printed} vs hand {by_hand}",
            sample.id
        );
        checked += 1;
    }
    assert_eq!(checked, 24);
}

#[test]
fn evaluate_reports_zero_clever_hans_for_an_oracle_fixture() {
    use hanslens_core::data::{write_dataset, Dataset, Sample};
    use hanslens_core::detectors::{save_detector, KdeModel};
    use hanslens_core::tensor::Tensor;

    let dir = workdir("oracle_eval");
    // inliers sit on the single training point (to 8-bit precision); each
    // outlier differs on exactly its masked pixel
    let base = [128.0 / 255.0; 4];
    let sample = |id: &str, vals: &[f64], label: u8, mask: Option<[f64; 4]>| Sample {
        id: id.into(),
        image: Tensor::new(vec![2, 2], vals.to_vec()).unwrap(),
        label,
        mask: mask.map(|m| Tensor::new(vec![2, 2], m.to_vec()).unwrap()),
    };
    let mut poked = base;
    poked[2] = 230.0 / 255.0;
    let dataset = Dataset {
        class_name: "oracle".into(),
        train: vec![sample("train/a", &base, 0, None)],
        validation: vec![sample("val/a", &base, 0, None)],
        validation_outliers: vec![],
        test: vec![
            sample("test/in", &base, 0, None),
            sample("test/out", &poked, 1, Some([0.0, 0.0, 1.0, 0.0])),
        ],
    };
    let manifest = write_dataset(&dataset, &dir.join("data")).unwrap();
    let detector = Detector::Kde(
        KdeModel::new(Tensor::from_rows(1, 4, base.to_vec()).unwrap(), 2.0).unwrap(),
    );
    let envelope = save_detector(&dir.join("fit"), "detector", &detector, "oracle").unwrap();

    let status = hanslens()
        .args(["evaluate", "--data"])
        .arg(&manifest)
        .arg("--model")
        .arg(&envelope)
        .arg("--out")
        .arg(dir.join("eval"))
        .status()
        .unwrap();
    assert!(status.success());

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("eval/report.json")).unwrap()).unwrap();
    let row = &report["classes"][0];
    assert_eq!(row["roc"].as_f64().unwrap(), 1.0);
    assert!((row["expl"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(row["ch"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn explain_writes_a_pair_per_outlier_and_respects_threads_cap() {
    let dir = workdir("explain_pairs");
    let manifest = synth(&dir, "dotted_line", 5);
    let fit = hanslens()
        .args(["fit", "--model", "kde", "--data"])
        .arg(&manifest)
        .arg("--out")
        .arg(dir.join("fit"))
        .status()
        .unwrap();
    assert!(fit.success());

    let run = |out: &Path, threads: &str| {
        let status = hanslens()
            .env("HANSLENS_THREADS", threads)
            .args(["explain", "--data"])
            .arg(&manifest)
            .arg("--model")
            .arg(dir.join("fit/detector.json"))
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    };
    run(&dir.join("heat1"), "1");
    run(&dir.join("heat4"), "4");

    let count = |ext: &str, root: &Path| {
        fs::read_dir(root)
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .path()
                    .extension()
                    .is_some_and(|x| x == ext)
            })
            .count()
    };
    assert_eq!(count("hm", &dir.join("heat1")), 12);
    assert_eq!(count("pgm", &dir.join("heat1")), 12);

    // thread cap must not change the artifacts
    for entry in fs::read_dir(dir.join("heat1")).unwrap() {
        let path = entry.unwrap().path();
        if path.file_name().is_some_and(|n| n == "run_meta.json") {
            continue;
        }
        let twin = dir.join("heat4").join(path.file_name().unwrap());
        assert_eq!(
            fs::read(&path).unwrap(),
            fs::read(&twin).unwrap(),
            "{path:?} differs under a different thread cap"
        );
    }
}
