//! Regenerates the checked-in test fixtures under `crates/cli/tests/fixtures/`.
//!
//! `cargo run -p ensdiv-cli --example make_fixtures`

use std::fs;
use std::path::{Path, PathBuf};

use ensdiv_core::store::{AttackSet, ModelPredictions};
use ensdiv_core::synth::{generate, SynthConfig, SynthSet};

fn fixtures_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
}

fn set(id: &str, accuracy: Option<f64>) -> SynthSet {
    SynthSet {
        set_id: id.into(),
        accuracy,
    }
}

fn three_model(root: &Path) {
    let config = SynthConfig {
        models: 3,
        examples: 100,
        classes: 10,
        accuracy: 0.8,
        correlation: 0.2,
        seed: 11,
        confidences: true,
        sets: vec![set("benign", None), set("fgsm", Some(0.55))],
    };
    let dir = root.join("three_model");
    let _ = fs::remove_dir_all(&dir);
    generate(&config).unwrap().write(&dir).unwrap();
    golden(&dir, &root.join("three_model_golden"));
}

fn cli(args: &[&str]) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["ensdiv"];
    full.extend_from_slice(args);
    let code = ensdiv_cli::run_from(full, &mut out, &mut err);
    assert_eq!(code, 0, "{args:?}: {}", String::from_utf8_lossy(&err));
}

fn golden(data: &Path, dest: &Path) {
    let _ = fs::remove_dir_all(dest);
    fs::create_dir_all(dest).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let d = data.to_str().unwrap();
    let pool = dest.join("pool.json");
    let pool = pool.to_str().unwrap();
    let out = tmp.path().to_str().unwrap();
    cli(&[
        "--data-dir",
        d,
        "teams",
        "--min-size",
        "2",
        "--output",
        pool,
    ]);
    cli(&[
        "--data-dir",
        d,
        "eval",
        "--pool",
        pool,
        "--method",
        "majority,plurality,mean,weighted",
        "--output-dir",
        out,
    ]);
    cli(&[
        "--data-dir",
        d,
        "report",
        "--pool",
        pool,
        "--output-dir",
        out,
    ]);
    for name in ["report.csv", "kappa_error.csv", "coincidence.csv"] {
        fs::copy(tmp.path().join(name), dest.join(name)).unwrap();
    }
}

/// Copies `source` into `model` on every example where `keep(j)` holds.
fn blend(
    set: &AttackSet,
    source: &str,
    model: &str,
    keep: impl Fn(usize) -> bool,
) -> ModelPredictions {
    let src = set.predictions(source).unwrap();
    let own = set.predictions(model).unwrap();
    let pick = |j: usize| if keep(j) { src } else { own };
    ModelPredictions {
        predicted: (0..set.len()).map(|j| pick(j).predicted[j]).collect(),
        confidences: own.confidences.as_ref().map(|_| {
            (0..set.len())
                .map(|j| pick(j).confidences.as_ref().unwrap()[j].clone())
                .collect()
        }),
    }
}

/// tm, dm1 and dm3 err independently; dm2 nearly copies tm and dm4 copies
/// tm on half of the examples.
fn ordering(root: &Path) {
    let config = SynthConfig {
        models: 5,
        examples: 200,
        classes: 10,
        accuracy: 0.8,
        correlation: 0.0,
        seed: 5,
        confidences: true,
        sets: vec![set("benign", None)],
    };
    let mut data = generate(&config).unwrap();
    let base = data.sets.pop().unwrap();
    let preds = base
        .model_ids()
        .iter()
        .map(|m| {
            let p = match m.as_str() {
                "dm2" => blend(&base, "tm", m, |j| j % 10 != 0),
                "dm4" => blend(&base, "tm", m, |j| j % 2 == 0),
                _ => base.predictions(m).unwrap().clone(),
            };
            (m.clone(), p)
        })
        .collect();
    let set = AttackSet::new(
        "benign",
        base.labels().clone(),
        base.example_ids().to_vec(),
        base.true_labels().to_vec(),
        preds,
    )
    .unwrap();
    let dir = root.join("ordering");
    let _ = fs::remove_dir_all(&dir);
    ensdiv_core::store::write_data_dir(&dir, &data.labels, &data.models, &[set]).unwrap();
}

fn main() {
    let root = fixtures_root();
    fs::create_dir_all(&root).unwrap();
    three_model(&root);
    ordering(&root);
    println!("fixtures written to {}", root.display());
}
