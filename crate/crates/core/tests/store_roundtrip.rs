use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ensdiv_core::store::{write_data_dir, DataDir};
use ensdiv_core::synth::{generate, SynthConfig, SynthSet};
use ensdiv_core::Error;

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn synth_dir(dir: &Path, confidences: bool) {
    let config = SynthConfig {
        models: 4,
        examples: 60,
        classes: 5,
        accuracy: 0.7,
        correlation: 0.4,
        seed: 9,
        confidences,
        sets: vec![
            SynthSet {
                set_id: "benign".into(),
                accuracy: None,
            },
            SynthSet {
                set_id: "pgd".into(),
                accuracy: Some(0.3),
            },
        ],
    };
    generate(&config).unwrap().write(dir).unwrap();
}

#[test]
fn write_of_load_is_byte_identical() {
    for confidences in [true, false] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        synth_dir(a.path(), confidences);
        let data = DataDir::open(a.path()).unwrap();
        let sets: Vec<_> = data
            .set_ids()
            .unwrap()
            .iter()
            .map(|s| data.load_set(s).unwrap())
            .collect();
        write_data_dir(b.path(), data.labels(), data.models(), &sets).unwrap();
        let (ta, tb) = (tree(a.path()), tree(b.path()));
        assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
        for (k, v) in &ta {
            assert!(v == &tb[k], "{k} differs");
        }
    }
}

#[test]
fn oracle_and_accuracy_agree_with_raw_lines() {
    let dir = tempfile::tempdir().unwrap();
    synth_dir(dir.path(), true);
    let data = DataDir::open(dir.path()).unwrap();
    let set = data.load_set("pgd").unwrap();
    let team = set.model_ids().to_vec();
    let oracle = set.derive_oracle(&team).unwrap();
    for (i, m) in team.iter().enumerate() {
        let text = fs::read_to_string(
            dir.path()
                .join("predictions/pgd")
                .join(format!("{m}.jsonl")),
        )
        .unwrap();
        let mut right = 0;
        for (j, line) in text.lines().enumerate() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let ok = v["true_label"] == v["predicted_label"];
            assert_eq!(oracle.get(j, i), ok);
            right += usize::from(ok);
        }
        assert_eq!(
            set.benign_accuracy(m).unwrap(),
            right as f64 / set.len() as f64
        );
        let col = oracle.column(i);
        assert_eq!(
            set.benign_accuracy(m).unwrap(),
            col.iter().filter(|&&b| b).count() as f64 / col.len() as f64
        );
    }
}

fn edit(path: &Path, f: impl FnOnce(String) -> String) {
    let text = fs::read_to_string(path).unwrap();
    fs::write(path, f(text)).unwrap();
}

#[test]
fn misaligned_example_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    synth_dir(dir.path(), false);
    let file = dir.path().join("predictions/benign/dm1.jsonl");
    edit(&file, |t| {
        t.lines().skip(1).map(|l| format!("{l}\n")).collect()
    });
    let err = DataDir::open(dir.path())
        .unwrap()
        .load_set("benign")
        .unwrap_err();
    assert!(matches!(err, Error::AlignmentError { .. }), "{err:?}");
}

#[test]
fn non_stochastic_row_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    synth_dir(dir.path(), false);
    let file = dir.path().join("predictions/benign/tm.jsonl");
    edit(&file, |t| {
        let mut lines: Vec<String> = t.lines().map(String::from).collect();
        for line in &mut lines {
            let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
            v["confidence"] = serde_json::json!([0.5, 0.5, 0.5, 0.0, 0.0]);
            *line = v.to_string();
        }
        lines.join("\n") + "\n"
    });
    let err = DataDir::open(dir.path())
        .unwrap()
        .load_set("benign")
        .unwrap_err();
    assert!(matches!(err, Error::StochasticityError { .. }), "{err:?}");
}

#[test]
fn missing_model_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    synth_dir(dir.path(), false);
    fs::remove_file(dir.path().join("predictions/pgd/dm2.jsonl")).unwrap();
    let err = DataDir::open(dir.path())
        .unwrap()
        .load_set("pgd")
        .unwrap_err();
    assert!(matches!(err, Error::MissingFile(_)), "{err:?}");
}

#[test]
fn unknown_label_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    synth_dir(dir.path(), false);
    let file = dir.path().join("predictions/benign/dm3.jsonl");
    edit(&file, |t| {
        t.replacen("\"predicted_label\":\"c", "\"predicted_label\":\"zz", 1)
    });
    let err = DataDir::open(dir.path())
        .unwrap()
        .load_set("benign")
        .unwrap_err();
    assert!(!matches!(err, Error::AlignmentError { .. }), "{err:?}");
    assert!(err.to_string().contains("zz"), "{err}");
}
