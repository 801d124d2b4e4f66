#![allow(dead_code)]

use ensdiv_core::store::{AttackSet, LabelSpace, ModelPredictions};

pub fn labels(n: usize) -> LabelSpace {
    LabelSpace::new((0..n).map(|c| format!("c{c}"))).unwrap()
}

pub fn example_ids(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j:06}")).collect()
}

/// Builds a set from raw label columns, without confidences.
pub fn label_set(truth: &[usize], models: &[(&str, Vec<usize>)], num_labels: usize) -> AttackSet {
    let preds = models
        .iter()
        .map(|(id, predicted)| {
            (
                id.to_string(),
                ModelPredictions {
                    predicted: predicted.clone(),
                    confidences: None,
                },
            )
        })
        .collect();
    AttackSet::new(
        "benign",
        labels(num_labels),
        example_ids(truth.len()),
        truth.to_vec(),
        preds,
    )
    .unwrap()
}

/// Binary set where true label is 0 and a model is wrong exactly on `errors`.
pub fn error_set(d: usize, models: &[(&str, Vec<usize>)]) -> AttackSet {
    let cols: Vec<(&str, Vec<usize>)> = models
        .iter()
        .map(|(id, errs)| {
            let mut col = vec![0; d];
            for &j in errs {
                col[j] = 1;
            }
            (*id, col)
        })
        .collect();
    label_set(&vec![0; d], &cols, 2)
}
