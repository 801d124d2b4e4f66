//! Synthetic classifier pools with controlled accuracy and error correlation.
//!
//! For each example a true label is drawn uniformly. With probability `r`
//! the example uses a shared error event: one Bernoulli(1 - p) draw decides
//! whether every model is wrong, and all wrong models output the same wrong
//! label. Otherwise each model errs independently with probability `1 - p`
//! and picks its wrong label uniformly. Per-model accuracy is `p` in
//! expectation and the pairwise correlation of correctness (rho) is `r`.
//!
//! Confidence rows put a uniform(0.5, 0.95) mass on the predicted label and
//! split the rest at random, so the stored label is always the strict argmax.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::store::{write_data_dir, AttackSet, LabelSpace, ModelPredictions, ModelRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSet {
    pub set_id: String,
    /// Overrides the base accuracy for this set.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub models: usize,
    pub examples: usize,
    pub classes: usize,
    pub accuracy: f64,
    pub correlation: f64,
    pub seed: u64,
    pub confidences: bool,
    pub sets: Vec<SynthSet>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            models: 3,
            examples: 100,
            classes: 10,
            accuracy: 0.8,
            correlation: 0.0,
            seed: 0,
            confidences: true,
            sets: vec![SynthSet {
                set_id: "benign".into(),
                accuracy: None,
            }],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub labels: LabelSpace,
    pub models: Vec<ModelRecord>,
    pub sets: Vec<AttackSet>,
}

impl SynthData {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_data_dir(dir, &self.labels, &self.models, &self.sets)
    }
}

/// `tm`, `dm1`, `dm2`, ...
pub fn synth_model_id(index: usize) -> String {
    if index == 0 {
        "tm".to_string()
    } else {
        format!("dm{index}")
    }
}

fn check_accuracy(p: f64, classes: usize) -> Result<()> {
    if !(p > 1.0 / classes as f64 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "accuracy {p} must lie in (1/{classes}, 1]"
        )));
    }
    Ok(())
}

pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    if config.models == 0 {
        return Err(Error::InvalidParameter("need at least one model".into()));
    }
    if config.examples == 0 {
        return Err(Error::InvalidParameter("need at least one example".into()));
    }
    if config.classes < 2 {
        return Err(Error::InvalidParameter("need at least two classes".into()));
    }
    check_accuracy(config.accuracy, config.classes)?;
    if !(0.0..=1.0).contains(&config.correlation) {
        return Err(Error::InvalidParameter(format!(
            "correlation {} must lie in [0, 1]",
            config.correlation
        )));
    }
    if config.sets.is_empty() {
        return Err(Error::InvalidParameter("need at least one set".into()));
    }
    for s in &config.sets {
        if let Some(p) = s.accuracy {
            check_accuracy(p, config.classes)?;
        }
    }

    let labels = LabelSpace::new((0..config.classes).map(|c| format!("c{c}")))?;
    let models: Vec<ModelRecord> = (0..config.models)
        .map(|i| {
            ModelRecord::new(synth_model_id(i), i == 0)
                .with_tag("algorithm", "synthetic")
                .with_tag("member", i as u64)
        })
        .collect();
    let width = (config.examples - 1).to_string().len();
    let example_ids: Vec<String> = (0..config.examples)
        .map(|j| format!("x{j:0width$}"))
        .collect();

    let mut sets = Vec::with_capacity(config.sets.len());
    for (stream, entry) in config.sets.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(stream as u64);
        let p = entry.accuracy.unwrap_or(config.accuracy);
        let (truth, predicted) = draw_labels(&mut rng, config, p);
        let preds = predicted
            .into_iter()
            .enumerate()
            .map(|(i, predicted)| {
                let confidences = config.confidences.then(|| {
                    predicted
                        .iter()
                        .map(|&label| confidence_row(&mut rng, label, config.classes))
                        .collect()
                });
                (
                    synth_model_id(i),
                    ModelPredictions {
                        predicted,
                        confidences,
                    },
                )
            })
            .collect();
        sets.push(AttackSet::new(
            entry.set_id.clone(),
            labels.clone(),
            example_ids.clone(),
            truth,
            preds,
        )?);
    }
    Ok(SynthData {
        labels,
        models,
        sets,
    })
}

fn wrong_label(rng: &mut ChaCha8Rng, truth: usize, classes: usize) -> usize {
    let w = rng.gen_range(0..classes as u64 - 1) as usize;
    if w >= truth {
        w + 1
    } else {
        w
    }
}

fn draw_labels(
    rng: &mut ChaCha8Rng,
    config: &SynthConfig,
    p: f64,
) -> (Vec<usize>, Vec<Vec<usize>>) {
    let (d, m, l) = (config.examples, config.models, config.classes);
    let mut truth = Vec::with_capacity(d);
    let mut predicted = vec![Vec::with_capacity(d); m];
    for _ in 0..d {
        let t = rng.gen_range(0..l as u64) as usize;
        truth.push(t);
        if rng.gen_bool(config.correlation) {
            let label = if rng.gen_bool(1.0 - p) {
                wrong_label(rng, t, l)
            } else {
                t
            };
            predicted.iter_mut().for_each(|col| col.push(label));
        } else {
            for col in predicted.iter_mut() {
                let label = if rng.gen_bool(1.0 - p) {
                    wrong_label(rng, t, l)
                } else {
                    t
                };
                col.push(label);
            }
        }
    }
    (truth, predicted)
}

fn confidence_row(rng: &mut ChaCha8Rng, label: usize, classes: usize) -> Vec<f64> {
    let top: f64 = rng.gen_range(0.5..0.95);
    let weights: Vec<f64> = (0..classes - 1).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let rest = 1.0 - top;
    let mut row = Vec::with_capacity(classes);
    let mut others = weights.iter().map(|w| rest * w / total);
    for c in 0..classes {
        if c == label {
            row.push(top);
        } else {
            row.push(others.next().expect("classes - 1 weights"));
        }
    }
    row
}
