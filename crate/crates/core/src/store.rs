//! Prediction records on disk and in memory.
//!
//! A data directory looks like:
//!
//! ```text
//! labels.json                          {"labels": ["cat", "dog", ...]}
//! models.json                          [{model_id, display_name, is_target, structural_tags}, ...]
//! predictions/<set_id>/<model_id>.jsonl
//! ```
//!
//! Each JSONL line is
//! `{"example_id": str, "true_label": str, "predicted_label": str, "confidence": [f64; L] | null}`.
//! Lines are written sorted by `example_id` and floats use the shortest
//! representation that round-trips, so `write(load(dir))` is byte-identical
//! for canonical input.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on confidence row sums.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-6;

pub const LABELS_FILE: &str = "labels.json";
pub const MODELS_FILE: &str = "models.json";
pub const PREDICTIONS_DIR: &str = "predictions";

/// Ordered set of class names. Index `i` is the class `labels[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::schema(
                LABELS_FILE,
                format!("need at least 2 labels, got {}", labels.len()),
            ));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, name) in labels.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::schema(
                    LABELS_FILE,
                    format!("duplicate label '{name}'"),
                ));
            }
        }
        Ok(Self { labels, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

#[derive(Serialize, Deserialize)]
struct LabelsFile {
    labels: Vec<String>,
}

/// One entry of `models.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRecord {
    pub model_id: String,
    pub display_name: String,
    pub is_target: bool,
    #[serde(default)]
    pub structural_tags: BTreeMap<String, serde_json::Value>,
    /// Filled in from a benign set, never read from disk.
    #[serde(skip)]
    pub benign_accuracy: Option<f64>,
}

impl ModelRecord {
    pub fn new(model_id: impl Into<String>, is_target: bool) -> Self {
        let model_id = model_id.into();
        Self {
            display_name: model_id.clone(),
            model_id,
            is_target,
            structural_tags: BTreeMap::new(),
            benign_accuracy: None,
        }
    }

    pub fn with_tag(mut self, key: impl Into<String>, value: impl Into<serde_json::Value>) -> Self {
        self.structural_tags.insert(key.into(), value.into());
        self
    }
}

/// One model's outputs over an attack set, aligned with the set's example order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPredictions {
    pub predicted: Vec<usize>,
    /// `d` rows of `L` class supports, or `None` when the model exported labels only.
    pub confidences: Option<Vec<Vec<f64>>>,
}

/// Validated, immutable predictions of several models over one evaluation set.
#[derive(Debug, Clone)]
pub struct AttackSet {
    set_id: String,
    labels: LabelSpace,
    example_ids: Vec<String>,
    true_labels: Vec<usize>,
    model_order: Vec<String>,
    predictions: HashMap<String, ModelPredictions>,
}

impl AttackSet {
    /// Builds a set from in-memory records, checking every alignment and
    /// stochasticity invariant. Examples are reordered ascending by id.
    pub fn new(
        set_id: impl Into<String>,
        labels: LabelSpace,
        example_ids: Vec<String>,
        true_labels: Vec<usize>,
        models: Vec<(String, ModelPredictions)>,
    ) -> Result<Self> {
        let set_id = set_id.into();
        let d = example_ids.len();
        if d == 0 {
            return Err(Error::schema(&set_id, "set has no examples"));
        }
        if true_labels.len() != d {
            return Err(Error::LengthMismatch {
                left: d,
                right: true_labels.len(),
            });
        }
        let mut seen = HashSet::with_capacity(d);
        for id in &example_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::schema(
                    &set_id,
                    format!("duplicate example_id '{id}'"),
                ));
            }
        }
        if let Some(&bad) = true_labels.iter().find(|&&l| l >= labels.len()) {
            return Err(Error::UnknownLabel(format!("index {bad}")));
        }

        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| example_ids[a].cmp(&example_ids[b]));
        let permute = |v: &[usize]| order.iter().map(|&i| v[i]).collect::<Vec<_>>();

        let mut model_order = Vec::with_capacity(models.len());
        let mut predictions = HashMap::with_capacity(models.len());
        for (model_id, preds) in models {
            if preds.predicted.len() != d {
                return Err(Error::AlignmentError {
                    set_id: set_id.clone(),
                    model_id,
                    message: format!("has {} predictions, expected {d}", preds.predicted.len()),
                });
            }
            if let Some(&bad) = preds.predicted.iter().find(|&&l| l >= labels.len()) {
                return Err(Error::UnknownLabel(format!("index {bad}")));
            }
            if let Some(conf) = &preds.confidences {
                if conf.len() != d {
                    return Err(Error::AlignmentError {
                        set_id: set_id.clone(),
                        model_id,
                        message: format!("has {} confidence rows, expected {d}", conf.len()),
                    });
                }
                for (j, row) in conf.iter().enumerate() {
                    check_confidence_row(row, preds.predicted[j], labels.len()).map_err(
                        |message| Error::StochasticityError {
                            model_id: model_id.clone(),
                            example_id: example_ids[j].clone(),
                            message,
                        },
                    )?;
                }
            }
            let canonical = ModelPredictions {
                predicted: permute(&preds.predicted),
                confidences: preds
                    .confidences
                    .map(|c| order.iter().map(|&i| c[i].clone()).collect()),
            };
            if predictions.insert(model_id.clone(), canonical).is_some() {
                return Err(Error::DuplicateModel(model_id));
            }
            model_order.push(model_id);
        }

        Ok(Self {
            true_labels: permute(&true_labels),
            example_ids: order.iter().map(|&i| example_ids[i].clone()).collect(),
            set_id,
            labels,
            model_order,
            predictions,
        })
    }

    pub fn set_id(&self) -> &str {
        &self.set_id
    }

    pub fn labels(&self) -> &LabelSpace {
        &self.labels
    }

    /// Number of examples `d`.
    pub fn len(&self) -> usize {
        self.example_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.example_ids.is_empty()
    }

    pub fn example_ids(&self) -> &[String] {
        &self.example_ids
    }

    pub fn true_labels(&self) -> &[usize] {
        &self.true_labels
    }

    /// Model ids in manifest order.
    pub fn model_ids(&self) -> &[String] {
        &self.model_order
    }

    pub fn contains(&self, model_id: &str) -> bool {
        self.predictions.contains_key(model_id)
    }

    pub fn predictions(&self, model_id: &str) -> Result<&ModelPredictions> {
        self.predictions
            .get(model_id)
            .ok_or_else(|| Error::UnknownModel(model_id.to_string()))
    }

    pub fn predicted_labels(&self, model_id: &str) -> Result<&[usize]> {
        Ok(&self.predictions(model_id)?.predicted)
    }

    pub fn confidences(&self, model_id: &str) -> Result<&[Vec<f64>]> {
        self.predictions(model_id)?
            .confidences
            .as_deref()
            .ok_or_else(|| Error::MissingConfidences(model_id.to_string()))
    }

    pub fn has_confidences(&self, model_id: &str) -> bool {
        self.predictions
            .get(model_id)
            .is_some_and(|p| p.confidences.is_some())
    }

    /// Correctness column of one model.
    pub fn oracle_column(&self, model_id: &str) -> Result<Vec<bool>> {
        let predicted = self.predicted_labels(model_id)?;
        Ok(predicted
            .iter()
            .zip(&self.true_labels)
            .map(|(p, t)| p == t)
            .collect())
    }

    /// Binary correctness matrix for `team`, one column per member in the given order.
    pub fn derive_oracle<S: AsRef<str>>(&self, team: &[S]) -> Result<OracleMatrix> {
        let columns = team
            .iter()
            .map(|m| self.oracle_column(m.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        OracleMatrix::from_columns(
            team.iter().map(|m| m.as_ref().to_string()).collect(),
            columns,
        )
    }

    /// Fraction of examples the model labels correctly.
    pub fn benign_accuracy(&self, model_id: &str) -> Result<f64> {
        let column = self.oracle_column(model_id)?;
        let correct = column.iter().filter(|&&c| c).count();
        Ok(correct as f64 / column.len() as f64)
    }

    /// Restricts the set to a subset of example indices (kept in canonical order).
    pub fn subset(&self, indices: &[usize]) -> Result<AttackSet> {
        let mut idx = indices.to_vec();
        idx.sort_unstable();
        idx.dedup();
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidParameter(format!(
                "example index {bad} out of range"
            )));
        }
        let pick = |v: &[usize]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let models = self
            .model_order
            .iter()
            .map(|m| {
                let p = &self.predictions[m];
                (
                    m.clone(),
                    ModelPredictions {
                        predicted: pick(&p.predicted),
                        confidences: p
                            .confidences
                            .as_ref()
                            .map(|c| idx.iter().map(|&i| c[i].clone()).collect()),
                    },
                )
            })
            .collect();
        AttackSet::new(
            self.set_id.clone(),
            self.labels.clone(),
            idx.iter().map(|&i| self.example_ids[i].clone()).collect(),
            pick(&self.true_labels),
            models,
        )
    }
}

fn check_confidence_row(
    row: &[f64],
    predicted: usize,
    num_labels: usize,
) -> std::result::Result<(), String> {
    if row.len() != num_labels {
        return Err(format!(
            "row has {} entries, expected {num_labels}",
            row.len()
        ));
    }
    if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(format!("entry {v} is not a finite non-negative number"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
        return Err(format!("row sums to {sum}"));
    }
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Ties are fine as long as the stored label is one of the maxima.
    if row[predicted] != max {
        return Err(format!(
            "predicted label index {predicted} has support {} but the row maximum is {max}",
            row[predicted]
        ));
    }
    Ok(())
}

/// `d x M` correctness matrix, stored column-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleMatrix {
    model_ids: Vec<String>,
    columns: Vec<Vec<bool>>,
    rows: usize,
}

impl OracleMatrix {
    pub fn from_columns(model_ids: Vec<String>, columns: Vec<Vec<bool>>) -> Result<Self> {
        if model_ids.len() != columns.len() {
            return Err(Error::LengthMismatch {
                left: model_ids.len(),
                right: columns.len(),
            });
        }
        let rows = columns.first().map_or(0, Vec::len);
        for c in &columns {
            if c.len() != rows {
                return Err(Error::LengthMismatch {
                    left: rows,
                    right: c.len(),
                });
            }
        }
        Ok(Self {
            model_ids,
            columns,
            rows,
        })
    }

    /// Convenience constructor with generated ids `c0..cM`.
    pub fn from_unnamed_columns(columns: Vec<Vec<bool>>) -> Result<Self> {
        let ids = (0..columns.len()).map(|i| format!("c{i}")).collect();
        Self::from_columns(ids, columns)
    }

    pub fn num_examples(&self) -> usize {
        self.rows
    }

    pub fn num_models(&self) -> usize {
        self.columns.len()
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn column(&self, model: usize) -> &[bool] {
        &self.columns[model]
    }

    pub fn columns(&self) -> &[Vec<bool>] {
        &self.columns
    }

    pub fn get(&self, example: usize, model: usize) -> bool {
        self.columns[model][example]
    }

    /// Number of members that classify example `j` correctly.
    pub fn correct_count(&self, example: usize) -> usize {
        self.columns.iter().filter(|c| c[example]).count()
    }
}

/// Handle on a data directory: labels, manifest, and the available set ids.
#[derive(Debug, Clone)]
pub struct DataDir {
    root: PathBuf,
    labels: LabelSpace,
    models: Vec<ModelRecord>,
}

impl DataDir {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let labels = read_labels(&root)?;
        let models = read_manifest(&root)?;
        Ok(Self {
            root,
            labels,
            models,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn labels(&self) -> &LabelSpace {
        &self.labels
    }

    pub fn models(&self) -> &[ModelRecord] {
        &self.models
    }

    pub fn target(&self) -> &ModelRecord {
        self.models
            .iter()
            .find(|m| m.is_target)
            .expect("manifest validated to contain exactly one target")
    }

    /// Set ids (prediction subdirectories), sorted.
    pub fn set_ids(&self) -> Result<Vec<String>> {
        let dir = self.root.join(PREDICTIONS_DIR);
        if !dir.is_dir() {
            return Err(Error::MissingFile(dir));
        }
        let mut ids = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            if entry.path().is_dir() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn load_set(&self, set_id: &str) -> Result<AttackSet> {
        load_set_with(&self.root, &self.labels, &self.models, set_id)
    }
}

/// Loads and validates one attack set from a data directory.
pub fn load_attack_set(dir: impl AsRef<Path>, set_id: &str) -> Result<AttackSet> {
    DataDir::open(dir)?.load_set(set_id)
}

pub fn read_labels(dir: &Path) -> Result<LabelSpace> {
    let path = dir.join(LABELS_FILE);
    let text = read_file(&path)?;
    let file: LabelsFile =
        serde_json::from_str(&text).map_err(|e| Error::schema(LABELS_FILE, e.to_string()))?;
    LabelSpace::new(file.labels)
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ModelRecord>> {
    let path = dir.join(MODELS_FILE);
    let text = read_file(&path)?;
    let models: Vec<ModelRecord> =
        serde_json::from_str(&text).map_err(|e| Error::schema(MODELS_FILE, e.to_string()))?;
    validate_manifest(&models)?;
    Ok(models)
}

fn validate_manifest(models: &[ModelRecord]) -> Result<()> {
    if models.is_empty() {
        return Err(Error::schema(MODELS_FILE, "manifest lists no models"));
    }
    let mut ids = HashSet::new();
    for m in models {
        if m.model_id.is_empty() || m.model_id.contains(['/', '\\']) {
            return Err(Error::schema(
                MODELS_FILE,
                format!("invalid model_id '{}'", m.model_id),
            ));
        }
        if !ids.insert(m.model_id.as_str()) {
            return Err(Error::schema(
                MODELS_FILE,
                format!("duplicate model_id '{}'", m.model_id),
            ));
        }
    }
    let targets = models.iter().filter(|m| m.is_target).count();
    if targets != 1 {
        return Err(Error::schema(
            MODELS_FILE,
            format!("exactly one model must have is_target = true, found {targets}"),
        ));
    }
    Ok(())
}

fn read_file(path: &Path) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(Error::MissingFile(path.to_path_buf()))
        }
        Err(e) => Err(Error::io(path, e)),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionLine {
    example_id: String,
    true_label: String,
    predicted_label: String,
    #[serde(default)]
    confidence: Option<Vec<f64>>,
}

fn load_set_with(
    root: &Path,
    labels: &LabelSpace,
    models: &[ModelRecord],
    set_id: &str,
) -> Result<AttackSet> {
    let set_dir = root.join(PREDICTIONS_DIR).join(set_id);
    if !set_dir.is_dir() {
        return Err(Error::MissingFile(set_dir));
    }
    let known: HashSet<&str> = models.iter().map(|m| m.model_id.as_str()).collect();
    for entry in fs::read_dir(&set_dir).map_err(|e| Error::io(&set_dir, e))? {
        let path = entry.map_err(|e| Error::io(&set_dir, e))?.path();
        if path.extension().is_some_and(|e| e == "jsonl") {
            let stem = path.file_stem().unwrap_or_default().to_string_lossy();
            if !known.contains(stem.as_ref()) {
                return Err(Error::schema(
                    path.display().to_string(),
                    format!("model '{stem}' is not listed in {MODELS_FILE}"),
                ));
            }
        }
    }

    let mut reference: Option<(String, Vec<(String, usize)>)> = None;
    let mut parsed = Vec::with_capacity(models.len());
    for model in models {
        let rel = format!("{PREDICTIONS_DIR}/{set_id}/{}.jsonl", model.model_id);
        let path = root.join(&rel);
        let text = read_file(&path)?;
        let (rows, preds) = parse_prediction_file(&text, &rel, labels, &model.model_id)?;

        match &reference {
            None => reference = Some((model.model_id.clone(), rows)),
            Some((ref_model, ref_rows)) => {
                if ref_rows.len() != rows.len() {
                    return Err(Error::AlignmentError {
                        set_id: set_id.to_string(),
                        model_id: model.model_id.clone(),
                        message: format!(
                            "covers {} examples but '{ref_model}' covers {}",
                            rows.len(),
                            ref_rows.len()
                        ),
                    });
                }
                for (a, b) in ref_rows.iter().zip(&rows) {
                    if a.0 != b.0 {
                        return Err(Error::AlignmentError {
                            set_id: set_id.to_string(),
                            model_id: model.model_id.clone(),
                            message: format!(
                                "example sequence differs from '{ref_model}' at '{}' vs '{}'",
                                b.0, a.0
                            ),
                        });
                    }
                    if a.1 != b.1 {
                        return Err(Error::AlignmentError {
                            set_id: set_id.to_string(),
                            model_id: model.model_id.clone(),
                            message: format!(
                                "true_label of example '{}' differs from '{ref_model}'",
                                a.0
                            ),
                        });
                    }
                }
            }
        }
        parsed.push((model.model_id.clone(), preds));
    }

    let (_, rows) = reference.expect("manifest is non-empty");
    let (example_ids, true_labels): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    AttackSet::new(set_id, labels.clone(), example_ids, true_labels, parsed)
}

/// Parses one JSONL file. Returns `(example_id, true_label)` pairs sorted by id
/// together with the model's predictions in the same order.
fn parse_prediction_file(
    text: &str,
    location: &str,
    labels: &LabelSpace,
    model_id: &str,
) -> Result<(Vec<(String, usize)>, ModelPredictions)> {
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = || format!("{location}:{}", lineno + 1);
        let rec: PredictionLine =
            serde_json::from_str(line).map_err(|e| Error::schema(at(), e.to_string()))?;
        let truth = labels.index_of(&rec.true_label)?;
        let predicted = labels.index_of(&rec.predicted_label)?;
        if let Some(row) = &rec.confidence {
            check_confidence_row(row, predicted, labels.len()).map_err(|message| {
                Error::StochasticityError {
                    model_id: model_id.to_string(),
                    example_id: rec.example_id.clone(),
                    message,
                }
            })?;
        }
        records.push((rec.example_id, truth, predicted, rec.confidence));
    }
    if records.is_empty() {
        return Err(Error::schema(location, "file has no prediction lines"));
    }
    let with_conf = records.iter().filter(|r| r.3.is_some()).count();
    if with_conf != 0 && with_conf != records.len() {
        return Err(Error::schema(
            location,
            "confidence must be present on every line or on none",
        ));
    }
    records.sort_by(|a, b| a.0.cmp(&b.0));
    if let Some(w) = records.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::schema(
            location,
            format!("duplicate example_id '{}'", w[0].0),
        ));
    }

    let mut rows = Vec::with_capacity(records.len());
    let mut predicted = Vec::with_capacity(records.len());
    let mut confidences = Vec::with_capacity(if with_conf > 0 { records.len() } else { 0 });
    for (id, truth, pred, conf) in records {
        rows.push((id, truth));
        predicted.push(pred);
        if let Some(c) = conf {
            confidences.push(c);
        }
    }
    Ok((
        rows,
        ModelPredictions {
            predicted,
            confidences: (with_conf > 0).then_some(confidences),
        },
    ))
}

pub fn write_labels(dir: &Path, labels: &LabelSpace) -> Result<()> {
    let body = serde_json::to_string_pretty(&LabelsFile {
        labels: labels.labels().to_vec(),
    })?;
    write_file(&dir.join(LABELS_FILE), format!("{body}\n").as_bytes())
}

pub fn write_manifest(dir: &Path, models: &[ModelRecord]) -> Result<()> {
    validate_manifest(models)?;
    let body = serde_json::to_string_pretty(models)?;
    write_file(&dir.join(MODELS_FILE), format!("{body}\n").as_bytes())
}

/// Writes every model of `set` to `predictions/<set_id>/<model_id>.jsonl` in canonical form.
pub fn write_attack_set(dir: &Path, set: &AttackSet) -> Result<()> {
    let set_dir = dir.join(PREDICTIONS_DIR).join(set.set_id());
    fs::create_dir_all(&set_dir).map_err(|e| Error::io(&set_dir, e))?;
    for model_id in set.model_ids() {
        let preds = set.predictions(model_id)?;
        let mut out = Vec::new();
        for (j, example_id) in set.example_ids().iter().enumerate() {
            let line = PredictionLine {
                example_id: example_id.clone(),
                true_label: label_name(set.labels(), set.true_labels()[j]),
                predicted_label: label_name(set.labels(), preds.predicted[j]),
                confidence: preds.confidences.as_ref().map(|c| c[j].clone()),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.push(b'\n');
        }
        write_file(&set_dir.join(format!("{model_id}.jsonl")), &out)?;
    }
    Ok(())
}

/// Writes labels, manifest and all given sets.
pub fn write_data_dir(
    dir: &Path,
    labels: &LabelSpace,
    models: &[ModelRecord],
    sets: &[AttackSet],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_labels(dir, labels)?;
    write_manifest(dir, models)?;
    for set in sets {
        write_attack_set(dir, set)?;
    }
    Ok(())
}

fn label_name(labels: &LabelSpace, index: usize) -> String {
    labels
        .name(index)
        .expect("label index validated")
        .to_string()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
