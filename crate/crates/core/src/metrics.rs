//! Pairwise and non-pairwise diversity measures over oracle outputs,
//! label vectors and class supports.
//!
//! Pairwise measures work on the 2x2 table of joint correctness
//! ([`AgreementCounts`]) except [`MetricId::LabelKappa`], which uses the
//! `L x L` coincidence matrix of predicted labels. For Q, rho and both kappas
//! a smaller value means a more diverse pair; for disagreement, entropy and
//! variance a larger one does.
//!
//! Zero denominators never produce NaN. Q falls back to `1 - 2*delta`; rho and
//! kappa return 1 for perfect agreement and 0 otherwise. Either way the score
//! is flagged `degenerate`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{AttackSet, LabelSpace, OracleMatrix, STOCHASTIC_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricId {
    /// Yule's Q statistic on oracle outputs.
    Q,
    /// Correlation of oracle outputs.
    Rho,
    /// Fraction of examples where exactly one of the pair is correct.
    Disagreement,
    /// Kappa computed from the 2x2 oracle table.
    Kappa,
    /// Cohen's kappa computed from the label coincidence matrix.
    LabelKappa,
    /// Vote-split entropy over the whole team.
    Entropy,
    /// Mean variance of the team's averaged class support.
    Variance,
}

impl MetricId {
    pub const ALL: [MetricId; 7] = [
        MetricId::Q,
        MetricId::Rho,
        MetricId::Disagreement,
        MetricId::Kappa,
        MetricId::LabelKappa,
        MetricId::Entropy,
        MetricId::Variance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Q => "q",
            MetricId::Rho => "rho",
            MetricId::Disagreement => "disagreement",
            MetricId::Kappa => "kappa",
            MetricId::LabelKappa => "label-kappa",
            MetricId::Entropy => "entropy",
            MetricId::Variance => "variance",
        }
    }

    pub fn is_pairwise(self) -> bool {
        !matches!(self, MetricId::Entropy | MetricId::Variance)
    }

    /// True for metrics where a larger value means more diversity.
    pub fn higher_is_diverse(self) -> bool {
        matches!(
            self,
            MetricId::Disagreement | MetricId::Entropy | MetricId::Variance
        )
    }

    /// Maps a raw score onto a "higher = more diverse" scale.
    pub fn diversity(self, value: f64) -> f64 {
        if self.higher_is_diverse() {
            value
        } else {
            -value
        }
    }

    /// Whether `value` is at least as diverse as the raw-unit `threshold`
    /// (`value <= threshold` for Q/rho/kappa, `value >= threshold` otherwise).
    pub fn clears(self, value: f64, threshold: f64) -> bool {
        self.diversity(value) >= self.diversity(threshold)
    }

    /// Documented value range.
    pub fn range(self) -> (f64, f64) {
        match self {
            MetricId::Q | MetricId::Rho | MetricId::Kappa | MetricId::LabelKappa => (-1.0, 1.0),
            MetricId::Disagreement | MetricId::Entropy => (0.0, 1.0),
            MetricId::Variance => (0.0, 0.5),
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let id = match s.to_ascii_lowercase().as_str() {
            "q" | "q-statistic" => MetricId::Q,
            "rho" => MetricId::Rho,
            "disagreement" | "delta" => MetricId::Disagreement,
            "kappa" | "oracle-kappa" => MetricId::Kappa,
            "label-kappa" | "kappa-labels" => MetricId::LabelKappa,
            "entropy" => MetricId::Entropy,
            "variance" => MetricId::Variance,
            _ => return Err(Error::UnknownMetric(s.to_string())),
        };
        Ok(id)
    }
}

/// A metric value plus a flag telling whether a zero-denominator convention was used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityScore {
    pub metric: MetricId,
    pub value: f64,
    pub degenerate: bool,
}

impl DiversityScore {
    fn new(metric: MetricId, value: f64) -> Self {
        Self {
            metric,
            value,
            degenerate: false,
        }
    }

    fn degenerate(metric: MetricId, value: f64) -> Self {
        Self {
            metric,
            value,
            degenerate: true,
        }
    }

    /// Value on the "higher = more diverse" scale.
    pub fn diversity(&self) -> f64 {
        self.metric.diversity(self.value)
    }
}

/// Joint correctness counts of two classifiers: `n11` both correct,
/// `n10` only the first, `n01` only the second, `n00` neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct AgreementCounts {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

impl AgreementCounts {
    pub fn new(n11: u64, n10: u64, n01: u64, n00: u64) -> Self {
        Self { n11, n10, n01, n00 }
    }

    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }

    fn numerator(&self) -> f64 {
        self.n11 as f64 * self.n00 as f64 - self.n01 as f64 * self.n10 as f64
    }

    fn perfect_agreement(&self) -> bool {
        self.n10 == 0 && self.n01 == 0
    }
}

pub fn pair_counts(col_i: &[bool], col_k: &[bool]) -> Result<AgreementCounts> {
    if col_i.len() != col_k.len() {
        return Err(Error::LengthMismatch {
            left: col_i.len(),
            right: col_k.len(),
        });
    }
    if col_i.is_empty() {
        return Err(Error::EmptyInput("oracle columns"));
    }
    let mut c = AgreementCounts::default();
    for (&a, &b) in col_i.iter().zip(col_k) {
        match (a, b) {
            (true, true) => c.n11 += 1,
            (true, false) => c.n10 += 1,
            (false, true) => c.n01 += 1,
            (false, false) => c.n00 += 1,
        }
    }
    Ok(c)
}

pub fn q_statistic(c: &AgreementCounts) -> DiversityScore {
    let den = c.n11 as f64 * c.n00 as f64 + c.n01 as f64 * c.n10 as f64;
    if den == 0.0 {
        let delta = disagreement(c).value;
        return DiversityScore::degenerate(MetricId::Q, 1.0 - 2.0 * delta);
    }
    DiversityScore::new(MetricId::Q, c.numerator() / den)
}

pub fn rho(c: &AgreementCounts) -> DiversityScore {
    let marginals = [c.n11 + c.n10, c.n01 + c.n00, c.n11 + c.n01, c.n10 + c.n00];
    if marginals.contains(&0) {
        let v = if c.perfect_agreement() { 1.0 } else { 0.0 };
        return DiversityScore::degenerate(MetricId::Rho, v);
    }
    let den = marginals.iter().map(|&m| m as f64).product::<f64>().sqrt();
    DiversityScore::new(MetricId::Rho, (c.numerator() / den).clamp(-1.0, 1.0))
}

pub fn disagreement(c: &AgreementCounts) -> DiversityScore {
    let d = c.total();
    if d == 0 {
        return DiversityScore::degenerate(MetricId::Disagreement, 0.0);
    }
    DiversityScore::new(MetricId::Disagreement, (c.n01 + c.n10) as f64 / d as f64)
}

/// Cohen's kappa on the 2x2 table: `2(n11 n00 - n01 n10)` over
/// `(n11 + n10)(n10 + n00) + (n01 + n00)(n11 + n01)`.
pub fn kappa_oracle(c: &AgreementCounts) -> DiversityScore {
    let (i_right, i_wrong, k_right, k_wrong) = (
        (c.n11 + c.n10) as f64,
        (c.n01 + c.n00) as f64,
        (c.n11 + c.n01) as f64,
        (c.n10 + c.n00) as f64,
    );
    let den = i_right * k_wrong + i_wrong * k_right;
    if den == 0.0 {
        let v = if c.perfect_agreement() { 1.0 } else { 0.0 };
        return DiversityScore::degenerate(MetricId::Kappa, v);
    }
    DiversityScore::new(MetricId::Kappa, 2.0 * c.numerator() / den)
}

/// Evaluates a pairwise oracle metric on a 2x2 table.
pub fn oracle_pair_metric(metric: MetricId, c: &AgreementCounts) -> Result<DiversityScore> {
    match metric {
        MetricId::Q => Ok(q_statistic(c)),
        MetricId::Rho => Ok(rho(c)),
        MetricId::Disagreement => Ok(disagreement(c)),
        MetricId::Kappa => Ok(kappa_oracle(c)),
        other => Err(Error::InvalidParameter(format!(
            "'{other}' is not computed from oracle agreement counts"
        ))),
    }
}

/// `L x L` label co-occurrence counts of two classifiers.
/// Row = first model's label, column = second model's label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoincidenceMatrix {
    counts: Vec<Vec<u64>>,
    total: u64,
}

impl CoincidenceMatrix {
    pub fn from_labels(labels_i: &[usize], labels_k: &[usize], num_labels: usize) -> Result<Self> {
        if labels_i.len() != labels_k.len() {
            return Err(Error::LengthMismatch {
                left: labels_i.len(),
                right: labels_k.len(),
            });
        }
        if labels_i.is_empty() {
            return Err(Error::EmptyInput("label vectors"));
        }
        let mut counts = vec![vec![0u64; num_labels]; num_labels];
        for (&a, &b) in labels_i.iter().zip(labels_k) {
            if a >= num_labels || b >= num_labels {
                return Err(Error::UnknownLabel(format!("index {}", a.max(b))));
            }
            counts[a][b] += 1;
        }
        Ok(Self {
            counts,
            total: labels_i.len() as u64,
        })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Cohen's kappa `(p_o - p_e) / (1 - p_e)`, evaluated on integer counts
    /// as `(d*trace - sum r_l c_l) / (d^2 - sum r_l c_l)`.
    pub fn kappa(&self) -> DiversityScore {
        let l = self.counts.len();
        let d = self.total as f64;
        let trace: f64 = (0..l).map(|i| self.counts[i][i] as f64).sum();
        let chance: f64 = (0..l)
            .map(|x| {
                let row: u64 = self.counts[x].iter().sum();
                let col: u64 = self.counts.iter().map(|r| r[x]).sum();
                row as f64 * col as f64
            })
            .sum();
        let den = d * d - chance;
        if den == 0.0 {
            let v = if trace == d { 1.0 } else { 0.0 };
            return DiversityScore::degenerate(MetricId::LabelKappa, v);
        }
        if trace == d {
            return DiversityScore::new(MetricId::LabelKappa, 1.0);
        }
        DiversityScore::new(
            MetricId::LabelKappa,
            ((d * trace - chance) / den).clamp(-1.0, 1.0),
        )
    }
}

pub fn kappa_labels(
    labels_i: &[usize],
    labels_k: &[usize],
    space: &LabelSpace,
) -> Result<DiversityScore> {
    Ok(CoincidenceMatrix::from_labels(labels_i, labels_k, space.len())?.kappa())
}

/// Symmetric `M x M` matrix of one pairwise metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub metric: MetricId,
    pub model_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub degenerate: Vec<Vec<bool>>,
}

impl PairwiseMatrix {
    fn build(
        metric: MetricId,
        model_ids: Vec<String>,
        mut pair: impl FnMut(usize, usize) -> Result<DiversityScore>,
    ) -> Result<Self> {
        let m = model_ids.len();
        let mut values = vec![vec![0.0; m]; m];
        let mut degenerate = vec![vec![false; m]; m];
        for i in 0..m {
            for k in i..m {
                let s = pair(i, k)?;
                values[i][k] = s.value;
                values[k][i] = s.value;
                degenerate[i][k] = s.degenerate;
                degenerate[k][i] = s.degenerate;
            }
        }
        Ok(Self {
            metric,
            model_ids,
            values,
            degenerate,
        })
    }

    pub fn size(&self) -> usize {
        self.model_ids.len()
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i][k]
    }

    /// CSV with a `model` header column and one row per model.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model");
        for id in &self.model_ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for (id, row) in self.model_ids.iter().zip(&self.values) {
            out.push_str(id);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Pairwise oracle-metric matrix over the columns of `oracle`.
pub fn pairwise_oracle_matrix(metric: MetricId, oracle: &OracleMatrix) -> Result<PairwiseMatrix> {
    // Validate before doing any work.
    oracle_pair_metric(metric, &AgreementCounts::default())?;
    PairwiseMatrix::build(metric, oracle.model_ids().to_vec(), |i, k| {
        let c = pair_counts(oracle.column(i), oracle.column(k))?;
        oracle_pair_metric(metric, &c)
    })
}

/// Pairwise Cohen's kappa matrix over label columns.
pub fn pairwise_label_kappa_matrix(
    model_ids: Vec<String>,
    label_columns: &[&[usize]],
    num_labels: usize,
) -> Result<PairwiseMatrix> {
    if model_ids.len() != label_columns.len() {
        return Err(Error::LengthMismatch {
            left: model_ids.len(),
            right: label_columns.len(),
        });
    }
    PairwiseMatrix::build(MetricId::LabelKappa, model_ids, |i, k| {
        Ok(CoincidenceMatrix::from_labels(label_columns[i], label_columns[k], num_labels)?.kappa())
    })
}

/// Pairwise matrix of `metric` for `team` on `set`.
pub fn pairwise_matrix<S: AsRef<str>>(
    metric: MetricId,
    set: &AttackSet,
    team: &[S],
) -> Result<PairwiseMatrix> {
    match metric {
        MetricId::LabelKappa => {
            let columns = team
                .iter()
                .map(|m| set.predicted_labels(m.as_ref()))
                .collect::<Result<Vec<_>>>()?;
            pairwise_label_kappa_matrix(
                team.iter().map(|m| m.as_ref().to_string()).collect(),
                &columns,
                set.labels().len(),
            )
        }
        MetricId::Entropy | MetricId::Variance => Err(Error::InvalidParameter(format!(
            "'{metric}' is not a pairwise metric"
        ))),
        _ => pairwise_oracle_matrix(metric, &set.derive_oracle(team)?),
    }
}

/// Mean of the strictly upper triangle. A 1x1 matrix has no pairs and yields
/// its self-agreement value, flagged degenerate.
pub fn metric_average(m: &PairwiseMatrix) -> DiversityScore {
    let n = m.size();
    if n < 2 {
        let v = m
            .values
            .first()
            .and_then(|r| r.first())
            .copied()
            .unwrap_or(0.0);
        return DiversityScore::degenerate(m.metric, v);
    }
    let mut sum = 0.0;
    let mut degenerate = false;
    for i in 0..n {
        for k in (i + 1)..n {
            sum += m.values[i][k];
            degenerate |= m.degenerate[i][k];
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    DiversityScore {
        metric: m.metric,
        value: sum / pairs,
        degenerate,
    }
}

/// Normalizer of the entropy measure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyNormalizer {
    /// `M - floor(M/2)`; the maximum for odd `M` is below 1.
    #[default]
    Floor,
    /// `M - ceil(M/2)`; odd-`M` maxima reach 1.
    Ceil,
}

impl EntropyNormalizer {
    fn denominator(self, m: usize) -> usize {
        match self {
            EntropyNormalizer::Floor => m - m / 2,
            EntropyNormalizer::Ceil => m - m.div_ceil(2),
        }
    }
}

impl FromStr for EntropyNormalizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "floor" => Ok(Self::Floor),
            "ceil" => Ok(Self::Ceil),
            _ => Err(Error::InvalidParameter(format!(
                "unknown entropy normalizer '{s}'"
            ))),
        }
    }
}

/// `(1/d) * sum_j min(CC_j, M - CC_j) / norm(M)` where `CC_j` is the number
/// of members correct on example `j`.
pub fn entropy_measure(oracle: &OracleMatrix, normalizer: EntropyNormalizer) -> DiversityScore {
    let m = oracle.num_models();
    let d = oracle.num_examples();
    let norm = if m >= 2 { normalizer.denominator(m) } else { 0 };
    if norm == 0 || d == 0 {
        return DiversityScore::degenerate(MetricId::Entropy, 0.0);
    }
    let total: usize = (0..d)
        .map(|j| {
            let cc = oracle.correct_count(j);
            cc.min(m - cc)
        })
        .sum();
    DiversityScore::new(MetricId::Entropy, total as f64 / (d as f64 * norm as f64))
}

/// `0.5 * (1 - sum_l p_l^2)` for one support vector.
pub fn variance_measure(support: &[f64]) -> Result<DiversityScore> {
    if support.is_empty() {
        return Err(Error::NotStochastic("empty support vector".into()));
    }
    if let Some(v) = support.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::NotStochastic(format!("entry {v}")));
    }
    let sum: f64 = support.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
        return Err(Error::NotStochastic(format!("sums to {sum}")));
    }
    let l = support.len() as f64;
    let cap = 0.5 * (1.0 - 1.0 / l);
    let squares: f64 = support.iter().map(|p| p * p).sum();
    Ok(DiversityScore::new(
        MetricId::Variance,
        (0.5 * (1.0 - squares)).clamp(0.0, cap),
    ))
}

/// Variance of the team's mean support vector, averaged over examples.
pub fn mean_variance<S: AsRef<str>>(set: &AttackSet, team: &[S]) -> Result<DiversityScore> {
    if team.is_empty() {
        return Err(Error::EmptyInput("team"));
    }
    let rows = team
        .iter()
        .map(|m| set.confidences(m.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let l = set.labels().len();
    let m = team.len() as f64;
    let mut total = 0.0;
    let mut mean = vec![0.0; l];
    for j in 0..set.len() {
        mean.iter_mut().for_each(|v| *v = 0.0);
        for member in &rows {
            for (acc, p) in mean.iter_mut().zip(&member[j]) {
                *acc += p;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);
        total += variance_measure(&mean)?.value;
    }
    Ok(DiversityScore::new(
        MetricId::Variance,
        total / set.len() as f64,
    ))
}

/// Settings shared by every team-level metric computation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub entropy_normalizer: EntropyNormalizer,
}

/// Team-level score of any metric: pairwise average, entropy or mean variance.
pub fn team_score<S: AsRef<str>>(
    metric: MetricId,
    set: &AttackSet,
    team: &[S],
    config: &MetricConfig,
) -> Result<DiversityScore> {
    match metric {
        MetricId::Entropy => Ok(entropy_measure(
            &set.derive_oracle(team)?,
            config.entropy_normalizer,
        )),
        MetricId::Variance => mean_variance(set, team),
        _ => Ok(metric_average(&pairwise_matrix(metric, set, team)?)),
    }
}
