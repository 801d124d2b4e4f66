//! Rules that turn member outputs into one ensemble verdict per example.
//!
//! Argmax ties always go to the lowest class index. A rule that produces no
//! winner returns [`Verdict::Abstain`], which is scored as an error.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{AttackSet, STOCHASTIC_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Class(usize),
    Abstain,
}

impl Verdict {
    pub fn class(self) -> Option<usize> {
        match self {
            Verdict::Class(c) => Some(c),
            Verdict::Abstain => None,
        }
    }

    pub fn is_abstain(self) -> bool {
        self == Verdict::Abstain
    }
}

/// Output of a rule on one example.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub label: Verdict,
    pub support: Option<Vec<f64>>,
}

/// A decision tied to its example and the members that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusResult {
    pub example_id: String,
    pub method_id: String,
    pub label: Verdict,
    pub support: Option<Vec<f64>>,
    pub contributing_members: Vec<String>,
}

/// 1 iff the ensemble produced the true label.
pub fn consensus_oracle(result: &ConsensusResult, true_label: usize) -> u8 {
    u8::from(result.label == Verdict::Class(true_label))
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

fn vote_counts(labels: &[usize]) -> Vec<usize> {
    let l = labels.iter().max().map_or(0, |&m| m + 1);
    let mut counts = vec![0usize; l];
    for &x in labels {
        counts[x] += 1;
    }
    counts
}

fn vote_support(counts: &[usize], m: usize) -> Vec<f64> {
    counts.iter().map(|&c| c as f64 / m as f64).collect()
}

/// The label chosen by more than half of the members, else abstain.
pub fn majority_vote(labels: &[usize]) -> Decision {
    let m = labels.len();
    if m == 0 {
        return Decision {
            label: Verdict::Abstain,
            support: None,
        };
    }
    let counts = vote_counts(labels);
    let label = counts
        .iter()
        .position(|&c| 2 * c > m)
        .map_or(Verdict::Abstain, Verdict::Class);
    Decision {
        label,
        support: Some(vote_support(&counts, m)),
    }
}

/// How [`plurality_vote`] resolves several modal labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    #[default]
    Abstain,
    LowestIndex,
}

/// The unique most frequent label.
pub fn plurality_vote(labels: &[usize], tie: TieRule) -> Decision {
    let m = labels.len();
    if m == 0 {
        return Decision {
            label: Verdict::Abstain,
            support: None,
        };
    }
    let counts = vote_counts(labels);
    let top = *counts.iter().max().expect("non-empty");
    let modal = counts.iter().filter(|&&c| c == top).count();
    let label = if modal > 1 && tie == TieRule::Abstain {
        Verdict::Abstain
    } else {
        Verdict::Class(counts.iter().position(|&c| c == top).expect("max exists"))
    };
    Decision {
        label,
        support: Some(vote_support(&counts, m)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregator {
    Mean,
    Sum,
    Max,
    Median,
    Min,
}

impl Aggregator {
    fn apply(self, column: &mut [f64]) -> f64 {
        match self {
            Aggregator::Mean => column.iter().sum::<f64>() / column.len() as f64,
            Aggregator::Sum => column.iter().sum(),
            Aggregator::Max => column.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregator::Min => column.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregator::Median => {
                column.sort_by(f64::total_cmp);
                let n = column.len();
                if n % 2 == 1 {
                    column[n / 2]
                } else {
                    0.5 * (column[n / 2 - 1] + column[n / 2])
                }
            }
        }
    }
}

fn check_rows<R: AsRef<[f64]>>(supports: &[R]) -> Result<usize> {
    let first = supports
        .first()
        .ok_or(Error::EmptyInput("support matrix"))?
        .as_ref()
        .len();
    for row in supports {
        let row = row.as_ref();
        if row.len() != first {
            return Err(Error::LengthMismatch {
                left: first,
                right: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NotStochastic(format!("{row:?}")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return Err(Error::NotStochastic(format!("row sums to {sum}")));
        }
    }
    Ok(first)
}

/// Per-class aggregate of member supports, then argmax.
pub fn aggregate_support<R: AsRef<[f64]>>(
    supports: &[R],
    aggregator: Aggregator,
) -> Result<Decision> {
    let l = check_rows(supports)?;
    let mut column = vec![0.0; supports.len()];
    let support: Vec<f64> = (0..l)
        .map(|c| {
            for (slot, row) in column.iter_mut().zip(supports) {
                *slot = row.as_ref()[c];
            }
            aggregator.apply(&mut column)
        })
        .collect();
    Ok(Decision {
        label: argmax(&support).map_or(Verdict::Abstain, Verdict::Class),
        support: Some(support),
    })
}

/// `sum_i w_i * row_i / sum_i w_i`. Without explicit weights each member is
/// weighted by its top-1 confidence.
pub fn weighted_average<R: AsRef<[f64]>>(
    supports: &[R],
    weights: Option<&[f64]>,
) -> Result<Decision> {
    let l = check_rows(supports)?;
    let owned: Vec<f64>;
    let weights = match weights {
        Some(w) => {
            if w.len() != supports.len() {
                return Err(Error::LengthMismatch {
                    left: supports.len(),
                    right: w.len(),
                });
            }
            w
        }
        None => {
            owned = supports
                .iter()
                .map(|r| r.as_ref().iter().copied().fold(0.0, f64::max))
                .collect();
            &owned
        }
    };
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "weight {w} must be finite and non-negative"
        )));
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(Error::AllZeroWeights);
    }
    let mut support = vec![0.0; l];
    for (row, w) in supports.iter().zip(weights) {
        for (acc, p) in support.iter_mut().zip(row.as_ref()) {
            *acc += w * p;
        }
    }
    support.iter_mut().for_each(|v| *v /= total);
    Ok(Decision {
        label: argmax(&support).map_or(Verdict::Abstain, Verdict::Class),
        support: Some(support),
    })
}

/// Where weighted averaging takes its member weights from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightSource {
    /// Each member's top-1 confidence on the example.
    TopConfidence,
    /// Fixed per-model weights, e.g. benign accuracies.
    Fixed(BTreeMap<String, f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConsensusMethod {
    Majority,
    Plurality(TieRule),
    Aggregate(Aggregator),
    Weighted(WeightSource),
}

impl ConsensusMethod {
    pub fn id(&self) -> &'static str {
        match self {
            ConsensusMethod::Majority => "majority",
            ConsensusMethod::Plurality(TieRule::Abstain) => "plurality",
            ConsensusMethod::Plurality(TieRule::LowestIndex) => "plurality-lowest",
            ConsensusMethod::Aggregate(Aggregator::Mean) => "mean",
            ConsensusMethod::Aggregate(Aggregator::Sum) => "sum",
            ConsensusMethod::Aggregate(Aggregator::Max) => "max",
            ConsensusMethod::Aggregate(Aggregator::Median) => "median",
            ConsensusMethod::Aggregate(Aggregator::Min) => "min",
            ConsensusMethod::Weighted(WeightSource::TopConfidence) => "weighted",
            ConsensusMethod::Weighted(WeightSource::Fixed(_)) => "weighted-fixed",
        }
    }

    pub fn needs_confidences(&self) -> bool {
        matches!(
            self,
            ConsensusMethod::Aggregate(_) | ConsensusMethod::Weighted(_)
        )
    }

    /// Resolves member inputs once so per-example decisions are cheap.
    pub fn prepare<'a, S: AsRef<str>>(
        &'a self,
        set: &'a AttackSet,
        team: &[S],
    ) -> Result<PreparedTeam<'a>> {
        if team.is_empty() {
            return Err(Error::EmptyInput("team"));
        }
        let labels = team
            .iter()
            .map(|m| set.predicted_labels(m.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let confidences = if self.needs_confidences() {
            Some(
                team.iter()
                    .map(|m| set.confidences(m.as_ref()))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        let weights = match self {
            ConsensusMethod::Weighted(WeightSource::Fixed(map)) => Some(
                team.iter()
                    .map(|m| {
                        map.get(m.as_ref())
                            .copied()
                            .ok_or_else(|| Error::UnknownModel(m.as_ref().to_string()))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            _ => None,
        };
        Ok(PreparedTeam {
            method: self,
            set,
            members: team.iter().map(|m| m.as_ref().to_string()).collect(),
            labels,
            confidences,
            weights,
        })
    }

    /// Per-example results for `team` over the whole set.
    pub fn run<S: AsRef<str>>(&self, set: &AttackSet, team: &[S]) -> Result<Vec<ConsensusResult>> {
        let prepared = self.prepare(set, team)?;
        (0..set.len()).map(|j| prepared.result(j)).collect()
    }
}

impl fmt::Display for ConsensusMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ConsensusMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let m = match s {
            "majority" => ConsensusMethod::Majority,
            "plurality" => ConsensusMethod::Plurality(TieRule::Abstain),
            "plurality-lowest" => ConsensusMethod::Plurality(TieRule::LowestIndex),
            "mean" => ConsensusMethod::Aggregate(Aggregator::Mean),
            "sum" => ConsensusMethod::Aggregate(Aggregator::Sum),
            "max" => ConsensusMethod::Aggregate(Aggregator::Max),
            "median" => ConsensusMethod::Aggregate(Aggregator::Median),
            "min" => ConsensusMethod::Aggregate(Aggregator::Min),
            "weighted" => ConsensusMethod::Weighted(WeightSource::TopConfidence),
            _ => return Err(Error::UnknownMethod(s.to_string())),
        };
        Ok(m)
    }
}

/// Fraction of examples where the team's verdict is correct, and the
/// fraction where it abstains.
pub fn ensemble_outcome<S: AsRef<str>>(
    method: &ConsensusMethod,
    set: &AttackSet,
    team: &[S],
) -> Result<(f64, f64)> {
    let prepared = method.prepare(set, team)?;
    let mut correct = 0usize;
    let mut abstained = 0usize;
    for (j, &truth) in set.true_labels().iter().enumerate() {
        match prepared.verdict(j)? {
            Verdict::Abstain => abstained += 1,
            Verdict::Class(c) if c == truth => correct += 1,
            Verdict::Class(_) => {}
        }
    }
    let d = set.len() as f64;
    Ok((correct as f64 / d, abstained as f64 / d))
}

pub fn ensemble_accuracy<S: AsRef<str>>(
    method: &ConsensusMethod,
    set: &AttackSet,
    team: &[S],
) -> Result<f64> {
    Ok(ensemble_outcome(method, set, team)?.0)
}

/// A method bound to a team on one set.
pub struct PreparedTeam<'a> {
    method: &'a ConsensusMethod,
    set: &'a AttackSet,
    members: Vec<String>,
    labels: Vec<&'a [usize]>,
    confidences: Option<Vec<&'a [Vec<f64>]>>,
    weights: Option<Vec<f64>>,
}

impl PreparedTeam<'_> {
    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn decide(&self, example: usize) -> Result<Decision> {
        let votes = || {
            self.labels
                .iter()
                .map(|col| col[example])
                .collect::<Vec<_>>()
        };
        let rows = || -> Vec<&[f64]> {
            self.confidences
                .as_ref()
                .expect("prepared with confidences")
                .iter()
                .map(|c| c[example].as_slice())
                .collect()
        };
        match self.method {
            ConsensusMethod::Majority => Ok(majority_vote(&votes())),
            ConsensusMethod::Plurality(tie) => Ok(plurality_vote(&votes(), *tie)),
            ConsensusMethod::Aggregate(agg) => aggregate_support(&rows(), *agg),
            ConsensusMethod::Weighted(_) => weighted_average(&rows(), self.weights.as_deref()),
        }
    }

    pub fn verdict(&self, example: usize) -> Result<Verdict> {
        Ok(self.decide(example)?.label)
    }

    pub fn result(&self, example: usize) -> Result<ConsensusResult> {
        let d = self.decide(example)?;
        Ok(ConsensusResult {
            example_id: self.set.example_ids()[example].clone(),
            method_id: self.method.id().to_string(),
            label: d.label,
            support: d.support,
            contributing_members: self.members.clone(),
        })
    }
}
