//! Accuracy grids over teams x consensus methods x attack sets, and the
//! analyses built on them: improvement over the best member, diversity vs.
//! improvement rank correlation, metric coincidence and kappa-error points.
//!
//! All rank correlations are Spearman with average ranks for ties.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::consensus::{ensemble_outcome, ConsensusMethod, ConsensusResult, Verdict};
use crate::error::{Error, Result};
use crate::metrics::{
    oracle_pair_metric, pair_counts, team_score, CoincidenceMatrix, MetricConfig, MetricId,
};
use crate::rank::spearman;
use crate::store::{AttackSet, LabelSpace};
use crate::teams::TeamPool;

/// Minimum number of teams for any rank correlation.
pub const MIN_TEAMS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationCell {
    pub team_id: String,
    pub method_id: String,
    pub set_id: String,
    pub accuracy: f64,
    pub abstain_rate: f64,
}

fn team_id<S: AsRef<str>>(members: &[S]) -> String {
    let mut ids: Vec<&str> = members.iter().map(AsRef::as_ref).collect();
    ids.sort_unstable();
    ids.join("+")
}

fn require_members<S: AsRef<str>>(members: &[S], set: &AttackSet) -> Result<()> {
    if members.is_empty() {
        return Err(Error::EmptyInput("team"));
    }
    match members.iter().find(|m| !set.contains(m.as_ref())) {
        Some(m) => Err(Error::MissingPredictions(
            m.as_ref().to_string(),
            set.set_id().to_string(),
        )),
        None => Ok(()),
    }
}

pub fn evaluate_team<S: AsRef<str>>(
    members: &[S],
    method: &ConsensusMethod,
    set: &AttackSet,
) -> Result<EvaluationCell> {
    require_members(members, set)?;
    let (accuracy, abstain_rate) = ensemble_outcome(method, set, members)?;
    Ok(EvaluationCell {
        team_id: team_id(members),
        method_id: method.id().to_string(),
        set_id: set.set_id().to_string(),
        accuracy,
        abstain_rate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub team_id: String,
    pub members: Vec<String>,
    pub method_id: String,
    pub cells: Vec<EvaluationCell>,
    /// Mean accuracy across the row's sets.
    pub average: f64,
}

/// Complete team x method x set grid.
///
/// Rows are sorted by team size, then team id, then the method's position in
/// the input list; columns follow the order of `sets`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub set_ids: Vec<String>,
    pub rows: Vec<AccuracyRow>,
}

pub fn accuracy_table<S: AsRef<str>>(
    teams: &[Vec<S>],
    methods: &[ConsensusMethod],
    sets: &[&AttackSet],
) -> Result<AccuracyTable> {
    if teams.is_empty() || methods.is_empty() || sets.is_empty() {
        return Err(Error::EmptyInput(
            "accuracy table needs teams, methods and sets",
        ));
    }
    let mut keyed = Vec::with_capacity(teams.len() * methods.len());
    for team in teams {
        let mut members: Vec<String> = team.iter().map(|m| m.as_ref().to_string()).collect();
        members.sort();
        for (mi, method) in methods.iter().enumerate() {
            let cells = sets
                .iter()
                .map(|set| evaluate_team(&members, method, set))
                .collect::<Result<Vec<_>>>()?;
            let average = cells.iter().map(|c| c.accuracy).sum::<f64>() / cells.len() as f64;
            keyed.push((
                mi,
                AccuracyRow {
                    team_id: team_id(&members),
                    members: members.clone(),
                    method_id: method.id().to_string(),
                    cells,
                    average,
                },
            ));
        }
    }
    keyed.sort_by(|(ma, a), (mb, b)| {
        a.members
            .len()
            .cmp(&b.members.len())
            .then_with(|| a.team_id.cmp(&b.team_id))
            .then_with(|| ma.cmp(mb))
    });
    Ok(AccuracyTable {
        set_ids: sets.iter().map(|s| s.set_id().to_string()).collect(),
        rows: keyed.into_iter().map(|(_, r)| r).collect(),
    })
}

/// Fixed-point formatting without a `-0` artifact.
pub fn fixed(value: f64, decimals: usize) -> String {
    let s = format!("{value:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl AccuracyTable {
    /// `team,method,<set...>,average` with 4 decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("team,method");
        for s in &self.set_ids {
            out.push(',');
            out.push_str(&csv_field(s));
        }
        out.push_str(",average\n");
        for row in &self.rows {
            let _ = write!(
                out,
                "{},{}",
                csv_field(&row.team_id),
                csv_field(&row.method_id)
            );
            for c in &row.cells {
                let _ = write!(out, ",{}", fixed(c.accuracy, 4));
            }
            let _ = writeln!(out, ",{}", fixed(row.average, 4));
        }
        out
    }
}

/// Ensemble accuracy minus the best single member's accuracy (may be negative).
pub fn improvement_over_best_member<S: AsRef<str>>(
    members: &[S],
    method: &ConsensusMethod,
    set: &AttackSet,
) -> Result<f64> {
    require_members(members, set)?;
    let ensemble = ensemble_outcome(method, set, members)?.0;
    let mut best = f64::NEG_INFINITY;
    for m in members {
        best = best.max(set.benign_accuracy(m.as_ref())?);
    }
    Ok(ensemble - best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub metric: MetricId,
    pub method: String,
    pub set_id: String,
    pub teams: usize,
    /// Spearman correlation of direction-normalized diversity vs. improvement.
    pub spearman: f64,
}

/// Spearman correlation between each team's diversity (higher = more
/// diverse) on `set` and its improvement over its best member.
pub fn diversity_accuracy_correlation(
    pool: &TeamPool,
    metric: MetricId,
    method: &ConsensusMethod,
    set: &AttackSet,
    config: &MetricConfig,
) -> Result<CorrelationReport> {
    if pool.len() < MIN_TEAMS {
        return Err(Error::TooFewTeams {
            needed: MIN_TEAMS,
            got: pool.len(),
        });
    }
    let mut diversity = Vec::with_capacity(pool.len());
    let mut improvement = Vec::with_capacity(pool.len());
    for t in &pool.teams {
        diversity.push(team_score(metric, set, t.members(), config)?.diversity());
        improvement.push(improvement_over_best_member(t.members(), method, set)?);
    }
    Ok(CorrelationReport {
        metric,
        method: method.id().to_string(),
        set_id: set.set_id().to_string(),
        teams: pool.len(),
        spearman: spearman(&diversity, &improvement),
    })
}

/// `|Spearman|` between the team scores of every pair of metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCoincidence {
    pub metrics: Vec<MetricId>,
    pub values: Vec<Vec<f64>>,
}

impl MetricCoincidence {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric");
        for m in &self.metrics {
            let _ = write!(out, ",{m}");
        }
        out.push('\n');
        for (m, row) in self.metrics.iter().zip(&self.values) {
            out.push_str(m.as_str());
            for v in row {
                let _ = write!(out, ",{}", fixed(*v, 6));
            }
            out.push('\n');
        }
        out
    }
}

pub fn metric_coincidence_matrix(
    pool: &TeamPool,
    metrics: &[MetricId],
    set: &AttackSet,
    config: &MetricConfig,
) -> Result<MetricCoincidence> {
    if metrics.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 metrics".into()));
    }
    if pool.len() < MIN_TEAMS {
        return Err(Error::TooFewTeams {
            needed: MIN_TEAMS,
            got: pool.len(),
        });
    }
    let scores = metrics
        .iter()
        .map(|&metric| {
            pool.teams
                .iter()
                .map(|t| Ok(team_score(metric, set, t.members(), config)?.value))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let n = metrics.len();
    let mut values = vec![vec![1.0; n]; n];
    for a in 0..n {
        for b in (a + 1)..n {
            let r = spearman(&scores[a], &scores[b]).abs();
            values[a][b] = r;
            values[b][a] = r;
        }
    }
    Ok(MetricCoincidence {
        metrics: metrics.to_vec(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaErrorPoint {
    pub model_i: String,
    pub model_k: String,
    pub kappa: f64,
    /// `1 - (acc_i + acc_k) / 2`.
    pub mean_pair_error: f64,
}

/// One point per unordered model pair. `metric` picks the kappa variant.
pub fn kappa_error_points<S: AsRef<str>>(
    models: &[S],
    set: &AttackSet,
    metric: MetricId,
) -> Result<Vec<KappaErrorPoint>> {
    if !matches!(metric, MetricId::Kappa | MetricId::LabelKappa) {
        return Err(Error::InvalidParameter(format!(
            "'{metric}' is not a kappa metric"
        )));
    }
    require_members(models, set)?;
    let accuracy = models
        .iter()
        .map(|m| set.benign_accuracy(m.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    for i in 0..models.len() {
        for k in (i + 1)..models.len() {
            let (a, b) = (models[i].as_ref(), models[k].as_ref());
            let kappa = match metric {
                MetricId::LabelKappa => CoincidenceMatrix::from_labels(
                    set.predicted_labels(a)?,
                    set.predicted_labels(b)?,
                    set.labels().len(),
                )?
                .kappa(),
                _ => oracle_pair_metric(
                    metric,
                    &pair_counts(&set.oracle_column(a)?, &set.oracle_column(b)?)?,
                )?,
            };
            points.push(KappaErrorPoint {
                model_i: a.to_string(),
                model_k: b.to_string(),
                kappa: kappa.value,
                mean_pair_error: 1.0 - 0.5 * (accuracy[i] + accuracy[k]),
            });
        }
    }
    Ok(points)
}

pub fn kappa_error_csv(points: &[KappaErrorPoint]) -> String {
    let mut out = String::from("model_i,model_k,kappa,mean_error\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            csv_field(&p.model_i),
            csv_field(&p.model_k),
            fixed(p.kappa, 6),
            fixed(p.mean_pair_error, 6)
        );
    }
    out
}

#[derive(Serialize)]
struct TraceLine<'a> {
    example_id: &'a str,
    method: &'a str,
    label: &'a str,
    support: Option<&'a [f64]>,
}

/// Per-example consensus trace, one JSON object per line.
pub fn trace_jsonl(results: &[ConsensusResult], labels: &LabelSpace) -> Result<String> {
    let mut out = String::new();
    for r in results {
        let label = match r.label {
            Verdict::Class(c) => labels
                .name(c)
                .ok_or_else(|| Error::UnknownLabel(format!("index {c}")))?,
            Verdict::Abstain => "ABSTAIN",
        };
        let line = TraceLine {
            example_id: &r.example_id,
            method: &r.method_id,
            label,
            support: r.support.as_deref(),
        };
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    Ok(out)
}
