//! Base-model pool, type-1 team enumeration, diversity ranking, removal
//! tests and per-query random team selection.
//!
//! Every team contains the pool's target model. Rankings put the most
//! diverse team first: ascending score for Q/rho/kappa, descending for
//! disagreement/entropy/variance. Ties go to the smaller team, then to the
//! lexicographically smaller member list, so the order is total.
//!
//! Random selection uses ChaCha8 seeded through `SeedableRng::seed_from_u64`
//! and draws indices as `u64`, which is stable across platforms.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::consensus::{ensemble_accuracy, ConsensusMethod, Verdict};
use crate::error::{Error, Result};
use crate::metrics::{team_score, DiversityScore, MetricConfig, MetricId};
use crate::store::{AttackSet, ModelRecord};

pub const DEFAULT_MIN_SIZE: usize = 3;

/// Candidate base models gated on benign accuracy and structural novelty.
#[derive(Debug, Clone)]
pub struct ModelPool {
    models: Vec<ModelRecord>,
    target_id: String,
    min_benign_accuracy: f64,
}

impl ModelPool {
    /// Starts a pool from the target model, which must itself pass the accuracy gate.
    pub fn new(target: ModelRecord, benign: &AttackSet, min_benign_accuracy: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&min_benign_accuracy) {
            return Err(Error::InvalidParameter(format!(
                "min_benign_accuracy {min_benign_accuracy} outside [0, 1]"
            )));
        }
        if !target.is_target {
            return Err(Error::InvalidParameter(format!(
                "'{}' is not flagged as the target",
                target.model_id
            )));
        }
        let mut pool = Self {
            target_id: target.model_id.clone(),
            models: Vec::new(),
            min_benign_accuracy,
        };
        pool.admit(target, benign)?;
        Ok(pool)
    }

    /// Builds a pool from a manifest: the target first, then the other
    /// models in manifest order. Rejected models are returned with the reason.
    pub fn from_manifest(
        models: &[ModelRecord],
        benign: &AttackSet,
        min_benign_accuracy: f64,
    ) -> Result<(Self, Vec<Error>)> {
        let target = models
            .iter()
            .find(|m| m.is_target)
            .ok_or_else(|| Error::InvalidParameter("manifest has no target model".into()))?;
        let mut pool = Self::new(target.clone(), benign, min_benign_accuracy)?;
        let mut rejected = Vec::new();
        for m in models.iter().filter(|m| !m.is_target) {
            if let Err(e) = pool.add_base_model(m.clone(), benign) {
                rejected.push(e);
            }
        }
        Ok((pool, rejected))
    }

    pub fn add_base_model(&mut self, record: ModelRecord, benign: &AttackSet) -> Result<()> {
        if record.is_target {
            return Err(Error::InvalidParameter(format!(
                "pool already has target '{}'",
                self.target_id
            )));
        }
        self.admit(record, benign)
    }

    fn admit(&mut self, mut record: ModelRecord, benign: &AttackSet) -> Result<()> {
        if self.models.iter().any(|m| m.model_id == record.model_id) {
            return Err(Error::DuplicateModel(record.model_id));
        }
        let accuracy = benign.benign_accuracy(&record.model_id)?;
        if accuracy < self.min_benign_accuracy {
            return Err(Error::BelowAccuracyThreshold {
                model_id: record.model_id,
                accuracy,
                threshold: self.min_benign_accuracy,
            });
        }
        if let Some(twin) = self
            .models
            .iter()
            .find(|m| m.structural_tags == record.structural_tags)
        {
            return Err(Error::DuplicateStructure {
                model_id: record.model_id,
                existing: twin.model_id.clone(),
            });
        }
        record.benign_accuracy = Some(accuracy);
        self.models.push(record);
        Ok(())
    }

    pub fn models(&self) -> &[ModelRecord] {
        &self.models
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.models.iter().map(|m| m.model_id.clone()).collect()
    }

    pub fn target_id(&self) -> &str {
        &self.target_id
    }

    pub fn min_benign_accuracy(&self) -> f64 {
        self.min_benign_accuracy
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

/// A set of member ids that always contains the target, plus cached scores.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleTeam {
    members: Vec<String>,
    target: String,
    pub scores: BTreeMap<MetricId, DiversityScore>,
}

impl EnsembleTeam {
    pub fn new<S: AsRef<str>>(members: &[S], target: &str) -> Result<Self> {
        let mut members: Vec<String> = members.iter().map(|m| m.as_ref().to_string()).collect();
        members.sort();
        members.dedup();
        if !members.iter().any(|m| m == target) {
            return Err(Error::TargetRequired(target.to_string()));
        }
        Ok(Self {
            members,
            target: target.to_string(),
            scores: BTreeMap::new(),
        })
    }

    /// Sorted member ids.
    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, model_id: &str) -> bool {
        self.members.iter().any(|m| m == model_id)
    }

    /// Members joined with `+`.
    pub fn id(&self) -> String {
        self.members.join("+")
    }

    pub fn score(&self, metric: MetricId) -> Option<&DiversityScore> {
        self.scores.get(&metric)
    }

    /// Cached score, computing and storing it on first use.
    pub fn score_on(
        &mut self,
        metric: MetricId,
        set: &AttackSet,
        config: &MetricConfig,
    ) -> Result<DiversityScore> {
        if let Some(s) = self.scores.get(&metric) {
            return Ok(*s);
        }
        let s = team_score(metric, set, &self.members, config)?;
        self.scores.insert(metric, s);
        Ok(s)
    }

    /// The team without `member`; scores are dropped.
    pub fn without(&self, member: &str) -> Result<EnsembleTeam> {
        if member == self.target {
            return Err(Error::InvalidParameter(format!(
                "target model '{member}' cannot be removed"
            )));
        }
        if !self.contains(member) {
            return Err(Error::UnknownModel(member.to_string()));
        }
        let rest: Vec<&String> = self.members.iter().filter(|m| *m != member).collect();
        EnsembleTeam::new(&rest, &self.target)
    }
}

/// Teams in ranked order.
#[derive(Debug, Clone, PartialEq)]
pub struct TeamPool {
    pub teams: Vec<EnsembleTeam>,
    pub ranking_metric: Option<MetricId>,
}

/// Wire form of one team: `{members, size, scores, rank}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamRecord {
    pub members: Vec<String>,
    pub size: usize,
    #[serde(default)]
    pub scores: BTreeMap<MetricId, ScoreEntry>,
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub value: f64,
    pub degenerate: bool,
}

impl TeamPool {
    pub fn len(&self) -> usize {
        self.teams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.teams.is_empty()
    }

    /// Sorts by cached `metric` scores; every team must already have one.
    pub fn sort_by_metric(&mut self, metric: MetricId) -> Result<()> {
        if let Some(t) = self.teams.iter().find(|t| t.score(metric).is_none()) {
            return Err(Error::InvalidParameter(format!(
                "team {} has no cached '{metric}' score",
                t.id()
            )));
        }
        self.teams.sort_by(|a, b| rank_order(metric, a, b));
        self.ranking_metric = Some(metric);
        Ok(())
    }

    /// Most diverse team of each size.
    pub fn best_per_size(&self) -> BTreeMap<usize, &EnsembleTeam> {
        let mut best = BTreeMap::new();
        for t in &self.teams {
            best.entry(t.size()).or_insert(t);
        }
        best
    }

    pub fn truncate(&mut self, top: usize) {
        self.teams.truncate(top);
    }

    pub fn to_records(&self) -> Vec<TeamRecord> {
        self.teams
            .iter()
            .enumerate()
            .map(|(i, t)| TeamRecord {
                members: t.members.clone(),
                size: t.size(),
                scores: t
                    .scores
                    .iter()
                    .map(|(k, s)| {
                        (
                            *k,
                            ScoreEntry {
                                value: s.value,
                                degenerate: s.degenerate,
                            },
                        )
                    })
                    .collect(),
                rank: i + 1,
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_records())?)
    }

    /// Imports a pool, ordering by `rank` and checking every team holds `target`.
    pub fn from_records(mut records: Vec<TeamRecord>, target: &str) -> Result<Self> {
        records.sort_by_key(|r| r.rank);
        let mut teams = Vec::with_capacity(records.len());
        let mut metrics: Option<Vec<MetricId>> = None;
        for r in records {
            let mut t = EnsembleTeam::new(&r.members, target)?;
            if t.size() != r.size {
                return Err(Error::schema(
                    "team pool",
                    format!(
                        "team {} declares size {} but has {} members",
                        t.id(),
                        r.size,
                        t.size()
                    ),
                ));
            }
            t.scores = r
                .scores
                .iter()
                .map(|(k, s)| {
                    (
                        *k,
                        DiversityScore {
                            metric: *k,
                            value: s.value,
                            degenerate: s.degenerate,
                        },
                    )
                })
                .collect();
            let keys: Vec<MetricId> = t.scores.keys().copied().collect();
            metrics = Some(match metrics {
                None => keys,
                Some(prev) => prev.into_iter().filter(|k| keys.contains(k)).collect(),
            });
            teams.push(t);
        }
        let ranking_metric = match metrics.as_deref() {
            Some([single]) => Some(*single),
            _ => None,
        };
        Ok(Self {
            teams,
            ranking_metric,
        })
    }

    pub fn from_json(text: &str, target: &str) -> Result<Self> {
        let records: Vec<TeamRecord> =
            serde_json::from_str(text).map_err(|e| Error::schema("team pool", e.to_string()))?;
        Self::from_records(records, target)
    }
}

fn rank_order(metric: MetricId, a: &EnsembleTeam, b: &EnsembleTeam) -> Ordering {
    let da = a.scores[&metric].diversity();
    let db = b.scores[&metric].diversity();
    db.total_cmp(&da)
        .then_with(|| a.size().cmp(&b.size()))
        .then_with(|| a.members.cmp(&b.members))
}

/// All teams that contain the target and have at least `min_size` members,
/// listed by size and then in pool order.
pub fn enumerate_type1_teams(pool: &ModelPool, min_size: usize) -> Result<TeamPool> {
    if min_size == 0 {
        return Err(Error::InvalidParameter(
            "min_size must be at least 1".into(),
        ));
    }
    if pool.len() < min_size {
        return Err(Error::PoolTooSmall {
            pool: pool.len(),
            min_size,
        });
    }
    let target = pool.target_id();
    let others: Vec<&str> = pool
        .models()
        .iter()
        .map(|m| m.model_id.as_str())
        .filter(|m| *m != target)
        .collect();
    let mut teams = Vec::new();
    for extra in (min_size - 1)..=others.len() {
        for combo in others.iter().combinations(extra) {
            let mut members: Vec<&str> = vec![target];
            members.extend(combo.into_iter().copied());
            teams.push(EnsembleTeam::new(&members, target)?);
        }
    }
    Ok(TeamPool {
        teams,
        ranking_metric: None,
    })
}

/// Number of teams [`enumerate_type1_teams`] yields: `sum_{m=min_size-1}^{N-1} C(N-1, m)`.
pub fn type1_team_count(pool_size: usize, min_size: usize) -> u64 {
    if pool_size == 0 || min_size == 0 || min_size > pool_size {
        return 0;
    }
    let n = (pool_size - 1) as u64;
    ((min_size - 1) as u64..=n).map(|m| binomial(n, m)).sum()
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Scores every team on `set` and sorts them, most diverse first.
pub fn rank_type2_teams(
    teams: Vec<EnsembleTeam>,
    metric: MetricId,
    set: &AttackSet,
    config: &MetricConfig,
) -> Result<TeamPool> {
    let mut scored = Vec::with_capacity(teams.len());
    for mut t in teams {
        if let Some(missing) = t.members.iter().find(|m| !set.contains(m)) {
            return Err(Error::MissingPredictions(
                missing.clone(),
                set.set_id().to_string(),
            ));
        }
        t.score_on(metric, set, config)?;
        scored.push(t);
    }
    let mut pool = TeamPool {
        teams: scored,
        ranking_metric: Some(metric),
    };
    pool.sort_by_metric(metric)?;
    Ok(pool)
}

/// Keeps teams whose ranking score is at least as diverse as `threshold`
/// (given in the metric's own units).
pub fn filter_by_threshold(pool: &TeamPool, threshold: f64) -> Result<TeamPool> {
    let metric = pool
        .ranking_metric
        .ok_or_else(|| Error::InvalidParameter("pool has no ranking metric".into()))?;
    let mut teams = Vec::new();
    for t in &pool.teams {
        let s = t.score(metric).ok_or_else(|| {
            Error::InvalidParameter(format!("team {} has no cached '{metric}' score", t.id()))
        })?;
        if metric.clears(s.value, threshold) {
            teams.push(t.clone());
        }
    }
    Ok(TeamPool {
        teams,
        ranking_metric: Some(metric),
    })
}

/// Draws teams uniformly from the `top_k` head of a ranked pool.
pub struct TeamSelector<'a> {
    pool: &'a TeamPool,
    top_k: usize,
    rng: ChaCha8Rng,
}

impl<'a> TeamSelector<'a> {
    /// With `seed = None` the generator is seeded from OS entropy.
    pub fn new(pool: &'a TeamPool, top_k: usize, seed: Option<u64>) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::EmptyPool);
        }
        if top_k == 0 || top_k > pool.len() {
            return Err(Error::InvalidParameter(format!(
                "top_k must be in 1..={}, got {top_k}",
                pool.len()
            )));
        }
        let rng = match seed {
            Some(s) => ChaCha8Rng::seed_from_u64(s),
            None => ChaCha8Rng::from_entropy(),
        };
        Ok(Self { pool, top_k, rng })
    }

    pub fn next_index(&mut self) -> usize {
        self.rng.gen_range(0..self.top_k as u64) as usize
    }

    pub fn next_team(&mut self) -> &'a EnsembleTeam {
        let i = self.next_index();
        &self.pool.teams[i]
    }
}

pub fn select_random_team(
    pool: &TeamPool,
    top_k: usize,
    seed: Option<u64>,
) -> Result<EnsembleTeam> {
    Ok(TeamSelector::new(pool, top_k, seed)?.next_team().clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemovalMode {
    Reward,
    Penalty,
    DiversityGain,
    AccuracyGain,
}

/// Score magnitudes for the reward and penalty removal tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub correct: f64,
    pub correct_ensemble_wrong: f64,
    pub joint_error: f64,
    pub identical_error: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            correct: 1.0,
            correct_ensemble_wrong: 2.0,
            joint_error: -1.0,
            identical_error: -2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemovalConfig {
    pub min_size: usize,
    pub metric: MetricId,
    pub metric_config: MetricConfig,
    pub weights: RewardWeights,
    /// Restrict the test to these example indices. Must cover at least
    /// `ceil(d / L)` examples.
    pub examples: Option<Vec<usize>>,
}

impl Default for RemovalConfig {
    fn default() -> Self {
        Self {
            min_size: DEFAULT_MIN_SIZE,
            metric: MetricId::LabelKappa,
            metric_config: MetricConfig::default(),
            weights: RewardWeights::default(),
            examples: None,
        }
    }
}

fn tuning_set(set: &AttackSet, config: &RemovalConfig) -> Result<Option<AttackSet>> {
    let Some(idx) = &config.examples else {
        return Ok(None);
    };
    let needed = set.len().div_ceil(set.labels().len());
    let sub = set.subset(idx)?;
    if sub.len() < needed {
        return Err(Error::InsufficientExamples {
            needed,
            got: sub.len(),
        });
    }
    Ok(Some(sub))
}

/// Removal-test score of `member` within `team`.
///
/// * `Reward`: per example, `correct` when the member is right, or
///   `correct_ensemble_wrong` when it is right and the ensemble is wrong.
/// * `Penalty`: per example where both are wrong, `joint_error`, or
///   `identical_error` when the member's label equals the ensemble's.
/// * `DiversityGain`: diversity of the reduced team minus diversity of the
///   full team, on the "higher = more diverse" scale.
/// * `AccuracyGain`: ensemble accuracy without the member minus with it.
pub fn evaluate_removal(
    team: &EnsembleTeam,
    member: &str,
    mode: RemovalMode,
    set: &AttackSet,
    method: &ConsensusMethod,
    config: &RemovalConfig,
) -> Result<f64> {
    let reduced = team.without(member)?;
    if reduced.size() < config.min_size {
        return Err(Error::TeamTooSmall {
            size: team.size(),
            min_size: config.min_size,
        });
    }
    let sub = tuning_set(set, config)?;
    let set = sub.as_ref().unwrap_or(set);

    match mode {
        RemovalMode::Reward | RemovalMode::Penalty => {
            let prepared = method.prepare(set, team.members())?;
            let member_labels = set.predicted_labels(member)?;
            let w = &config.weights;
            let mut score = 0.0;
            for (j, &truth) in set.true_labels().iter().enumerate() {
                let verdict = prepared.verdict(j)?;
                let ensemble_ok = verdict == Verdict::Class(truth);
                let member_ok = member_labels[j] == truth;
                score += match (mode, member_ok, ensemble_ok) {
                    (RemovalMode::Reward, true, false) => w.correct_ensemble_wrong,
                    (RemovalMode::Reward, true, true) => w.correct,
                    (RemovalMode::Penalty, false, false) => {
                        if verdict == Verdict::Class(member_labels[j]) {
                            w.identical_error
                        } else {
                            w.joint_error
                        }
                    }
                    _ => 0.0,
                };
            }
            Ok(score)
        }
        RemovalMode::DiversityGain => {
            let before = team_score(config.metric, set, team.members(), &config.metric_config)?;
            let after = team_score(config.metric, set, reduced.members(), &config.metric_config)?;
            Ok(after.diversity() - before.diversity())
        }
        RemovalMode::AccuracyGain => {
            let before = ensemble_accuracy(method, set, team.members())?;
            let after = ensemble_accuracy(method, set, reduced.members())?;
            Ok(after - before)
        }
    }
}

/// Greedily drops the member whose removal raises ensemble accuracy the most,
/// until no removal helps or the team reaches `min_size`.
pub fn optimize_team(
    team: &EnsembleTeam,
    set: &AttackSet,
    method: &ConsensusMethod,
    config: &RemovalConfig,
) -> Result<EnsembleTeam> {
    let sub = tuning_set(set, config)?;
    let set = sub.as_ref().unwrap_or(set);
    let mut current = team.clone();
    while current.size() > config.min_size {
        let base = ensemble_accuracy(method, set, current.members())?;
        let mut best: Option<(f64, EnsembleTeam)> = None;
        for m in current.members().iter().filter(|m| *m != current.target()) {
            let candidate = current.without(m)?;
            let gain = ensemble_accuracy(method, set, candidate.members())? - base;
            if gain > 0.0 && best.as_ref().is_none_or(|(g, _)| gain > *g) {
                best = Some((gain, candidate));
            }
        }
        match best {
            Some((_, next)) => current = next,
            None => break,
        }
    }
    if current.size() != team.size() {
        current.scores.clear();
    }
    Ok(current)
}
