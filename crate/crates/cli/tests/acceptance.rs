//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test -p ensdiv-cli --test acceptance -- --nocapture`

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ensdiv_core::consensus::{ensemble_accuracy, ConsensusMethod};
use ensdiv_core::eval::diversity_accuracy_correlation;
use ensdiv_core::metrics::{
    entropy_measure, kappa_oracle, oracle_pair_metric, pair_counts, pairwise_oracle_matrix,
    AgreementCounts, EntropyNormalizer, MetricConfig, MetricId,
};
use ensdiv_core::store::{
    AttackSet, DataDir, LabelSpace, ModelPredictions, ModelRecord, OracleMatrix,
};
use ensdiv_core::synth::{generate, SynthConfig};
use ensdiv_core::teams::{
    enumerate_type1_teams, rank_type2_teams, EnsembleTeam, ModelPool, TeamPool,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXACT: f64 = 1e-12;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn cli(args: &[&str]) -> Result<String, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["ensdiv"];
    full.extend_from_slice(args);
    match ensdiv_cli::run_from(full, &mut out, &mut err) {
        0 => Ok(String::from_utf8_lossy(&out).into_owned()),
        code => Err(format!(
            "{args:?} exited {code}: {}",
            String::from_utf8_lossy(&err)
        )),
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Outcome {
    if elapsed > Duration::from_secs(limit_s) {
        return Err(format!("took {elapsed:.2?}, limit {limit_s}s"));
    }
    Ok(format!("{elapsed:.2?}"))
}

fn hand_oracles() -> Outcome {
    let start = Instant::now();
    let cases = [
        ((1, 1, 1, 1), [0.0, 0.0, 0.5, 0.0]),
        ((3, 0, 0, 2), [1.0, 1.0, 0.0, 1.0]),
        ((0, 2, 2, 0), [-1.0, -1.0, 1.0, -1.0]),
    ];
    let metrics = [
        MetricId::Q,
        MetricId::Rho,
        MetricId::Disagreement,
        MetricId::Kappa,
    ];
    for ((a, b, c, d), expected) in cases {
        let counts = AgreementCounts::new(a, b, c, d);
        for (m, want) in metrics.iter().zip(expected) {
            let got = oracle_pair_metric(*m, &counts)
                .map_err(|e| e.to_string())?
                .value;
            ensure!(
                (got - want).abs() <= EXACT,
                "{m} on {counts:?} = {got}, want {want}"
            );
        }
    }
    within(start.elapsed(), 1).map(|t| format!("12 values within 1e-12 in {t}"))
}

fn kappa_cross_oracle() -> Outcome {
    let start = Instant::now();
    let mut checked = 0u64;
    for d in 1..=20u64 {
        for n11 in 0..=d {
            for n10 in 0..=(d - n11) {
                for n01 in 0..=(d - n11 - n10) {
                    let n00 = d - n11 - n10 - n01;
                    let k = kappa_oracle(&AgreementCounts::new(n11, n10, n01, n00));
                    let df = d as f64;
                    let po = (n11 + n00) as f64 / df;
                    let pi = (n11 + n10) as f64 / df;
                    let pk = (n11 + n01) as f64 / df;
                    let pe = pi * pk + (1.0 - pi) * (1.0 - pk);
                    if (1.0 - pe).abs() < 1e-15 {
                        ensure!(
                            k.degenerate,
                            "expected degenerate at {:?}",
                            (n11, n10, n01, n00)
                        );
                        continue;
                    }
                    let cohen = (po - pe) / (1.0 - pe);
                    ensure!(
                        !k.degenerate,
                        "unexpected degenerate at {:?}",
                        (n11, n10, n01, n00)
                    );
                    ensure!(
                        (k.value - cohen).abs() <= EXACT,
                        "{:?}: {} vs {cohen}",
                        (n11, n10, n01, n00),
                        k.value
                    );
                    checked += 1;
                }
            }
        }
    }
    within(start.elapsed(), 5).map(|t| format!("{checked} tables in {t}"))
}

fn oracle_from_counts(correct: &[usize], m: usize) -> OracleMatrix {
    let cols = (0..m)
        .map(|i| correct.iter().map(|&l| i < l).collect())
        .collect();
    OracleMatrix::from_unnamed_columns(cols).unwrap()
}

fn entropy() -> Outcome {
    let cases = [
        (oracle_from_counts(&[2, 1, 1, 0], 2), 0.5),
        (oracle_from_counts(&[3, 0, 3, 0, 3], 3), 0.0),
        (oracle_from_counts(&[2, 2, 2, 2, 2, 2], 4), 1.0),
    ];
    for (oracle, want) in &cases {
        let got = entropy_measure(oracle, EntropyNormalizer::Floor).value;
        ensure!(got == *want, "entropy {got}, want {want}");
    }
    Ok("0.5 / 0 / 1 exact".into())
}

fn range_symmetry() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let metrics = [
        MetricId::Q,
        MetricId::Rho,
        MetricId::Disagreement,
        MetricId::Kappa,
    ];
    let mut sign_pairs = 0;
    for _ in 0..1000 {
        let d = rng.gen_range(1..=50);
        let m = rng.gen_range(1..=6);
        let bias: f64 = rng.gen_range(0.05..0.95);
        let cols = (0..m)
            .map(|_| (0..d).map(|_| rng.gen_bool(bias)).collect())
            .collect();
        let oracle = OracleMatrix::from_unnamed_columns(cols).unwrap();
        for metric in metrics {
            let mat = pairwise_oracle_matrix(metric, &oracle).unwrap();
            let (lo, hi) = metric.range();
            for i in 0..m {
                for k in 0..m {
                    let v = mat.get(i, k);
                    ensure!(v >= lo && v <= hi, "{metric} = {v} out of range");
                    ensure!(v == mat.get(k, i), "{metric} not symmetric");
                }
            }
        }
        let e = entropy_measure(&oracle, EntropyNormalizer::Floor).value;
        ensure!((0.0..=1.0).contains(&e), "entropy {e}");
        for i in 0..m {
            for k in (i + 1)..m {
                let c = pair_counts(oracle.column(i), oracle.column(k)).unwrap();
                let scores: Vec<_> = [MetricId::Q, MetricId::Rho, MetricId::Kappa]
                    .iter()
                    .map(|&mid| oracle_pair_metric(mid, &c).unwrap())
                    .collect();
                if scores.iter().any(|s| s.degenerate) {
                    continue;
                }
                let signs: Vec<i32> = scores
                    .iter()
                    .map(|s| {
                        if s.value.abs() < EXACT {
                            0
                        } else {
                            s.value.signum() as i32
                        }
                    })
                    .collect();
                ensure!(
                    signs[0] == signs[1] && signs[1] == signs[2],
                    "signs {signs:?} on {c:?}"
                );
                sign_pairs += 1;
            }
        }
    }
    within(start.elapsed(), 10)
        .map(|t| format!("1000 matrices, {sign_pairs} sign-checked pairs in {t}"))
}

fn binary_set(cols: &[(String, Vec<bool>)], d: usize) -> AttackSet {
    let labels = LabelSpace::new(["right", "wrong"]).unwrap();
    let preds = cols
        .iter()
        .map(|(id, c)| {
            (
                id.clone(),
                ModelPredictions {
                    predicted: c.iter().map(|&ok| usize::from(!ok)).collect(),
                    confidences: None,
                },
            )
        })
        .collect();
    AttackSet::new(
        "benign",
        labels,
        (0..d).map(|j| format!("x{j:05}")).collect(),
        vec![0; d],
        preds,
    )
    .unwrap()
}

fn pool_of(n: usize) -> ModelPool {
    let ids: Vec<String> = (0..n).map(ensdiv_core::synth::synth_model_id).collect();
    let cols: Vec<(String, Vec<bool>)> = ids.iter().map(|id| (id.clone(), vec![true; 4])).collect();
    let set = binary_set(&cols, 4);
    let records: Vec<ModelRecord> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| ModelRecord::new(id.clone(), i == 0).with_tag("member", i as u64))
        .collect();
    ModelPool::from_manifest(&records, &set, 0.5).unwrap().0
}

fn enumeration_counts() -> Outcome {
    for (n, min, want) in [(5, 1, 16), (8, 1, 128), (5, 3, 11)] {
        let got = enumerate_type1_teams(&pool_of(n), min)
            .map_err(|e| e.to_string())?
            .len();
        ensure!(
            got == want,
            "N={n} min_size={min}: {got} teams, want {want}"
        );
    }
    Ok("16 / 128 / 11".into())
}

fn binomial_majority() -> Outcome {
    let start = Instant::now();
    let config = SynthConfig {
        models: 5,
        examples: 100_000,
        classes: 2,
        accuracy: 0.7,
        correlation: 0.0,
        seed: 1,
        confidences: false,
        ..SynthConfig::default()
    };
    let set = generate(&config).map_err(|e| e.to_string())?.sets.remove(0);
    let acc = ensemble_accuracy(&ConsensusMethod::Majority, &set, set.model_ids())
        .map_err(|e| e.to_string())?;
    let choose = |n: u64, k: u64| (0..k).fold(1.0, |a, i| a * (n - i) as f64 / (i + 1) as f64);
    let oracle: f64 = (3..=5)
        .map(|k| choose(5, k) * 0.7f64.powi(k as i32) * 0.3f64.powi(5 - k as i32))
        .sum();
    ensure!((oracle - 0.83692).abs() < 1e-9, "binomial oracle {oracle}");
    ensure!(
        (acc - oracle).abs() <= 0.01,
        "majority accuracy {acc} vs {oracle}"
    );
    within(start.elapsed(), 30).map(|t| format!("accuracy {acc:.5} vs {oracle:.5} in {t}"))
}

fn independence() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path().join("synth");
    let d = dir.to_str().unwrap();
    cli(&[
        "synth",
        "--models",
        "4",
        "--examples",
        "10000",
        "--correlation",
        "0",
        "--seed",
        "3",
        "--out",
        d,
    ])?;
    let out = cli(&[
        "--data-dir",
        d,
        "--format",
        "json",
        "metrics",
        "--metric",
        "q",
    ])?;
    let v: serde_json::Value = serde_json::from_str(&out).map_err(|e| e.to_string())?;
    let q = v["average"]["value"].as_f64().ok_or("no average")?;
    ensure!(q.abs() <= 0.05, "mean pairwise Q {q}");
    within(start.elapsed(), 30).map(|t| format!("mean Q {q:.4} in {t}"))
}

/// Binary set where every model is wrong exactly on its listed indices.
fn error_blocks(d: usize, models: &[(&str, Vec<usize>)]) -> AttackSet {
    let cols: Vec<(String, Vec<bool>)> = models
        .iter()
        .map(|(id, errs)| {
            let mut col = vec![true; d];
            errs.iter().for_each(|&j| col[j] = false);
            (id.to_string(), col)
        })
        .collect();
    binary_set(&cols, d)
}

fn team_pool(teams: &[[&str; 3]]) -> TeamPool {
    TeamPool {
        teams: teams
            .iter()
            .map(|t| EnsembleTeam::new(t, "tm").unwrap())
            .collect(),
        ranking_metric: None,
    }
}

fn monotone_correlation() -> Outcome {
    let d = 100;
    let config = MetricConfig::default();
    let method = ConsensusMethod::Majority;

    // a_k and b_k share s_k errors with each other, none with tm.
    let mut models = vec![("tm".to_string(), (0..20).collect::<Vec<_>>())];
    let mut teams = Vec::new();
    for (k, s) in [0usize, 5, 10, 15].iter().enumerate() {
        models.push((format!("a{k}"), (20..40).collect()));
        models.push((format!("b{k}"), ((40 - s)..(60 - s)).collect()));
        teams.push([format!("a{k}"), format!("b{k}")]);
    }
    let refs: Vec<(&str, Vec<usize>)> = models
        .iter()
        .map(|(id, e)| (id.as_str(), e.clone()))
        .collect();
    let set = error_blocks(d, &refs);
    let ids: Vec<[&str; 3]> = teams
        .iter()
        .map(|[a, b]| ["tm", a.as_str(), b.as_str()])
        .collect();
    let pool = team_pool(&ids);
    let mut checked = Vec::new();
    for metric in [
        MetricId::Q,
        MetricId::Rho,
        MetricId::Disagreement,
        MetricId::Kappa,
        MetricId::LabelKappa,
        MetricId::Entropy,
    ] {
        let r = diversity_accuracy_correlation(&pool, metric, &method, &set, &config)
            .map_err(|e| e.to_string())?;
        ensure!(
            r.spearman == 1.0,
            "monotone {metric}: spearman {}",
            r.spearman
        );
        checked.push(metric.as_str());
    }

    // b_k copies a_k; a_k errs on e_k examples disjoint from tm's ten.
    let mut models = vec![("tm".to_string(), (0..10).collect::<Vec<_>>())];
    let mut teams = Vec::new();
    for (k, e) in [15usize, 20, 25, 30].iter().enumerate() {
        let errs: Vec<usize> = (10..10 + e).collect();
        models.push((format!("a{k}"), errs.clone()));
        models.push((format!("b{k}"), errs));
        teams.push([format!("a{k}"), format!("b{k}")]);
    }
    let refs: Vec<(&str, Vec<usize>)> = models
        .iter()
        .map(|(id, e)| (id.as_str(), e.clone()))
        .collect();
    let set = error_blocks(d, &refs);
    let ids: Vec<[&str; 3]> = teams
        .iter()
        .map(|[a, b]| ["tm", a.as_str(), b.as_str()])
        .collect();
    let pool = team_pool(&ids);
    for metric in [
        MetricId::Disagreement,
        MetricId::Kappa,
        MetricId::LabelKappa,
    ] {
        let r = diversity_accuracy_correlation(&pool, metric, &method, &set, &config)
            .map_err(|e| e.to_string())?;
        ensure!(
            r.spearman == -1.0,
            "antitone {metric}: spearman {}",
            r.spearman
        );
    }
    Ok(format!(
        "+1 for {}; -1 for disagreement, kappa, label-kappa",
        checked.join(", ")
    ))
}

fn read_bytes(p: &Path) -> Result<Vec<u8>, String> {
    fs::read(p).map_err(|e| format!("{}: {e}", p.display()))
}

/// Majority accuracy recomputed from the raw prediction lines.
fn raw_majority(data: &Path, set: &str, team: &[&str]) -> f64 {
    let mut votes: BTreeMap<String, (String, BTreeMap<String, usize>)> = BTreeMap::new();
    for m in team {
        let text = fs::read_to_string(
            data.join("predictions")
                .join(set)
                .join(format!("{m}.jsonl")),
        )
        .unwrap();
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let entry = votes
                .entry(v["example_id"].as_str().unwrap().to_string())
                .or_insert_with(|| {
                    (
                        v["true_label"].as_str().unwrap().to_string(),
                        BTreeMap::new(),
                    )
                });
            *entry
                .1
                .entry(v["predicted_label"].as_str().unwrap().to_string())
                .or_default() += 1;
        }
    }
    let correct = votes
        .values()
        .filter(|(truth, counts)| counts.get(truth).is_some_and(|&n| 2 * n > team.len()))
        .count();
    correct as f64 / votes.len() as f64
}

fn pipeline_golden() -> Outcome {
    let data = fixture("three_model");
    let golden = fixture("three_model_golden");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = tmp.path();
    let d = data.to_str().unwrap();
    let pool = out.join("pool.json");
    let p = pool.to_str().unwrap();
    let o = out.to_str().unwrap();

    let summary = cli(&["ingest", d, "--validate"])?;
    ensure!(
        summary == "3 models, 2 sets, d=100, L=10\n",
        "ingest summary {summary:?}"
    );
    cli(&["--data-dir", d, "teams", "--min-size", "2", "--output", p])?;
    cli(&[
        "--data-dir",
        d,
        "eval",
        "--pool",
        p,
        "--method",
        "majority,plurality,mean,weighted",
        "--output-dir",
        o,
    ])?;
    cli(&["--data-dir", d, "report", "--pool", p, "--output-dir", o])?;
    for name in [
        "pool.json",
        "report.csv",
        "kappa_error.csv",
        "coincidence.csv",
    ] {
        ensure!(
            read_bytes(&out.join(name))? == read_bytes(&golden.join(name))?,
            "{name} differs from golden"
        );
    }

    let report = fs::read_to_string(golden.join("report.csv")).unwrap();
    let mut rows = 0;
    for line in report
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(1) == Some("majority"))
    {
        let cells: Vec<&str> = line.split(',').collect();
        let team: Vec<&str> = cells[0].split('+').collect();
        for (set, cell) in ["benign", "fgsm"].iter().zip(&cells[2..4]) {
            let expect = format!("{:.4}", raw_majority(&data, set, &team));
            ensure!(
                *cell == expect,
                "{} on {set}: golden {cell}, raw count {expect}",
                cells[0]
            );
        }
        rows += 1;
    }
    ensure!(rows == 3, "expected 3 majority rows, found {rows}");

    let golden_pool = golden.join("pool.json");
    let gp = golden_pool.to_str().unwrap();
    let first = cli(&["select", "--pool", gp, "--top-k", "3", "--seed", "42"])?;
    for _ in 0..5 {
        let again = cli(&["select", "--pool", gp, "--top-k", "3", "--seed", "42"])?;
        ensure!(again == first, "seeded select changed between runs");
    }
    Ok("4 files byte-identical, majority cells match raw counts, seeded select stable".into())
}

/// Cohen's kappa written out independently of the library.
fn cohen(a: &[usize], b: &[usize], l: usize) -> f64 {
    let d = a.len() as f64;
    let po = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / d;
    let pe: f64 = (0..l)
        .map(|c| {
            (a.iter().filter(|&&v| v == c).count() as f64 / d)
                * (b.iter().filter(|&&v| v == c).count() as f64 / d)
        })
        .sum();
    (po - pe) / (1.0 - pe)
}

fn ordering_fixture() -> Outcome {
    let data = DataDir::open(fixture("ordering")).map_err(|e| e.to_string())?;
    let set = data.load_set("benign").map_err(|e| e.to_string())?;
    let (pool, rejected) =
        ModelPool::from_manifest(data.models(), &set, 0.0).map_err(|e| e.to_string())?;
    ensure!(rejected.is_empty(), "rejected {rejected:?}");
    let config = MetricConfig::default();
    let designated = [
        (3, "dm1+dm3+tm"),
        (4, "dm1+dm3+dm4+tm"),
        (5, "dm1+dm2+dm3+dm4+tm"),
    ];

    let mut picks = Vec::new();
    for run in 0..3 {
        let mut teams = enumerate_type1_teams(&pool, 3)
            .map_err(|e| e.to_string())?
            .teams;
        teams.rotate_left(run * 4);
        let ranked = rank_type2_teams(teams, MetricId::LabelKappa, &set, &config)
            .map_err(|e| e.to_string())?;
        let best: Vec<(usize, String)> = ranked
            .best_per_size()
            .into_iter()
            .map(|(s, t)| (s, t.id()))
            .collect();
        picks.push(best);
    }
    ensure!(
        picks.iter().all(|p| *p == picks[0]),
        "ranking not deterministic: {picks:?}"
    );
    for (size, team) in designated {
        let got = picks[0]
            .iter()
            .find(|(s, _)| *s == size)
            .map(|(_, t)| t.as_str());
        ensure!(
            got == Some(team),
            "size {size}: picked {got:?}, designated {team}"
        );
    }

    // Independent brute force over every team of size 3 and 4.
    let l = set.labels().len();
    let ids = set.model_ids().to_vec();
    for (size, team) in &designated[..2] {
        let mut best: Option<(f64, String)> = None;
        let others: Vec<&String> = ids.iter().filter(|m| *m != "tm").collect();
        for mask in 0u32..(1 << others.len()) {
            if mask.count_ones() as usize != size - 1 {
                continue;
            }
            let mut members: Vec<&str> = vec!["tm"];
            members.extend(
                others
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, m)| m.as_str()),
            );
            let mut sum = 0.0;
            let mut pairs = 0.0;
            for i in 0..members.len() {
                for k in (i + 1)..members.len() {
                    let a = set.predicted_labels(members[i]).unwrap();
                    let b = set.predicted_labels(members[k]).unwrap();
                    sum += cohen(a, b, l);
                    pairs += 1.0;
                }
            }
            let mut sorted = members.clone();
            sorted.sort();
            let cand = (sum / pairs, sorted.join("+"));
            if best.as_ref().is_none_or(|b| cand.0 < b.0) {
                best = Some(cand);
            }
        }
        let (_, brute) = best.unwrap();
        ensure!(brute == *team, "brute force size {size} picks {brute}");
    }
    Ok(designated
        .iter()
        .map(|(s, t)| format!("{s}:{t}"))
        .collect::<Vec<_>>()
        .join(" "))
}

#[test]
fn acceptance_summary() {
    let criteria: [Criterion; 10] = [
        ("metric hand oracles", hand_oracles),
        ("kappa cross-oracle", kappa_cross_oracle),
        ("entropy fixtures", entropy),
        ("range and symmetry", range_symmetry),
        ("enumeration counts", enumeration_counts),
        ("binomial majority", binomial_majority),
        ("independence of synthetic errors", independence),
        ("monotone correlation", monotone_correlation),
        ("pipeline golden files", pipeline_golden),
        ("ordering fixture", ordering_fixture),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                println!("FAIL {:>2} {name}: {why}", i + 1);
                failed.push(*name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

macro_rules! criterion_tests {
    ($($name:ident => $check:ident,)+) => {
        $(
            #[test]
            fn $name() {
                if let Err(why) = $check() {
                    panic!("{why}");
                }
            }
        )+
    };
}

criterion_tests! {
    criterion_01_metric_hand_oracles => hand_oracles,
    criterion_02_kappa_cross_oracle => kappa_cross_oracle,
    criterion_03_entropy_fixtures => entropy,
    criterion_04_range_and_symmetry => range_symmetry,
    criterion_05_enumeration_counts => enumeration_counts,
    criterion_06_binomial_majority => binomial_majority,
    criterion_07_synthetic_independence => independence,
    criterion_08_monotone_correlation => monotone_correlation,
    criterion_09_pipeline_golden_files => pipeline_golden,
    criterion_10_ordering_fixture => ordering_fixture,
}
