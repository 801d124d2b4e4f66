//! Command implementations for the `ensdiv` binary.
//!
//! Every command writes to caller-supplied streams and returns its exit code,
//! so the same code path is exercised by the binary and by tests.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 semantic error
//! (a method or metric needs data the set lacks), 4 empty result.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ensdiv_core::consensus::{ConsensusMethod, WeightSource};
use ensdiv_core::eval::{
    accuracy_table, diversity_accuracy_correlation, kappa_error_csv, kappa_error_points,
    metric_coincidence_matrix, trace_jsonl, CorrelationReport,
};
use ensdiv_core::metrics::{
    entropy_measure, mean_variance, metric_average, pairwise_matrix, EntropyNormalizer,
    MetricConfig, MetricId,
};
use ensdiv_core::store::{write_data_dir, AttackSet, DataDir};
use ensdiv_core::synth::{generate, SynthConfig, SynthSet};
use ensdiv_core::teams::{
    enumerate_type1_teams, filter_by_threshold, rank_type2_teams, select_random_team, ModelPool,
    TeamPool, DEFAULT_MIN_SIZE,
};
use ensdiv_core::Error;

pub const DATA_DIR_ENV: &str = "ENSDIV_DATA_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "ensdiv",
    version,
    about = "Ensemble diversity, team selection and robustness evaluation"
)]
pub struct Cli {
    /// Data directory with labels.json, models.json and predictions/.
    #[arg(long, global = true, env = DATA_DIR_ENV)]
    pub data_dir: Option<PathBuf>,

    /// Output format for emitters.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate a data directory.
    Ingest(IngestArgs),
    /// Compute a diversity metric for a team on one set.
    Metrics(MetricsArgs),
    /// Enumerate, rank and filter teams around the target model.
    Teams(TeamsArgs),
    /// Evaluate teams x consensus methods x sets.
    Eval(EvalArgs),
    /// Kappa-error points, metric coincidence and diversity/improvement correlation.
    Report(ReportArgs),
    /// Pick one team at random from the head of a ranked pool.
    Select(SelectArgs),
    /// Generate a synthetic data directory.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory to ingest (defaults to --data-dir).
    pub dir: Option<PathBuf>,
    /// Only validate and print the summary line.
    #[arg(long)]
    pub validate: bool,
    /// Write a canonical copy of the data here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub metric: String,
    /// Comma-separated model ids (defaults to every model).
    #[arg(long, value_delimiter = ',')]
    pub team: Vec<String>,
    #[arg(long, default_value = "benign")]
    pub set: String,
    #[arg(long, default_value = "floor")]
    pub normalizer: String,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TeamsArgs {
    #[arg(long, default_value_t = DEFAULT_MIN_SIZE)]
    pub min_size: usize,
    #[arg(long, default_value = "label-kappa")]
    pub rank_by: String,
    /// Keep teams at least this diverse, in the ranking metric's units.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Keep only the best N teams.
    #[arg(long)]
    pub top: Option<usize>,
    /// Set used for ranking.
    #[arg(long, default_value = "benign")]
    pub set: String,
    /// Set used for the base-model accuracy gate.
    #[arg(long, default_value = "benign")]
    pub benign_set: String,
    #[arg(long, default_value_t = 0.0)]
    pub min_accuracy: f64,
    #[arg(long, default_value = "floor")]
    pub normalizer: String,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, conflicts_with = "team", required_unless_present = "team")]
    pub pool: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub team: Vec<String>,
    /// Comma-separated consensus methods; `weighted-accuracy` weights members by benign accuracy.
    #[arg(long, value_delimiter = ',', default_value = "majority")]
    pub method: Vec<String>,
    /// Comma-separated set ids (defaults to every set).
    #[arg(long, value_delimiter = ',')]
    pub sets: Vec<String>,
    #[arg(long, default_value = "benign")]
    pub benign_set: String,
    /// Where report and traces are written; without it the report goes to stdout.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long, default_value = "benign")]
    pub set: String,
    #[arg(long, default_value = "majority")]
    pub method: String,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "q,rho,disagreement,kappa,label-kappa,entropy"
    )]
    pub metrics: Vec<String>,
    /// Kappa variant for the kappa-error points.
    #[arg(long, default_value = "label-kappa")]
    pub kappa: String,
    #[arg(long, default_value = "floor")]
    pub normalizer: String,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub top_k: usize,
    /// Seed; when omitted the generator is seeded from OS entropy.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Target model id (defaults to the manifest target or the member common to all teams).
    #[arg(long)]
    pub target: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    pub models: usize,
    #[arg(long, default_value_t = 100)]
    pub examples: usize,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.8)]
    pub accuracy: f64,
    #[arg(long, default_value_t = 0.0)]
    pub correlation: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Set to generate as NAME or NAME=ACCURACY; repeatable.
    #[arg(long = "set")]
    pub sets: Vec<String>,
    #[arg(long)]
    pub no_confidences: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parameters shared by the team-building commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub target_model_id: String,
    pub min_size: usize,
    pub ranking_metric: MetricId,
    pub threshold: Option<f64>,
    pub top_k: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(data_dir: PathBuf, target_model_id: String) -> Self {
        Self {
            data_dir,
            target_model_id,
            min_size: DEFAULT_MIN_SIZE,
            ranking_metric: MetricId::LabelKappa,
            threshold: None,
            top_k: None,
            seed: None,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !self.data_dir.is_dir() {
            return Err(Error::MissingFile(self.data_dir.clone()).into());
        }
        if self.min_size == 0 {
            return Err(CliError::usage("--min-size must be at least 1"));
        }
        if self.top_k == Some(0) {
            return Err(CliError::usage("--top must be at least 1"));
        }
        if let Some(t) = self.threshold {
            let (lo, hi) = self.ranking_metric.range();
            if !t.is_finite() || t < lo - 1.0 || t > hi + 1.0 {
                return Err(CliError::usage(format!(
                    "--threshold {t} is outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Usage(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                Error::MissingConfidences(_)
                | Error::AllZeroWeights
                | Error::TeamTooSmall { .. }
                | Error::PoolTooSmall { .. }
                | Error::InsufficientExamples { .. } => 3,
                Error::EmptyPool | Error::TooFewTeams { .. } => 4,
                _ => 2,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => {
                let kind = format!("{e:?}");
                let kind = kind.split(['(', ' ', '{']).next().unwrap_or("Error");
                write!(f, "{kind}: {e}")
            }
            CliError::Usage(m) => write!(f, "usage error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io {
            path: PathBuf::from("<stream>"),
            source: e,
        })
    }
}

type CmdResult = Result<(), CliError>;

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli, out, err),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            code
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Ingest(a) => cmd_ingest(cli, a, out),
        Command::Metrics(a) => cmd_metrics(cli, a, out),
        Command::Teams(a) => cmd_teams(cli, a, out, err),
        Command::Eval(a) => cmd_eval(cli, a, out),
        Command::Report(a) => cmd_report(cli, a, out),
        Command::Select(a) => cmd_select(cli, a, out),
        Command::Synth(a) => cmd_synth(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn data_dir(cli: &Cli) -> Result<DataDir, CliError> {
    let dir = cli
        .data_dir
        .as_ref()
        .ok_or_else(|| CliError::usage(format!("--data-dir or {DATA_DIR_ENV} is required")))?;
    Ok(DataDir::open(dir)?)
}

fn write_file(path: &Path, body: &str) -> CmdResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, body).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn emit(out: &mut dyn Write, target: Option<&Path>, body: &str) -> CmdResult {
    match target {
        Some(p) => write_file(p, body),
        None => Ok(out.write_all(body.as_bytes())?),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::from)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct IngestSummary {
    models: usize,
    sets: Vec<String>,
    d: Vec<usize>,
    labels: usize,
    accuracy: BTreeMap<String, BTreeMap<String, f64>>,
}

pub fn cmd_ingest(cli: &Cli, args: &IngestArgs, out: &mut dyn Write) -> CmdResult {
    let dir = args
        .dir
        .clone()
        .or_else(|| cli.data_dir.clone())
        .ok_or_else(|| CliError::usage("no directory given"))?;
    let data = DataDir::open(&dir)?;
    let set_ids = data.set_ids()?;
    if set_ids.is_empty() {
        return Err(Error::MissingFile(dir.join("predictions").join("<set_id>")).into());
    }
    let sets = set_ids
        .iter()
        .map(|s| data.load_set(s))
        .collect::<Result<Vec<_>, _>>()?;

    if let Some(dest) = &args.out {
        write_data_dir(dest, data.labels(), data.models(), &sets)?;
    }

    let lengths: Vec<usize> = sets.iter().map(AttackSet::len).collect();
    let mut accuracy = BTreeMap::new();
    for set in &sets {
        let per_model = set
            .model_ids()
            .iter()
            .map(|m| Ok((m.clone(), set.benign_accuracy(m)?)))
            .collect::<Result<BTreeMap<_, _>, Error>>()?;
        accuracy.insert(set.set_id().to_string(), per_model);
    }
    match cli.format {
        Format::Json => {
            let summary = IngestSummary {
                models: data.models().len(),
                sets: set_ids,
                d: lengths,
                labels: data.labels().len(),
                accuracy,
            };
            out.write_all(to_json(&summary)?.as_bytes())?;
        }
        Format::Csv => {
            let (lo, hi) = (
                lengths.iter().min().copied().unwrap_or(0),
                lengths.iter().max().copied().unwrap_or(0),
            );
            let d = if lo == hi {
                lo.to_string()
            } else {
                format!("{lo}-{hi}")
            };
            writeln!(
                out,
                "{} models, {} sets, d={d}, L={}",
                data.models().len(),
                sets.len(),
                data.labels().len()
            )?;
            if !args.validate {
                writeln!(out, "set,model,accuracy")?;
                for (set, per_model) in &accuracy {
                    for m in data.models() {
                        writeln!(out, "{set},{},{:.4}", m.model_id, per_model[&m.model_id])?;
                    }
                }
            }
        }
    }
    Ok(())
}

fn parse_metric(s: &str) -> Result<MetricId, CliError> {
    Ok(s.parse::<MetricId>()?)
}

fn metric_config(normalizer: &str) -> Result<MetricConfig, CliError> {
    Ok(MetricConfig {
        entropy_normalizer: normalizer.parse::<EntropyNormalizer>()?,
    })
}

fn team_or_all(data: &DataDir, team: &[String]) -> Vec<String> {
    if team.is_empty() {
        data.models().iter().map(|m| m.model_id.clone()).collect()
    } else {
        team.to_vec()
    }
}

#[derive(Serialize)]
struct PairwiseOutput<'a> {
    metric: MetricId,
    set: &'a str,
    models: &'a [String],
    matrix: &'a [Vec<f64>],
    average: ScalarOutput,
}

#[derive(Serialize)]
struct ScalarOutput {
    value: f64,
    degenerate: bool,
}

pub fn cmd_metrics(cli: &Cli, args: &MetricsArgs, out: &mut dyn Write) -> CmdResult {
    let metric = parse_metric(&args.metric)?;
    let config = metric_config(&args.normalizer)?;
    let data = data_dir(cli)?;
    let set = data.load_set(&args.set)?;
    let team = team_or_all(&data, &args.team);
    if let Some(m) = team.iter().find(|m| !set.contains(m)) {
        return Err(Error::UnknownModel(m.clone()).into());
    }

    let body = if metric.is_pairwise() {
        if team.len() < 2 {
            return Err(CliError::usage("pairwise metrics need at least 2 models"));
        }
        let matrix = pairwise_matrix(metric, &set, &team)?;
        let avg = metric_average(&matrix);
        match cli.format {
            Format::Csv => format!("{}average,{}\n", matrix.to_csv(), avg.value),
            Format::Json => to_json(&PairwiseOutput {
                metric,
                set: set.set_id(),
                models: &matrix.model_ids,
                matrix: &matrix.values,
                average: ScalarOutput {
                    value: avg.value,
                    degenerate: avg.degenerate,
                },
            })?,
        }
    } else {
        let score = match metric {
            MetricId::Entropy => {
                entropy_measure(&set.derive_oracle(&team)?, config.entropy_normalizer)
            }
            _ => mean_variance(&set, &team)?,
        };
        match cli.format {
            Format::Csv => format!(
                "metric,value,degenerate\n{metric},{},{}\n",
                score.value, score.degenerate
            ),
            Format::Json => to_json(&score)?,
        }
    };
    emit(out, args.output.as_deref(), &body)
}

pub fn cmd_teams(
    cli: &Cli,
    args: &TeamsArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let data = data_dir(cli)?;
    let mut run = RunConfig::new(data.root().to_path_buf(), data.target().model_id.clone());
    run.min_size = args.min_size;
    run.ranking_metric = parse_metric(&args.rank_by)?;
    run.threshold = args.threshold;
    run.top_k = args.top;
    run.validate()?;
    let config = metric_config(&args.normalizer)?;

    let benign = data.load_set(&args.benign_set)?;
    let (pool, rejected) = ModelPool::from_manifest(data.models(), &benign, args.min_accuracy)?;
    for e in &rejected {
        writeln!(err, "rejected: {e}")?;
    }
    let teams = enumerate_type1_teams(&pool, run.min_size)?;
    let ranking_set = if args.set == args.benign_set {
        benign
    } else {
        data.load_set(&args.set)?
    };
    let mut ranked = rank_type2_teams(teams.teams, run.ranking_metric, &ranking_set, &config)?;
    if let Some(t) = run.threshold {
        ranked = filter_by_threshold(&ranked, t)?;
    }
    if let Some(top) = run.top_k {
        ranked.truncate(top);
    }
    if ranked.is_empty() {
        return Err(Error::EmptyPool.into());
    }
    let body = match cli.format {
        Format::Json => format!("{}\n", ranked.to_json()?),
        Format::Csv => {
            let mut s = format!("rank,team,size,{}\n", run.ranking_metric);
            for (i, t) in ranked.teams.iter().enumerate() {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    i + 1,
                    t.id(),
                    t.size(),
                    t.scores[&run.ranking_metric].value
                ));
            }
            s
        }
    };
    // The pool file is always JSON; the chosen format only affects stdout.
    match &args.output {
        Some(p) => write_file(p, &format!("{}\n", ranked.to_json()?)),
        None => Ok(out.write_all(body.as_bytes())?),
    }
}

fn load_pool(path: &Path, target: &str) -> Result<TeamPool, CliError> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    Ok(TeamPool::from_json(&text, target)?)
}

fn resolve_method(
    name: &str,
    data: &DataDir,
    benign_set: &str,
) -> Result<ConsensusMethod, CliError> {
    if name == "weighted-accuracy" {
        let benign = data.load_set(benign_set)?;
        let weights = benign
            .model_ids()
            .iter()
            .map(|m| Ok((m.clone(), benign.benign_accuracy(m)?)))
            .collect::<Result<BTreeMap<_, _>, Error>>()?;
        return Ok(ConsensusMethod::Weighted(WeightSource::Fixed(weights)));
    }
    Ok(name.parse::<ConsensusMethod>()?)
}

pub fn cmd_eval(cli: &Cli, args: &EvalArgs, out: &mut dyn Write) -> CmdResult {
    let data = data_dir(cli)?;
    let target = data.target().model_id.clone();
    let teams: Vec<Vec<String>> = match &args.pool {
        Some(p) => load_pool(p, &target)?
            .teams
            .iter()
            .map(|t| t.members().to_vec())
            .collect(),
        None => vec![args.team.clone()],
    };
    if teams.is_empty() {
        return Err(Error::EmptyPool.into());
    }
    let methods = args
        .method
        .iter()
        .map(|m| resolve_method(m, &data, &args.benign_set))
        .collect::<Result<Vec<_>, _>>()?;
    let set_ids = if args.sets.is_empty() {
        data.set_ids()?
    } else {
        args.sets.clone()
    };
    let sets = set_ids
        .iter()
        .map(|s| data.load_set(s))
        .collect::<Result<Vec<_>, _>>()?;
    let set_refs: Vec<&AttackSet> = sets.iter().collect();
    let table = accuracy_table(&teams, &methods, &set_refs)?;

    let report = match cli.format {
        Format::Csv => table.to_csv(),
        Format::Json => to_json(&table)?,
    };
    let Some(dir) = &args.output_dir else {
        return Ok(out.write_all(report.as_bytes())?);
    };
    let report_name = match cli.format {
        Format::Csv => "report.csv",
        Format::Json => "report.json",
    };
    write_file(&dir.join(report_name), &report)?;

    let mut written = 0usize;
    for row in &table.rows {
        let method = methods
            .iter()
            .find(|m| m.id() == row.method_id)
            .expect("row method comes from the input list");
        for set in &sets {
            let results = method.run(set, &row.members)?;
            let path = dir
                .join("traces")
                .join(set.set_id())
                .join(&row.method_id)
                .join(format!("{}.jsonl", row.team_id));
            write_file(&path, &trace_jsonl(&results, set.labels())?)?;
            written += 1;
        }
    }
    writeln!(
        out,
        "wrote {} rows to {} and {written} traces",
        table.rows.len(),
        dir.join(report_name).display()
    )?;
    Ok(())
}

#[derive(Serialize)]
struct CorrelationFile<'a> {
    set: &'a str,
    method: &'a str,
    correlations: Vec<CorrelationReport>,
}

pub fn cmd_report(cli: &Cli, args: &ReportArgs, out: &mut dyn Write) -> CmdResult {
    let data = data_dir(cli)?;
    let pool = load_pool(&args.pool, &data.target().model_id)?;
    let set = data.load_set(&args.set)?;
    let method = resolve_method(&args.method, &data, "benign")?;
    let metrics = args
        .metrics
        .iter()
        .map(|m| parse_metric(m))
        .collect::<Result<Vec<_>, _>>()?;
    let kappa = parse_metric(&args.kappa)?;
    let config = metric_config(&args.normalizer)?;

    let models: Vec<String> = data.models().iter().map(|m| m.model_id.clone()).collect();
    let points = kappa_error_points(&models, &set, kappa)?;
    let coincidence = metric_coincidence_matrix(&pool, &metrics, &set, &config)?;
    let correlations = metrics
        .iter()
        .map(|&m| diversity_accuracy_correlation(&pool, m, &method, &set, &config))
        .collect::<Result<Vec<_>, _>>()?;

    let dir = &args.output_dir;
    write_file(&dir.join("kappa_error.csv"), &kappa_error_csv(&points))?;
    write_file(&dir.join("coincidence.csv"), &coincidence.to_csv())?;
    write_file(
        &dir.join("correlation.json"),
        &to_json(&CorrelationFile {
            set: set.set_id(),
            method: method.id(),
            correlations,
        })?,
    )?;
    if cli.format == Format::Json {
        write_file(&dir.join("kappa_error.json"), &to_json(&points)?)?;
        write_file(&dir.join("coincidence.json"), &to_json(&coincidence)?)?;
    }
    writeln!(
        out,
        "wrote {} kappa-error points, {}x{} coincidence matrix to {}",
        points.len(),
        metrics.len(),
        metrics.len(),
        dir.display()
    )?;
    Ok(())
}

fn infer_target(cli: &Cli, args: &SelectArgs) -> Result<String, CliError> {
    if let Some(t) = &args.target {
        return Ok(t.clone());
    }
    if cli.data_dir.is_some() {
        return Ok(data_dir(cli)?.target().model_id.clone());
    }
    let text = fs::read_to_string(&args.pool).map_err(|e| Error::Io {
        path: args.pool.clone(),
        source: e,
    })?;
    let records: Vec<ensdiv_core::teams::TeamRecord> =
        serde_json::from_str(&text).map_err(|e| Error::SchemaError {
            location: args.pool.display().to_string(),
            message: e.to_string(),
        })?;
    let mut common: Option<Vec<String>> = None;
    for r in &records {
        common = Some(match common {
            None => r.members.clone(),
            Some(c) => c.into_iter().filter(|m| r.members.contains(m)).collect(),
        });
    }
    match common.as_deref() {
        None => Err(Error::EmptyPool.into()),
        Some([single]) => Ok(single.clone()),
        Some(_) => Err(CliError::usage(
            "cannot infer the target model; pass --target or --data-dir",
        )),
    }
}

pub fn cmd_select(cli: &Cli, args: &SelectArgs, out: &mut dyn Write) -> CmdResult {
    let target = infer_target(cli, args)?;
    let pool = load_pool(&args.pool, &target)?;
    let team = select_random_team(&pool, args.top_k, args.seed)?;
    let rank = pool
        .teams
        .iter()
        .position(|t| *t == team)
        .expect("selected from the pool");
    let record = pool.to_records().swap_remove(rank);
    out.write_all(to_json(&record)?.as_bytes())?;
    Ok(())
}

fn parse_set_arg(arg: &str) -> Result<SynthSet, CliError> {
    match arg.split_once('=') {
        None => Ok(SynthSet {
            set_id: arg.to_string(),
            accuracy: None,
        }),
        Some((name, acc)) => {
            let accuracy = acc
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("bad accuracy in --set {arg}")))?;
            Ok(SynthSet {
                set_id: name.to_string(),
                accuracy: Some(accuracy),
            })
        }
    }
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> CmdResult {
    let sets = if args.sets.is_empty() {
        SynthConfig::default().sets
    } else {
        args.sets
            .iter()
            .map(|s| parse_set_arg(s))
            .collect::<Result<Vec<_>, _>>()?
    };
    let config = SynthConfig {
        models: args.models,
        examples: args.examples,
        classes: args.classes,
        accuracy: args.accuracy,
        correlation: args.correlation,
        seed: args.seed,
        confidences: !args.no_confidences,
        sets,
    };
    let data = generate(&config)?;
    data.write(&args.out)?;
    writeln!(
        out,
        "wrote {} models, {} sets, d={}, L={} to {}",
        config.models,
        config.sets.len(),
        config.examples,
        config.classes,
        args.out.display()
    )?;
    Ok(())
}
