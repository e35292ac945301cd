//! Command-line interface.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 input or
//! data error, 4 network error. Primary outputs are byte-identical for
//! identical flags and inputs; anything time-dependent goes to the manifest
//! sidecar.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sess_core::confidence::{compute_weights, normalize, parse_verbal_response, ConfidenceSource};
use sess_core::corpus::Pool;
use sess_core::objectives::Objective;
use sess_core::oracle::{check_monotonicity, check_submodularity, ObjectiveFamily};
use sess_core::selection::{self, Algorithm, ObjectiveLabel, SelectionConfig};
use sess_core::simharness::{compare_selectors, HarnessConfig, Selector, SyntheticTask};
use sess_core::similarity::{dense_similarity, mix, tfidf_similarity, SimilarityMatrix};

use crate::cache::{self, CacheSidecar};
use crate::client::{self, EndpointConfig, PromptFormat, ScoringMode};
use crate::io;
use crate::manifest::{sha256_file, RunManifest};
use crate::output::{to_json_bytes, PropertyRecord, SelectionRecord, SimulateRecord, VerifyRecord};

#[derive(Debug, Parser)]
#[command(
    name = "sess",
    version,
    about = "Budgeted evaluation-subset selection via submodular maximization"
)]
pub struct Cli {
    /// Cap worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select an evaluation subset from a pool.
    Select(SelectArgs),
    /// Run randomized submodularity/monotonicity checks.
    Verify(VerifyArgs),
    /// Compare selectors inside the synthetic optimization harness.
    Simulate(SimulateArgs),
    /// Confidence-file construction.
    #[command(subcommand)]
    Confidence(ConfidenceCmd),
    /// Fetch scorer signals from an OpenAI-compatible endpoint.
    #[command(subcommand)]
    Fetch(FetchCmd),
    /// Similarity-matrix construction.
    #[command(subcommand)]
    Similarity(SimilarityCmd),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ObjectiveArg {
    Rep,
    Lc,
    Vlc,
    Wrep,
}

impl ObjectiveArg {
    fn label(self) -> ObjectiveLabel {
        match self {
            ObjectiveArg::Rep => ObjectiveLabel::Rep,
            ObjectiveArg::Lc => ObjectiveLabel::Lc,
            ObjectiveArg::Vlc => ObjectiveLabel::Vlc,
            ObjectiveArg::Wrep => ObjectiveLabel::Wrep,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgorithmArg {
    Naive,
    Lazy,
    Topk,
}

impl AlgorithmArg {
    fn algorithm(self) -> Algorithm {
        match self {
            AlgorithmArg::Naive => Algorithm::Naive,
            AlgorithmArg::Lazy => Algorithm::Lazy,
            AlgorithmArg::Topk => Algorithm::TopK,
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Pool JSONL: {"id", "text", "answer"?, "tags"?} per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Embedding JSONL: {"id", "vector"} per line (rep/wrep).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Confidence JSONL: {"id", "raw", "source"} per line (lc/vlc/wrep).
    #[arg(long)]
    pub confidences: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub objective: ObjectiveArg,
    /// Number of examples to select.
    #[arg(long)]
    pub budget: usize,
    /// Dense/lexical similarity mixing weight.
    #[arg(long, default_value_t = 0.7)]
    pub alpha: f64,
    /// Difficulty weight for wrep.
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = AlgorithmArg::Lazy)]
    pub algorithm: AlgorithmArg,
    /// Recorded in the manifest; selection itself is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path (stdout when omitted; manifests need a path).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Rep,
    Lc,
    Wrep,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Objective family to check.
    #[arg(long, value_enum, default_value_t = KindArg::All)]
    pub kind: KindArg,
    /// Randomized trials per check.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long = "pool-size", default_value_t = 200)]
    pub pool_size: usize,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 20)]
    pub budget: usize,
    #[arg(long, default_value_t = 16)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 7)]
    pub candidates: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    /// Master seed: drives the task, the random selector, and the optimizer.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ConfidenceCmd {
    /// Parse per-example verbal replies (<id>.txt) into confidence JSONL.
    ParseVerbal(ParseVerbalArgs),
    /// Turn answer-token logprobs into confidence JSONL.
    FromLogprobs(FromLogprobsArgs),
}

#[derive(Debug, Args)]
pub struct ParseVerbalArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Directory holding one <id>.txt reply per example.
    #[arg(long)]
    pub replies: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FromLogprobsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Logprob JSONL: {"id", "answer_token_logprobs"} per line.
    #[arg(long)]
    pub logprobs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum FetchCmd {
    /// Fetch verbalized-confidence replies into a directory.
    Verbal(FetchVerbalArgs),
    /// Fetch gold-answer token logprobs into JSONL.
    Logprobs(FetchLogprobsArgs),
}

#[derive(Debug, Args)]
pub struct CommonFetchArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Base URL of an OpenAI-compatible server (with or without /v1).
    #[arg(long)]
    pub endpoint: String,
    #[arg(long)]
    pub model: String,
    /// Maximum in-flight requests.
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 30)]
    pub timeout: u64,
    #[arg(long = "max-retries", default_value_t = 3)]
    pub max_retries: u32,
}

#[derive(Debug, Args)]
pub struct FetchVerbalArgs {
    #[command(flatten)]
    pub common: CommonFetchArgs,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    /// Re-fetch even when <id>.txt already exists.
    #[arg(long)]
    pub force: bool,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Numeric,
    Choice,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScoringArg {
    Echo,
    Completion,
}

#[derive(Debug, Args)]
pub struct FetchLogprobsArgs {
    #[command(flatten)]
    pub common: CommonFetchArgs,
    /// Prompt template: numeric answers or A–D choices.
    #[arg(long, value_enum)]
    pub format: FormatArg,
    /// How logprobs are obtained from the server.
    #[arg(long, value_enum, default_value_t = ScoringArg::Echo)]
    pub scoring: ScoringArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum SimilarityCmd {
    /// Build the mixed similarity matrix and write the binary cache.
    Build(SimilarityBuildArgs),
}

#[derive(Debug, Args)]
pub struct SimilarityBuildArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// CLI failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub exit_code: i32,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NETWORK: i32 = 4;

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        message: message.into(),
        exit_code: EXIT_USAGE,
    }
}

fn data(message: impl std::fmt::Display) -> CliError {
    CliError {
        message: message.to_string(),
        exit_code: EXIT_DATA,
    }
}

fn network(message: impl std::fmt::Display) -> CliError {
    CliError {
        message: message.to_string(),
        exit_code: EXIT_NETWORK,
    }
}

fn verification(message: impl Into<String>) -> CliError {
    CliError {
        message: message.into(),
        exit_code: EXIT_VERIFICATION,
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.threads {
        Some(0) => Err(usage("--threads must be at least 1")),
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| usage(format!("cannot build thread pool: {e}")))?;
            pool.install(|| dispatch(cli.command))
        }
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Select(args) => cmd_select(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Confidence(ConfidenceCmd::ParseVerbal(args)) => cmd_parse_verbal(args),
        Command::Confidence(ConfidenceCmd::FromLogprobs(args)) => cmd_from_logprobs(args),
        Command::Fetch(FetchCmd::Verbal(args)) => cmd_fetch_verbal(args),
        Command::Fetch(FetchCmd::Logprobs(args)) => cmd_fetch_logprobs(args),
        Command::Similarity(SimilarityCmd::Build(args)) => cmd_similarity_build(args),
    }
}

/// Writes a primary output to `--out` (or stdout) and, when a path is given,
/// a manifest sidecar naming it.
fn emit(
    out: &Option<PathBuf>,
    contents: &str,
    subcommand: &str,
    config: serde_json::Value,
    inputs: &[&Path],
) -> Result<(), CliError> {
    match out {
        Some(path) => {
            io::write_text(path, contents).map_err(data)?;
            let mut manifest = RunManifest::new(subcommand, config);
            for input in inputs {
                manifest.add_input(input).map_err(data)?;
            }
            manifest.add_output(path);
            manifest.write_beside(path).map_err(data)?;
            Ok(())
        }
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn cmd_select(args: SelectArgs) -> Result<(), CliError> {
    let label = args.objective.label();
    let needs_embeddings = matches!(label, ObjectiveLabel::Rep | ObjectiveLabel::Wrep);
    let needs_confidences = matches!(
        label,
        ObjectiveLabel::Lc | ObjectiveLabel::Vlc | ObjectiveLabel::Wrep
    );
    if needs_embeddings && args.embeddings.is_none() {
        return Err(usage(format!(
            "--objective {} requires --embeddings",
            label.as_str()
        )));
    }
    if needs_confidences && args.confidences.is_none() {
        return Err(usage(format!(
            "--objective {} requires --confidences",
            label.as_str()
        )));
    }

    let pool = io::load_pool(&args.input).map_err(data)?;

    let config = SelectionConfig {
        k: args.budget,
        alpha: args.alpha,
        lambda: args.lambda,
        algorithm: args.algorithm.algorithm(),
        objective: label,
    };
    config
        .validate(pool.len())
        .map_err(|e| usage(e.to_string()))?;

    let similarity = if needs_embeddings {
        let emb = io::load_embeddings(args.embeddings.as_ref().unwrap(), &pool).map_err(data)?;
        Some(build_similarity(&pool, &emb, args.alpha).map_err(data)?)
    } else {
        None
    };
    let confidence = if needs_confidences {
        let raw = io::load_confidences(args.confidences.as_ref().unwrap(), &pool).map_err(data)?;
        let expected = match label {
            ObjectiveLabel::Lc => Some(ConfidenceSource::Loglik),
            ObjectiveLabel::Vlc => Some(ConfidenceSource::Verbal),
            _ => None,
        };
        if let Some(expected) = expected {
            if raw.source() != expected {
                return Err(data(format!(
                    "--objective {} expects {} confidences, file declares {}",
                    label.as_str(),
                    expected.as_str(),
                    raw.source().as_str()
                )));
            }
        }
        Some(normalize(&raw))
    } else {
        None
    };
    let weights = match label {
        ObjectiveLabel::Wrep => Some(
            compute_weights(confidence.as_ref().unwrap(), args.lambda)
                .map_err(|e| usage(e.to_string()))?,
        ),
        _ => None,
    };

    let objective = match label {
        ObjectiveLabel::Rep => Objective::Rep(similarity.as_ref().unwrap()),
        ObjectiveLabel::Lc | ObjectiveLabel::Vlc => Objective::Lc(confidence.as_ref().unwrap()),
        ObjectiveLabel::Wrep => {
            Objective::Wrep(similarity.as_ref().unwrap(), weights.as_ref().unwrap())
        }
    };

    let started = Instant::now();
    let mut result = selection::run(&objective, &config).map_err(|e| match e {
        selection::SelectError::TopKNeedsModularObjective => usage(e.to_string()),
        other => data(other.to_string()),
    })?;
    result.wall_time = Some(started.elapsed());

    let record = SelectionRecord::from_result(&result, &pool);
    let mut inputs: Vec<&Path> = vec![args.input.as_path()];
    if let Some(p) = &args.embeddings {
        inputs.push(p);
    }
    if let Some(p) = &args.confidences {
        inputs.push(p);
    }
    emit(
        &args.out,
        &to_json_bytes(&record),
        "select",
        serde_json::json!({
            "objective": label.as_str(),
            "budget": args.budget,
            "alpha": args.alpha,
            "lambda": args.lambda,
            "algorithm": config.algorithm.as_str(),
            "seed": args.seed,
            "wall_time_ms": result.wall_time.map(|d| d.as_millis() as u64),
        }),
        &inputs,
    )
}

/// Dense similarity from embeddings, mixed with the TF-IDF matrix unless a
/// component's weight is exactly zero.
fn build_similarity(
    pool: &Pool,
    emb: &sess_core::corpus::EmbeddingTable,
    alpha: f64,
) -> Result<SimilarityMatrix, sess_core::similarity::SimilarityError> {
    if alpha == 0.0 {
        return tfidf_similarity(pool);
    }
    let dense = dense_similarity(emb)?;
    if alpha == 1.0 {
        return Ok(dense);
    }
    let lexical = tfidf_similarity(pool)?;
    mix(&dense, &lexical, alpha)
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let families: Vec<ObjectiveFamily> = match args.kind {
        KindArg::Rep => vec![ObjectiveFamily::Rep],
        KindArg::Lc => vec![ObjectiveFamily::Lc],
        KindArg::Wrep => vec![ObjectiveFamily::Wrep],
        KindArg::All => ObjectiveFamily::ALL.to_vec(),
    };

    let mut reports = Vec::new();
    for &family in &families {
        let sub = check_submodularity(family, args.trials, args.seed).map_err(data)?;
        reports.push(PropertyRecord::from_report(&sub));
        let mono = check_monotonicity(family, args.trials, args.seed).map_err(data)?;
        reports.push(PropertyRecord::from_report(&mono));
    }
    let total_violations = reports.iter().map(|r| r.violations).sum();
    let record = VerifyRecord {
        total_violations,
        reports,
    };
    emit(
        &args.out,
        &to_json_bytes(&record),
        "verify",
        serde_json::json!({
            "kind": families.iter().map(|f| f.as_str()).collect::<Vec<_>>(),
            "trials": args.trials,
            "seed": args.seed,
        }),
        &[],
    )?;
    if total_violations > 0 {
        return Err(verification(format!(
            "{total_violations} property violation(s) found"
        )));
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let task = SyntheticTask::generate(args.pool_size, args.dim, args.seed)
        .map_err(|e| usage(e.to_string()))?;
    let config = HarnessConfig {
        budget: args.budget,
        repetitions: args.repetitions,
        steps: args.steps,
        candidates_per_step: args.candidates,
        master_seed: args.seed,
        lambda: args.lambda,
    };
    let table =
        compare_selectors(&task, &Selector::DEFAULT, &config).map_err(|e| usage(e.to_string()))?;
    let record = SimulateRecord::from_table(&table);

    if let Some(csv_path) = &args.csv {
        io::write_text(csv_path, &record.to_csv()).map_err(data)?;
    }
    emit(
        &args.out,
        &to_json_bytes(&record),
        "simulate",
        serde_json::json!({
            "pool_size": args.pool_size,
            "dim": args.dim,
            "budget": args.budget,
            "repetitions": args.repetitions,
            "steps": args.steps,
            "candidates": args.candidates,
            "lambda": args.lambda,
            "seed": args.seed,
            "csv": args.csv.as_ref().map(|p| p.display().to_string()),
        }),
        &[],
    )
}

fn cmd_parse_verbal(args: ParseVerbalArgs) -> Result<(), CliError> {
    let pool = io::load_pool(&args.input).map_err(data)?;
    let replies = io::read_verbal_replies(&args.replies, &pool).map_err(data)?;
    let mut entries = Vec::with_capacity(replies.len());
    for (id, text) in &replies {
        let parse =
            parse_verbal_response(text).map_err(|e| data(format!("reply for {id:?}: {e}")))?;
        for warning in &parse.warnings {
            eprintln!("warning: reply for {id:?}: {warning}");
        }
        entries.push((id.clone(), parse.confidence));
    }
    io::write_confidences(&args.out, &entries, ConfidenceSource::Verbal).map_err(data)?;

    let mut manifest = RunManifest::new(
        "confidence parse-verbal",
        serde_json::json!({"replies": args.replies.display().to_string()}),
    );
    manifest.add_input(&args.input).map_err(data)?;
    manifest.add_output(&args.out);
    manifest.write_beside(&args.out).map_err(data)?;
    Ok(())
}

fn cmd_from_logprobs(args: FromLogprobsArgs) -> Result<(), CliError> {
    let pool = io::load_pool(&args.input).map_err(data)?;
    let records = io::load_logprobs(&args.logprobs, &pool).map_err(data)?;
    let raw = sess_core::confidence::loglik_confidence(&pool, &records)
        .map_err(|e| data(e.to_string()))?;
    let entries: Vec<(String, f64)> = pool
        .ids()
        .zip(raw.values())
        .map(|(id, &value)| (id.to_string(), value))
        .collect();
    io::write_confidences(&args.out, &entries, ConfidenceSource::Loglik).map_err(data)?;

    let mut manifest = RunManifest::new("confidence from-logprobs", serde_json::json!({}));
    manifest.add_input(&args.input).map_err(data)?;
    manifest.add_input(&args.logprobs).map_err(data)?;
    manifest.add_output(&args.out);
    manifest.write_beside(&args.out).map_err(data)?;
    Ok(())
}

fn endpoint_config(common: &CommonFetchArgs, temperature: f64) -> EndpointConfig {
    let mut cfg = EndpointConfig::new(common.endpoint.clone(), common.model.clone());
    cfg.timeout_secs = common.timeout;
    cfg.max_retries = common.max_retries;
    cfg.concurrency = common.concurrency;
    cfg.temperature = temperature;
    cfg
}

fn map_client_error(err: client::ClientError) -> CliError {
    match err {
        client::ClientError::InvalidEndpoint { .. } | client::ClientError::InvalidTimeout => {
            usage(err.to_string())
        }
        client::ClientError::MissingAnswer(_) => data(err.to_string()),
        _ => network(err.to_string()),
    }
}

fn report_fetch(summary: &client::FetchSummary) -> Result<(), CliError> {
    eprintln!(
        "{} request(s), {} written, {} skipped, {} failed",
        summary.requests,
        summary.written,
        summary.skipped,
        summary.failures.len()
    );
    if !summary.failures.is_empty() {
        let path = summary
            .failures_path
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default();
        return Err(network(format!(
            "{} request(s) failed; see {path}",
            summary.failures.len()
        )));
    }
    Ok(())
}

fn cmd_fetch_verbal(args: FetchVerbalArgs) -> Result<(), CliError> {
    let pool = io::load_pool(&args.common.input).map_err(data)?;
    let cfg = endpoint_config(&args.common, args.temperature);
    let summary =
        client::fetch_verbal(&cfg, &pool, &args.out_dir, args.force).map_err(map_client_error)?;
    report_fetch(&summary)
}

fn cmd_fetch_logprobs(args: FetchLogprobsArgs) -> Result<(), CliError> {
    let pool = io::load_pool(&args.common.input).map_err(data)?;
    let cfg = endpoint_config(&args.common, 0.0);
    let format = match args.format {
        FormatArg::Numeric => PromptFormat::Numeric,
        FormatArg::Choice => PromptFormat::Choice,
    };
    let scoring = match args.scoring {
        ScoringArg::Echo => ScoringMode::Echo,
        ScoringArg::Completion => ScoringMode::Completion,
    };
    let summary = client::fetch_logprobs(&cfg, &pool, format, scoring, &args.out)
        .map_err(map_client_error)?;
    report_fetch(&summary)
}

fn cmd_similarity_build(args: SimilarityBuildArgs) -> Result<(), CliError> {
    if !args.alpha.is_finite() || !(0.0..=1.0).contains(&args.alpha) {
        return Err(usage(format!(
            "--alpha must lie in [0, 1], got {}",
            args.alpha
        )));
    }
    let pool = io::load_pool(&args.input).map_err(data)?;
    let emb = io::load_embeddings(&args.embeddings, &pool).map_err(data)?;
    let matrix = build_similarity(&pool, &emb, args.alpha).map_err(data)?;

    let sidecar = CacheSidecar {
        alpha: args.alpha,
        source_hashes: [
            ("pool".to_string(), sha256_file(&args.input).map_err(data)?),
            (
                "embeddings".to_string(),
                sha256_file(&args.embeddings).map_err(data)?,
            ),
        ]
        .into_iter()
        .collect(),
    };
    cache::write_matrix(&args.out, &matrix, &sidecar).map_err(data)?;

    let mut manifest = RunManifest::new(
        "similarity build",
        serde_json::json!({"alpha": args.alpha, "n": matrix.n()}),
    );
    manifest.add_input(&args.input).map_err(data)?;
    manifest.add_input(&args.embeddings).map_err(data)?;
    manifest.add_output(&args.out);
    manifest.add_output(&cache::sidecar_path(&args.out));
    manifest.write_beside(&args.out).map_err(data)?;
    Ok(())
}
