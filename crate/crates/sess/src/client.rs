//! Scorer-model client for any OpenAI-compatible HTTP endpoint.
//!
//! Two ingestion paths feed the confidence pipeline:
//!
//! - `fetch_verbal` asks for four guesses with stated probabilities via the
//!   chat-completions route and stores each raw reply as `<id>.txt`;
//! - `fetch_logprobs` scores the gold answer via the completions route and
//!   writes `{"id", "answer_token_logprobs"}` JSONL. Two scoring modes are
//!   supported: `echo` requests the prompt tokens back with logprobs and
//!   slices out the answer span; `completion` sends the prompt up to
//!   `Answer:` and accepts the greedy continuation only when it reproduces
//!   the gold answer. Each record notes which mode produced it.
//!
//! Individual request failures never abort a batch: they are retried with
//! exponential backoff, then recorded in a failures manifest so a rerun can
//! resume (existing reply files are skipped unless `--force`).

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use sess_core::corpus::{Example, Pool};

/// Prompt template for answer scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptFormat {
    /// Free-form numeric answers.
    Numeric,
    /// Multiple choice A–D.
    Choice,
}

impl PromptFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptFormat::Numeric => "numeric",
            PromptFormat::Choice => "choice",
        }
    }
}

/// How answer logprobs are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoringMode {
    /// Echoed prompt tokens, answer span sliced by text offset.
    Echo,
    /// Greedy continuation after `Answer:`, accepted when it matches.
    Completion,
}

impl ScoringMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoringMode::Echo => "echo",
            ScoringMode::Completion => "completion",
        }
    }
}

/// Connection settings for one scorer endpoint.
#[derive(Debug, Clone)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub temperature: f64,
    pub concurrency: usize,
    pub backoff_ms: u64,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model: model.into(),
            api_key: api_key_from_env(),
            timeout_secs: 30,
            max_retries: 3,
            temperature: 0.0,
            concurrency: 4,
            backoff_ms: 500,
        }
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        let url =
            reqwest::Url::parse(&self.base_url).map_err(|e| ClientError::InvalidEndpoint {
                url: self.base_url.clone(),
                reason: e.to_string(),
            })?;
        if !url.has_host() {
            return Err(ClientError::InvalidEndpoint {
                url: self.base_url.clone(),
                reason: "URL must be absolute with a host".into(),
            });
        }
        if self.timeout_secs == 0 {
            return Err(ClientError::InvalidTimeout);
        }
        Ok(())
    }
}

/// `SESS_API_KEY` wins over `OPENAI_API_KEY`; local servers need neither.
pub fn api_key_from_env() -> Option<String> {
    std::env::var("SESS_API_KEY")
        .or_else(|_| std::env::var("OPENAI_API_KEY"))
        .ok()
        .filter(|k| !k.is_empty())
}

/// The verbalized-confidence elicitation prompt.
pub fn render_verbal_prompt(question: &str) -> String {
    format!(
        "Provide your 4 best guesses and the probability that each is correct (0.0 to 1.0) \
for the following question. Give ONLY the guesses and probabilities, no other words or \
explanation. For example:\n\
\n\
G1: <first most likely guess, as short as possible; not a complete sentence, just the guess!>\n\
P1: <the probability between 0.0 and 1.0 that G1 is correct, without any extra commentary \
whatsoever; just the probability!>\n\
\n\
G2: <second most likely guess, as short as possible; not a complete sentence, just the guess!>\n\
P2: <the probability between 0.0 and 1.0 that G2 is correct, without any extra commentary \
whatsoever; just the probability!>\n\
\n\
G3: <third most likely guess, as short as possible; not a complete sentence, just the guess!>\n\
P3: <the probability between 0.0 and 1.0 that G3 is correct, without any extra commentary \
whatsoever; just the probability!>\n\
\n\
G4: <fourth most likely guess, as short as possible; not a complete sentence, just the guess!>\n\
P4: <the probability between 0.0 and 1.0 that G4 is correct, without any extra commentary \
whatsoever; just the probability!>\n\
\n\
The question is:\n\
{question}"
    )
}

/// Prompt scoring the gold answer, ending with `Answer: {answer}`.
pub fn render_answer_prompt(format: PromptFormat, question: &str, answer: &str) -> String {
    format!("{}{answer}", render_answer_prefix(format, question))
}

/// The same prompt cut right after `Answer:`, for completion scoring.
pub fn render_answer_prefix(format: PromptFormat, question: &str) -> String {
    match format {
        PromptFormat::Numeric => {
            format!(
                "Directly give the numeric answer to the following question: {question}\nAnswer: "
            )
        }
        PromptFormat::Choice => {
            format!("Directly give the choice A or B or C or D: {question}\nAnswer: ")
        }
    }
}

/// One unrecovered per-example failure.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FailureRecord {
    pub id: String,
    pub status: Option<u16>,
    pub error: String,
}

/// What a fetch run did.
#[derive(Debug, Clone)]
pub struct FetchSummary {
    /// Requests actually issued (idempotent reruns issue none).
    pub requests: usize,
    pub written: usize,
    pub skipped: usize,
    pub failures: Vec<FailureRecord>,
    pub failures_path: Option<PathBuf>,
}

/// Fetches a verbalized-confidence reply per pool example into
/// `<out_dir>/<id>.txt`. Existing files are skipped unless `force`.
pub fn fetch_verbal(
    cfg: &EndpointConfig,
    pool: &Pool,
    out_dir: &Path,
    force: bool,
) -> Result<FetchSummary, ClientError> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|source| ClientError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let jobs: Vec<&Example> = pool
        .examples()
        .iter()
        .filter(|ex| force || !out_dir.join(format!("{}.txt", ex.id)).exists())
        .collect();
    let skipped = pool.len() - jobs.len();
    if jobs.is_empty() {
        return Ok(FetchSummary {
            requests: 0,
            written: 0,
            skipped,
            failures: Vec::new(),
            failures_path: None,
        });
    }

    let client = build_client(cfg)?;
    let url = endpoint_url(&cfg.base_url, "chat/completions");
    let results = run_jobs(&jobs, cfg.concurrency, |ex| {
        let prompt = render_verbal_prompt(&ex.text);
        let body = ChatRequest {
            model: &cfg.model,
            messages: vec![ChatMessage {
                role: "user",
                content: &prompt,
            }],
            temperature: cfg.temperature,
        };
        let response: ChatResponse = post_json(&client, &url, cfg, &body)?;
        response
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| RequestError::shape("response contained no choices"))
    });

    let mut written = 0;
    let mut failures = Vec::new();
    for (ex, result) in jobs.iter().zip(results) {
        match result {
            Ok(content) => {
                let path = out_dir.join(format!("{}.txt", ex.id));
                fs::write(&path, content).map_err(|source| ClientError::Io { path, source })?;
                written += 1;
            }
            Err(err) => failures.push(FailureRecord {
                id: ex.id.clone(),
                status: err.status,
                error: err.message,
            }),
        }
    }

    let failures_path = write_failures(&out_dir.join("failures.json"), &failures)?;
    Ok(FetchSummary {
        requests: jobs.len(),
        written,
        skipped,
        failures,
        failures_path,
    })
}

/// Scores every example's gold answer and writes
/// `{"id", "answer_token_logprobs", "scoring"}` JSONL in pool order.
///
/// Fails fast — before any request — if an example lacks an answer, and
/// aborts with an actionable message if the endpoint does not return
/// logprobs at all.
pub fn fetch_logprobs(
    cfg: &EndpointConfig,
    pool: &Pool,
    format: PromptFormat,
    scoring: ScoringMode,
    out_path: &Path,
) -> Result<FetchSummary, ClientError> {
    cfg.validate()?;
    for ex in pool.examples() {
        if ex.answer.is_none() {
            return Err(ClientError::MissingAnswer(ex.id.clone()));
        }
    }

    let client = build_client(cfg)?;
    let url = endpoint_url(&cfg.base_url, "completions");
    let jobs: Vec<&Example> = pool.examples().iter().collect();
    let results = run_jobs(&jobs, cfg.concurrency, |ex| {
        let answer = ex.answer.as_deref().expect("answers checked above");
        match scoring {
            ScoringMode::Echo => score_by_echo(&client, &url, cfg, format, &ex.text, answer),
            ScoringMode::Completion => {
                score_by_completion(&client, &url, cfg, format, &ex.text, answer)
            }
        }
    });

    // A missing logprobs block on an otherwise-successful response means the
    // server cannot do this at all; surface that instead of a failure list.
    if let Some(err) = results.iter().find_map(|r| match r {
        Err(e) if e.unsupported => Some(e.message.clone()),
        _ => None,
    }) {
        return Err(ClientError::UnsupportedEndpoint(err));
    }

    let mut lines = String::new();
    let mut written = 0;
    let mut failures = Vec::new();
    for (ex, result) in jobs.iter().zip(results) {
        match result {
            Ok(logprobs) => {
                let record = serde_json::json!({
                    "id": ex.id,
                    "answer_token_logprobs": logprobs,
                    "scoring": scoring.as_str(),
                });
                lines.push_str(&record.to_string());
                lines.push('\n');
                written += 1;
            }
            Err(err) => failures.push(FailureRecord {
                id: ex.id.clone(),
                status: err.status,
                error: err.message,
            }),
        }
    }
    fs::write(out_path, lines).map_err(|source| ClientError::Io {
        path: out_path.to_path_buf(),
        source,
    })?;

    let mut failures_file = out_path.as_os_str().to_os_string();
    failures_file.push(".failures.json");
    let failures_path = write_failures(Path::new(&failures_file), &failures)?;
    Ok(FetchSummary {
        requests: jobs.len(),
        written,
        skipped: 0,
        failures,
        failures_path,
    })
}

fn score_by_echo(
    client: &reqwest::blocking::Client,
    url: &str,
    cfg: &EndpointConfig,
    format: PromptFormat,
    question: &str,
    answer: &str,
) -> Result<Vec<f64>, RequestError> {
    let prompt = render_answer_prompt(format, question, answer);
    let body = CompletionRequest {
        model: &cfg.model,
        prompt: &prompt,
        max_tokens: 0,
        temperature: 0.0,
        logprobs: 0,
        echo: true,
    };
    let response: CompletionResponse = post_json(client, url, cfg, &body)?;
    let choice = response
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| RequestError::shape("response contained no choices"))?;
    let block = choice.logprobs.ok_or_else(|| {
        RequestError::unsupported("no logprobs in response; the endpoint must support completions with echoed prompt logprobs")
    })?;
    let offsets = block.text_offset.ok_or_else(|| {
        RequestError::unsupported("logprobs block lacks text_offset; cannot locate the answer span")
    })?;

    let boundary = prompt.len() - answer.len();
    let mut logprobs = Vec::new();
    for ((token, lp), offset) in block.tokens.iter().zip(&block.token_logprobs).zip(&offsets) {
        // Keep any token overlapping the answer span.
        if offset + token.len() > boundary {
            match lp {
                Some(v) => logprobs.push(*v),
                None => return Err(RequestError::shape("null logprob inside the answer span")),
            }
        }
    }
    if logprobs.is_empty() {
        return Err(RequestError::shape("no tokens covered the answer span"));
    }
    Ok(logprobs)
}

fn score_by_completion(
    client: &reqwest::blocking::Client,
    url: &str,
    cfg: &EndpointConfig,
    format: PromptFormat,
    question: &str,
    answer: &str,
) -> Result<Vec<f64>, RequestError> {
    let prefix = render_answer_prefix(format, question);
    let body = CompletionRequest {
        model: &cfg.model,
        prompt: &prefix,
        max_tokens: 128,
        temperature: 0.0,
        logprobs: 0,
        echo: false,
    };
    let response: CompletionResponse = post_json(client, url, cfg, &body)?;
    let choice = response
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| RequestError::shape("response contained no choices"))?;
    let block = choice.logprobs.ok_or_else(|| {
        RequestError::unsupported(
            "no logprobs in response; the endpoint must support completions with logprobs",
        )
    })?;

    let expected = answer.trim();
    let mut generated = String::new();
    let mut logprobs = Vec::new();
    for (token, lp) in block.tokens.iter().zip(&block.token_logprobs) {
        generated.push_str(token);
        match lp {
            Some(v) => logprobs.push(*v),
            None => return Err(RequestError::shape("null logprob in generated tokens")),
        }
        if generated.trim_start().len() >= expected.len() {
            break;
        }
    }
    if !generated.trim_start().starts_with(expected) {
        return Err(RequestError::shape(format!(
            "greedy completion {:?} does not reproduce the answer {:?}; use echo scoring instead",
            generated.trim_start(),
            expected
        )));
    }
    Ok(logprobs)
}

/// Runs `f` over the jobs with at most `concurrency` worker threads,
/// preserving job order in the results.
fn run_jobs<T: Sync, R: Send>(
    jobs: &[T],
    concurrency: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let workers = concurrency.max(1).min(jobs.len());
    let cursor = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = cursor.fetch_add(1, Ordering::SeqCst);
                if index >= jobs.len() {
                    break;
                }
                let result = f(&jobs[index]);
                results.lock().expect("no panics hold the lock")[index] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

fn write_failures(path: &Path, failures: &[FailureRecord]) -> Result<Option<PathBuf>, ClientError> {
    if failures.is_empty() {
        return Ok(None);
    }
    let json = serde_json::to_string_pretty(failures).expect("failures serialize");
    fs::write(path, json + "\n").map_err(|source| ClientError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Some(path.to_path_buf()))
}

fn build_client(cfg: &EndpointConfig) -> Result<reqwest::blocking::Client, ClientError> {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(cfg.timeout_secs))
        .build()
        .map_err(|e| ClientError::Http(e.to_string()))
}

/// Joins the base URL with an API path, tolerating bases with or without a
/// trailing `/v1`.
fn endpoint_url(base: &str, path: &str) -> String {
    let trimmed = base.trim_end_matches('/');
    if trimmed.ends_with("/v1") {
        format!("{trimmed}/{path}")
    } else {
        format!("{trimmed}/v1/{path}")
    }
}

#[derive(Debug, Clone)]
struct RequestError {
    status: Option<u16>,
    message: String,
    unsupported: bool,
}

impl RequestError {
    fn shape(message: impl Into<String>) -> Self {
        RequestError {
            status: None,
            message: message.into(),
            unsupported: false,
        }
    }

    fn unsupported(message: impl Into<String>) -> Self {
        RequestError {
            status: None,
            message: message.into(),
            unsupported: true,
        }
    }

    fn retryable(&self) -> bool {
        match self.status {
            Some(status) => status == 429 || status >= 500,
            None => !self.unsupported && self.message.starts_with("transport:"),
        }
    }
}

fn post_json<Req: Serialize, Resp: DeserializeOwned>(
    client: &reqwest::blocking::Client,
    url: &str,
    cfg: &EndpointConfig,
    body: &Req,
) -> Result<Resp, RequestError> {
    let mut attempt = 0u32;
    loop {
        let result = send_once(client, url, cfg, body);
        match result {
            Ok(response) => return Ok(response),
            Err(err) if err.retryable() && attempt < cfg.max_retries => {
                std::thread::sleep(Duration::from_millis(cfg.backoff_ms << attempt));
                attempt += 1;
            }
            Err(err) => return Err(err),
        }
    }
}

fn send_once<Req: Serialize, Resp: DeserializeOwned>(
    client: &reqwest::blocking::Client,
    url: &str,
    cfg: &EndpointConfig,
    body: &Req,
) -> Result<Resp, RequestError> {
    let mut request = client.post(url).json(body);
    if let Some(key) = &cfg.api_key {
        request = request.bearer_auth(key);
    }
    let response = request.send().map_err(|e| RequestError {
        status: None,
        message: format!("transport: {e}"),
        unsupported: false,
    })?;
    let status = response.status();
    if !status.is_success() {
        let body = response.text().unwrap_or_default();
        let excerpt: String = body.chars().take(200).collect();
        return Err(RequestError {
            status: Some(status.as_u16()),
            message: format!("HTTP {status}: {excerpt}"),
            unsupported: false,
        });
    }
    response
        .json::<Resp>()
        .map_err(|e| RequestError::shape(format!("unexpected response shape: {e}")))
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
    logprobs: u32,
    echo: bool,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    #[allow(dead_code)]
    text: Option<String>,
    logprobs: Option<LogprobBlock>,
}

#[derive(Deserialize)]
struct LogprobBlock {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
    text_offset: Option<Vec<usize>>,
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid endpoint {url:?}: {reason}")]
    InvalidEndpoint { url: String, reason: String },
    #[error("timeout must be positive")]
    InvalidTimeout,
    #[error("example {0:?} has no answer; likelihood scoring needs ground truth")]
    MissingAnswer(String),
    #[error("endpoint does not support logprob scoring: {0}")]
    UnsupportedEndpoint(String),
    #[error("http client: {0}")]
    Http(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
