//! Evaluation harness: segment test conversations, build k-shot prompts,
//! query a backend through the response cache, and score the transcripts.

pub mod backend;
pub mod cache;
pub mod transcript;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::{Corpus, Split, UtteranceTuple};
use crate::scoring::{score_hypothesis, ScoringOptions, UnitScores};
use backend::{BackendError, CompletionRequest, Message, ModelBackend, Role, Usage};
use cache::{fingerprint, CacheEntry, CacheError, ResponseCache};
pub use transcript::{extract_transcript, ReasoningMarkers};

pub const DEFAULT_INSTRUCTION: &str = "Remove all disfluencies from the transcript: filled pauses (uh, um), \
parenthetical asides (you know, i mean), and words the speaker repeated or abandoned before correcting themselves. \
Keep every other word exactly as written and keep one output line per input line. \
Output only the cleaned transcript.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    /// Whole conversation per request.
    #[serde(rename = "f")]
    Full,
    /// Consecutive chunks of `segment_size` utterances per request.
    #[serde(rename = "s")]
    Segmented,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Full => "f",
            Condition::Segmented => "s",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f" | "full" => Ok(Condition::Full),
            "s" | "segmented" => Ok(Condition::Segmented),
            other => Err(format!("unknown condition {other:?} (expected f or s)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            initial_backoff_ms: 500,
            max_backoff_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based): doubling from the
    /// initial backoff, capped.
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u64.checked_shl(retry).unwrap_or(u64::MAX);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub model_id: String,
    pub condition: Condition,
    pub shots: usize,
    pub temperature: f64,
    /// Output cap; `None` means twice the input token estimate (at least 16).
    pub max_tokens: Option<u32>,
    pub exemplar_seed: u64,
    pub cache_dir: Option<PathBuf>,
    pub concurrency: usize,
    pub segment_size: usize,
    pub retry: RetryPolicy,
    pub reasoning_markers: Option<ReasoningMarkers>,
    pub instruction: String,
}

impl EvalConfig {
    pub fn new(model_id: impl Into<String>, condition: Condition, shots: usize) -> Self {
        EvalConfig {
            model_id: model_id.into(),
            condition,
            shots,
            temperature: 0.0,
            max_tokens: None,
            exemplar_seed: 0,
            cache_dir: None,
            concurrency: 4,
            segment_size: 1,
            retry: RetryPolicy::default(),
            reasoning_markers: Some(ReasoningMarkers::default()),
            instruction: DEFAULT_INSTRUCTION.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        if self.model_id.is_empty() {
            return bad("model id is empty");
        }
        if self.concurrency == 0 {
            return bad("concurrency limit must be at least 1");
        }
        if self.segment_size == 0 {
            return bad("segment size must be at least 1");
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return bad("temperature must be a non-negative number");
        }
        if self.max_tokens == Some(0) {
            return bad("max tokens must be positive");
        }
        Ok(())
    }

    /// Directory name of this grid cell, e.g. `f_k3`.
    pub fn cell_name(&self) -> String {
        format!("{}_k{}", self.condition, self.shots)
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty conversation")]
    EmptyInput,
    #[error("corpus has no test conversations")]
    NoTestUnits,
    #[error("{needed} exemplars requested but only {available} train utterances with disfluencies")]
    InsufficientExemplars { needed: usize, available: usize },
    #[error(transparent)]
    CacheCorruption(#[from] CacheError),
    #[error("unit {unit}: utterance {utterance} not in corpus")]
    UnknownUtterance { unit: String, utterance: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// One request's worth of utterances.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalUnit<'a> {
    pub id: String,
    pub conversation: String,
    pub utterances: Vec<&'a UtteranceTuple>,
}

impl EvalUnit<'_> {
    /// Disfluent text, one line per utterance.
    pub fn input_text(&self) -> String {
        self.utterances
            .iter()
            .map(|u| u.disfluent_text())
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn utterance_ids(&self) -> Vec<String> {
        self.utterances.iter().map(|u| u.id.to_string()).collect()
    }
}

/// Split one conversation into evaluation units: the whole conversation for
/// [`Condition::Full`], consecutive chunks of `size` utterances for
/// [`Condition::Segmented`] (ids `conv/s0000`, `conv/s0001`, ...).
pub fn segment<'a>(
    conversation: &[&'a UtteranceTuple],
    condition: Condition,
    size: usize,
) -> Result<Vec<EvalUnit<'a>>, HarnessError> {
    let first = conversation.first().ok_or(HarnessError::EmptyInput)?;
    if size == 0 {
        return Err(HarnessError::InvalidConfig("segment size must be at least 1".into()));
    }
    let conv = first.id.conversation.clone();
    Ok(match condition {
        Condition::Full => vec![EvalUnit {
            id: conv.clone(),
            conversation: conv,
            utterances: conversation.to_vec(),
        }],
        Condition::Segmented => conversation
            .chunks(size)
            .enumerate()
            .map(|(i, chunk)| EvalUnit {
                id: format!("{conv}/s{i:04}"),
                conversation: conv.clone(),
                utterances: chunk.to_vec(),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub id: String,
    pub disfluent: String,
    pub fluent: String,
}

/// Train-split utterances with at least one disfluent token, sorted by id
/// and shuffled with `seed`.
pub fn exemplar_pool(corpus: &Corpus, seed: u64) -> Vec<Exemplar> {
    let mut pool: Vec<&UtteranceTuple> = corpus.in_split(Split::Train).filter(|u| u.has_disfluency()).collect();
    pool.sort_by(|a, b| a.id.cmp(&b.id));
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    pool.into_iter()
        .map(|u| Exemplar {
            id: u.id.to_string(),
            disfluent: u.disfluent_text(),
            fluent: u.fluent_text(),
        })
        .collect()
}

/// Instruction, then the first `k` exemplars as user/assistant turns, then
/// the unit's disfluent text.
pub fn build_prompt(
    unit: &EvalUnit<'_>,
    exemplars: &[Exemplar],
    k: usize,
    instruction: &str,
) -> Result<Vec<Message>, HarnessError> {
    if exemplars.len() < k {
        return Err(HarnessError::InsufficientExemplars {
            needed: k,
            available: exemplars.len(),
        });
    }
    let mut messages = Vec::with_capacity(2 * k + 2);
    messages.push(Message::new(Role::System, instruction));
    for ex in &exemplars[..k] {
        messages.push(Message::new(Role::User, ex.disfluent.as_str()));
        messages.push(Message::new(Role::Assistant, ex.fluent.as_str()));
    }
    messages.push(Message::new(Role::User, unit.input_text()));
    Ok(messages)
}

/// Fold a leading system message into the first user turn, for backends
/// that do not accept system messages.
pub fn fold_system_message(messages: Vec<Message>) -> Vec<Message> {
    let mut iter = messages.into_iter().peekable();
    let Some(first) = iter.next_if(|m| m.role == Role::System) else {
        return iter.collect();
    };
    let mut out: Vec<Message> = iter.collect();
    match out.iter_mut().find(|m| m.role == Role::User) {
        Some(user) => user.content = format!("{}\n\n{}", first.content, user.content),
        None => out.insert(0, Message::new(Role::User, first.content)),
    }
    out
}

/// Rough token count: the larger of the word count and chars / 4.
pub fn estimate_tokens(text: &str) -> usize {
    text.split_whitespace().count().max(text.chars().count().div_ceil(4))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutput {
    pub unit_id: String,
    pub conversation: String,
    pub utterances: Vec<String>,
    pub fingerprint: String,
    pub raw: String,
    pub transcript: String,
    pub usage: Option<Usage>,
    /// Wall time of the backend call; zero for cache hits. Not serialized,
    /// so output files stay byte-stable across runs.
    #[serde(skip)]
    pub latency: Duration,
    #[serde(skip)]
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitFailure {
    pub unit_id: String,
    pub conversation: String,
    pub utterances: Vec<String>,
    pub fingerprint: String,
    pub attempts: u32,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Successful units in unit order.
    pub outputs: Vec<ModelOutput>,
    pub failures: Vec<UnitFailure>,
    /// Calls made to the backend, retries included.
    pub backend_calls: usize,
}

impl RunResult {
    pub fn cache_hits(&self) -> usize {
        self.outputs.iter().filter(|o| o.cached).count()
    }

    pub fn stats(&self) -> RunStats {
        RunStats {
            units: self.outputs.len() + self.failures.len(),
            completed: self.outputs.len(),
            failed: self.failures.len(),
            cache_hits: self.cache_hits(),
            backend_calls: self.backend_calls,
            total_latency_ms: self.outputs.iter().map(|o| o.latency.as_secs_f64() * 1e3).sum(),
            max_latency_ms: self
                .outputs
                .iter()
                .map(|o| o.latency.as_secs_f64() * 1e3)
                .fold(0.0, f64::max),
            failures: self.failures.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub units: usize,
    pub completed: usize,
    pub failed: usize,
    pub cache_hits: usize,
    pub backend_calls: usize,
    pub total_latency_ms: f64,
    pub max_latency_ms: f64,
    pub failures: Vec<UnitFailure>,
}

enum Outcome {
    Done(ModelOutput),
    Failed(UnitFailure),
}

struct Job<'a> {
    unit: EvalUnit<'a>,
    request: CompletionRequest,
    fingerprint: String,
}

/// Run every test-split unit through `backend`.
///
/// The cache (when configured) is consulted before any backend call.
/// Transient backend errors are retried with exponential backoff; units that
/// still fail are returned in `failures` instead of aborting the run. A
/// corrupt cache entry aborts the run.
pub fn run_eval(corpus: &Corpus, backend: &dyn ModelBackend, config: &EvalConfig) -> Result<RunResult, HarnessError> {
    config.validate()?;
    if config.cache_dir.is_none() && !backend.is_deterministic() {
        return Err(HarnessError::InvalidConfig(
            "nondeterministic backends must run with a cache directory".into(),
        ));
    }
    let conversations = corpus.conversations_in(Split::Test);
    if conversations.is_empty() {
        return Err(HarnessError::NoTestUnits);
    }
    let exemplars = if config.shots > 0 {
        exemplar_pool(corpus, config.exemplar_seed)
    } else {
        Vec::new()
    };
    let capabilities = backend.capabilities();

    let mut jobs = Vec::new();
    for (_, utterances) in &conversations {
        for unit in segment(utterances, config.condition, config.segment_size)? {
            let mut messages = build_prompt(&unit, &exemplars, config.shots, &config.instruction)?;
            if !capabilities.system_messages {
                messages = fold_system_message(messages);
            }
            let max_tokens = config
                .max_tokens
                .unwrap_or_else(|| (2 * estimate_tokens(&unit.input_text())).max(16) as u32);
            let request = CompletionRequest {
                model: config.model_id.clone(),
                messages,
                temperature: config.temperature,
                max_tokens,
            };
            jobs.push(Job {
                fingerprint: fingerprint(&request),
                unit,
                request,
            });
        }
    }

    let cache = config.cache_dir.as_ref().map(ResponseCache::new);
    let calls = AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.concurrency)
        .build()
        .map_err(|e| HarnessError::InvalidConfig(format!("thread pool: {e}")))?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                run_job(
                    job,
                    backend,
                    cache.as_ref(),
                    config,
                    capabilities.context_length,
                    &calls,
                )
            })
            .collect::<Result<Vec<_>, CacheError>>()
    })?;

    let mut result = RunResult {
        outputs: Vec::new(),
        failures: Vec::new(),
        backend_calls: calls.into_inner(),
    };
    for outcome in outcomes {
        match outcome {
            Outcome::Done(o) => result.outputs.push(o),
            Outcome::Failed(f) => result.failures.push(f),
        }
    }
    Ok(result)
}

fn run_job(
    job: &Job<'_>,
    backend: &dyn ModelBackend,
    cache: Option<&ResponseCache>,
    config: &EvalConfig,
    context_length: Option<usize>,
    calls: &AtomicUsize,
) -> Result<Outcome, CacheError> {
    let markers = config.reasoning_markers.as_ref();
    let output = |raw: String, usage, latency, cached| ModelOutput {
        unit_id: job.unit.id.clone(),
        conversation: job.unit.conversation.clone(),
        utterances: job.unit.utterance_ids(),
        fingerprint: job.fingerprint.clone(),
        transcript: extract_transcript(&raw, markers),
        raw,
        usage,
        latency,
        cached,
    };
    let failure = |attempts, error: String| UnitFailure {
        unit_id: job.unit.id.clone(),
        conversation: job.unit.conversation.clone(),
        utterances: job.unit.utterance_ids(),
        fingerprint: job.fingerprint.clone(),
        attempts,
        error,
    };

    if let Some(cache) = cache {
        if let Some(hit) = cache.get(&job.fingerprint)? {
            return Ok(Outcome::Done(output(hit.raw, hit.usage, Duration::ZERO, true)));
        }
    }
    if let Some(limit) = context_length {
        let needed: usize = job
            .request
            .messages
            .iter()
            .map(|m| estimate_tokens(&m.content))
            .sum::<usize>()
            + job.request.max_tokens as usize;
        if needed > limit {
            return Ok(Outcome::Failed(failure(
                0,
                format!("prompt needs about {needed} tokens, context length is {limit}"),
            )));
        }
    }

    let mut attempts = 0;
    loop {
        attempts += 1;
        calls.fetch_add(1, Ordering::Relaxed);
        let started = Instant::now();
        match backend.complete(&job.request) {
            Ok(completion) => {
                let latency = started.elapsed();
                if let Some(cache) = cache {
                    cache.put(&CacheEntry {
                        fingerprint: job.fingerprint.clone(),
                        request: job.request.clone(),
                        raw: completion.text.clone(),
                        usage: completion.usage,
                    })?;
                }
                return Ok(Outcome::Done(output(completion.text, completion.usage, latency, false)));
            }
            Err(BackendError::Transient(_)) if attempts <= config.retry.max_retries => {
                std::thread::sleep(config.retry.backoff(attempts - 1));
            }
            Err(BackendError::Transient(msg)) => {
                return Ok(Outcome::Failed(failure(
                    attempts,
                    format!("backend unreachable after {attempts} attempts: {msg}"),
                )));
            }
            Err(BackendError::Fatal(msg)) => return Ok(Outcome::Failed(failure(attempts, msg))),
        }
    }
}

pub fn write_outputs_jsonl<W: Write>(outputs: &[ModelOutput], mut out: W) -> std::io::Result<()> {
    for o in outputs {
        serde_json::to_writer(&mut out, o)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_outputs_jsonl<R: BufRead>(input: R) -> Result<Vec<ModelOutput>, HarnessError> {
    let mut outputs = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        outputs.push(serde_json::from_str(&line).map_err(|source| HarnessError::Json { line: idx + 1, source })?);
    }
    Ok(outputs)
}

/// Per-unit scores plus one pooled score per conversation (the aggregation
/// unit for both conditions).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRun {
    pub units: Vec<UnitScores>,
    pub conversations: Vec<UnitScores>,
}

/// Score each output against the corpus utterances it names, then pool the
/// units of each conversation.
pub fn score_outputs(
    corpus: &Corpus,
    outputs: &[ModelOutput],
    options: &ScoringOptions,
) -> Result<ScoredRun, HarnessError> {
    let by_id: HashMap<String, &UtteranceTuple> = corpus.utterances.iter().map(|u| (u.id.to_string(), u)).collect();
    let mut jobs = Vec::with_capacity(outputs.len());
    for o in outputs {
        let utts = o
            .utterances
            .iter()
            .map(|id| {
                by_id.get(id).copied().ok_or_else(|| HarnessError::UnknownUtterance {
                    unit: o.unit_id.clone(),
                    utterance: id.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        jobs.push((o, utts));
    }
    let units: Vec<UnitScores> = jobs
        .par_iter()
        .map(|(o, utts)| score_hypothesis(o.unit_id.clone(), utts, &o.transcript, options))
        .collect();

    let mut order: Vec<&str> = Vec::new();
    let mut grouped: BTreeMap<&str, Vec<UnitScores>> = BTreeMap::new();
    for (o, s) in outputs.iter().zip(&units) {
        let entry = grouped.entry(o.conversation.as_str()).or_default();
        if entry.is_empty() {
            order.push(o.conversation.as_str());
        }
        entry.push(s.clone());
    }
    let conversations = order.into_iter().map(|c| UnitScores::pool(c, &grouped[c])).collect();
    Ok(ScoredRun { units, conversations })
}
