//! The `dres` command line: build-corpus, synth, run, score, report.
//!
//! Every flag can also come from a TOML file passed with `--config`, one
//! table per subcommand using the flag names with `_` for `-`:
//!
//! ```toml
//! [synth]
//! n = 200
//! seed = 7
//!
//! [run]
//! models = ["mock-oracle", "mock-echo"]
//! conditions = ["f", "s"]
//! shots = [0, 1, 3, 5]
//! base_url = "http://localhost:8000/v1"
//!
//! [score]
//! gap = 40.0
//! high = 80.0
//! ```
//!
//! A flag given on the command line wins over the file, which wins over the
//! built-in default.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::extraction::{
    build_corpus, read_corpus_jsonl, synth_corpus, write_corpus_jsonl, ConversationTrees, Corpus, CorpusOptions,
    InjectionRates, SynthOptions,
};
use crate::harness::backend::{mock_backend, HttpBackend, HttpConfig, ModelBackend};
use crate::harness::{
    read_outputs_jsonl, run_eval, score_outputs, write_outputs_jsonl, Condition, EvalConfig, ReasoningMarkers,
    RetryPolicy, RunStats,
};
use crate::report::{render_csv, render_markdown, ReportCell, ReportOptions};
use crate::scoring::{
    aggregate, summarize, FailureThresholds, Metric, ScoringOptions, StdKind, Summary, TokenScope, UnitScores,
};
use crate::treebank::parse_trees;

static QUIET: AtomicBool = AtomicBool::new(false);

macro_rules! progress {
    ($($arg:tt)*) => {
        if !QUIET.load(Ordering::Relaxed) {
            eprintln!($($arg)*);
        }
    };
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dres", version, about = "Disfluency-removal evaluation toolkit")]
pub struct Cli {
    /// TOML file with per-subcommand defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Suppress progress messages on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract utterance tuples from bracketed treebank files.
    BuildCorpus(BuildCorpusArgs),
    /// Generate a synthetic corpus with injected disfluencies.
    Synth(SynthArgs),
    /// Query a model over the condition x shots grid.
    Run(Box<RunArgs>),
    /// Score run outputs against the corpus.
    Score(ScoreArgs),
    /// Render scored cells as markdown and CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct BuildCorpusArgs {
    /// Treebank files; each file is one conversation named by its stem.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Drop `-NONE-` trace terminals (default).
    #[arg(long, overrides_with = "keep_none")]
    pub drop_none: bool,
    /// Keep `-NONE-` trace terminals.
    #[arg(long, overrides_with = "drop_none")]
    pub keep_none: bool,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of utterances.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub edited: Option<f64>,
    #[arg(long)]
    pub interjection: Option<f64>,
    #[arg(long)]
    pub parenthetical: Option<f64>,
    #[arg(long)]
    pub per_conversation: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Model ids; `mock-echo`, `mock-oracle` and `mock-empty` are built in,
    /// anything else goes to the HTTP endpoint.
    #[arg(long = "model", value_delimiter = ',')]
    pub models: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub conditions: Vec<Condition>,
    #[arg(long, value_delimiter = ',')]
    pub shots: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Response cache directory (default `<out>/cache`).
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub base_url: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[arg(long)]
    pub segment_size: Option<usize>,
    #[arg(long)]
    pub exemplar_seed: Option<u64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    #[arg(long)]
    pub initial_backoff_ms: Option<u64>,
    /// File whose contents replace the default instruction.
    #[arg(long)]
    pub instruction_file: Option<PathBuf>,
    #[arg(long)]
    pub think_open: Option<String>,
    #[arg(long)]
    pub think_close: Option<String>,
    /// Do not strip reasoning blocks from replies.
    #[arg(long)]
    pub keep_reasoning: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScopeArg {
    Words,
    All,
}

impl From<ScopeArg> for TokenScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Words => TokenScope::Words,
            ScopeArg::All => TokenScope::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdArg {
    Sample,
    Population,
}

impl From<StdArg> for StdKind {
    fn from(s: StdArg) -> Self {
        match s {
            StdArg::Sample => StdKind::Sample,
            StdArg::Population => StdKind::Population,
        }
    }
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Directory written by `run`.
    #[arg(long)]
    pub outputs: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub e_scope: Option<ScopeArg>,
    #[arg(long, value_enum)]
    pub z_scope: Option<ScopeArg>,
    #[arg(long, value_enum)]
    pub std: Option<StdArg>,
    /// Minimum |recall - precision| for a failure-mode flag.
    #[arg(long)]
    pub gap: Option<f64>,
    /// Minimum value of the larger of precision and recall for a flag.
    #[arg(long)]
    pub high: Option<f64>,
    /// Use plain leftmost alignment, without crediting later repeats.
    #[arg(long)]
    pub no_later_repeats: bool,
    /// Align the whole unit at once even when line counts match.
    #[arg(long)]
    pub no_line_align: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `run` and `score`.
    #[arg(long)]
    pub outputs: Option<PathBuf>,
    /// Markdown path (default `<outputs>/report.md`).
    #[arg(long)]
    pub md: Option<PathBuf>,
    /// CSV path (default `<outputs>/report.csv`).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Mark highest/lowest Z values per model.
    #[arg(long)]
    pub mark_z: bool,
    /// Also print the markdown table to stdout.
    #[arg(long)]
    pub print: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub build_corpus: BuildCorpusConfig,
    pub synth: SynthConfig,
    pub run: RunConfig,
    pub score: ScoreConfig,
    pub report: ReportConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildCorpusConfig {
    pub out: Option<PathBuf>,
    pub drop_none: Option<bool>,
    pub train_fraction: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub edited: Option<f64>,
    pub interjection: Option<f64>,
    pub parenthetical: Option<f64>,
    pub per_conversation: Option<usize>,
    pub train_fraction: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub models: Option<Vec<String>>,
    pub conditions: Option<Vec<Condition>>,
    pub shots: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub base_url: Option<String>,
    pub api_key_env: Option<String>,
    pub timeout_secs: Option<u64>,
    pub concurrency: Option<usize>,
    pub segment_size: Option<usize>,
    pub exemplar_seed: Option<u64>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub max_retries: Option<u32>,
    pub initial_backoff_ms: Option<u64>,
    pub instruction_file: Option<PathBuf>,
    pub think_open: Option<String>,
    pub think_close: Option<String>,
    pub keep_reasoning: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub corpus: Option<PathBuf>,
    pub outputs: Option<PathBuf>,
    pub e_scope: Option<ScopeArg>,
    pub z_scope: Option<ScopeArg>,
    pub std: Option<StdArg>,
    pub gap: Option<f64>,
    pub high: Option<f64>,
    pub no_later_repeats: Option<bool>,
    pub no_line_align: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub outputs: Option<PathBuf>,
    pub md: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub mark_z: Option<bool>,
}

/// A failed command: message for stderr plus exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn required<T>(value: Option<T>, name: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::input(format!("missing required option --{name}")))
}

/// Flag, else config, else default: the one precedence rule for options.
fn pick<T>(flag: Option<T>, config: Option<T>) -> Option<T> {
    flag.or(config)
}

fn pick_list<T>(flag: Vec<T>, config: Option<Vec<T>>) -> Option<Vec<T>> {
    if flag.is_empty() {
        config
    } else {
        Some(flag)
    }
}

/// A boolean switch set on the command line wins; otherwise the config.
fn pick_switch(flag: bool, config: Option<bool>) -> bool {
    flag || config.unwrap_or(false)
}

pub fn load_config(path: Option<&Path>) -> CliResult<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn create_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            fs::create_dir_all(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))
        }
        _ => Ok(()),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    create_parent(path)?;
    fs::write(path, contents).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_corpus(corpus: &Corpus, path: &Path) -> CliResult<()> {
    create_parent(path)?;
    let file = fs::File::create(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    write_corpus_jsonl(corpus, BufWriter::new(file)).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn read_corpus(path: &Path) -> CliResult<Corpus> {
    let file = fs::File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    read_corpus_jsonl(BufReader::new(file)).map_err(|e| CliError::input(format!("{}:{e}", path.display())))
}

fn to_json_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("plain data serializes");
    bytes.push(b'\n');
    bytes
}

pub fn cmd_build_corpus(args: BuildCorpusArgs, config: &BuildCorpusConfig) -> CliResult<i32> {
    let out = required(pick(args.out, config.out.clone()), "out")?;
    let drop_traces = if args.keep_none {
        false
    } else if args.drop_none {
        true
    } else {
        config.drop_none.unwrap_or(true)
    };
    let defaults = CorpusOptions::default();
    let options = CorpusOptions {
        drop_traces,
        train_fraction: pick(args.train_fraction, config.train_fraction).unwrap_or(defaults.train_fraction),
        seed: pick(args.seed, config.seed).unwrap_or(defaults.seed),
    };
    let mut docs = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let trees = parse_trees(&text).map_err(|e| CliError::input(format!("{}:{e}", path.display())))?;
        let conversation = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CliError::input(format!("{}: file name is not UTF-8", path.display())))?
            .to_string();
        docs.push(ConversationTrees { conversation, trees });
    }
    let corpus = build_corpus(&docs, &options).map_err(|e| CliError::input(e.to_string()))?;
    write_corpus(&corpus, &out)?;
    progress!(
        "wrote {} utterances from {} conversations to {}",
        corpus.len(),
        corpus.conversations().len(),
        out.display()
    );
    Ok(EXIT_OK)
}

pub fn cmd_synth(args: SynthArgs, config: &SynthConfig) -> CliResult<i32> {
    let out = required(pick(args.out, config.out.clone()), "out")?;
    let defaults = SynthOptions::default();
    let options = SynthOptions {
        utterances: pick(args.n, config.n).unwrap_or(defaults.utterances),
        seed: pick(args.seed, config.seed).unwrap_or(defaults.seed),
        rates: InjectionRates {
            edited: pick(args.edited, config.edited).unwrap_or(defaults.rates.edited),
            interjection: pick(args.interjection, config.interjection).unwrap_or(defaults.rates.interjection),
            parenthetical: pick(args.parenthetical, config.parenthetical).unwrap_or(defaults.rates.parenthetical),
        },
        utterances_per_conversation: pick(args.per_conversation, config.per_conversation)
            .unwrap_or(defaults.utterances_per_conversation),
        train_fraction: pick(args.train_fraction, config.train_fraction).unwrap_or(defaults.train_fraction),
        ..defaults
    };
    let corpus = synth_corpus(&options).map_err(|e| CliError::input(e.to_string()))?;
    write_corpus(&corpus, &out)?;
    progress!("wrote {} synthetic utterances to {}", corpus.len(), out.display());
    Ok(EXIT_OK)
}

/// Metadata written next to each cell's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMeta {
    pub model_id: String,
    pub condition: Condition,
    pub k: usize,
    pub config: EvalConfig,
}

/// Directory-safe form of a model id.
pub fn model_dir_name(model_id: &str) -> String {
    model_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn cmd_run(args: RunArgs, config: &RunConfig) -> CliResult<i32> {
    let corpus_path = required(pick(args.corpus, config.corpus.clone()), "corpus")?;
    let out = required(pick(args.out, config.out.clone()), "out")?;
    let models = required(pick_list(args.models, config.models.clone()), "model")?;
    let conditions = pick_list(args.conditions, config.conditions.clone())
        .unwrap_or_else(|| vec![Condition::Full, Condition::Segmented]);
    let shots = pick_list(args.shots, config.shots.clone()).unwrap_or_else(|| vec![0]);
    let cache_dir = pick(args.cache_dir, config.cache_dir.clone()).unwrap_or_else(|| out.join("cache"));
    let http_defaults = HttpConfig::default();
    let http = HttpConfig {
        base_url: pick(args.base_url, config.base_url.clone()).unwrap_or(http_defaults.base_url),
        api_key_env: pick(args.api_key_env, config.api_key_env.clone()).unwrap_or(http_defaults.api_key_env),
        timeout_secs: pick(args.timeout_secs, config.timeout_secs).unwrap_or(http_defaults.timeout_secs),
        capabilities: http_defaults.capabilities,
    };
    let instruction = match pick(args.instruction_file, config.instruction_file.clone()) {
        Some(path) => Some(
            fs::read_to_string(&path)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
                .trim()
                .to_string(),
        ),
        None => None,
    };
    let markers = if pick_switch(args.keep_reasoning, config.keep_reasoning) {
        None
    } else {
        let d = ReasoningMarkers::default();
        Some(ReasoningMarkers {
            open: pick(args.think_open, config.think_open.clone()).unwrap_or(d.open),
            close: pick(args.think_close, config.think_close.clone()).unwrap_or(d.close),
        })
    };
    let retry_defaults = RetryPolicy::default();
    let retry = RetryPolicy {
        max_retries: pick(args.max_retries, config.max_retries).unwrap_or(retry_defaults.max_retries),
        initial_backoff_ms: pick(args.initial_backoff_ms, config.initial_backoff_ms)
            .unwrap_or(retry_defaults.initial_backoff_ms),
        ..retry_defaults
    };

    let corpus = read_corpus(&corpus_path)?;
    let mut partial = false;
    for model in &models {
        let backend: Box<dyn ModelBackend> =
            mock_backend(model, &corpus).unwrap_or_else(|| Box::new(HttpBackend::new(&http)));
        for &condition in &conditions {
            for &k in &shots {
                let mut eval = EvalConfig::new(model.clone(), condition, k);
                eval.cache_dir = Some(cache_dir.clone());
                eval.retry = retry;
                eval.reasoning_markers = markers.clone();
                if let Some(text) = &instruction {
                    eval.instruction = text.clone();
                }
                eval.concurrency = pick(args.concurrency, config.concurrency).unwrap_or(eval.concurrency);
                eval.segment_size = pick(args.segment_size, config.segment_size).unwrap_or(eval.segment_size);
                eval.exemplar_seed = pick(args.exemplar_seed, config.exemplar_seed).unwrap_or(eval.exemplar_seed);
                eval.temperature = pick(args.temperature, config.temperature).unwrap_or(eval.temperature);
                eval.max_tokens = pick(args.max_tokens, config.max_tokens).or(eval.max_tokens);

                let result = run_eval(&corpus, backend.as_ref(), &eval).map_err(|e| CliError::input(e.to_string()))?;
                let dir = out.join(model_dir_name(model)).join(eval.cell_name());
                let meta = CellMeta {
                    model_id: model.clone(),
                    condition,
                    k,
                    config: eval.clone(),
                };
                write_file(&dir.join("cell.json"), &to_json_pretty(&meta))?;
                let mut buf = Vec::new();
                write_outputs_jsonl(&result.outputs, &mut buf).expect("writing to memory");
                write_file(&dir.join("outputs.jsonl"), &buf)?;
                let stats = result.stats();
                write_file(&dir.join("stats.json"), &to_json_pretty(&stats))?;
                progress!(
                    "{model} {}: {} units, {} failed, {} cache hits, {} backend calls",
                    eval.cell_name(),
                    stats.units,
                    stats.failed,
                    stats.cache_hits,
                    stats.backend_calls
                );
                for f in &result.failures {
                    progress!("  {}: {}", f.unit_id, f.error);
                }
                partial |= !result.failures.is_empty();
            }
        }
    }
    Ok(if partial { EXIT_PARTIAL } else { EXIT_OK })
}

/// Cell directories (`<out>/<model>/<cell>/` holding `cell.json`), sorted.
pub fn find_cells(root: &Path) -> CliResult<Vec<PathBuf>> {
    let list = |dir: &Path| -> CliResult<Vec<PathBuf>> {
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        entries.sort();
        Ok(entries)
    };
    let mut cells = Vec::new();
    for model_dir in list(root)? {
        for cell in list(&model_dir)? {
            if cell.join("cell.json").is_file() {
                cells.push(cell);
            }
        }
    }
    Ok(cells)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// One line of `scores.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    /// `unit` for evaluation units, `conversation` for pooled scores.
    pub level: String,
    pub unit_id: String,
    pub e_p: Option<f64>,
    pub e_r: Option<f64>,
    pub e_f: Option<f64>,
    pub z_e: Option<f64>,
    pub z_i: Option<f64>,
    pub z_p: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub insertions: usize,
}

impl ScoreRecord {
    pub fn new(level: &str, s: &UnitScores) -> Self {
        ScoreRecord {
            level: level.to_string(),
            unit_id: s.unit_id.clone(),
            e_p: s.value(Metric::EP),
            e_r: s.value(Metric::ER),
            e_f: s.value(Metric::EF),
            z_e: s.value(Metric::ZE),
            z_i: s.value(Metric::ZI),
            z_p: s.value(Metric::ZP),
            tp: s.e.tp,
            fp: s.e.fp,
            fn_: s.e.fn_,
            tn: s.e.tn,
            insertions: s.insertions,
        }
    }
}

pub fn cmd_score(args: ScoreArgs, config: &ScoreConfig) -> CliResult<i32> {
    let corpus = read_corpus(&required(pick(args.corpus, config.corpus.clone()), "corpus")?)?;
    let root = required(pick(args.outputs, config.outputs.clone()), "outputs")?;
    let defaults = ScoringOptions::default();
    let options = ScoringOptions {
        e_scope: pick(args.e_scope, config.e_scope).map_or(defaults.e_scope, Into::into),
        z_scope: pick(args.z_scope, config.z_scope).map_or(defaults.z_scope, Into::into),
        std: pick(args.std, config.std).map_or(defaults.std, Into::into),
        prefer_later_repeats: !pick_switch(args.no_later_repeats, config.no_later_repeats),
        align_by_line: !pick_switch(args.no_line_align, config.no_line_align),
    };
    let t = FailureThresholds::default();
    let thresholds = FailureThresholds {
        gap: pick(args.gap, config.gap).unwrap_or(t.gap),
        high: pick(args.high, config.high).unwrap_or(t.high),
    };
    if !(thresholds.gap > 0.0 && thresholds.gap <= 100.0 && thresholds.high > 0.0 && thresholds.high <= 100.0) {
        return Err(CliError::input("thresholds must be in (0, 100]"));
    }

    let cells = find_cells(&root)?;
    if cells.is_empty() {
        return Err(CliError::input(format!("{}: no run cells found", root.display())));
    }
    let mut partial = false;
    for dir in cells {
        let meta: CellMeta = read_json(&dir.join("cell.json"))?;
        let outputs_path = dir.join("outputs.jsonl");
        let file =
            fs::File::open(&outputs_path).map_err(|e| CliError::input(format!("{}: {e}", outputs_path.display())))?;
        let outputs = read_outputs_jsonl(BufReader::new(file))
            .map_err(|e| CliError::input(format!("{}:{e}", outputs_path.display())))?;
        let failed_units = match read_json::<RunStats>(&dir.join("stats.json")) {
            Ok(stats) => stats.failed,
            Err(_) => 0,
        };
        let scored = score_outputs(&corpus, &outputs, &options).map_err(|e| CliError::input(e.to_string()))?;
        let mut lines = Vec::new();
        for (level, group) in [("unit", &scored.units), ("conversation", &scored.conversations)] {
            for s in group {
                serde_json::to_writer(&mut lines, &ScoreRecord::new(level, s)).expect("records serialize");
                lines.push(b'\n');
            }
        }
        write_file(&dir.join("scores.jsonl"), &lines)?;
        // A cell where every unit failed still gets a (valueless) row.
        let summary = if scored.conversations.is_empty() {
            Summary {
                units: 0,
                metrics: Metric::ALL.iter().map(|&m| (m, summarize([], options.std))).collect(),
            }
        } else {
            aggregate(&scored.conversations, options.std).map_err(|e| CliError::input(e.to_string()))?
        };
        let cell = ReportCell::new(
            meta.model_id,
            meta.condition,
            meta.k,
            &summary,
            failed_units,
            &thresholds,
        );
        write_file(&dir.join("summary.json"), &to_json_pretty(&cell))?;
        partial |= failed_units > 0;
    }
    Ok(if partial { EXIT_PARTIAL } else { EXIT_OK })
}

/// Scored cells under `root`, in directory order.
pub fn collect_cells(root: &Path) -> CliResult<Vec<ReportCell>> {
    let mut cells = Vec::new();
    for dir in find_cells(root)? {
        let path = dir.join("summary.json");
        if path.is_file() {
            cells.push(read_json(&path)?);
        }
    }
    Ok(cells)
}

pub fn cmd_report(args: ReportArgs, config: &ReportConfig) -> CliResult<i32> {
    let root = required(pick(args.outputs, config.outputs.clone()), "outputs")?;
    let md_path = pick(args.md, config.md.clone()).unwrap_or_else(|| root.join("report.md"));
    let csv_path = pick(args.csv, config.csv.clone()).unwrap_or_else(|| root.join("report.csv"));
    let options = ReportOptions {
        mark_z: pick_switch(args.mark_z, config.mark_z),
    };
    let cells = collect_cells(&root)?;
    if cells.is_empty() {
        return Err(CliError::input(format!(
            "{}: no scored cells (run `score` first)",
            root.display()
        )));
    }
    let md = render_markdown(&cells, &options);
    let csv = render_csv(&cells).map_err(|e| CliError::input(e.to_string()))?;
    write_file(&md_path, md.as_bytes())?;
    write_file(&csv_path, csv.as_bytes())?;
    progress!("wrote {} and {}", md_path.display(), csv_path.display());
    if args.print {
        let _ = std::io::stdout().lock().write_all(md.as_bytes());
    }
    Ok(EXIT_OK)
}

pub fn execute(cli: Cli) -> CliResult<i32> {
    QUIET.store(cli.quiet, Ordering::Relaxed);
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::BuildCorpus(args) => cmd_build_corpus(args, &config.build_corpus),
        Command::Synth(args) => cmd_synth(args, &config.synth),
        Command::Run(args) => cmd_run(*args, &config.run),
        Command::Score(args) => cmd_score(args, &config.score),
        Command::Report(args) => cmd_report(args, &config.report),
    }
}

/// Parse `args` (program name first) and run; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
