//! Acceptance criteria, one PASS/FAIL line each.

#[path = "support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use regex::Regex;

use dres::alignment::{align, deletion_labels};
use dres::extraction::{
    extract_tuple, inject_disfluencies, synth_corpus, Corpus, InjectionRates, SynthOptions, TokenTag, UtteranceId,
};
use dres::harness::backend::{EchoBackend, EmptyBackend, ModelBackend, OracleBackend};
use dres::harness::{run_eval, score_outputs, segment, Condition, EvalConfig};
use dres::report::{render_csv, render_markdown, ReportCell, ReportOptions};
use dres::scoring::{
    score_hypothesis, FailureMode, FailureThresholds, Metric, MetricSummary, ScoringOptions, Summary, UnitScores,
};
use dres::treebank::{parse_tree, Token};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

/// Synthetic corpus with every conversation in the test split, so all
/// utterances are evaluated.
fn synth(utterances: usize, seed: u64) -> Corpus {
    synth_corpus(&SynthOptions {
        utterances,
        seed,
        train_fraction: 0.0,
        ..Default::default()
    })
    .expect("synthetic corpus")
}

/// Unit scores for every test unit under both conditions.
fn score_backend(corpus: &Corpus, backend: &dyn ModelBackend, model: &str) -> Result<Vec<UnitScores>, String> {
    let mut all = Vec::new();
    for condition in [Condition::Full, Condition::Segmented] {
        let config = EvalConfig::new(model, condition, 0);
        let run = run_eval(corpus, backend, &config).map_err(|e| e.to_string())?;
        if let Some(f) = run.failures.first() {
            return Err(format!("unit {} failed: {}", f.unit_id, f.error));
        }
        let scored = score_outputs(corpus, &run.outputs, &ScoringOptions::default()).map_err(|e| e.to_string())?;
        all.extend(scored.units);
    }
    Ok(all)
}

fn oracle_identity() -> Outcome {
    let started = Instant::now();
    let corpus = synth(200, 2024);
    let units = score_backend(&corpus, &OracleBackend::from_corpus(&corpus), "mock-oracle")?;
    let elapsed = started.elapsed();
    let mut defined = 0;
    for u in &units {
        for m in Metric::ALL {
            match u.value(m) {
                Some(v) if v != 100.0 => return Err(format!("unit {} {m} = {v}", u.unit_id)),
                Some(_) => defined += 1,
                None => {}
            }
        }
    }
    if elapsed > Duration::from_secs(10) {
        return Err(format!("took {elapsed:.2?}"));
    }
    Ok(format!(
        "{} units, {defined} defined metric values all 100.00, {elapsed:.2?}",
        units.len()
    ))
}

fn null_edit_identity() -> Outcome {
    let corpus = synth(200, 2024);
    let units = score_backend(&corpus, &EchoBackend, "mock-echo")?;
    for u in &units {
        if u.value(Metric::ER).is_some_and(|r| r != 0.0) {
            return Err(format!("unit {} e_r = {}", u.unit_id, u.e.recall));
        }
        for m in [Metric::ZE, Metric::ZI, Metric::ZP] {
            if let Some(v) = u.value(m).filter(|v| *v != 0.0) {
                return Err(format!("unit {} {m} = {v}", u.unit_id));
            }
        }
    }
    Ok(format!("{} units: E_R = 0.00, defined Z = 0.00", units.len()))
}

fn full_deletion_identity() -> Outcome {
    let corpus = synth(200, 2024);
    let units = score_backend(&corpus, &EmptyBackend, "mock-empty")?;
    for u in &units {
        if u.value(Metric::ER).is_some_and(|r| r != 100.0) {
            return Err(format!("unit {} e_r = {}", u.unit_id, u.e.recall));
        }
    }
    // Hand count on sampled single-utterance units: disfluent words over
    // words, punctuation excluded.
    let by_id: BTreeMap<String, _> = corpus.utterances.iter().map(|u| (u.id.to_string(), u)).collect();
    let candidates: Vec<&UnitScores> = units
        .iter()
        .filter(|u| u.unit_id.contains("/s") && !u.e.undefined_recall)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for _ in 0..20 {
        let unit = candidates[rng.random_range(0..candidates.len())];
        let conv = unit.unit_id.split('/').next().unwrap();
        let seg: usize = unit.unit_id.rsplit("/s").next().unwrap().parse().unwrap();
        let utt = by_id[&format!("{conv}:{seg}")];
        let (mut words, mut disfluent) = (0usize, 0usize);
        for (tok, tag) in utt.disfluent.iter().zip(&utt.tags) {
            if tok.is_punct || !tok.surface.chars().any(char::is_alphanumeric) {
                continue;
            }
            words += 1;
            disfluent += usize::from(*tag != TokenTag::Fluent);
        }
        let expected = 100.0 * disfluent as f64 / words as f64;
        if (unit.e.precision - expected).abs() > 0.01 {
            return Err(format!(
                "unit {}: E_P {} vs hand {expected}",
                unit.unit_id, unit.e.precision
            ));
        }
        checked += 1;
    }
    Ok(format!(
        "{} units E_R = 100.00; {checked} sampled E_P match hand counts",
        units.len()
    ))
}

/// Recursive longest-common-block decomposition by exhaustive search:
/// longest block, ties to the smallest gold start, then smallest hyp start.
fn oracle_blocks(a: &[u8], b: &[u8]) -> Vec<(usize, usize, usize)> {
    fn rec(
        a: &[u8],
        b: &[u8],
        (alo, ahi): (usize, usize),
        (blo, bhi): (usize, usize),
        out: &mut Vec<(usize, usize, usize)>,
    ) {
        let mut best: Option<(usize, usize, usize)> = None;
        for i in alo..ahi {
            for j in blo..bhi {
                let mut k = 0;
                while i + k < ahi && j + k < bhi && a[i + k] == b[j + k] {
                    k += 1;
                }
                if k > 0 && best.is_none_or(|(_, _, bk)| k > bk) {
                    best = Some((i, j, k));
                }
            }
        }
        if let Some((i, j, k)) = best {
            out.push((i, j, k));
            rec(a, b, (alo, i), (blo, j), out);
            rec(a, b, (i + k, ahi), (j + k, bhi), out);
        }
    }
    let mut out = Vec::new();
    rec(a, b, (0, a.len()), (0, b.len()), &mut out);
    out.sort();
    out
}

const ALPHABET: [&str; 4] = ["a", "b", "c", "d"];

fn check_pair(a: &[u8], b: &[u8]) -> Result<(), String> {
    let gold: Vec<Token> = a
        .iter()
        .enumerate()
        .map(|(index, &s)| Token {
            surface: ALPHABET[s as usize].to_string(),
            index,
            is_punct: false,
        })
        .collect();
    let hyp: Vec<&str> = b.iter().map(|&s| ALPHABET[s as usize]).collect();
    let alignment = align(&gold, &hyp);
    let got: Vec<(usize, usize, usize)> = alignment
        .blocks
        .iter()
        .map(|bl| (bl.gold_start, bl.hyp_start, bl.len))
        .collect();
    let (mut gi, mut hi) = (0, 0);
    for &(g, h, k) in &got {
        if g < gi || h < hi || k == 0 || a[g..g + k] != b[h..h + k] {
            return Err(format!("invalid decomposition {got:?} for {a:?} / {b:?}"));
        }
        gi = g + k;
        hi = h + k;
    }
    let want = oracle_blocks(a, b);
    if got != want {
        return Err(format!("{a:?} / {b:?}: align {got:?}, oracle {want:?}"));
    }
    Ok(())
}

fn decode(mut code: usize, len: usize) -> Vec<u8> {
    (0..len)
        .map(|_| {
            let s = (code % 4) as u8;
            code /= 4;
            s
        })
        .collect()
}

fn alignment_oracle() -> Outcome {
    let started = Instant::now();
    let mut cases: Vec<(usize, usize)> = Vec::new();
    for total in 0..=8usize {
        for la in 0..=total {
            cases.push((la, total - la));
        }
    }
    let exhaustive: usize = cases
        .par_iter()
        .map(|&(la, lb)| -> Result<usize, String> {
            let mut n = 0;
            for ca in 0..4usize.pow(la as u32) {
                let a = decode(ca, la);
                for cb in 0..4usize.pow(lb as u32) {
                    check_pair(&a, &decode(cb, lb))?;
                    n += 1;
                }
            }
            Ok(n)
        })
        .try_reduce(|| 0, |x, y| Ok(x + y))?;
    let random = 200_000u64;
    (0..random).into_par_iter().try_for_each(|seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (la, lb) = (rng.random_range(0..=8), rng.random_range(0..=8));
        let a: Vec<u8> = (0..la).map(|_| rng.random_range(0..4)).collect();
        let b: Vec<u8> = (0..lb).map(|_| rng.random_range(0..4)).collect();
        check_pair(&a, &b)
    })?;
    let elapsed = started.elapsed();
    if elapsed > Duration::from_secs(60) {
        return Err(format!("took {elapsed:.2?}"));
    }
    Ok(format!(
        "{exhaustive} exhaustive pairs (|gold|+|hyp| <= 8) + {random} random pairs (each side <= 8), 0 violations, {elapsed:.2?}"
    ))
}

fn extraction_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut terminals = 0;
    let mut disfluent = 0;
    for n in 0..1000 {
        let tree = support::random_tree(&mut rng, 5);
        let text = tree.to_sexpr();
        let parsed = parse_tree(&text).map_err(|e| format!("{text}: {e}"))?;
        let tuple = extract_tuple(parsed, UtteranceId::new("t", n));
        let want = tree.oracle_tags();
        if tuple.tags != want {
            return Err(format!("{text}: tags {:?}, oracle {want:?}", tuple.tags));
        }
        terminals += want.len();
        disfluent += want.iter().filter(|t| t.is_disfluent()).count();
    }
    let rates = InjectionRates {
        edited: 0.3,
        interjection: 0.3,
        parenthetical: 0.2,
    };
    for n in 0..1000 {
        let words: Vec<&str> = support::random_tree(&mut rng, 3).words();
        let tuple =
            inject_disfluencies(&words, UtteranceId::new("i", n), n as u64, &rates).map_err(|e| e.to_string())?;
        let reparsed = extract_tuple(
            parse_tree(&tuple.tree.to_sexpr()).map_err(|e| e.to_string())?,
            tuple.id.clone(),
        );
        let fluent: Vec<&str> = tuple.fluent.iter().map(|t| t.surface.as_str()).collect();
        if reparsed != tuple || fluent != words {
            return Err(format!("injector round trip failed for {words:?}"));
        }
    }
    Ok(format!(
        "1000 trees, {terminals} terminals ({disfluent} disfluent) match oracle; 1000 injections round-trip"
    ))
}

fn failure_classification() -> Outcome {
    let t = FailureThresholds::default();
    let over = t.classify(18.02, 99.94);
    let under = t.classify(86.02, 5.91);
    if over != FailureMode::OverDeletion || under != FailureMode::UnderDeletion {
        return Err(format!("got {over:?} / {under:?}"));
    }
    Ok(format!(
        "(18.02, 99.94) -> {}, (86.02, 5.91) -> {} at gap {}, high {}",
        over.as_str(),
        under.as_str(),
        t.gap,
        t.high
    ))
}

fn metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let options = ScoringOptions::default();
    let mut both_defined = 0;
    for n in 0..10_000 {
        let tree = support::random_tree(&mut rng, 5);
        let tuple = extract_tuple(parse_tree(&tree.to_sexpr()).unwrap(), UtteranceId::new("m", n));
        let keep = rng.random_range(0.0..=1.0);
        let mut hyp: Vec<String> = Vec::new();
        for tok in &tuple.disfluent {
            if rng.random_bool(0.05) {
                hyp.push("zz".into());
            }
            if rng.random_bool(keep) {
                hyp.push(if rng.random_bool(0.05) {
                    "yy".into()
                } else {
                    tok.surface.clone()
                });
            }
        }
        let hyp_text = hyp.join(" ");
        let s = score_hypothesis("m", &[&tuple], &hyp_text, &options);
        let e = &s.e;
        let ctx = || format!("{} vs {hyp_text:?}", tuple.tree.to_sexpr());

        if !e.undefined_precision && !e.undefined_recall {
            both_defined += 1;
            let (lo, hi) = (e.precision.min(e.recall), e.precision.max(e.recall));
            if e.f1 < lo - 1e-9 || e.f1 > hi + 1e-9 {
                return Err(format!("F1 {} outside [{lo}, {hi}]: {}", e.f1, ctx()));
            }
        }
        let z: Vec<f64> = [Metric::ZE, Metric::ZI, Metric::ZP]
            .iter()
            .filter_map(|&m| s.value(m))
            .collect();
        if !z.is_empty() && z.iter().all(|v| *v == 100.0) && !e.undefined_recall && e.recall != 100.0 {
            return Err(format!("all Z = 100 but E_R = {}: {}", e.recall, ctx()));
        }
        let words: Vec<(&Token, &TokenTag)> = tuple
            .disfluent
            .iter()
            .zip(&tuple.tags)
            .filter(|(t, _)| !t.is_punct && t.surface.chars().any(char::is_alphanumeric))
            .collect();
        let gold_disfluent = words.iter().filter(|(_, tag)| tag.is_disfluent()).count();
        if e.scored_tokens() != words.len() || e.tp + e.fn_ != gold_disfluent {
            return Err(format!("count identity broken: {e:?}: {}", ctx()));
        }
        let labels = deletion_labels(&align(&tuple.disfluent, &hyp));
        let deleted = labels.deleted.iter().filter(|d| **d).count();
        if deleted + hyp.len() != tuple.disfluent.len() + labels.insertions {
            return Err(format!("deletion count identity broken: {}", ctx()));
        }
    }
    Ok(format!(
        "10000 instances ({both_defined} with P and R defined), 0 violations"
    ))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let argv: Vec<&str> = ["dres", "--quiet"].iter().chain(args).copied().collect();
    match dres::cli::main_with_args(&argv) {
        0 => Ok(()),
        code => Err(format!("`{}` exited {code}", args.join(" "))),
    }
}

fn pipeline(dir: &Path) -> Result<(), String> {
    let p = |name: &str| dir.join(name).to_str().unwrap().to_string();
    run_cli(&["synth", "--n", "120", "--seed", "99", "--out", &p("corpus.jsonl")])?;
    run_cli(&[
        "run",
        "--corpus",
        &p("corpus.jsonl"),
        "--model",
        "mock-oracle,mock-echo,mock-empty",
        "--conditions",
        "f,s",
        "--shots",
        "0,1,3",
        "--out",
        &p("runs"),
    ])?;
    run_cli(&["score", "--corpus", &p("corpus.jsonl"), "--outputs", &p("runs")])?;
    run_cli(&["report", "--outputs", &p("runs")])
}

fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                if path.file_name().is_some_and(|n| n != "cache") {
                    stack.push(path);
                }
                continue;
            }
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
            if matches!(ext, "jsonl" | "csv" | "md") {
                files.insert(
                    path.strip_prefix(dir).unwrap().display().to_string(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    files
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path())?;
    pipeline(b.path())?;
    let (fa, fb) = (artifacts(a.path()), artifacts(b.path()));
    if fa.keys().ne(fb.keys()) {
        return Err("runs produced different file sets".into());
    }
    for (name, bytes) in &fa {
        if &fb[name] != bytes {
            return Err(format!("{name} differs between runs"));
        }
    }
    let count = |ext: &str| fa.keys().filter(|k| k.ends_with(ext)).count();
    Ok(format!(
        "{} files byte-identical ({} jsonl, {} csv, {} md)",
        fa.len(),
        count(".jsonl"),
        count(".csv"),
        count(".md")
    ))
}

fn segmentation_faithfulness() -> Outcome {
    let corpus = synth(200, 2024);
    let mut checked = 0;
    for (conv, utts) in corpus.conversations() {
        let full = segment(&utts, Condition::Full, 1).map_err(|e| e.to_string())?;
        let full_text = full[0].input_text();
        let full_tokens: Vec<&str> = full_text.split_whitespace().collect();
        for size in [1, 2, 3, 7] {
            let parts = segment(&utts, Condition::Segmented, size).map_err(|e| e.to_string())?;
            let texts: Vec<String> = parts.iter().map(|u| u.input_text()).collect();
            let tokens: Vec<&str> = texts.iter().flat_map(|t| t.split_whitespace()).collect();
            if tokens != full_tokens || texts.join("\n") != full_text {
                return Err(format!(
                    "{conv}: segment size {size} does not reconstruct the conversation"
                ));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} conversation x segment-size checks, exact"))
}

fn golden_cells() -> Vec<ReportCell> {
    let ms = |mean: f64, std: f64| MetricSummary {
        mean: Some(mean),
        std: Some(std),
        n: 10,
        excluded: 0,
    };
    let na = MetricSummary {
        mean: None,
        std: None,
        n: 0,
        excluded: 10,
    };
    let summary = |v: [MetricSummary; 6]| Summary {
        units: 10,
        metrics: Metric::ALL.into_iter().zip(v).collect(),
    };
    let t = FailureThresholds::default();
    vec![
        ReportCell::new(
            "gpt-4o",
            Condition::Full,
            0,
            &summary([
                ms(70.12, 5.5),
                ms(95.0, 1.0),
                ms(50.0, 2.0),
                ms(60.0, 10.0),
                ms(90.0, 0.0),
                ms(40.0, 20.0),
            ]),
            0,
            &t,
        ),
        ReportCell::new(
            "gpt-4o",
            Condition::Segmented,
            5,
            &summary([
                ms(84.52, 3.0),
                ms(88.0, 2.0),
                ms(81.25, 4.75),
                ms(80.0, 8.0),
                ms(99.5, 0.5),
                na,
            ]),
            0,
            &t,
        ),
        ReportCell::new(
            "gpt-4o",
            Condition::Segmented,
            1,
            &summary([
                ms(82.38, 4.18),
                ms(85.0, 3.0),
                ms(80.0, 5.0),
                ms(75.5, 12.25),
                ms(95.25, 1.5),
                ms(50.0, 0.0),
            ]),
            2,
            &t,
        ),
        ReportCell::new(
            "llama",
            Condition::Full,
            3,
            &summary([
                ms(30.32, 5.9),
                ms(18.02, 4.19),
                ms(99.94, 0.6),
                ms(100.0, 0.0),
                ms(99.94, 0.59),
                ms(99.85, 2.03),
            ]),
            0,
            &t,
        ),
    ]
}

fn report_format() -> Outcome {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let cells = golden_cells();
    let md = render_markdown(&cells, &ReportOptions::default());
    let want_md = fs::read_to_string(golden.join("report.md")).map_err(|e| e.to_string())?;
    if md != want_md {
        return Err(format!("markdown differs from golden:\n{md}"));
    }
    let csv = render_csv(&cells).map_err(|e| e.to_string())?;
    let want_csv = fs::read_to_string(golden.join("report.csv")).map_err(|e| e.to_string())?;
    if csv != want_csv {
        return Err(format!("csv differs from golden:\n{csv}"));
    }
    // Every metric cell of a real pipeline report follows the convention.
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path())?;
    let rendered = fs::read_to_string(dir.path().join("runs/report.md")).map_err(|e| e.to_string())?;
    let cell = Regex::new(r"^(\d+\.\d{2}\{\d+\.\d{2}\}( \[[+-][12]\])?|n/a)$").unwrap();
    let mut n = 0;
    for row in rendered.lines().filter(|l| l.starts_with("| mock-")) {
        let fields: Vec<&str> = row.trim_matches('|').split('|').map(str::trim).collect();
        for f in &fields[3..9] {
            if !cell.is_match(f) {
                return Err(format!("cell {f:?} breaks the mean{{std}} convention"));
            }
            n += 1;
        }
    }
    Ok(format!(
        "golden markdown and CSV match; {n} pipeline cells match mean{{std}}"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("oracle identity", oracle_identity),
        ("null-edit identity", null_edit_identity),
        ("full-deletion identity", full_deletion_identity),
        ("alignment oracle", alignment_oracle),
        ("extraction oracle", extraction_oracle),
        ("failure-mode classification", failure_classification),
        ("metric identities", metric_identities),
        ("determinism", determinism),
        ("segmentation faithfulness", segmentation_faithfulness),
        ("report format", report_format),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
