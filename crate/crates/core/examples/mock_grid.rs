//! Run the mock backends over a model x condition x shots grid on a
//! synthetic corpus and print the markdown report.

use dres::extraction::{synth_corpus, SynthOptions};
use dres::harness::backend::{mock_backend, MOCK_MODELS};
use dres::harness::{run_eval, score_outputs, Condition, EvalConfig};
use dres::report::{render_markdown, ReportCell, ReportOptions};
use dres::scoring::{aggregate, FailureThresholds, ScoringOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = synth_corpus(&SynthOptions {
        utterances: 150,
        seed: 11,
        ..Default::default()
    })?;
    let options = ScoringOptions::default();
    let cache = std::env::temp_dir().join("dres-mock-grid-cache");

    let mut cells = Vec::new();
    for model in MOCK_MODELS {
        let backend = mock_backend(model, &corpus).expect("known mock");
        for condition in [Condition::Full, Condition::Segmented] {
            for k in [0, 2] {
                let mut config = EvalConfig::new(model, condition, k);
                config.cache_dir = Some(cache.clone());
                let run = run_eval(&corpus, backend.as_ref(), &config)?;
                let scored = score_outputs(&corpus, &run.outputs, &options)?;
                let summary = aggregate(&scored.conversations, options.std)?;
                let stats = run.stats();
                eprintln!(
                    "{model} {}: {} units, {} cache hits",
                    config.cell_name(),
                    stats.units,
                    stats.cache_hits
                );
                cells.push(ReportCell::new(
                    model,
                    condition,
                    k,
                    &summary,
                    stats.failed,
                    &FailureThresholds::default(),
                ));
            }
        }
    }
    print!("{}", render_markdown(&cells, &ReportOptions::default()));
    Ok(())
}
