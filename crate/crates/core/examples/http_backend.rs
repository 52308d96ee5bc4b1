//! Query a chat-completions endpoint with one few-shot prompt.
//!
//! `DRES_API_KEY=... cargo run --example http_backend -- http://localhost:8000/v1 my-model`

use dres::extraction::{synth_corpus, SynthOptions};
use dres::harness::backend::{CompletionRequest, HttpBackend, HttpConfig, ModelBackend};
use dres::harness::{
    build_prompt, exemplar_pool, extract_transcript, segment, Condition, ReasoningMarkers, DEFAULT_INSTRUCTION,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let base_url = args.next().unwrap_or_else(|| HttpConfig::default().base_url);
    let model = args.next().unwrap_or_else(|| "default".into());

    let corpus = synth_corpus(&SynthOptions {
        utterances: 40,
        seed: 3,
        ..Default::default()
    })?;
    let (_, utterances) = corpus.conversations_in(dres::extraction::Split::Test).remove(0);
    let unit = segment(&utterances, Condition::Full, 1)?.remove(0);
    let exemplars = exemplar_pool(&corpus, 0);
    let messages = build_prompt(&unit, &exemplars, 2, DEFAULT_INSTRUCTION)?;

    let backend = HttpBackend::new(&HttpConfig {
        base_url,
        ..Default::default()
    });
    let request = CompletionRequest {
        model,
        messages,
        temperature: 0.0,
        max_tokens: 512,
    };
    println!("POST {}", backend.url());
    match backend.complete(&request) {
        Ok(completion) => {
            let text = extract_transcript(&completion.text, Some(&ReasoningMarkers::default()));
            println!("input:\n{}\noutput:\n{text}", unit.input_text());
        }
        Err(e) => {
            eprintln!("{e} (transient: {})", e.is_transient());
            std::process::exit(1);
        }
    }
    Ok(())
}
