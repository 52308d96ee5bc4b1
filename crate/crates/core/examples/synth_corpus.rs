//! Generate a synthetic corpus by injecting disfluencies into random fluent
//! utterances, then print a few of them.
//!
//! `cargo run --example synth_corpus -- 40 7`  (utterances, seed)

use dres::extraction::{synth_corpus, InjectionRates, Split, SynthOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let utterances = args.next().map(|a| a.parse()).transpose()?.unwrap_or(40);
    let seed = args.next().map(|a| a.parse()).transpose()?.unwrap_or(7);
    let corpus = synth_corpus(&SynthOptions {
        utterances,
        seed,
        rates: InjectionRates {
            edited: 0.3,
            interjection: 0.3,
            parenthetical: 0.1,
        },
        ..Default::default()
    })?;

    let disfluent: usize = corpus.utterances.iter().map(|u| u.disfluent_count()).sum();
    let tokens: usize = corpus.utterances.iter().map(|u| u.disfluent.len()).sum();
    println!(
        "{} utterances, {} conversations ({} test), {disfluent}/{tokens} tokens disfluent",
        corpus.len(),
        corpus.conversations().len(),
        corpus.conversations_in(Split::Test).len()
    );
    for u in corpus.utterances.iter().filter(|u| u.has_disfluency()).take(5) {
        println!("{}\n  {}\n  {}", u.id, u.tree.to_sexpr(), u.fluent_text());
    }
    Ok(())
}
