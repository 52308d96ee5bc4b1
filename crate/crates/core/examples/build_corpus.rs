//! Build a split corpus from `.mrg` files, one conversation per file.
//!
//! `cargo run --example build_corpus -- sw2001.mrg sw2005.mrg > corpus.jsonl`
//!
//! Without arguments a small inline treebank is used.

use std::io::stdout;

use dres::extraction::{build_corpus, write_corpus_jsonl, ConversationTrees, CorpusOptions, Split};
use dres::treebank::parse_trees;

const INLINE: [(&str, &str); 3] = [
    ("sw4001", "( (S (NP (PRP i)) (EDITED (VP (VBD saw))) (VP (VBD saw) (NP (PRP it)))) ) ( (S (INTJ (UH um)) (NP (PRP we)) (VP (VBD left))) )"),
    ("sw4002", "( (S (NP (PRP they)) (VP (VBD stayed))) )"),
    ("sw4003", "( (S (NP (-NONE- *)) (VP (VB go) (PRN (S (NP (PRP you)) (VP (VBP know)))) (ADVP (RB home)))) )"),
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let paths: Vec<String> = std::env::args().skip(1).collect();
    let docs = if paths.is_empty() {
        INLINE
            .iter()
            .map(|(conv, text)| {
                Ok(ConversationTrees {
                    conversation: conv.to_string(),
                    trees: parse_trees(text)?,
                })
            })
            .collect::<Result<Vec<_>, dres::treebank::ParseError>>()?
    } else {
        let mut docs = Vec::new();
        for path in &paths {
            let text = std::fs::read_to_string(path)?;
            let conversation = std::path::Path::new(path)
                .file_stem()
                .unwrap()
                .to_string_lossy()
                .into_owned();
            docs.push(ConversationTrees {
                conversation,
                trees: parse_trees(&text)?,
            });
        }
        docs
    };

    let corpus = build_corpus(&docs, &CorpusOptions::default())?;
    let test = corpus.in_split(Split::Test).count();
    eprintln!("{} utterances, {} in test", corpus.len(), test);
    write_corpus_jsonl(&corpus, stdout().lock())?;
    Ok(())
}
