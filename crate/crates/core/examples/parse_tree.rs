//! Parse a bracketed tree and show its terminals with disfluency tags.
//!
//! `cargo run --example parse_tree -- '( (S (INTJ (UH uh)) (NP (PRP we)) (VP (VBD left))) )'`

use dres::extraction::{extract_tuple, UtteranceId};
use dres::treebank::parse_tree;

const DEFAULT: &str = "( (S (NP-SBJ (PRP i)) (EDITED (VP (VBD went))) (, ,) (INTJ (UH uh)) \
                       (VP (VBD went) (NP (NN home))) (. .)) )";

fn main() {
    let source = std::env::args().nth(1).unwrap_or_else(|| DEFAULT.to_string());
    let tree = match parse_tree(&source) {
        Ok(tree) => tree,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    println!("{}", tree.to_sexpr());
    for node in tree.nodes().filter(|n| n.class().is_disfluent()) {
        let span = node.span();
        println!("{:<8} [{}, {})", node.label(), span.start, span.end);
    }

    let tuple = extract_tuple(tree, UtteranceId::new("demo", 0));
    for (token, tag) in tuple.disfluent.iter().zip(&tuple.tags) {
        println!("{:>3} {:<8} {}", token.index, token.surface, tag.as_str());
    }
    println!("disfluent: {}", tuple.disfluent_text());
    println!("fluent:    {}", tuple.fluent_text());
}
