//! Align a hypothesis against gold tokens and print which gold tokens were
//! deleted.
//!
//! `cargo run --example align_tokens -- "i went i went home" "i went home"`

use dres::alignment::{align, deletion_labels, prefer_later_repeats, tokenize_hypothesis};
use dres::treebank::Token;

fn main() {
    let mut args = std::env::args().skip(1);
    let gold_text = args.next().unwrap_or_else(|| "so uh we went to the the store".into());
    let hyp_text = args.next().unwrap_or_else(|| "so we went to the store".into());

    let gold: Vec<Token> = gold_text
        .split_whitespace()
        .enumerate()
        .map(|(index, w)| Token {
            surface: w.to_string(),
            index,
            is_punct: false,
        })
        .collect();
    let hyp = tokenize_hypothesis(&hyp_text);

    let greedy = align(&gold, &hyp);
    let shifted = prefer_later_repeats(&greedy, &gold);
    for (name, alignment) in [("leftmost", &greedy), ("later repeats", &shifted)] {
        let labels = deletion_labels(alignment);
        let marked: Vec<String> = gold
            .iter()
            .zip(&labels.deleted)
            .map(|(t, &d)| {
                if d {
                    format!("[{}]", t.surface)
                } else {
                    t.surface.clone()
                }
            })
            .collect();
        let blocks: Vec<String> = alignment
            .blocks
            .iter()
            .map(|b| format!("g{}/h{}+{}", b.gold_start, b.hyp_start, b.len))
            .collect();
        println!("{name:>13}: {}   blocks {}", marked.join(" "), blocks.join(" "));
        println!("{:>13}  insertions: {}", "", labels.insertions);
    }
}
