//! Random bracketed trees with an independent tagging oracle.
#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::Rng;

use dres::extraction::TokenTag;

#[derive(Debug, Clone)]
pub enum Gen {
    Leaf(&'static str, &'static str),
    Node(&'static str, Vec<Gen>),
}

const PHRASES: &[&str] = &[
    "S", "NP", "VP", "PP", "SBAR", "NP-SBJ", "S-TPC", "EDITED", "EDITED-1", "INTJ", "INTJ-UNF", "PRN", "PRN=2",
];
const LEAVES: &[(&str, &str)] = &[
    ("NN", "dog"),
    ("NN", "house"),
    ("PRP", "we"),
    ("PRP", "i"),
    ("VBD", "went"),
    ("DT", "the"),
    ("UH", "uh"),
    ("UH", "um"),
    ("RB", "so"),
    (".", "."),
    (",", ","),
];

pub fn random_tree<R: Rng>(rng: &mut R, max_depth: usize) -> Gen {
    let n = rng.random_range(1..=4);
    Gen::Node(
        "S",
        (0..n).map(|_| random_node(rng, max_depth.saturating_sub(1))).collect(),
    )
}

fn random_node<R: Rng>(rng: &mut R, depth: usize) -> Gen {
    if depth == 0 || rng.random_bool(0.35) {
        let (pos, word) = *LEAVES.choose(rng).unwrap();
        Gen::Leaf(pos, word)
    } else {
        let n = rng.random_range(1..=3);
        let label = *PHRASES.choose(rng).unwrap();
        Gen::Node(label, (0..n).map(|_| random_node(rng, depth - 1)).collect())
    }
}

impl Gen {
    pub fn to_sexpr(&self) -> String {
        match self {
            Gen::Leaf(pos, word) => format!("({pos} {word})"),
            Gen::Node(label, kids) => {
                let inner: Vec<String> = kids.iter().map(Gen::to_sexpr).collect();
                format!("({label} {})", inner.join(" "))
            }
        }
    }

    pub fn words(&self) -> Vec<&'static str> {
        match self {
            Gen::Leaf(_, w) => vec![w],
            Gen::Node(_, kids) => kids.iter().flat_map(Gen::words).collect(),
        }
    }

    /// Tag of each terminal: the category of its outermost EDITED/INTJ/PRN
    /// ancestor, else fluent.
    pub fn oracle_tags(&self) -> Vec<TokenTag> {
        fn category(label: &str) -> Option<TokenTag> {
            let base = label.split(['-', '=']).next().unwrap();
            match base {
                "EDITED" => Some(TokenTag::Edited),
                "INTJ" => Some(TokenTag::Intj),
                "PRN" => Some(TokenTag::Prn),
                _ => None,
            }
        }
        fn walk(g: &Gen, path: &mut Vec<&'static str>, out: &mut Vec<TokenTag>) {
            match g {
                Gen::Leaf(..) => {
                    let first = path.iter().find_map(|l| category(l));
                    out.push(first.unwrap_or(TokenTag::Fluent));
                }
                Gen::Node(label, kids) => {
                    path.push(label);
                    for k in kids {
                        walk(k, path, out);
                    }
                    path.pop();
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut Vec::new(), &mut out);
        out
    }
}
