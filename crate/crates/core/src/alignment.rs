//! Ratcliff-Obershelp (Gestalt) alignment of a hypothesis against the gold
//! disfluent transcript.
//!
//! The longest run of equal tokens is matched first (ties go to the smallest
//! gold index, then the smallest hypothesis index), then the procedure
//! recurses on the unmatched regions to its left and right. There is no junk
//! heuristic and the minimum block length is one token.

use serde::{Deserialize, Serialize};

use crate::treebank::Token;

/// A run of `len` equal tokens at `gold_start` / `hyp_start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Block {
    pub gold_start: usize,
    pub hyp_start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    /// Sorted by `gold_start` (and therefore by `hyp_start`).
    pub blocks: Vec<Block>,
    pub gold_len: usize,
    pub hyp_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeletionLabels {
    pub deleted: Vec<bool>,
    /// Hypothesis tokens not covered by any block.
    pub insertions: usize,
}

impl DeletionLabels {
    pub fn gold_len(&self) -> usize {
        self.deleted.len()
    }
}

fn ptb_escape(surface: &str) -> Option<&'static str> {
    Some(match surface {
        "-LRB-" => "(",
        "-RRB-" => ")",
        "-LSB-" => "[",
        "-RSB-" => "]",
        "-LCB-" => "{",
        "-RCB-" => "}",
        _ => return None,
    })
}

/// Lower-case, strip leading/trailing punctuation, and map PTB bracket
/// escapes to their literal characters. Punctuation-only tokens normalize to
/// the empty string.
pub fn normalize_token(surface: &str) -> String {
    if let Some(lit) = ptb_escape(surface) {
        return lit.to_string();
    }
    surface.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

/// Comparison key: the normalized form, or the raw surface when the token
/// is punctuation only (so `,` matches `,` but not `.`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MatchKey {
    Word(String),
    Punct(String),
}

impl MatchKey {
    pub fn of(surface: &str) -> Self {
        let norm = normalize_token(surface);
        if norm.is_empty() {
            MatchKey::Punct(surface.to_string())
        } else {
            MatchKey::Word(norm)
        }
    }
}

/// Longest common contiguous block of `a[alo..ahi]` and `b[blo..bhi]`,
/// returned as `(a_start, b_start, len)`. Among equally long blocks the one
/// with the smallest `a_start`, then the smallest `b_start`, wins.
pub fn longest_match<T: PartialEq>(
    a: &[T],
    b: &[T],
    (alo, ahi): (usize, usize),
    (blo, bhi): (usize, usize),
) -> (usize, usize, usize) {
    let width = bhi - blo;
    // run[j] = length of the common run ending at a[i-1], b[blo + j - 1]
    let mut prev = vec![0usize; width + 1];
    let mut cur = vec![0usize; width + 1];
    let (mut best_a, mut best_b, mut best_len) = (alo, blo, 0);
    for (i, x) in a.iter().enumerate().take(ahi).skip(alo) {
        for j in 0..width {
            cur[j + 1] = if *x == b[blo + j] { prev[j] + 1 } else { 0 };
            let k = cur[j + 1];
            // Iteration visits block ends in (a, b) order; for a fixed length
            // an earlier end is an earlier start, so strict `>` keeps the
            // leftmost block.
            if k > best_len {
                best_len = k;
                best_a = i + 1 - k;
                best_b = blo + j + 1 - k;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    (best_a, best_b, best_len)
}

/// Gestalt decomposition of two key sequences.
pub fn gestalt_blocks<T: PartialEq>(a: &[T], b: &[T]) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut pending = vec![((0, a.len()), (0, b.len()))];
    while let Some(((alo, ahi), (blo, bhi))) = pending.pop() {
        if alo >= ahi || blo >= bhi {
            continue;
        }
        let (i, j, k) = longest_match(a, b, (alo, ahi), (blo, bhi));
        if k == 0 {
            continue;
        }
        blocks.push(Block {
            gold_start: i,
            hyp_start: j,
            len: k,
        });
        pending.push(((alo, i), (blo, j)));
        pending.push(((i + k, ahi), (j + k, bhi)));
    }
    blocks.sort_by_key(|b| b.gold_start);
    blocks
}

pub fn align<H: AsRef<str>>(gold: &[Token], hyp: &[H]) -> Alignment {
    let gold_keys: Vec<MatchKey> = gold.iter().map(|t| MatchKey::of(&t.surface)).collect();
    let hyp_keys: Vec<MatchKey> = hyp.iter().map(|h| MatchKey::of(h.as_ref())).collect();
    Alignment {
        blocks: gestalt_blocks(&gold_keys, &hyp_keys),
        gold_len: gold.len(),
        hyp_len: hyp.len(),
    }
}

/// Rewrite `alignment` so that every matched gold token sits on the latest
/// equal copy available before the next matched token.
///
/// When the gold text repeats material (`we we went`), the hypothesis
/// `we went` matches either copy equally well on the surface, and the
/// longest-block search often grabs the earlier one. A reparandum always
/// precedes its repair, so the later copy is the one a correct edit keeps.
/// The hypothesis-side order and block equality are preserved; only which
/// of several identical gold tokens is marked kept changes.
pub fn prefer_later_repeats(alignment: &Alignment, gold: &[Token]) -> Alignment {
    let keys: Vec<MatchKey> = gold.iter().map(|t| MatchKey::of(&t.surface)).collect();
    let mut hyp_of: Vec<Option<usize>> = vec![None; alignment.gold_len];
    for b in &alignment.blocks {
        for off in 0..b.len {
            hyp_of[b.gold_start + off] = Some(b.hyp_start + off);
        }
    }
    let mut next_kept = alignment.gold_len;
    for p in (0..alignment.gold_len).rev() {
        let Some(h) = hyp_of[p] else { continue };
        if let Some(q) = (p + 1..next_kept).rev().find(|&q| keys[q] == keys[p]) {
            hyp_of[q] = Some(h);
            hyp_of[p] = None;
            next_kept = q;
        } else {
            next_kept = p;
        }
    }

    let mut blocks: Vec<Block> = Vec::new();
    for (g, h) in hyp_of.iter().enumerate() {
        let Some(h) = *h else { continue };
        match blocks.last_mut() {
            Some(b) if b.gold_start + b.len == g && b.hyp_start + b.len == h => b.len += 1,
            _ => blocks.push(Block {
                gold_start: g,
                hyp_start: h,
                len: 1,
            }),
        }
    }
    Alignment {
        blocks,
        gold_len: alignment.gold_len,
        hyp_len: alignment.hyp_len,
    }
}

/// Whitespace tokenization of model output.
pub fn tokenize_hypothesis(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

pub fn deletion_labels(alignment: &Alignment) -> DeletionLabels {
    let mut deleted = vec![true; alignment.gold_len];
    let mut matched = 0;
    for block in &alignment.blocks {
        deleted[block.gold_start..block.gold_start + block.len].fill(false);
        matched += block.len;
    }
    DeletionLabels {
        deleted,
        insertions: alignment.hyp_len - matched,
    }
}
