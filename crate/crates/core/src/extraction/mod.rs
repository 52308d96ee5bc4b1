//! Fluent/disfluent utterance tuples derived from parse trees.
//!
//! Each utterance is one top-level tree. Terminals are tagged by a top-down
//! walk: the first disfluent constituent met on the way down claims its whole
//! span, so nested disfluencies inherit the outer category.

mod inject;
mod jsonl;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::treebank::{NodeClass, ParseTree, Token};

pub use inject::{inject_disfluencies, synth_corpus, InjectionRates, SynthOptions};
pub use jsonl::{read_corpus_jsonl, write_corpus_jsonl, CorpusIoError, CorpusRecord};

/// Per-terminal disfluency label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TokenTag {
    #[serde(rename = "F")]
    Fluent,
    #[serde(rename = "E")]
    Edited,
    #[serde(rename = "I")]
    Intj,
    #[serde(rename = "P")]
    Prn,
}

impl TokenTag {
    pub fn is_disfluent(self) -> bool {
        self != TokenTag::Fluent
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TokenTag::Fluent => "F",
            TokenTag::Edited => "E",
            TokenTag::Intj => "I",
            TokenTag::Prn => "P",
        }
    }
}

impl From<NodeClass> for TokenTag {
    fn from(class: NodeClass) -> Self {
        match class {
            NodeClass::Fluent => TokenTag::Fluent,
            NodeClass::Edited => TokenTag::Edited,
            NodeClass::Intj => TokenTag::Intj,
            NodeClass::Prn => TokenTag::Prn,
        }
    }
}

/// Conversation id plus the utterance's ordinal within its source file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UtteranceId {
    pub conversation: String,
    pub ordinal: usize,
}

impl UtteranceId {
    pub fn new(conversation: impl Into<String>, ordinal: usize) -> Self {
        UtteranceId {
            conversation: conversation.into(),
            ordinal,
        }
    }
}

impl fmt::Display for UtteranceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.conversation, self.ordinal)
    }
}

impl FromStr for UtteranceId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (conv, ord) = s
            .rsplit_once(':')
            .ok_or_else(|| format!("utterance id {s:?} lacks ':<ordinal>'"))?;
        let ordinal = ord
            .parse()
            .map_err(|_| format!("utterance id {s:?} has a non-numeric ordinal"))?;
        if conv.is_empty() {
            return Err(format!("utterance id {s:?} has an empty conversation"));
        }
        Ok(UtteranceId::new(conv, ordinal))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceTuple {
    pub id: UtteranceId,
    pub tree: ParseTree,
    /// Full yield of the tree.
    pub disfluent: Vec<Token>,
    /// Parallel to `disfluent`.
    pub tags: Vec<TokenTag>,
    /// `disfluent` restricted to `TokenTag::Fluent`; tokens keep their
    /// original indices.
    pub fluent: Vec<Token>,
}

impl UtteranceTuple {
    pub fn disfluent_text(&self) -> String {
        join_surfaces(&self.disfluent)
    }

    pub fn fluent_text(&self) -> String {
        join_surfaces(&self.fluent)
    }

    pub fn disfluent_count(&self) -> usize {
        self.tags.iter().filter(|t| t.is_disfluent()).count()
    }

    pub fn has_disfluency(&self) -> bool {
        self.tags.iter().any(|t| t.is_disfluent())
    }
}

pub fn join_surfaces(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&tok.surface);
    }
    out
}

fn tag_terminals(node: &ParseTree, claimed: Option<TokenTag>, out: &mut Vec<TokenTag>) {
    let tag = claimed.or_else(|| {
        let class = node.class();
        class.is_disfluent().then(|| class.into())
    });
    if node.is_leaf() {
        out.push(tag.unwrap_or(TokenTag::Fluent));
    } else {
        for child in node.children() {
            tag_terminals(child, tag, out);
        }
    }
}

/// Per-terminal tags of `tree`, in yield order.
pub fn tag_tree(tree: &ParseTree) -> Vec<TokenTag> {
    let mut tags = Vec::with_capacity(tree.width());
    tag_terminals(tree, None, &mut tags);
    tags
}

pub fn extract_tuple(tree: ParseTree, id: UtteranceId) -> UtteranceTuple {
    let disfluent = tree.yield_tokens();
    let tags = tag_tree(&tree);
    let fluent = disfluent
        .iter()
        .zip(&tags)
        .filter(|(_, tag)| !tag.is_disfluent())
        .map(|(tok, _)| tok.clone())
        .collect();
    UtteranceTuple {
        id,
        tree,
        disfluent,
        tags,
        fluent,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// The trees of one source file.
#[derive(Debug, Clone)]
pub struct ConversationTrees {
    pub conversation: String,
    pub trees: Vec<ParseTree>,
}

#[derive(Debug, Clone)]
pub struct CorpusOptions {
    /// Remove `-NONE-` trace terminals before extraction.
    pub drop_traces: bool,
    /// Fraction of conversations assigned to the train split.
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            drop_traces: true,
            train_fraction: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ExtractionError {
    #[error("no parse trees to build a corpus from")]
    EmptyInput,
    #[error("train fraction {0} is outside [0, 1]")]
    InvalidTrainFraction(f64),
    #[error("conversation {0:?} appears more than once")]
    DuplicateConversation(String),
    #[error("invalid {name} rate {value}: must lie in [0, 1]")]
    InvalidRate { name: &'static str, value: f64 },
    #[error("cannot inject disfluencies into an empty utterance")]
    EmptyUtterance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub utterances: Vec<UtteranceTuple>,
    pub splits: BTreeMap<String, Split>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Utterances grouped by conversation, in order of first appearance.
    pub fn conversations(&self) -> Vec<(&str, Vec<&UtteranceTuple>)> {
        let mut groups: Vec<(&str, Vec<&UtteranceTuple>)> = Vec::new();
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for utt in &self.utterances {
            let conv = utt.id.conversation.as_str();
            let slot = *index.entry(conv).or_insert_with(|| {
                groups.push((conv, Vec::new()));
                groups.len() - 1
            });
            groups[slot].1.push(utt);
        }
        groups
    }

    pub fn split_of(&self, conversation: &str) -> Option<Split> {
        self.splits.get(conversation).copied()
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &UtteranceTuple> {
        self.utterances
            .iter()
            .filter(move |u| self.split_of(&u.id.conversation) == Some(split))
    }

    pub fn conversations_in(&self, split: Split) -> Vec<(&str, Vec<&UtteranceTuple>)> {
        self.conversations()
            .into_iter()
            .filter(|(conv, _)| self.split_of(conv) == Some(split))
            .collect()
    }
}

/// Deterministic conversation-level split. Conversation ids are sorted, then
/// shuffled with `seed`; the first `round(n * train_fraction)` go to train,
/// capped so at least one conversation is left for test.
pub fn split_conversations<'a>(
    conversations: impl IntoIterator<Item = &'a str>,
    train_fraction: f64,
    seed: u64,
) -> Result<BTreeMap<String, Split>, ExtractionError> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(ExtractionError::InvalidTrainFraction(train_fraction));
    }
    let mut ids: Vec<&str> = conversations.into_iter().collect();
    ids.sort_unstable();
    ids.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n = ids.len();
    let n_train = ((n as f64 * train_fraction).round() as usize).min(n.saturating_sub(1));
    Ok(ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let split = if i < n_train { Split::Train } else { Split::Test };
            (id.to_string(), split)
        })
        .collect())
}

pub fn build_corpus(docs: &[ConversationTrees], options: &CorpusOptions) -> Result<Corpus, ExtractionError> {
    if docs.iter().all(|d| d.trees.is_empty()) {
        return Err(ExtractionError::EmptyInput);
    }
    let mut seen = std::collections::HashSet::new();
    for doc in docs {
        if !seen.insert(doc.conversation.as_str()) {
            return Err(ExtractionError::DuplicateConversation(doc.conversation.clone()));
        }
    }
    let splits = split_conversations(
        docs.iter().map(|d| d.conversation.as_str()),
        options.train_fraction,
        options.seed,
    )?;

    let per_doc: Vec<Vec<UtteranceTuple>> = docs
        .par_iter()
        .map(|doc| {
            doc.trees
                .iter()
                .enumerate()
                .filter_map(|(ordinal, tree)| {
                    let tree = if options.drop_traces {
                        tree.without_traces()?
                    } else {
                        tree.clone()
                    };
                    Some(extract_tuple(tree, UtteranceId::new(&doc.conversation, ordinal)))
                })
                .collect()
        })
        .collect();

    let utterances: Vec<_> = per_doc.into_iter().flatten().collect();
    if utterances.is_empty() {
        return Err(ExtractionError::EmptyInput);
    }
    Ok(Corpus { utterances, splits })
}
