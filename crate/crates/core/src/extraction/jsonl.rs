//! Corpus JSON-lines format.
//!
//! One record per utterance:
//! `{"id", "disfluent": [..], "tags": ["F"|"E"|"I"|"P", ..], "fluent": [..], "tree", "split"}`.
//! `tree` is the canonical bracketed parse; `disfluent`, `tags` and `fluent`
//! must agree with it, which is checked on read.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{extract_tuple, Corpus, Split, TokenTag, UtteranceId, UtteranceTuple};
use crate::treebank::parse_tree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub disfluent: Vec<String>,
    pub tags: Vec<TokenTag>,
    pub fluent: Vec<String>,
    pub tree: String,
    pub split: Split,
}

#[derive(Debug, Error)]
pub enum CorpusIoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("corpus file contains no records")]
    Empty,
}

impl CorpusRecord {
    pub fn from_tuple(tuple: &UtteranceTuple, split: Split) -> Self {
        CorpusRecord {
            id: tuple.id.to_string(),
            disfluent: tuple.disfluent.iter().map(|t| t.surface.clone()).collect(),
            tags: tuple.tags.clone(),
            fluent: tuple.fluent.iter().map(|t| t.surface.clone()).collect(),
            tree: tuple.tree.to_sexpr(),
            split,
        }
    }

    fn into_tuple(self) -> Result<UtteranceTuple, String> {
        let id: UtteranceId = self.id.parse()?;
        let tree = parse_tree(&self.tree).map_err(|e| format!("tree: {e}"))?;
        let tuple = extract_tuple(tree, id);
        let surfaces =
            |toks: &[crate::treebank::Token]| -> Vec<String> { toks.iter().map(|t| t.surface.clone()).collect() };
        if surfaces(&tuple.disfluent) != self.disfluent {
            return Err("`disfluent` does not match the tree yield".into());
        }
        if tuple.tags != self.tags {
            return Err("`tags` do not match the tree's disfluent constituents".into());
        }
        if surfaces(&tuple.fluent) != self.fluent {
            return Err("`fluent` is not the fluent-tagged subsequence".into());
        }
        Ok(tuple)
    }
}

pub fn write_corpus_jsonl<W: Write>(corpus: &Corpus, mut out: W) -> std::io::Result<()> {
    for utt in &corpus.utterances {
        let split = corpus.split_of(&utt.id.conversation).unwrap_or(Split::Test);
        let line = serde_json::to_string(&CorpusRecord::from_tuple(utt, split))?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_corpus_jsonl<R: BufRead>(input: R) -> Result<Corpus, CorpusIoError> {
    let mut utterances = Vec::new();
    let mut splits: BTreeMap<String, Split> = BTreeMap::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord =
            serde_json::from_str(&line).map_err(|source| CorpusIoError::Json { line: line_no, source })?;
        let split = record.split;
        let tuple = record
            .into_tuple()
            .map_err(|message| CorpusIoError::Invalid { line: line_no, message })?;
        let conv = tuple.id.conversation.clone();
        if let Some(prev) = splits.insert(conv.clone(), split) {
            if prev != split {
                return Err(CorpusIoError::Invalid {
                    line: line_no,
                    message: format!("conversation {conv:?} assigned to both splits"),
                });
            }
        }
        utterances.push(tuple);
    }
    if utterances.is_empty() {
        return Err(CorpusIoError::Empty);
    }
    Ok(Corpus { utterances, splits })
}
