//! Word-level E-scores, node-level Z-scores, aggregation and failure-mode
//! classification.
//!
//! E-scores treat a disfluent gold token as the positive class and its
//! deletion as a positive prediction. Z-scores count, per category, the
//! EDITED / INTJ / PRN constituents whose entire span was deleted.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{
    align, deletion_labels, normalize_token, prefer_later_repeats, tokenize_hypothesis, DeletionLabels,
};
use crate::extraction::{TokenTag, UtteranceTuple};
use crate::treebank::{NodeClass, ParseTree, Token};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoringError {
    #[error("length mismatch: {what} has {left} tokens, deletion labels cover {right}")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("nothing to aggregate")]
    EmptyInput,
}

/// Which gold tokens take part in a count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenScope {
    /// Skip punctuation-only tokens.
    #[default]
    Words,
    All,
}

impl TokenScope {
    fn includes(self, token: &Token) -> bool {
        match self {
            TokenScope::All => true,
            TokenScope::Words => !is_punct_only(token),
        }
    }
}

pub fn is_punct_only(token: &Token) -> bool {
    token.is_punct || normalize_token(&token.surface).is_empty()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdKind {
    /// n - 1 denominator; 0 for a single unit.
    #[default]
    Sample,
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringOptions {
    pub e_scope: TokenScope,
    pub z_scope: TokenScope,
    pub std: StdKind,
    /// Credit the later of two identical gold copies as the kept one (see
    /// [`prefer_later_repeats`]).
    pub prefer_later_repeats: bool,
    /// When the hypothesis has exactly one line per utterance, align each
    /// line to its own utterance instead of the unit as a whole.
    pub align_by_line: bool,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        ScoringOptions {
            e_scope: TokenScope::Words,
            z_scope: TokenScope::All,
            std: StdKind::Sample,
            prefer_later_repeats: true,
            align_by_line: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    /// No token was deleted; `precision` is reported as 0.
    pub undefined_precision: bool,
    /// No disfluent token in scope; `recall` and `f1` are reported as 0.
    pub undefined_recall: bool,
}

impl EScores {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let pct = |num: usize, den: usize| {
            if den == 0 {
                None
            } else {
                Some(100.0 * num as f64 / den as f64)
            }
        };
        let precision = pct(tp, tp + fp);
        let recall = pct(tp, tp + fn_);
        let (p, r) = (precision.unwrap_or(0.0), recall.unwrap_or(0.0));
        let f1 = if recall.is_some() && p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        };
        EScores {
            precision: p,
            recall: r,
            f1,
            tp,
            fp,
            fn_,
            tn,
            undefined_precision: precision.is_none(),
            undefined_recall: recall.is_none(),
        }
    }

    pub fn scored_tokens(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Value entering aggregation. Units without gold disfluencies have no
    /// recall and are left out of all three E metrics; a unit that deleted
    /// nothing despite having disfluencies keeps its flagged precision of 0.
    pub fn aggregate_value(&self, metric: Metric) -> Option<f64> {
        if self.undefined_recall {
            return None;
        }
        match metric {
            Metric::EF => Some(self.f1),
            Metric::EP => Some(self.precision),
            Metric::ER => Some(self.recall),
            _ => None,
        }
    }
}

pub fn e_scores(
    tokens: &[Token],
    tags: &[TokenTag],
    labels: &DeletionLabels,
    scope: TokenScope,
) -> Result<EScores, ScoringError> {
    check_len("tags", tags.len(), labels.gold_len())?;
    check_len("tokens", tokens.len(), labels.gold_len())?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for ((token, tag), &deleted) in tokens.iter().zip(tags).zip(&labels.deleted) {
        if !scope.includes(token) {
            continue;
        }
        match (tag.is_disfluent(), deleted) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(EScores::from_counts(tp, fp, fn_, tn))
}

fn check_len(what: &'static str, left: usize, right: usize) -> Result<(), ScoringError> {
    if left == right {
        Ok(())
    } else {
        Err(ScoringError::LengthMismatch { what, left, right })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCounts {
    pub total: usize,
    pub removed: usize,
}

impl NodeCounts {
    pub fn percent(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.removed as f64 / self.total as f64)
    }

    fn add(&mut self, other: NodeCounts) {
        self.total += other.total;
        self.removed += other.removed;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZScores {
    pub edited: NodeCounts,
    pub intj: NodeCounts,
    pub prn: NodeCounts,
}

impl ZScores {
    pub fn z_e(&self) -> Option<f64> {
        self.edited.percent()
    }

    pub fn z_i(&self) -> Option<f64> {
        self.intj.percent()
    }

    pub fn z_p(&self) -> Option<f64> {
        self.prn.percent()
    }

    fn counts_mut(&mut self, class: NodeClass) -> Option<&mut NodeCounts> {
        match class {
            NodeClass::Edited => Some(&mut self.edited),
            NodeClass::Intj => Some(&mut self.intj),
            NodeClass::Prn => Some(&mut self.prn),
            NodeClass::Fluent => None,
        }
    }

    fn merge(&mut self, other: &ZScores) {
        self.edited.add(other.edited);
        self.intj.add(other.intj);
        self.prn.add(other.prn);
    }
}

/// Z counts for one tree; `deleted` covers exactly its terminals.
fn count_nodes(tree: &ParseTree, deleted: &[bool], scope: TokenScope) -> ZScores {
    let tokens = tree.yield_tokens();
    let mut z = ZScores::default();
    for node in tree.nodes() {
        let Some(counts) = z.counts_mut(node.class()) else {
            continue;
        };
        let span = node.span().range();
        let in_scope: Vec<usize> = span.clone().filter(|&i| scope.includes(&tokens[i])).collect();
        let considered: Vec<usize> = if in_scope.is_empty() { span.collect() } else { in_scope };
        counts.total += 1;
        if considered.iter().all(|&i| deleted[i]) {
            counts.removed += 1;
        }
    }
    z
}

pub fn z_scores(tree: &ParseTree, labels: &DeletionLabels, scope: TokenScope) -> Result<ZScores, ScoringError> {
    z_scores_forest(&[tree], labels, scope)
}

/// Z counts over consecutive trees sharing one deletion-label vector.
pub fn z_scores_forest(
    trees: &[&ParseTree],
    labels: &DeletionLabels,
    scope: TokenScope,
) -> Result<ZScores, ScoringError> {
    let total: usize = trees.iter().map(|t| t.width()).sum();
    check_len("tree yield", total, labels.gold_len())?;
    let mut z = ZScores::default();
    let mut offset = 0;
    for tree in trees {
        let width = tree.width();
        z.merge(&count_nodes(tree, &labels.deleted[offset..offset + width], scope));
        offset += width;
    }
    Ok(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "e_f")]
    EF,
    #[serde(rename = "e_p")]
    EP,
    #[serde(rename = "e_r")]
    ER,
    #[serde(rename = "z_e")]
    ZE,
    #[serde(rename = "z_i")]
    ZI,
    #[serde(rename = "z_p")]
    ZP,
}

impl Metric {
    /// Report column order.
    pub const ALL: [Metric; 6] = [Metric::EF, Metric::EP, Metric::ER, Metric::ZE, Metric::ZI, Metric::ZP];

    pub fn name(self) -> &'static str {
        match self {
            Metric::EF => "e_f",
            Metric::EP => "e_p",
            Metric::ER => "e_r",
            Metric::ZE => "z_e",
            Metric::ZI => "z_i",
            Metric::ZP => "z_p",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    None,
    OverDeletion,
    UnderDeletion,
}

impl FailureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureMode::None => "none",
            FailureMode::OverDeletion => "over_deletion",
            FailureMode::UnderDeletion => "under_deletion",
        }
    }
}

/// Percent thresholds for failure-mode classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureThresholds {
    /// Minimum |recall - precision|.
    pub gap: f64,
    /// Minimum value of the larger of the two.
    pub high: f64,
}

impl Default for FailureThresholds {
    fn default() -> Self {
        FailureThresholds { gap: 40.0, high: 80.0 }
    }
}

impl FailureThresholds {
    pub fn classify(&self, precision: f64, recall: f64) -> FailureMode {
        if recall - precision >= self.gap && recall >= self.high {
            FailureMode::OverDeletion
        } else if precision - recall >= self.gap && precision >= self.high {
            FailureMode::UnderDeletion
        } else {
            FailureMode::None
        }
    }
}

pub fn classify_failure(e: &EScores, thresholds: &FailureThresholds) -> FailureMode {
    thresholds.classify(e.precision, e.recall)
}

fn label_deletions(gold: &[Token], hypothesis: &str, options: &ScoringOptions) -> DeletionLabels {
    let hyp = tokenize_hypothesis(hypothesis);
    let mut alignment = align(gold, &hyp);
    if options.prefer_later_repeats {
        alignment = prefer_later_repeats(&alignment, gold);
    }
    deletion_labels(&alignment)
}

/// Scores of one evaluation unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitScores {
    pub unit_id: String,
    pub e: EScores,
    pub z: ZScores,
    pub insertions: usize,
}

impl UnitScores {
    pub fn value(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::EF | Metric::EP | Metric::ER => self.e.aggregate_value(metric),
            Metric::ZE => self.z.z_e(),
            Metric::ZI => self.z.z_i(),
            Metric::ZP => self.z.z_p(),
        }
    }
}

impl UnitScores {
    /// Sum the token and node counts of `parts` into one unit. Segments of a
    /// conversation are pooled this way before aggregation.
    pub fn pool(unit_id: impl Into<String>, parts: &[UnitScores]) -> UnitScores {
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        let mut z = ZScores::default();
        let mut insertions = 0;
        for part in parts {
            tp += part.e.tp;
            fp += part.e.fp;
            fn_ += part.e.fn_;
            tn += part.e.tn;
            for (acc, add) in [
                (&mut z.edited, part.z.edited),
                (&mut z.intj, part.z.intj),
                (&mut z.prn, part.z.prn),
            ] {
                acc.total += add.total;
                acc.removed += add.removed;
            }
            insertions += part.insertions;
        }
        UnitScores {
            unit_id: unit_id.into(),
            e: EScores::from_counts(tp, fp, fn_, tn),
            z,
            insertions,
        }
    }
}

/// Align `hypothesis` against the concatenated disfluent tokens of
/// `utterances` and score the result.
pub fn score_hypothesis(
    unit_id: impl Into<String>,
    utterances: &[&UtteranceTuple],
    hypothesis: &str,
    options: &ScoringOptions,
) -> UnitScores {
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    for utt in utterances {
        let offset = tokens.len();
        tokens.extend(utt.disfluent.iter().map(|t| Token {
            index: t.index + offset,
            ..t.clone()
        }));
        tags.extend_from_slice(&utt.tags);
    }
    let lines: Vec<&str> = hypothesis.lines().collect();
    let labels = if options.align_by_line && utterances.len() > 1 && lines.len() == utterances.len() {
        let mut labels = DeletionLabels {
            deleted: Vec::with_capacity(tokens.len()),
            insertions: 0,
        };
        for (utt, line) in utterances.iter().zip(&lines) {
            let part = label_deletions(&utt.disfluent, line, options);
            labels.deleted.extend(part.deleted);
            labels.insertions += part.insertions;
        }
        labels
    } else {
        label_deletions(&tokens, hypothesis, options)
    };
    let trees: Vec<&ParseTree> = utterances.iter().map(|u| &u.tree).collect();
    // Lengths agree by construction of UtteranceTuple.
    let e = e_scores(&tokens, &tags, &labels, options.e_scope).expect("tags parallel to tokens");
    let z = z_scores_forest(&trees, &labels, options.z_scope).expect("tree yields match tokens");
    UnitScores {
        unit_id: unit_id.into(),
        e,
        z,
        insertions: labels.insertions,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Units contributing a value.
    pub n: usize,
    /// Units whose value was undefined.
    pub excluded: usize,
}

pub fn summarize(values: impl IntoIterator<Item = Option<f64>>, kind: StdKind) -> MetricSummary {
    let mut defined = Vec::new();
    let mut excluded = 0;
    for v in values {
        match v {
            Some(v) => defined.push(v),
            None => excluded += 1,
        }
    }
    let n = defined.len();
    if n == 0 {
        return MetricSummary {
            mean: None,
            std: None,
            n,
            excluded,
        };
    }
    let mean = defined.iter().sum::<f64>() / n as f64;
    let ss: f64 = defined.iter().map(|v| (v - mean).powi(2)).sum();
    let denom = match kind {
        StdKind::Sample => n.saturating_sub(1),
        StdKind::Population => n,
    };
    let std = if denom == 0 { 0.0 } else { (ss / denom as f64).sqrt() };
    MetricSummary {
        mean: Some(mean),
        std: Some(std),
        n,
        excluded,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub units: usize,
    pub metrics: BTreeMap<Metric, MetricSummary>,
}

impl Summary {
    pub fn get(&self, metric: Metric) -> &MetricSummary {
        &self.metrics[&metric]
    }

    /// Failure mode of the mean precision / recall.
    pub fn failure_mode(&self, thresholds: &FailureThresholds) -> FailureMode {
        match (self.get(Metric::EP).mean, self.get(Metric::ER).mean) {
            (Some(p), Some(r)) => thresholds.classify(p, r),
            _ => FailureMode::None,
        }
    }
}

pub fn aggregate(units: &[UnitScores], kind: StdKind) -> Result<Summary, ScoringError> {
    if units.is_empty() {
        return Err(ScoringError::EmptyInput);
    }
    let metrics = Metric::ALL
        .iter()
        .map(|&m| (m, summarize(units.iter().map(|u| u.value(m)), kind)))
        .collect();
    Ok(Summary {
        units: units.len(),
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::{extract_tuple, UtteranceId};
    use crate::treebank::parse_tree;
    use TokenTag::{Fluent as F, Intj as I};

    fn words(n: usize) -> Vec<Token> {
        (0..n)
            .map(|index| Token {
                surface: format!("w{index}"),
                index,
                is_punct: false,
            })
            .collect()
    }

    fn labels(deleted: &[bool]) -> DeletionLabels {
        DeletionLabels {
            deleted: deleted.to_vec(),
            insertions: 0,
        }
    }

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 0.005
    }

    #[test]
    fn perfect_removal() {
        let e = e_scores(&words(3), &[F, I, F], &labels(&[false, true, false]), TokenScope::All).unwrap();
        assert_eq!((e.precision, e.recall, e.f1), (100.0, 100.0, 100.0));
    }

    #[test]
    fn delete_everything() {
        let e = e_scores(&words(3), &[F, I, F], &labels(&[true, true, true]), TokenScope::All).unwrap();
        assert_eq!((e.tp, e.fp, e.fn_, e.tn), (1, 2, 0, 0));
        assert!(approx(e.precision, 33.33));
        assert_eq!(e.recall, 100.0);
        assert!(approx(e.f1, 50.0));
    }

    #[test]
    fn delete_nothing() {
        let e = e_scores(&words(3), &[F, I, F], &labels(&[false; 3]), TokenScope::All).unwrap();
        assert_eq!((e.tp, e.fn_), (0, 1));
        assert_eq!(e.recall, 0.0);
        assert_eq!(e.precision, 0.0);
        assert!(e.undefined_precision && !e.undefined_recall);
        assert_eq!(e.aggregate_value(Metric::EP), Some(0.0));
    }

    #[test]
    fn no_disfluency_is_excluded() {
        let e = e_scores(&words(2), &[F, F], &labels(&[false, false]), TokenScope::All).unwrap();
        assert!(e.undefined_recall);
        assert_eq!(e.aggregate_value(Metric::EF), None);
    }

    #[test]
    fn punctuation_scope() {
        let mut toks = words(3);
        toks[2] = Token {
            surface: ".".into(),
            index: 2,
            is_punct: true,
        };
        let l = labels(&[false, true, true]);
        let words_only = e_scores(&toks, &[F, I, F], &l, TokenScope::Words).unwrap();
        assert_eq!(words_only.scored_tokens(), 2);
        assert_eq!(words_only.precision, 100.0);
        let all = e_scores(&toks, &[F, I, F], &l, TokenScope::All).unwrap();
        assert_eq!(all.fp, 1);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            e_scores(&words(2), &[F, I, F], &labels(&[false; 3]), TokenScope::All),
            Err(ScoringError::LengthMismatch { .. })
        ));
        let tree = parse_tree("(S (INTJ (UH uh)) (NN x))").unwrap();
        assert!(z_scores(&tree, &labels(&[true]), TokenScope::All).is_err());
    }

    #[test]
    fn z_single_intj() {
        let tree = parse_tree("(S (NN a) (INTJ (UH uh)) (NN b))").unwrap();
        let z = z_scores(&tree, &labels(&[false, true, false]), TokenScope::All).unwrap();
        assert_eq!(z.z_i(), Some(100.0));
        assert_eq!(z.z_e(), None);
        assert_eq!(z.z_p(), None);
    }

    #[test]
    fn z_partial_removal_does_not_count() {
        let tree = parse_tree("(S (NN a) (NN b) (PRN (S (PRP you) (VBP know))))").unwrap();
        let z = z_scores(&tree, &labels(&[false, false, true, false]), TokenScope::All).unwrap();
        assert_eq!(z.z_p(), Some(0.0));
        assert_eq!(z.prn, NodeCounts { total: 1, removed: 0 });
    }

    #[test]
    fn z_nested_nodes_count_independently() {
        let tree = parse_tree("(S (EDITED (S (INTJ (UH uh)) (NP (PRP i)))) (NP (PRP i)))").unwrap();
        let z = z_scores(&tree, &labels(&[true, true, false]), TokenScope::All).unwrap();
        assert_eq!(z.z_e(), Some(100.0));
        assert_eq!(z.z_i(), Some(100.0));
    }

    #[test]
    fn z_word_scope_ignores_punctuation() {
        let tree = parse_tree("(S (PRN (, ,) (S (PRP you) (VBP know)) (, ,)) (NN ok))").unwrap();
        let l = labels(&[false, true, true, false, false]);
        assert_eq!(z_scores(&tree, &l, TokenScope::All).unwrap().z_p(), Some(0.0));
        assert_eq!(z_scores(&tree, &l, TokenScope::Words).unwrap().z_p(), Some(100.0));
    }

    #[test]
    fn failure_modes() {
        let t80 = FailureThresholds { gap: 40.0, high: 80.0 };
        let t90 = FailureThresholds { gap: 40.0, high: 90.0 };
        assert_eq!(t90.classify(18.02, 99.94), FailureMode::OverDeletion);
        assert_eq!(t80.classify(18.02, 99.94), FailureMode::OverDeletion);
        assert_eq!(t80.classify(86.02, 5.91), FailureMode::UnderDeletion);
        assert_eq!(t80.classify(80.0, 80.0), FailureMode::None);
        assert_eq!(t80.classify(30.0, 75.0), FailureMode::None);
        assert_eq!(FailureThresholds::default(), t80);
    }

    #[test]
    fn aggregate_mean_and_std() {
        let s = summarize([Some(100.0), Some(0.0)], StdKind::Sample);
        assert_eq!(s.mean, Some(50.0));
        assert!(approx(s.std.unwrap(), 70.71));
        let single = summarize([Some(42.0)], StdKind::Sample);
        assert_eq!(single.std, Some(0.0));
        let pop = summarize([Some(100.0), Some(0.0)], StdKind::Population);
        assert_eq!(pop.std, Some(50.0));
        let gaps = summarize([Some(10.0), None, None], StdKind::Sample);
        assert_eq!((gaps.n, gaps.excluded), (1, 2));
        assert_eq!(aggregate(&[], StdKind::Sample), Err(ScoringError::EmptyInput));
    }

    #[test]
    fn aggregate_excludes_undefined_z() {
        let unit = |id: &str, z: ZScores| UnitScores {
            unit_id: id.into(),
            e: EScores::from_counts(1, 0, 0, 1),
            z,
            insertions: 0,
        };
        let with_prn = ZScores {
            prn: NodeCounts { total: 2, removed: 1 },
            ..Default::default()
        };
        let summary = aggregate(&[unit("a", with_prn), unit("b", ZScores::default())], StdKind::Sample).unwrap();
        assert_eq!(summary.get(Metric::ZP).mean, Some(50.0));
        assert_eq!(summary.get(Metric::ZP).excluded, 1);
        assert_eq!(summary.get(Metric::ZE).excluded, 2);
        assert_eq!(summary.get(Metric::EF).n, 2);
    }

    #[test]
    fn hypothesis_scoring_spans_utterances() {
        let a = extract_tuple(
            parse_tree("(S (INTJ (UH uh)) (NP (PRP i)) (VP (VBP agree)))").unwrap(),
            UtteranceId::new("c", 0),
        );
        let b = extract_tuple(
            parse_tree("(S (EDITED (NN we)) (NN we) (VP (VBD went)) (. .))").unwrap(),
            UtteranceId::new("c", 1),
        );
        let s = score_hypothesis("c", &[&a, &b], "i agree\nwe went.", &ScoringOptions::default());
        assert_eq!((s.e.precision, s.e.recall), (100.0, 100.0));
        assert_eq!(s.z.z_i(), Some(100.0));
        assert_eq!(s.z.z_e(), Some(100.0));
        let raw = ScoringOptions {
            prefer_later_repeats: false,
            align_by_line: false,
            ..Default::default()
        };
        let greedy = score_hypothesis("c", &[&a, &b], "i agree\nwe went.", &raw);
        assert_eq!((greedy.e.precision, greedy.e.recall), (50.0, 50.0));
        let by_line = ScoringOptions {
            prefer_later_repeats: false,
            ..Default::default()
        };
        let lined = score_hypothesis("c", &[&a, &b], "i agree\nwe went.", &by_line);
        assert_eq!((lined.e.precision, lined.e.recall), (100.0, 100.0));
        let echo = score_hypothesis("c", &[&a, &b], "uh i agree we we went .", &ScoringOptions::default());
        assert_eq!(echo.e.recall, 0.0);
        assert_eq!(echo.z.z_e(), Some(0.0));
    }

    #[test]
    fn pooling_sums_counts() {
        let part = |tp, fp, fn_, tn, removed| UnitScores {
            unit_id: String::new(),
            e: EScores::from_counts(tp, fp, fn_, tn),
            z: ZScores {
                edited: NodeCounts { total: 1, removed },
                ..Default::default()
            },
            insertions: 1,
        };
        let pooled = UnitScores::pool("c", &[part(1, 1, 0, 3, 1), part(0, 0, 2, 4, 0)]);
        assert_eq!((pooled.e.tp, pooled.e.fp, pooled.e.fn_, pooled.e.tn), (1, 1, 2, 7));
        assert_eq!(pooled.e.precision, 50.0);
        assert!((pooled.e.recall - 100.0 / 3.0).abs() < 1e-9);
        assert_eq!(pooled.z.z_e(), Some(50.0));
        assert_eq!(pooled.insertions, 2);
    }

    #[test]
    fn metric_names() {
        let names: Vec<_> = Metric::ALL.iter().map(|m| m.name()).collect();
        assert_eq!(names, ["e_f", "e_p", "e_r", "z_e", "z_i", "z_p"]);
        assert_eq!(serde_json::to_string(&Metric::ZP).unwrap(), "\"z_p\"");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn tag() -> impl Strategy<Value = TokenTag> {
            prop_oneof![Just(F), Just(I), Just(TokenTag::Edited), Just(TokenTag::Prn)]
        }

        proptest! {
            #[test]
            fn f1_between_p_and_r(cases in prop::collection::vec((tag(), any::<bool>()), 1..30)) {
                let (tags, deleted): (Vec<_>, Vec<_>) = cases.into_iter().unzip();
                let e = e_scores(&words(tags.len()), &tags, &labels(&deleted), TokenScope::All).unwrap();
                prop_assert_eq!(e.scored_tokens(), tags.len());
                if !e.undefined_precision && !e.undefined_recall && e.tp > 0 {
                    prop_assert!(e.f1 >= e.precision.min(e.recall) - 1e-9);
                    prop_assert!(e.f1 <= e.precision.max(e.recall) + 1e-9);
                }
            }
        }
    }
}
