//! Penn-Treebank style S-expression reader and the fluent/disfluent node
//! classification used throughout the crate.
//!
//! A preterminal such as `(PRP i)` is represented as a single leaf node whose
//! `label` is the part-of-speech tag and whose `token` is the word. Every
//! other node has at least one child and no token.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Preterminal labels that mark a terminal as punctuation.
pub const PUNCT_LABELS: &[&str] = &[".", ",", ":", "''", "``", "-LRB-", "-RRB-"];

/// Label used for trace / null elements.
pub const TRACE_LABEL: &str = "-NONE-";

/// Half-open range of terminal indices `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseTree {
    label: String,
    children: Vec<ParseTree>,
    token: Option<String>,
    span: Span,
}

/// Disfluency class of a constituent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeClass {
    Fluent,
    Edited,
    Intj,
    Prn,
}

impl NodeClass {
    pub fn is_disfluent(self) -> bool {
        self != NodeClass::Fluent
    }
}

/// A terminal of a parse tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub index: usize,
    pub is_punct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unbalanced parentheses")]
    UnbalancedParens,
    #[error("empty tree")]
    EmptyTree,
    #[error("terminal token mixed with child constituents")]
    TerminalWithChildren,
    #[error("constituent without a label")]
    MissingLabel,
    #[error("unexpected text outside of a tree: {0:?}")]
    StrayText(String),
}

/// A parse failure with 1-based line/column of the offending position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub offset: usize,
}

/// Strip function tags and co-indexing from a label: `NP-SBJ-1` -> `NP`,
/// `PRN=2` -> `PRN`. Labels that start with `-` (e.g. `-NONE-`) have an
/// empty base.
pub fn base_label(label: &str) -> &str {
    match label.find(['-', '=']) {
        Some(pos) => &label[..pos],
        None => label,
    }
}

pub fn classify_node(label: &str) -> NodeClass {
    match base_label(label) {
        "EDITED" => NodeClass::Edited,
        "INTJ" => NodeClass::Intj,
        "PRN" => NodeClass::Prn,
        _ => NodeClass::Fluent,
    }
}

pub fn is_punct_label(label: &str) -> bool {
    PUNCT_LABELS.contains(&label)
}

impl ParseTree {
    /// Leaf (preterminal) node. Its span is fixed up once it is placed under
    /// [`ParseTree::node`].
    pub fn leaf(label: impl Into<String>, token: impl Into<String>) -> Self {
        ParseTree {
            label: label.into(),
            children: Vec::new(),
            token: Some(token.into()),
            span: Span::new(0, 1),
        }
    }

    /// Internal node. Panics if `children` is empty.
    pub fn node(label: impl Into<String>, children: Vec<ParseTree>) -> Self {
        assert!(!children.is_empty(), "internal node requires children");
        let mut tree = ParseTree {
            label: label.into(),
            children,
            token: None,
            span: Span::new(0, 0),
        };
        tree.assign_spans(0);
        tree
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn children(&self) -> &[ParseTree] {
        &self.children
    }

    pub fn token(&self) -> Option<&str> {
        self.token.as_deref()
    }

    pub fn span(&self) -> Span {
        self.span
    }

    pub fn is_leaf(&self) -> bool {
        self.token.is_some()
    }

    pub fn class(&self) -> NodeClass {
        classify_node(&self.label)
    }

    /// Number of terminals under this node.
    pub fn width(&self) -> usize {
        self.span.len()
    }

    fn assign_spans(&mut self, start: usize) -> usize {
        if self.token.is_some() {
            self.span = Span::new(start, start + 1);
            return start + 1;
        }
        let mut pos = start;
        for child in &mut self.children {
            pos = child.assign_spans(pos);
        }
        self.span = Span::new(start, pos);
        pos
    }

    /// Left-to-right terminals.
    pub fn yield_tokens(&self) -> Vec<Token> {
        let mut out = Vec::with_capacity(self.width());
        self.collect_tokens(&mut out);
        out
    }

    fn collect_tokens(&self, out: &mut Vec<Token>) {
        match &self.token {
            Some(tok) => out.push(Token {
                surface: tok.clone(),
                index: self.span.start,
                is_punct: is_punct_label(&self.label),
            }),
            None => self.children.iter().for_each(|c| c.collect_tokens(out)),
        }
    }

    /// Pre-order traversal over every node.
    pub fn nodes(&self) -> Nodes<'_> {
        Nodes { stack: vec![self] }
    }

    /// Copy of the tree with every `-NONE-` leaf removed, constituents left
    /// empty by the removal pruned, and spans recomputed. Returns `None` if
    /// nothing remains.
    pub fn without_traces(&self) -> Option<ParseTree> {
        let mut pruned = self.prune(&|t: &ParseTree| t.is_leaf() && t.label == TRACE_LABEL)?;
        pruned.assign_spans(0);
        Some(pruned)
    }

    fn prune(&self, drop: &dyn Fn(&ParseTree) -> bool) -> Option<ParseTree> {
        if drop(self) {
            return None;
        }
        if self.is_leaf() {
            return Some(self.clone());
        }
        let children: Vec<_> = self.children.iter().filter_map(|c| c.prune(drop)).collect();
        if children.is_empty() {
            return None;
        }
        Some(ParseTree {
            label: self.label.clone(),
            children,
            token: None,
            span: self.span,
        })
    }

    /// Canonical single-line bracketed rendering, without an outer wrapper.
    pub fn to_sexpr(&self) -> String {
        let mut out = String::new();
        self.write_sexpr(&mut out);
        out
    }

    fn write_sexpr(&self, out: &mut String) {
        out.push('(');
        out.push_str(&self.label);
        match &self.token {
            Some(tok) => {
                out.push(' ');
                out.push_str(tok);
            }
            None => {
                for child in &self.children {
                    out.push(' ');
                    child.write_sexpr(out);
                }
            }
        }
        out.push(')');
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sexpr())
    }
}

pub struct Nodes<'a> {
    stack: Vec<&'a ParseTree>,
}

impl<'a> Iterator for Nodes<'a> {
    type Item = &'a ParseTree;

    fn next(&mut self) -> Option<Self::Item> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children.iter().rev());
        Some(node)
    }
}

pub fn yield_tokens(tree: &ParseTree) -> Vec<Token> {
    tree.yield_tokens()
}

// ---------------------------------------------------------------------------
// Reader
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Lexeme<'a> {
    Open,
    Close,
    Atom(&'a str),
}

#[derive(Debug, Clone)]
struct Lexed<'a> {
    lexeme: Lexeme<'a>,
    offset: usize,
}

/// Raw S-expression before it is checked against the tree shape rules.
enum Sexpr<'a> {
    Atom(&'a str, usize),
    List(Vec<Sexpr<'a>>, usize),
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
    /// Byte offset where each line starts, for diagnostics.
    line_starts: Vec<usize>,
}

fn is_comment_start(rest: &str) -> bool {
    rest.starts_with("*x*") || rest.starts_with('#') || rest.starts_with(';')
}

impl<'a> Reader<'a> {
    fn new(src: &'a str) -> Self {
        let mut line_starts = vec![0];
        line_starts.extend(src.match_indices('\n').map(|(i, _)| i + 1));
        Reader {
            src,
            pos: 0,
            line_starts,
        }
    }

    fn error(&self, kind: ParseErrorKind, offset: usize) -> ParseError {
        let line_idx = match self.line_starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let column = self.src[self.line_starts[line_idx]..offset].chars().count() + 1;
        ParseError {
            kind,
            line: line_idx + 1,
            column,
            offset,
        }
    }

    fn at_line_start(&self, offset: usize) -> bool {
        self.src[..offset]
            .rsplit('\n')
            .next()
            .is_none_or(|prefix| prefix.trim().is_empty())
    }

    /// Skip whitespace and, between trees only, comment lines.
    fn skip_trivia(&mut self, top_level: bool) {
        loop {
            let rest = &self.src[self.pos..];
            let trimmed = rest.trim_start();
            self.pos += rest.len() - trimmed.len();
            if top_level && is_comment_start(trimmed) && self.at_line_start(self.pos) {
                let line_end = trimmed.find('\n').map_or(trimmed.len(), |i| i + 1);
                self.pos += line_end;
                continue;
            }
            return;
        }
    }

    fn next_lexeme(&mut self, top_level: bool) -> Option<Lexed<'a>> {
        self.skip_trivia(top_level);
        let rest = &self.src[self.pos..];
        let offset = self.pos;
        let c = rest.chars().next()?;
        let lexeme = match c {
            '(' => {
                self.pos += 1;
                Lexeme::Open
            }
            ')' => {
                self.pos += 1;
                Lexeme::Close
            }
            _ => {
                let len = rest
                    .find(|c: char| c.is_whitespace() || c == '(' || c == ')')
                    .unwrap_or(rest.len());
                self.pos += len;
                Lexeme::Atom(&rest[..len])
            }
        };
        Some(Lexed { lexeme, offset })
    }

    /// Read one balanced list whose `(` has already been consumed.
    fn read_list(&mut self, open_offset: usize) -> Result<Sexpr<'a>, ParseError> {
        let mut items = Vec::new();
        loop {
            match self.next_lexeme(false) {
                None => return Err(self.error(ParseErrorKind::UnbalancedParens, open_offset)),
                Some(Lexed {
                    lexeme: Lexeme::Close, ..
                }) => return Ok(Sexpr::List(items, open_offset)),
                Some(Lexed {
                    lexeme: Lexeme::Open,
                    offset,
                }) => items.push(self.read_list(offset)?),
                Some(Lexed {
                    lexeme: Lexeme::Atom(a),
                    offset,
                }) => items.push(Sexpr::Atom(a, offset)),
            }
        }
    }

    fn read_top(&mut self) -> Option<Result<Sexpr<'a>, ParseError>> {
        let lexed = self.next_lexeme(true)?;
        Some(match lexed.lexeme {
            Lexeme::Open => self.read_list(lexed.offset),
            Lexeme::Close => Err(self.error(ParseErrorKind::UnbalancedParens, lexed.offset)),
            Lexeme::Atom(a) => Err(self.error(ParseErrorKind::StrayText(a.to_string()), lexed.offset)),
        })
    }

    fn build(&self, sexpr: &Sexpr<'a>) -> Result<ParseTree, ParseError> {
        let (items, offset) = match sexpr {
            Sexpr::List(items, offset) => (items, *offset),
            Sexpr::Atom(a, offset) => return Err(self.error(ParseErrorKind::StrayText(a.to_string()), *offset)),
        };
        let (label, rest) = match items.split_first() {
            None => return Err(self.error(ParseErrorKind::EmptyTree, offset)),
            Some((Sexpr::Atom(label, _), rest)) => (*label, rest),
            Some((Sexpr::List(..), _)) => return Err(self.error(ParseErrorKind::MissingLabel, offset)),
        };
        match rest {
            [] => Err(self.error(ParseErrorKind::EmptyTree, offset)),
            [Sexpr::Atom(tok, _)] => Ok(ParseTree {
                label: label.to_string(),
                children: Vec::new(),
                token: Some(tok.to_string()),
                span: Span::new(0, 1),
            }),
            _ => {
                if let Some(Sexpr::Atom(_, at)) = rest.iter().find(|s| matches!(s, Sexpr::Atom(..))) {
                    return Err(self.error(ParseErrorKind::TerminalWithChildren, *at));
                }
                let children = rest.iter().map(|c| self.build(c)).collect::<Result<_, _>>()?;
                Ok(ParseTree {
                    label: label.to_string(),
                    children,
                    token: None,
                    span: Span::new(0, 0),
                })
            }
        }
    }

    /// Top-level expression, unwrapping the optional unlabeled outer `( ... )`.
    fn build_top(&self, sexpr: &Sexpr<'a>) -> Result<ParseTree, ParseError> {
        if let Sexpr::List(items, offset) = sexpr {
            match items.as_slice() {
                [] => return Err(self.error(ParseErrorKind::EmptyTree, *offset)),
                [only @ Sexpr::List(..)] => return self.build(only),
                [Sexpr::List(..), ..] => return Err(self.error(ParseErrorKind::MissingLabel, *offset)),
                _ => {}
            }
        }
        self.build(sexpr)
    }
}

/// Parse every tree in `source`. Fails on the first malformed tree.
pub fn parse_trees(source: &str) -> Result<Vec<ParseTree>, ParseError> {
    let mut reader = Reader::new(source);
    let mut trees = Vec::new();
    while let Some(sexpr) = reader.read_top() {
        let mut tree = reader.build_top(&sexpr?)?;
        tree.assign_spans(0);
        trees.push(tree);
    }
    Ok(trees)
}

/// Parse exactly one tree.
pub fn parse_tree(source: &str) -> Result<ParseTree, ParseError> {
    let mut reader = Reader::new(source);
    let sexpr = match reader.read_top() {
        Some(sexpr) => sexpr?,
        None => return Err(reader.error(ParseErrorKind::EmptyTree, source.len())),
    };
    let mut tree = reader.build_top(&sexpr)?;
    tree.assign_spans(0);
    reader.skip_trivia(true);
    if reader.pos < source.len() {
        let rest = source[reader.pos..].split_whitespace().next().unwrap_or_default();
        return Err(reader.error(ParseErrorKind::StrayText(rest.to_string()), reader.pos));
    }
    Ok(tree)
}
