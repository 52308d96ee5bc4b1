//! Pull the cleaned transcript out of a raw model reply.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Open/close pair delimiting a reasoning block, e.g. `<think>`/`</think>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningMarkers {
    pub open: String,
    pub close: String,
}

impl Default for ReasoningMarkers {
    fn default() -> Self {
        ReasoningMarkers {
            open: "<think>".into(),
            close: "</think>".into(),
        }
    }
}

fn label_pattern() -> &'static Regex {
    static LABEL: OnceLock<Regex> = OnceLock::new();
    LABEL.get_or_init(|| {
        Regex::new(
            r"(?i)\A\s*(?:\*\*)?(?:here\s+is\s+the\s+|here's\s+the\s+)?(?:cleaned|clean|fluent|corrected|edited|disfluency-free)(?:[- \t]up)?[ \t]+(?:transcript|text|version|output)(?:\*\*)?[ \t]*:(?:\*\*)?",
        )
        .expect("valid label regex")
    })
}

fn strip_reasoning(raw: &str, markers: &ReasoningMarkers) -> String {
    let mut rest = raw;
    // A reply that starts inside the block (opening marker stripped by the
    // server) keeps only what follows the first close marker.
    if let (Some(close), open) = (rest.find(&markers.close), rest.find(&markers.open)) {
        if open.is_none_or(|o| o > close) {
            rest = &rest[close + markers.close.len()..];
        }
    }
    let mut out = String::with_capacity(rest.len());
    while let Some(start) = rest.find(&markers.open) {
        out.push_str(&rest[..start]);
        let after = &rest[start + markers.open.len()..];
        match after.find(&markers.close) {
            Some(end) => rest = &after[end + markers.close.len()..],
            // Unterminated block: the answer never started.
            None => return out,
        }
    }
    out.push_str(rest);
    out
}

fn strip_fences(text: &str) -> String {
    text.lines()
        .filter(|line| !line.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Strip reasoning blocks (when `markers` is set), code-fence lines and a
/// leading "Cleaned transcript:"-style label, then trim.
///
/// Fence lines are dropped but their content is kept, since models often
/// fence the answer itself.
pub fn extract_transcript(raw: &str, markers: Option<&ReasoningMarkers>) -> String {
    let text = match markers {
        Some(m) if !m.open.is_empty() && !m.close.is_empty() => strip_reasoning(raw, m),
        _ => raw.to_string(),
    };
    let text = strip_fences(&text);
    let text = label_pattern().replace(&text, "");
    text.trim().to_string()
}
