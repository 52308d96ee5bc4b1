//! Grid reports: a markdown table of `mean{std}` cells and a CSV with the
//! raw numbers, both rendered from the same [`ReportCell`]s.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::harness::Condition;
use crate::scoring::{FailureMode, FailureThresholds, Metric, MetricSummary, Summary};

/// One model x condition x k cell of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub model_id: String,
    pub condition: Condition,
    pub k: usize,
    /// Aggregation units (conversations) that contributed scores.
    pub units: usize,
    /// Evaluation units that failed in the harness and were left out.
    pub failed_units: usize,
    pub metrics: Vec<(Metric, MetricSummary)>,
    pub failure_mode: FailureMode,
}

impl ReportCell {
    pub fn new(
        model_id: impl Into<String>,
        condition: Condition,
        k: usize,
        summary: &Summary,
        failed_units: usize,
        thresholds: &FailureThresholds,
    ) -> Self {
        ReportCell {
            model_id: model_id.into(),
            condition,
            k,
            units: summary.units,
            failed_units,
            metrics: Metric::ALL.iter().map(|&m| (m, *summary.get(m))).collect(),
            failure_mode: summary.failure_mode(thresholds),
        }
    }

    pub fn metric(&self, metric: Metric) -> Option<&MetricSummary> {
        self.metrics.iter().find(|(m, _)| *m == metric).map(|(_, s)| s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReportOptions {
    /// Also mark the highest/lowest Z value of each column per model block.
    pub mark_z: bool,
}

fn two_dp(v: f64) -> String {
    // `+ 0.0` turns a negative zero into a positive one.
    format!("{:.2}", v + 0.0)
}

/// `mean{std}` with two decimals, or `n/a` when nothing was defined.
pub fn format_cell(summary: &MetricSummary) -> String {
    match (summary.mean, summary.std) {
        (Some(mean), Some(std)) => format!("{}{{{}}}", two_dp(mean), two_dp(std)),
        (Some(mean), None) => two_dp(mean),
        _ => "n/a".into(),
    }
}

/// Cells grouped by model in first-appearance order, then condition
/// (f before s), then k.
pub fn ordered(cells: &[ReportCell]) -> Vec<&ReportCell> {
    let mut models: Vec<&str> = Vec::new();
    for c in cells {
        if !models.contains(&c.model_id.as_str()) {
            models.push(&c.model_id);
        }
    }
    let mut out: Vec<&ReportCell> = cells.iter().collect();
    out.sort_by_key(|c| (models.iter().position(|m| *m == c.model_id), c.condition, c.k));
    out
}

/// Mean in hundredths, so ranking agrees with the rendered two decimals.
fn rank_key(cell: &ReportCell, metric: Metric) -> Option<i64> {
    cell.metric(metric)?.mean.map(|m| (m * 100.0).round() as i64)
}

/// Rank marks for one column of one model block: `[+1]`/`[+2]` on the
/// highest two distinct values, `[-1]`/`[-2]` on the lowest two that are not
/// already marked high. A block with a single distinct value gets no marks.
fn rank_marks(block: &[&ReportCell], metric: Metric) -> Vec<&'static str> {
    let keys: Vec<Option<i64>> = block.iter().map(|c| rank_key(c, metric)).collect();
    let distinct: Vec<i64> = keys
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .rev()
        .collect();
    if distinct.len() < 2 {
        return vec![""; block.len()];
    }
    let high: Vec<i64> = distinct.iter().take(2).copied().collect();
    let low: Vec<i64> = distinct
        .iter()
        .rev()
        .filter(|v| !high.contains(v))
        .take(2)
        .copied()
        .collect();
    keys.iter()
        .map(|k| match k {
            Some(v) if high.first() == Some(v) => "[+1]",
            Some(v) if high.get(1) == Some(v) => "[+2]",
            Some(v) if low.first() == Some(v) => "[-1]",
            Some(v) if low.get(1) == Some(v) => "[-2]",
            _ => "",
        })
        .collect()
}

fn extreme_marks(block: &[&ReportCell], metric: Metric) -> Vec<&'static str> {
    let keys: Vec<Option<i64>> = block.iter().map(|c| rank_key(c, metric)).collect();
    let (Some(max), Some(min)) = (keys.iter().flatten().max(), keys.iter().flatten().min()) else {
        return vec![""; block.len()];
    };
    if max == min {
        return vec![""; block.len()];
    }
    keys.iter()
        .map(|k| match k {
            Some(v) if v == max => "[hi]",
            Some(v) if v == min => "[lo]",
            _ => "",
        })
        .collect()
}

fn flags(cell: &ReportCell) -> String {
    let mut parts = Vec::new();
    match cell.failure_mode {
        FailureMode::OverDeletion => parts.push("over-deletion".to_string()),
        FailureMode::UnderDeletion => parts.push("under-deletion".to_string()),
        FailureMode::None => {}
    }
    if cell.failed_units > 0 {
        let noun = if cell.failed_units == 1 { "unit" } else { "units" };
        parts.push(format!("{} failed {noun} excluded", cell.failed_units));
    }
    parts.join("; ")
}

const HEADERS: [&str; 6] = ["E_F", "E_P", "E_R", "Z_E", "Z_I", "Z_P"];

pub fn render_markdown(cells: &[ReportCell], options: &ReportOptions) -> String {
    let cells = ordered(cells);
    let mut out = String::new();
    out.push_str("| M | cond | k | ");
    out.push_str(&HEADERS.join(" | "));
    out.push_str(" | flags |\n|---|---|---:|");
    out.push_str(&"---:|".repeat(HEADERS.len()));
    out.push_str("---|\n");

    let mut start = 0;
    while start < cells.len() {
        let model = &cells[start].model_id;
        let end = start + cells[start..].iter().take_while(|c| &c.model_id == model).count();
        let block = &cells[start..end];
        let marks: Vec<Vec<&str>> = Metric::ALL
            .iter()
            .map(|&m| match m {
                Metric::EF => rank_marks(block, m),
                Metric::ZE | Metric::ZI | Metric::ZP if options.mark_z => extreme_marks(block, m),
                _ => vec![""; block.len()],
            })
            .collect();
        for (row, cell) in block.iter().enumerate() {
            let _ = write!(out, "| {} | {} | {} |", cell.model_id, cell.condition, cell.k);
            for (col, &metric) in Metric::ALL.iter().enumerate() {
                let text = cell.metric(metric).map_or_else(|| "n/a".to_string(), format_cell);
                match marks[col][row] {
                    "" => {
                        let _ = write!(out, " {text} |");
                    }
                    mark => {
                        let _ = write!(out, " {text} {mark} |");
                    }
                }
            }
            let _ = writeln!(out, " {} |", flags(cell));
        }
        start = end;
    }

    out.push_str("\nCells are mean{std} over conversations. E_F marks per model: [+1]/[+2] highest, [-1]/[-2] lowest.");
    if options.mark_z {
        out.push_str(" Z marks per model: [hi] highest, [lo] lowest.");
    }
    out.push('\n');
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn render_csv(cells: &[ReportCell]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "model".to_string(),
        "condition".into(),
        "k".into(),
        "units".into(),
        "failed_units".into(),
        "failure_mode".into(),
    ];
    for m in Metric::ALL {
        for field in ["mean", "std", "n", "excluded"] {
            header.push(format!("{m}_{field}"));
        }
    }
    w.write_record(&header)?;
    for cell in ordered(cells) {
        let mut record = vec![
            cell.model_id.clone(),
            cell.condition.to_string(),
            cell.k.to_string(),
            cell.units.to_string(),
            cell.failed_units.to_string(),
            cell.failure_mode.as_str().to_string(),
        ];
        for m in Metric::ALL {
            let s = cell.metric(m).copied().unwrap_or(MetricSummary {
                mean: None,
                std: None,
                n: 0,
                excluded: 0,
            });
            record.extend([opt(s.mean), opt(s.std), s.n.to_string(), s.excluded.to_string()]);
        }
        w.write_record(&record)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
