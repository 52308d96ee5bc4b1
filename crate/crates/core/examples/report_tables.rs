//! Render report cells as markdown and CSV.

use dres::harness::Condition;
use dres::report::{render_csv, render_markdown, ReportCell, ReportOptions};
use dres::scoring::{summarize, FailureThresholds, Metric, StdKind, Summary};

/// Summary of per-conversation values drawn around the given means.
fn summary(means: [f64; 6], spread: f64) -> Summary {
    let metrics = Metric::ALL
        .iter()
        .zip(means)
        .map(|(&m, mean)| {
            let values = [mean - spread, mean, mean + spread].map(|v| Some(v.clamp(0.0, 100.0)));
            (m, summarize(values, StdKind::Sample))
        })
        .collect();
    Summary { units: 3, metrics }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t = FailureThresholds::default();
    let cells = vec![
        ReportCell::new(
            "model-a",
            Condition::Full,
            0,
            &summary([61.0, 90.0, 46.0, 55.0, 80.0, 40.0], 4.0),
            0,
            &t,
        ),
        ReportCell::new(
            "model-a",
            Condition::Segmented,
            3,
            &summary([78.0, 84.0, 73.0, 70.0, 92.0, 61.0], 2.5),
            1,
            &t,
        ),
        ReportCell::new(
            "model-a",
            Condition::Full,
            3,
            &summary([74.0, 80.0, 69.0, 64.0, 90.0, 52.0], 3.0),
            0,
            &t,
        ),
        ReportCell::new(
            "model-b",
            Condition::Full,
            0,
            &summary([30.0, 18.0, 99.0, 99.0, 99.0, 97.0], 1.0),
            0,
            &t,
        ),
    ];
    print!("{}", render_markdown(&cells, &ReportOptions { mark_z: true }));
    println!();
    print!("{}", render_csv(&cells)?);
    Ok(())
}
