//! Score one hypothesis against a gold tree: token-level E scores and
//! node-level Z scores.

use dres::extraction::{extract_tuple, UtteranceId};
use dres::scoring::{classify_failure, score_hypothesis, FailureThresholds, Metric, ScoringOptions};
use dres::treebank::parse_tree;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gold = parse_tree(
        "( (S (INTJ (UH well)) (NP (PRP we)) (EDITED (VP (VBD left))) (, ,) \
         (VP (VBD left) (PRN (S (NP (PRP you)) (VP (VBP know)))) (ADVP (RB early)))) )",
    )?;
    let tuple = extract_tuple(gold, UtteranceId::new("demo", 0));
    println!("gold:   {}", tuple.disfluent_text());
    println!("fluent: {}", tuple.fluent_text());

    let options = ScoringOptions::default();
    for hyp in [tuple.fluent_text().as_str(), "we left , left early", "we early", ""] {
        let s = score_hypothesis("demo", &[&tuple], hyp, &options);
        let cells: Vec<String> = Metric::ALL
            .iter()
            .map(|&m| format!("{m}={}", s.value(m).map_or("n/a".into(), |v| format!("{v:.1}"))))
            .collect();
        let mode = classify_failure(&s.e, &FailureThresholds::default());
        println!("{hyp:<24} {} {}", cells.join(" "), mode.as_str());
    }
    Ok(())
}
