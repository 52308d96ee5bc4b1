//! Synthetic disfluency injection, for exercising the pipeline without a
//! licensed treebank.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{extract_tuple, split_conversations, Corpus, ExtractionError, UtteranceId, UtteranceTuple};
use crate::treebank::ParseTree;

const FILLERS: &[&str] = &["uh", "um"];
const PARENTHETICALS: &[[&str; 2]] = &[["you", "know"], ["i", "mean"]];

/// Fluent vocabulary for synthetic sentences. Disjoint from the filler and
/// parenthetical words above.
const VOCABULARY: &[&str] = &[
    "we",
    "they",
    "people",
    "kids",
    "family",
    "house",
    "car",
    "work",
    "school",
    "weather",
    "rain",
    "summer",
    "winter",
    "money",
    "tax",
    "budget",
    "garden",
    "dog",
    "cat",
    "music",
    "movie",
    "book",
    "news",
    "paper",
    "city",
    "town",
    "texas",
    "dallas",
    "job",
    "company",
    "computer",
    "program",
    "really",
    "pretty",
    "just",
    "always",
    "never",
    "sometimes",
    "probably",
    "actually",
    "lot",
    "little",
    "big",
    "good",
    "bad",
    "nice",
    "hard",
    "easy",
    "old",
    "new",
    "go",
    "went",
    "like",
    "think",
    "guess",
    "said",
    "get",
    "got",
    "have",
    "had",
    "see",
    "saw",
    "was",
    "were",
    "is",
    "the",
    "a",
    "that",
    "this",
    "of",
    "to",
    "in",
    "and",
    "but",
    "so",
    "it",
    "there",
    "do",
    "did",
];

/// Per-gap insertion probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectionRates {
    pub edited: f64,
    pub interjection: f64,
    pub parenthetical: f64,
}

impl InjectionRates {
    pub const ZERO: InjectionRates = InjectionRates {
        edited: 0.0,
        interjection: 0.0,
        parenthetical: 0.0,
    };

    pub fn validate(&self) -> Result<(), ExtractionError> {
        for (name, value) in [
            ("edited", self.edited),
            ("interjection", self.interjection),
            ("parenthetical", self.parenthetical),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ExtractionError::InvalidRate { name, value });
            }
        }
        Ok(())
    }
}

impl Default for InjectionRates {
    fn default() -> Self {
        InjectionRates {
            edited: 0.08,
            interjection: 0.08,
            parenthetical: 0.03,
        }
    }
}

fn preterminal(word: &str) -> ParseTree {
    let pos = match word {
        "." | "?" | "!" => ".",
        "," => ",",
        w if !w.is_empty() && w.chars().all(|c| !c.is_alphanumeric()) => ":",
        _ => "NN",
    };
    ParseTree::leaf(pos, word)
}

/// Insert disfluencies before fluent tokens and return the tuple extracted
/// from the synthesized tree.
///
/// Before each fluent token, independently: with probability `edited` a copy
/// of the next 1-3 fluent tokens is inserted as an EDITED constituent; with
/// probability `interjection` an `uh`/`um` INTJ; with probability
/// `parenthetical` a `you know`/`i mean` PRN.
pub fn inject_disfluencies<S: AsRef<str>>(
    fluent: &[S],
    id: UtteranceId,
    seed: u64,
    rates: &InjectionRates,
) -> Result<UtteranceTuple, ExtractionError> {
    rates.validate()?;
    if fluent.is_empty() {
        return Err(ExtractionError::EmptyUtterance);
    }
    let words: Vec<&str> = fluent.iter().map(|w| w.as_ref()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut children = Vec::with_capacity(words.len() * 2);

    for j in 0..words.len() {
        if rng.random_bool(rates.edited) {
            let max_len = 3.min(words.len() - j);
            let len = rng.random_range(1..=max_len);
            let copy = words[j..j + len].iter().map(|w| preterminal(w)).collect();
            children.push(ParseTree::node("EDITED", copy));
        }
        if rng.random_bool(rates.interjection) {
            let filler = FILLERS[rng.random_range(0..FILLERS.len())];
            children.push(ParseTree::node("INTJ", vec![ParseTree::leaf("UH", filler)]));
        }
        if rng.random_bool(rates.parenthetical) {
            let [subj, verb] = PARENTHETICALS[rng.random_range(0..PARENTHETICALS.len())];
            let clause = ParseTree::node(
                "S",
                vec![
                    ParseTree::node("NP", vec![ParseTree::leaf("PRP", subj)]),
                    ParseTree::node("VP", vec![ParseTree::leaf("VBP", verb)]),
                ],
            );
            children.push(ParseTree::node("PRN", vec![clause]));
        }
        children.push(preterminal(words[j]));
    }

    Ok(extract_tuple(ParseTree::node("S", children), id))
}

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub utterances: usize,
    pub seed: u64,
    pub rates: InjectionRates,
    pub utterances_per_conversation: usize,
    pub train_fraction: f64,
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            utterances: 200,
            seed: 0,
            rates: InjectionRates::default(),
            utterances_per_conversation: 10,
            train_fraction: 0.5,
            min_words: 3,
            max_words: 12,
        }
    }
}

/// Random fluent sentences with injected disfluencies, grouped into
/// conversations `synth0000`, `synth0001`, ...
pub fn synth_corpus(options: &SynthOptions) -> Result<Corpus, ExtractionError> {
    options.rates.validate()?;
    if options.utterances == 0 {
        return Err(ExtractionError::EmptyInput);
    }
    let per_conv = options.utterances_per_conversation.max(1);
    let min_words = options.min_words.max(1);
    let max_words = options.max_words.max(min_words);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    let mut utterances = Vec::with_capacity(options.utterances);
    for n in 0..options.utterances {
        let len = rng.random_range(min_words..=max_words);
        let mut sentence: Vec<&str> = VOCABULARY.choose_multiple(&mut rng, len).copied().collect();
        if rng.random_bool(0.5) {
            sentence.push(".");
        }
        let id = UtteranceId::new(format!("synth{:04}", n / per_conv), n % per_conv);
        utterances.push(inject_disfluencies(&sentence, id, rng.random(), &options.rates)?);
    }

    let splits = split_conversations(
        utterances.iter().map(|u| u.id.conversation.as_str()),
        options.train_fraction,
        options.seed,
    )?;
    Ok(Corpus { utterances, splits })
}
