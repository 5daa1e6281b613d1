use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::placeholder::parse_word_list;

pub const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.txt");

/// Word fraction at or above which a value reads as plain words.
pub const READABLE_THRESHOLD: f64 = 0.5;

/// Shortest alphabetic run considered a candidate word.
pub const MIN_RUN_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadabilityHint {
    Readable,
    Opaque,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadabilityResult {
    pub word_fraction: f64,
    pub verdict_hint: ReadabilityHint,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    words: HashSet<String>,
}

impl Lexicon {
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Lexicon {
            words: words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Self {
        Lexicon::from_words(parse_word_list(text))
    }

    pub fn shipped() -> &'static Lexicon {
        static LEXICON: OnceLock<Lexicon> = OnceLock::new();
        LEXICON.get_or_init(|| Lexicon::parse(DEFAULT_LEXICON))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Maximal runs of alphabetic characters at least [`MIN_RUN_LEN`] long.
pub fn alphabetic_runs(raw: &str) -> Vec<&str> {
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in raw.char_indices().chain(std::iter::once((raw.len(), ' '))) {
        match (c.is_alphabetic(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                let run = &raw[s..i];
                if run.chars().count() >= MIN_RUN_LEN {
                    runs.push(run);
                }
                start = None;
            }
            _ => {}
        }
    }
    runs
}

/// Fraction of alphabetic runs that are dictionary words; zero when there
/// are no runs.
pub fn readability_score(raw: &str, lexicon: &Lexicon) -> ReadabilityResult {
    let runs = alphabetic_runs(raw);
    let word_fraction = if runs.is_empty() {
        0.0
    } else {
        runs.iter().filter(|r| lexicon.contains(r)).count() as f64 / runs.len() as f64
    };
    ReadabilityResult {
        word_fraction,
        verdict_hint: if word_fraction >= READABLE_THRESHOLD {
            ReadabilityHint::Readable
        } else {
            ReadabilityHint::Opaque
        },
    }
}
