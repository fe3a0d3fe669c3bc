//! Concept matching: collect each disease's messages into an [`Example`].
//!
//! A synonym of k words matches k consecutive word (or number) tokens of a
//! message, compared in lowercase. Punctuation and emoticon tokens break a
//! phrase, so "flu" never matches inside "fluid" and "heart attack" does not
//! match "heart, attack".

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, Corpus, EmoticonInventory, Message, TokenKind};
use crate::lexicon::{
    assign_labels, expand_synonyms, fold_case, ClassLabel, Concept, HuTable, Severity, SynonymMap,
};

pub const DEFAULT_MIN_MESSAGES: usize = 100;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchError {
    #[error("min_messages must be at least 1")]
    ZeroMinimum,
    #[error("no concept reached {min_messages} matched messages")]
    NoExamples { min_messages: usize },
}

/// One concept's matched messages and its class: the unit of classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub concept: Concept,
    pub messages: Vec<Message>,
    pub label: Severity,
}

impl Example {
    pub fn id(&self) -> &str {
        &self.concept.canonical
    }
}

/// Lowercased word runs of one message.
type Runs = Vec<Vec<String>>;

fn word_runs(text: &str, inventory: &EmoticonInventory) -> Runs {
    let mut runs = Vec::new();
    let mut current = Vec::new();
    for token in tokenize(text, inventory) {
        match token.kind {
            TokenKind::Word | TokenKind::Number => current.push(fold_case(&token.surface)),
            TokenKind::Punctuation | TokenKind::Emoticon => {
                if !current.is_empty() {
                    runs.push(std::mem::take(&mut current));
                }
            }
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs
}

fn synonym_pattern(synonym: &str, inventory: &EmoticonInventory) -> Vec<String> {
    word_runs(synonym, inventory).into_iter().flatten().collect()
}

fn runs_contain(runs: &Runs, pattern: &[String]) -> bool {
    !pattern.is_empty()
        && runs
            .iter()
            .any(|run| run.windows(pattern.len()).any(|w| w == pattern))
}

/// Pre-tokenized corpus for matching many concepts against the same messages.
pub struct MatchIndex<'a> {
    corpus: &'a Corpus,
    inventory: &'a EmoticonInventory,
    runs: Vec<Runs>,
}

impl<'a> MatchIndex<'a> {
    pub fn new(corpus: &'a Corpus, inventory: &'a EmoticonInventory) -> Self {
        let runs = corpus
            .messages()
            .par_iter()
            .map(|m| word_runs(m.text(), inventory))
            .collect();
        Self {
            corpus,
            inventory,
            runs,
        }
    }

    /// Corpus positions of the messages matching any synonym, in corpus order.
    pub fn matching_positions(&self, concept: &Concept) -> Vec<usize> {
        let patterns: Vec<Vec<String>> = concept
            .synonyms()
            .iter()
            .map(|s| synonym_pattern(s, self.inventory))
            .collect();
        self.runs
            .iter()
            .enumerate()
            .filter(|(_, runs)| patterns.iter().any(|p| runs_contain(runs, p)))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn match_concept(&self, concept: &Concept) -> Vec<Message> {
        self.matching_positions(concept)
            .into_iter()
            .map(|i| self.corpus.messages()[i].clone())
            .collect()
    }
}

/// Messages of `corpus` that mention `concept`, in corpus order.
pub fn match_concept(
    concept: &Concept,
    corpus: &Corpus,
    inventory: &EmoticonInventory,
) -> Vec<Message> {
    MatchIndex::new(corpus, inventory).match_concept(concept)
}

/// A labeled concept left out because too few messages matched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub canonical: String,
    pub label: ClassLabel,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct MatchOutcome {
    /// Surviving examples in table order.
    pub examples: Vec<Example>,
    pub excluded: Vec<Exclusion>,
    /// Concepts removed by the middle-band margin before matching.
    pub culled: Vec<String>,
}

/// Labels the table, expands synonyms, matches every non-culled concept and
/// keeps those with at least `min_messages` matched messages.
pub fn build_examples(
    table: &HuTable,
    vocabulary: &SynonymMap,
    corpus: &Corpus,
    min_messages: usize,
    inventory: &EmoticonInventory,
) -> Result<MatchOutcome, MatchError> {
    if min_messages == 0 {
        return Err(MatchError::ZeroMinimum);
    }
    let labels = assign_labels(table);
    let index = MatchIndex::new(corpus, inventory);

    let matched: Vec<(Concept, ClassLabel, Option<Vec<Message>>)> = table
        .concepts()
        .par_iter()
        .zip(labels.par_iter())
        .map(|(concept, (_, label))| {
            let expanded = expand_synonyms(concept, vocabulary);
            let messages = label
                .severity()
                .map(|_| index.match_concept(&expanded));
            (expanded, *label, messages)
        })
        .collect();

    let mut outcome = MatchOutcome {
        examples: Vec::new(),
        excluded: Vec::new(),
        culled: Vec::new(),
    };
    for (concept, label, messages) in matched {
        match (label.severity(), messages) {
            (Some(severity), Some(messages)) if messages.len() >= min_messages => {
                outcome.examples.push(Example {
                    concept,
                    messages,
                    label: severity,
                });
            }
            (Some(_), Some(messages)) => {
                log::info!(
                    "excluding {:?}: {} matched messages (< {min_messages})",
                    concept.canonical,
                    messages.len()
                );
                outcome.excluded.push(Exclusion {
                    canonical: concept.canonical,
                    label,
                    count: messages.len(),
                });
            }
            _ => outcome.culled.push(concept.canonical),
        }
    }
    if outcome.examples.is_empty() {
        return Err(MatchError::NoExamples { min_messages });
    }
    Ok(outcome)
}
