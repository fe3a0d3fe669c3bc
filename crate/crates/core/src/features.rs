//! Per-example feature extraction.
//!
//! Three families, all normalized rates so corpus size cancels out:
//!
//! * emoticon: share of messages with a positive, negative or any emoticon;
//! * formality: capitalization, terminal punctuation, shouting, pronoun
//!   casing and character repetition;
//! * unigram: relative frequency of one word among the example's word
//!   tokens, compared exactly or in lowercase.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, EmoticonInventory, Polarity, Token, TokenKind};
use crate::lexicon::fold_case;
use crate::matcher::Example;

/// Value of the pronoun-casing rate when no message uses the pronoun.
pub const PRONOUN_UNDEFINED: f64 = 0.5;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature spec is empty")]
    Empty,
    #[error("duplicate feature name {0:?}")]
    DuplicateName(String),
    #[error("unigram surface is empty or contains whitespace: {0:?}")]
    BadUnigram(String),
    #[error("cannot read feature spec {path}: {message}")]
    Read { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Emoticon,
    Formality,
    Unigram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmoticonMeasure {
    Positive,
    Negative,
    Any,
}

impl EmoticonMeasure {
    pub const ALL: [EmoticonMeasure; 3] = [Self::Positive, Self::Negative, Self::Any];

    fn name(self) -> &'static str {
        match self {
            Self::Positive => "emoticon_positive",
            Self::Negative => "emoticon_negative",
            Self::Any => "emoticon_any",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormalityPattern {
    /// First alphabetic character of the message is uppercase.
    InitialCapital,
    /// Message ends in `.`, `!` or `?`.
    TerminalPunctuation,
    /// Word tokens of two or more characters written in all caps.
    AllCapsWords,
    /// First-person pronoun written "I" rather than "i".
    PronounCapitalized,
    /// `!!`, `??`, or a letter repeated three or more times in a row.
    Repetition,
}

impl FormalityPattern {
    pub const ALL: [FormalityPattern; 5] = [
        Self::InitialCapital,
        Self::TerminalPunctuation,
        Self::AllCapsWords,
        Self::PronounCapitalized,
        Self::Repetition,
    ];

    fn name(self) -> &'static str {
        match self {
            Self::InitialCapital => "initial_capital",
            Self::TerminalPunctuation => "terminal_punctuation",
            Self::AllCapsWords => "all_caps_words",
            Self::PronounCapitalized => "pronoun_capitalized",
            Self::Repetition => "repetition",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Unigram {
    pub surface: String,
    pub case_sensitive: bool,
}

impl Unigram {
    pub fn new(surface: impl Into<String>, case_sensitive: bool) -> Self {
        Self {
            surface: surface.into(),
            case_sensitive,
        }
    }

    pub fn feature_name(&self) -> String {
        if self.case_sensitive {
            format!("unigram_cs:{}", self.surface)
        } else {
            format!("unigram:{}", self.surface)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FeatureKind {
    Emoticon { measure: EmoticonMeasure },
    Formality { pattern: FormalityPattern },
    Unigram(Unigram),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl FeatureDescriptor {
    pub fn emoticon(measure: EmoticonMeasure) -> Self {
        Self {
            name: measure.name().to_string(),
            kind: FeatureKind::Emoticon { measure },
        }
    }

    pub fn formality(pattern: FormalityPattern) -> Self {
        Self {
            name: pattern.name().to_string(),
            kind: FeatureKind::Formality { pattern },
        }
    }

    pub fn unigram(unigram: Unigram) -> Self {
        Self {
            name: unigram.feature_name(),
            kind: FeatureKind::Unigram(unigram),
        }
    }

    pub fn family(&self) -> Family {
        match self.kind {
            FeatureKind::Emoticon { .. } => Family::Emoticon,
            FeatureKind::Formality { .. } => Family::Formality,
            FeatureKind::Unigram(_) => Family::Unigram,
        }
    }
}

/// Ordered, uniquely named feature list shared by every example of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureDescriptor>", into = "Vec<FeatureDescriptor>")]
pub struct FeatureSpec {
    features: Vec<FeatureDescriptor>,
}

impl TryFrom<Vec<FeatureDescriptor>> for FeatureSpec {
    type Error = FeatureError;

    fn try_from(features: Vec<FeatureDescriptor>) -> Result<Self, Self::Error> {
        Self::new(features)
    }
}

impl From<FeatureSpec> for Vec<FeatureDescriptor> {
    fn from(spec: FeatureSpec) -> Self {
        spec.features
    }
}

impl FeatureSpec {
    pub fn new(features: Vec<FeatureDescriptor>) -> Result<Self, FeatureError> {
        if features.is_empty() {
            return Err(FeatureError::Empty);
        }
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(FeatureError::DuplicateName(f.name.clone()));
            }
            if let FeatureKind::Unigram(u) = &f.kind {
                if u.surface.is_empty() || u.surface.chars().any(char::is_whitespace) {
                    return Err(FeatureError::BadUnigram(u.surface.clone()));
                }
            }
        }
        Ok(Self { features })
    }

    /// The three emoticon rates, the five formality rates, then `unigrams`.
    pub fn standard(unigrams: &[Unigram]) -> Result<Self, FeatureError> {
        let features = EmoticonMeasure::ALL
            .into_iter()
            .map(FeatureDescriptor::emoticon)
            .chain(FormalityPattern::ALL.into_iter().map(FeatureDescriptor::formality))
            .chain(unigrams.iter().cloned().map(FeatureDescriptor::unigram))
            .collect();
        Self::new(features)
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    /// Keeps the features at `indices`, in the order given.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, FeatureError> {
        Self::new(indices.iter().map(|&i| self.features[i].clone()).collect())
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let read_err = |message: String| FeatureError::Read {
            path: path.display().to_string(),
            message,
        };
        let file = File::open(path).map_err(|e| read_err(e.to_string()))?;
        serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| read_err(e.to_string()))
    }
}

/// Feature values of one example, aligned to a [`FeatureSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub example_id: String,
    pub values: Vec<f64>,
}

/// An example's messages tokenized once, with word counts for unigram lookups.
#[derive(Debug, Clone)]
pub struct ExampleTokens {
    pub example_id: String,
    texts: Vec<String>,
    tokens: Vec<Vec<Token>>,
    polarities: Vec<(bool, bool, bool)>,
    exact_counts: HashMap<String, usize>,
    folded_counts: HashMap<String, usize>,
    word_total: usize,
}

impl ExampleTokens {
    pub fn new(example: &Example, inventory: &EmoticonInventory) -> Self {
        Self::from_texts(
            example.id(),
            example.messages.iter().map(|m| m.text()),
            inventory,
        )
    }

    pub fn from_texts<'t>(
        example_id: &str,
        texts: impl IntoIterator<Item = &'t str>,
        inventory: &EmoticonInventory,
    ) -> Self {
        let texts: Vec<String> = texts.into_iter().map(str::to_string).collect();
        let tokens: Vec<Vec<Token>> = texts.iter().map(|t| tokenize(t, inventory)).collect();
        let mut exact_counts = HashMap::new();
        let mut folded_counts = HashMap::new();
        let mut word_total = 0;
        let mut polarities = Vec::with_capacity(tokens.len());
        for message in &tokens {
            let (mut pos, mut neg, mut any) = (false, false, false);
            for token in message {
                match token.kind {
                    TokenKind::Word => {
                        word_total += 1;
                        *exact_counts.entry(token.surface.clone()).or_insert(0) += 1;
                        *folded_counts.entry(fold_case(&token.surface)).or_insert(0) += 1;
                    }
                    TokenKind::Emoticon => {
                        any = true;
                        match inventory.polarity(&token.surface) {
                            Some(Polarity::Positive) => pos = true,
                            Some(Polarity::Negative) => neg = true,
                            None => {}
                        }
                    }
                    _ => {}
                }
            }
            polarities.push((pos, neg, any));
        }
        Self {
            example_id: example_id.to_string(),
            texts,
            tokens,
            polarities,
            exact_counts,
            folded_counts,
            word_total,
        }
    }

    pub fn message_count(&self) -> usize {
        self.texts.len()
    }

    pub fn word_total(&self) -> usize {
        self.word_total
    }

    /// Word tokens equal to `surface`, either exactly or after lowercasing
    /// both sides.
    pub fn word_count(&self, surface: &str, case_sensitive: bool) -> usize {
        if case_sensitive {
            self.exact_counts.get(surface).copied().unwrap_or(0)
        } else {
            self.folded_counts
                .get(&fold_case(surface))
                .copied()
                .unwrap_or(0)
        }
    }

    /// Lowercased word counts.
    pub fn folded_counts(&self) -> &HashMap<String, usize> {
        &self.folded_counts
    }
}

fn rate(numerator: usize, denominator: usize) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

/// Shares of messages with a positive, a negative and any emoticon.
pub fn emoticon_features(example: &ExampleTokens) -> [f64; 3] {
    let n = example.message_count();
    let count = |pick: fn(&(bool, bool, bool)) -> bool| {
        rate(example.polarities.iter().filter(|p| pick(p)).count(), n)
    };
    [count(|p| p.0), count(|p| p.1), count(|p| p.2)]
}

fn is_first_person(token: &Token) -> Option<bool> {
    if token.kind != TokenKind::Word {
        return None;
    }
    let mut chars = token.surface.chars();
    let first = chars.next()?;
    let rest = chars.as_str();
    let pronoun = matches!(first, 'i' | 'I')
        && (rest.is_empty() || rest.starts_with('\'') || rest.starts_with('\u{2019}'));
    pronoun.then_some(first == 'I')
}

fn has_repetition(text: &str) -> bool {
    if text.contains("!!") || text.contains("??") {
        return true;
    }
    let mut prev = None;
    let mut run = 0;
    for c in text.chars() {
        if Some(c) == prev && c.is_alphabetic() {
            run += 1;
            if run >= 3 {
                return true;
            }
        } else {
            run = 1;
        }
        prev = Some(c);
    }
    false
}

fn is_all_caps(word: &str) -> bool {
    word.chars().any(char::is_alphabetic)
        && word
            .chars()
            .filter(|c| c.is_alphabetic())
            .all(char::is_uppercase)
}

/// The five formality rates, in [`FormalityPattern::ALL`] order.
///
/// A message counts toward the pronoun rate only when every occurrence of the
/// first-person pronoun (including contractions such as `I'm`) is uppercase.
pub fn formality_features(example: &ExampleTokens) -> [f64; 5] {
    let n = example.message_count();
    let mut initial_capital = 0;
    let mut terminal = 0;
    let mut caps_words = 0;
    let mut long_words = 0;
    let mut pronoun_messages = 0;
    let mut pronoun_upper = 0;
    let mut repetition = 0;

    for (text, tokens) in example.texts.iter().zip(&example.tokens) {
        if text
            .chars()
            .find(|c| c.is_alphabetic())
            .is_some_and(char::is_uppercase)
        {
            initial_capital += 1;
        }
        if text.trim_end().ends_with(['.', '!', '?']) {
            terminal += 1;
        }
        for word in tokens.iter().filter(|t| t.is_word()) {
            if word.surface.chars().count() >= 2 {
                long_words += 1;
                if is_all_caps(&word.surface) {
                    caps_words += 1;
                }
            }
        }
        let uses: Vec<bool> = tokens.iter().filter_map(is_first_person).collect();
        if !uses.is_empty() {
            pronoun_messages += 1;
            if uses.iter().all(|&upper| upper) {
                pronoun_upper += 1;
            }
        }
        if has_repetition(text) {
            repetition += 1;
        }
    }

    let pronoun = if pronoun_messages == 0 {
        PRONOUN_UNDEFINED
    } else {
        rate(pronoun_upper, pronoun_messages)
    };
    [
        rate(initial_capital, n),
        rate(terminal, n),
        rate(caps_words, long_words),
        pronoun,
        rate(repetition, n),
    ]
}

/// Relative frequency of each unigram among the example's word tokens.
pub fn unigram_features(example: &ExampleTokens, unigrams: &[Unigram]) -> Vec<f64> {
    unigrams
        .iter()
        .map(|u| {
            rate(
                example.word_count(&u.surface, u.case_sensitive),
                example.word_total(),
            )
        })
        .collect()
}

/// Evaluates `spec` on one tokenized example.
pub fn extract_tokens(example: &ExampleTokens, spec: &FeatureSpec) -> FeatureVector {
    let needs = |family| spec.features().iter().any(|f| f.family() == family);
    let emoticons = needs(Family::Emoticon).then(|| emoticon_features(example));
    let formality = needs(Family::Formality).then(|| formality_features(example));

    let values = spec
        .features()
        .iter()
        .map(|f| match &f.kind {
            FeatureKind::Emoticon { measure } => {
                let e = emoticons.expect("computed above");
                EmoticonMeasure::ALL
                    .iter()
                    .zip(e)
                    .find(|(m, _)| *m == measure)
                    .map(|(_, v)| v)
                    .expect("every measure listed")
            }
            FeatureKind::Formality { pattern } => {
                let g = formality.expect("computed above");
                FormalityPattern::ALL
                    .iter()
                    .zip(g)
                    .find(|(p, _)| *p == pattern)
                    .map(|(_, v)| v)
                    .expect("every pattern listed")
            }
            FeatureKind::Unigram(u) => {
                rate(example.word_count(&u.surface, u.case_sensitive), example.word_total())
            }
        })
        .collect();
    FeatureVector {
        example_id: example.example_id.clone(),
        values,
    }
}

pub fn extract(
    example: &Example,
    spec: &FeatureSpec,
    inventory: &EmoticonInventory,
) -> FeatureVector {
    extract_tokens(&ExampleTokens::new(example, inventory), spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tokens(texts: &[&str]) -> ExampleTokens {
        ExampleTokens::from_texts("t", texts.iter().copied(), &EmoticonInventory::default())
    }

    fn close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn emoticon_rates() {
        close(
            &emoticon_features(&tokens(&["yay :)", "ugh :(", "plain"])),
            &[1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0],
        );
        close(&emoticon_features(&tokens(&["none", "here"])), &[0.0, 0.0, 0.0]);
        close(&emoticon_features(&tokens(&[":)", ":)"])), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn formality_on_formal_sentence() {
        close(&formality_features(&tokens(&["I am sick."])), &[1.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn formality_single_rules() {
        assert_eq!(formality_features(&tokens(&["soooo sick!!"]))[4], 1.0);
        assert_eq!(formality_features(&tokens(&["so sick!?"]))[4], 0.0);
        assert_eq!(formality_features(&tokens(&["OK"]))[2], 1.0);
        assert_eq!(formality_features(&tokens(&["ok"]))[3], PRONOUN_UNDEFINED);
        assert_eq!(formality_features(&tokens(&["i'm sick", "I'm ok"]))[3], 0.5);
        assert_eq!(formality_features(&tokens(&["I think i am"]))[3], 0.0);
        assert_eq!(formality_features(&tokens(&["2 days", "...ok"]))[0], 0.0);
    }

    #[test]
    fn unigram_rates() {
        let t = tokens(&["bad bad day"]);
        close(
            &unigram_features(
                &t,
                &[
                    Unigram::new("bad", false),
                    Unigram::new("BAD", true),
                    Unigram::new("good", false),
                ],
            ),
            &[2.0 / 3.0, 0.0, 0.0],
        );
        let empty = tokens(&[":)", "!!"]);
        close(&unigram_features(&empty, &[Unigram::new("bad", false)]), &[0.0]);
    }

    fn sixteen() -> Vec<Unigram> {
        (0..16)
            .map(|i| Unigram::new(format!("w{i}"), i % 2 == 0))
            .collect()
    }

    #[test]
    fn standard_spec_has_twenty_four_features() {
        let spec = FeatureSpec::standard(&sixteen()).unwrap();
        assert_eq!(spec.len(), 24);
        let v = extract_tokens(&tokens(&["w1 w2 :)"]), &spec);
        assert_eq!(v.values.len(), 24);
    }

    #[test]
    fn permuted_spec_permutes_vector() {
        let spec = FeatureSpec::standard(&sixteen()).unwrap();
        let t = tokens(&["I feel w1 W1 w2 :) soooo", "Bad day. :(", "w0 w0 OK!!"]);
        let base = extract_tokens(&t, &spec);
        let order: Vec<usize> = (0..spec.len()).rev().collect();
        let permuted = extract_tokens(&t, &spec.subset(&order).unwrap());
        let expected: Vec<f64> = order.iter().map(|&i| base.values[i]).collect();
        assert_eq!(permuted.values, expected);
        assert_eq!(extract_tokens(&t, &spec), base);
    }

    #[test]
    fn spec_validation_and_json() {
        let dup = vec![
            FeatureDescriptor::formality(FormalityPattern::Repetition),
            FeatureDescriptor::formality(FormalityPattern::Repetition),
        ];
        assert!(matches!(FeatureSpec::new(dup), Err(FeatureError::DuplicateName(_))));
        assert!(matches!(FeatureSpec::new(vec![]), Err(FeatureError::Empty)));
        let spec = FeatureSpec::standard(&sixteen()).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: FeatureSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        assert!(json.contains("\"family\":\"unigram\""));
        assert!(json.contains("\"case_sensitive\":true"));
    }

    proptest! {
        #[test]
        fn rates_bounded_and_duplication_invariant(
            texts in prop::collection::vec("[a-cA-C !?.:()]{0,24}", 1..12),
        ) {
            let texts: Vec<String> = texts.into_iter().filter(|t| !t.trim().is_empty()).collect();
            prop_assume!(!texts.is_empty());
            let unigrams = vec![
                Unigram::new("a", false), Unigram::new("a", true),
                Unigram::new("ab", false), Unigram::new("AB", true),
            ];
            let spec = FeatureSpec::standard(&unigrams).unwrap();
            let inv = EmoticonInventory::default();
            let once = ExampleTokens::from_texts("p", texts.iter().map(String::as_str), &inv);
            let twice = ExampleTokens::from_texts(
                "p", texts.iter().chain(texts.iter()).map(String::as_str), &inv);
            let a = extract_tokens(&once, &spec);
            let b = extract_tokens(&twice, &spec);
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!(x.is_finite());
                prop_assert!((0.0..=1.0).contains(x));
                prop_assert!((x - y).abs() < 1e-12);
            }
            // Case-insensitive count bounds the case-sensitive one.
            prop_assert!(a.values[8] >= a.values[9]);
            let total: f64 = once.folded_counts().values().map(|&c| c as f64).sum::<f64>()
                / once.word_total().max(1) as f64;
            prop_assert!(total <= 1.0 + 1e-12);
        }
    }
}
