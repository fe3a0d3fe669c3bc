use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sevminer::corpus::{Corpus, EmoticonInventory};
use sevminer::lexicon::{ClassLabel, Concept, HuTable, Severity, SynonymMap};
use sevminer::matcher::{build_examples, match_concept, MatchError};

const FILLER: [&str; 8] = ["so", "tired", "today", "again", "my", "the", "worst", "week"];

/// Scans the lowercased text for the phrase with single spaces between its
/// words and a non-alphanumeric character (or the edge) on both sides.
fn scan_oracle(text: &str, phrase: &str) -> bool {
    let text = text.to_lowercase();
    let phrase = phrase.to_lowercase();
    text.match_indices(&phrase).any(|(at, _)| {
        let before = text[..at].chars().next_back();
        let after = text[at + phrase.len()..].chars().next();
        let clear = |c: Option<char>| c.map_or(true, |c| !c.is_alphanumeric() && c != '\'' && c != '-');
        clear(before) && clear(after)
    })
}

fn sentence(rng: &mut ChaCha8Rng, middle: &str) -> String {
    let mut words: Vec<String> = (0..rng.gen_range(0..5))
        .map(|_| FILLER.choose(rng).unwrap().to_string())
        .collect();
    let at = rng.gen_range(0..=words.len());
    words.insert(at, middle.to_string());
    words.join(" ")
}

#[test]
fn matched_and_control_messages() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let hits = ["sore throat", "Sore Throat", "SORE THROAT!", "sore throat.", "(sore throat)"];
    let misses = ["sore, throat", "sorethroat", "sore throaty", "sores throat", "sore-throat"];
    let mut texts = Vec::new();
    for i in 0..150 {
        texts.push(sentence(&mut rng, hits[i % hits.len()]));
    }
    for i in 0..40 {
        texts.push(sentence(&mut rng, misses[i % misses.len()]));
    }
    texts.shuffle(&mut rng);

    let corpus = Corpus::from_texts("t", &texts);
    let concept = Concept::new("sore throat", 0.9, "t").unwrap();
    let got: Vec<String> = match_concept(&concept, &corpus, &EmoticonInventory::default())
        .iter()
        .map(|m| m.text().to_string())
        .collect();
    let expected: Vec<String> = texts
        .iter()
        .filter(|t| scan_oracle(t, "sore throat"))
        .cloned()
        .collect();
    assert_eq!(got.len(), 150);
    assert_eq!(got, expected);
}

fn table(rows: &[(&str, f64)]) -> HuTable {
    let concepts = rows
        .iter()
        .map(|(name, hu)| Concept::new(name, *hu, "t").unwrap())
        .collect();
    HuTable::new(concepts, 0.0).unwrap()
}

#[test]
fn build_examples_counts_and_boundary() {
    let mut texts = Vec::new();
    texts.extend((0..100).map(|i| format!("my migraine is back {i}")));
    texts.extend((0..99).map(|i| format!("this flu again {i}")));
    texts.extend((0..120).map(|i| format!("stroke scare {i}")));
    // Counts towards both migraine and stroke.
    texts.push("migraine then a stroke".to_string());
    texts.extend((0..30).map(|i| format!("fluid intake {i}")));
    let corpus = Corpus::from_texts("t", &texts);

    let rows = [("migraine", 0.9), ("flu", 0.95), ("stroke", 0.2), ("cancer", 0.1)];
    let out = build_examples(
        &table(&rows),
        &SynonymMap::default(),
        &corpus,
        100,
        &EmoticonInventory::default(),
    )
    .unwrap();

    let ids: Vec<(&str, usize, Severity)> = out
        .examples
        .iter()
        .map(|e| (e.id(), e.messages.len(), e.label))
        .collect();
    assert_eq!(
        ids,
        [("migraine", 101, Severity::Mild), ("stroke", 121, Severity::Severe)]
    );
    let excluded: Vec<(&str, usize, ClassLabel)> = out
        .excluded
        .iter()
        .map(|e| (e.canonical.as_str(), e.count, e.label))
        .collect();
    assert_eq!(
        excluded,
        [("flu", 99, ClassLabel::Mild), ("cancer", 0, ClassLabel::Severe)]
    );
    assert!(out.culled.is_empty());
}

#[test]
fn vocabulary_synonyms_extend_matches() {
    let texts = ["feeling chesty and coughing", "bronchitis week", "nothing here"];
    let corpus = Corpus::from_texts("t", texts);
    let mut raw = BTreeMap::new();
    raw.insert("Bronchitis".to_string(), vec!["chesty".to_string()]);
    let out = build_examples(
        &table(&[("bronchitis", 0.8), ("asthma", 0.3)]),
        &SynonymMap::new(raw),
        &corpus,
        2,
        &EmoticonInventory::default(),
    );
    // asthma has no messages, bronchitis has two
    let out = out.unwrap();
    assert_eq!(out.examples.len(), 1);
    assert_eq!(out.examples[0].messages.len(), 2);
}

#[test]
fn nothing_reaches_minimum() {
    let corpus = Corpus::from_texts("t", ["flu", "flu"]);
    let err = build_examples(
        &table(&[("flu", 0.9), ("stroke", 0.1)]),
        &SynonymMap::default(),
        &corpus,
        3,
        &EmoticonInventory::default(),
    )
    .unwrap_err();
    assert_eq!(err, MatchError::NoExamples { min_messages: 3 });
}
