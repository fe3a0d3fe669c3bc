//! Seeded synthetic corpora with a controllable style signal.
//!
//! Half the concepts are designated mild and half severe. Every message
//! mentions exactly one concept (canonical name or synonym) once, so match
//! counts equal the generated counts; background messages mention none.
//! Each stylistic trait has a base probability that the signal strength
//! pushes up for one class and down for the other. With all strengths at
//! zero both classes draw from the same distribution.
//!
//! Trait directions: mild concepts get more positive emoticons, letter
//! repetition, all-caps words and positive lexicon words; severe concepts get
//! more negative emoticons, initial capitals, terminal punctuation, a
//! capitalized "I" and negative lexicon words.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::artifacts::{write_json, ArtifactError};
use crate::lexicon::Severity;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalStrength {
    pub emoticon: f64,
    pub formality: f64,
    pub sentiment: f64,
}

impl SignalStrength {
    pub fn uniform(s: f64) -> Self {
        Self {
            emoticon: s,
            formality: s,
            sentiment: s,
        }
    }
}

impl Default for SignalStrength {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub n_concepts: usize,
    /// Inclusive range of messages for regular concepts.
    pub messages_per_concept: [usize; 2],
    /// Concepts given a count from `undersized_messages` instead, picked at
    /// the utility extremes so the middle-band cull never reaches them.
    pub undersized: usize,
    pub undersized_messages: [usize; 2],
    /// Messages that mention no concept.
    pub background_messages: usize,
    pub signal: SignalStrength,
    /// Width of the utility gap around 0.5 that no concept falls into.
    pub middle_band: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_concepts: 60,
            messages_per_concept: [120, 300],
            undersized: 0,
            undersized_messages: [40, 99],
            background_messages: 1000,
            signal: SignalStrength::default(),
            middle_band: 0.2,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("params serialize to TOML")
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("n_concepts must be even and at least 4, got {0}")]
    ConceptCount(usize),
    #[error("message range {0:?} is empty")]
    BadRange([usize; 2]),
    #[error("undersized {undersized} exceeds n_concepts {n}")]
    TooManyUndersized { undersized: usize, n: usize },
    #[error("signal strengths must lie in [0, 1]")]
    BadSignal,
    #[error("middle band {0} must lie in [0, 0.9)")]
    BadBand(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConcept {
    pub canonical: String,
    pub synonyms: Vec<String>,
    pub designation: Severity,
    pub hu: f64,
    pub messages: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub params: SynthParams,
    pub concepts: Vec<SynthConcept>,
    /// Corpus lines in file order.
    pub lines: Vec<String>,
    /// Sentiment lexicon entries, `(surface, valence)`.
    pub lexicon: Vec<(String, i32)>,
}

/// Paths written by [`SynthCorpus::write`].
#[derive(Debug, Clone)]
pub struct SynthPaths {
    pub corpus: PathBuf,
    pub hu_table: PathBuf,
    pub vocabulary: PathBuf,
    pub lexicon: PathBuf,
    pub concepts: PathBuf,
}

const POSITIVE: [&str; 30] = [
    "good", "great", "happy", "love", "better", "fine", "glad", "fun", "nice", "awesome",
    "relief", "hope", "thanks", "smile", "best", "cool", "calm", "lucky", "excited", "yay",
    "enjoy", "proud", "laugh", "strong", "okay", "wonderful", "sweet", "super", "healed", "free",
];

const NEGATIVE: [&str; 30] = [
    "pain", "hate", "scared", "worst", "terrible", "awful", "sad", "afraid", "death", "fear",
    "hurt", "suffering", "tired", "bad", "horrible", "cry", "worried", "struggle", "dying",
    "lost", "grief", "alone", "weak", "miserable", "nightmare", "exhausted", "hopeless", "dread",
    "agony", "broken",
];

/// Lexicon entries the generator never writes.
const UNUSED: [(&str, i32); 10] = [
    ("abandon", -2),
    ("zealous", 2),
    ("admire", 3),
    ("betray", -3),
    ("cherish", 2),
    ("disgust", -3),
    ("envy", -1),
    ("jubilant", 3),
    ("mourn", -2),
    ("triumph", 4),
];

const FILLER: [&str; 40] = [
    "today", "went", "to", "the", "my", "doctor", "about", "again", "still", "just", "with",
    "after", "work", "home", "week", "because", "this", "that", "got", "have", "been", "so",
    "really", "all", "day", "night", "back", "out", "new", "some", "more", "than", "now", "time",
    "going", "see", "know", "think", "morning", "meds",
];

const SYLLABLES: [&str; 20] = [
    "ba", "cor", "da", "fen", "gal", "hir", "jo", "ka", "lum", "mer", "nov", "pra", "quin", "ros",
    "sel", "tar", "ul", "vex", "wan", "zo",
];

const SUFFIXES: [&str; 8] = ["itis", "osis", "emia", "algia", "opathy", "ectasia", "oma", "plexy"];

const POSITIVE_EMOTICONS: [&str; 4] = [":)", ":D", "<3", ";)"];
const NEGATIVE_EMOTICONS: [&str; 3] = [":(", ":/", ":'("];

fn valence(i: usize, positive: bool) -> i32 {
    let v = 1 + (i % 3) as i32;
    if positive {
        v
    } else {
        -v
    }
}

/// The shipped sentiment lexicon: 30 positive, 30 negative and 10 entries
/// that never occur in generated text.
pub fn lexicon_entries() -> Vec<(String, i32)> {
    let mut out: Vec<(String, i32)> = POSITIVE
        .iter()
        .enumerate()
        .map(|(i, s)| (s.to_string(), valence(i, true)))
        .chain(
            NEGATIVE
                .iter()
                .enumerate()
                .map(|(i, s)| (s.to_string(), valence(i, false))),
        )
        .chain(UNUSED.iter().map(|(s, v)| (s.to_string(), *v)))
        .collect();
    out.sort();
    out
}

/// Per-concept trait probabilities.
#[derive(Debug, Clone, Copy)]
struct Style {
    positive_emoticon: f64,
    negative_emoticon: f64,
    initial_capital: f64,
    terminal: f64,
    all_caps: f64,
    pronoun_upper: f64,
    repetition: f64,
    positive_word: f64,
}

const PRONOUN_USE: f64 = 0.5;

impl Style {
    /// `direction` is +1 for mild, -1 for severe and 0 for background text.
    fn sample(signal: &SignalStrength, direction: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut p = |base: f64, delta: f64, mild_up: f64, strength: f64| {
            let jitter = rng.gen_range(-0.04..0.04);
            (base + direction * mild_up * strength * delta + jitter).clamp(0.01, 0.99)
        };
        Self {
            positive_emoticon: p(0.2, 0.3, 1.0, signal.emoticon),
            negative_emoticon: p(0.1, 0.08, -1.0, signal.emoticon),
            initial_capital: p(0.5, 0.35, -1.0, signal.formality),
            terminal: p(0.5, 0.35, -1.0, signal.formality),
            all_caps: p(0.15, 0.12, 1.0, signal.formality),
            pronoun_upper: p(0.5, 0.4, -1.0, signal.formality),
            repetition: p(0.15, 0.12, 1.0, signal.formality),
            positive_word: p(0.5, 0.35, 1.0, signal.sentiment),
        }
    }
}

/// Index into a word list, favouring early entries.
fn skewed_index(len: usize, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    ((u * u) * len as f64) as usize % len
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn message(style: &Style, mention: Option<&str>, rng: &mut ChaCha8Rng) -> String {
    let fillers = rng.gen_range(3..=7);
    // (word, is_filler)
    let mut words: Vec<(String, bool)> = (0..fillers)
        .map(|_| (FILLER[rng.gen_range(0..FILLER.len())].to_string(), true))
        .collect();
    let insert = |words: &mut Vec<(String, bool)>, w: String, rng: &mut ChaCha8Rng| {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, (w, false));
    };
    for _ in 0..rng.gen_range(1..=2) {
        let w = if rng.gen_bool(style.positive_word) {
            POSITIVE[skewed_index(POSITIVE.len(), rng)]
        } else {
            NEGATIVE[skewed_index(NEGATIVE.len(), rng)]
        };
        insert(&mut words, w.to_string(), rng);
    }
    if rng.gen_bool(PRONOUN_USE) {
        let upper = rng.gen_bool(style.pronoun_upper);
        let w = match (rng.gen_bool(0.3), upper) {
            (true, true) => "I'm",
            (true, false) => "i'm",
            (false, true) => "I",
            (false, false) => "i",
        };
        insert(&mut words, w.to_string(), rng);
    }
    if let Some(m) = mention {
        insert(&mut words, m.to_string(), rng);
    }
    let filler_positions: Vec<usize> = (0..words.len()).filter(|&i| words[i].1).collect();
    if rng.gen_bool(style.all_caps) {
        let &i = filler_positions.choose(rng).expect("at least three fillers");
        if words[i].0.len() >= 2 {
            words[i].0 = words[i].0.to_uppercase();
        }
    }
    if rng.gen_bool(style.repetition) {
        let &i = filler_positions.choose(rng).expect("at least three fillers");
        let last = words[i].0.chars().last().expect("non-empty");
        words[i].0.push(last);
        words[i].0.push(last);
    }
    if rng.gen_bool(style.initial_capital) {
        words[0].0 = capitalize(&words[0].0);
    }
    if rng.gen_bool(style.terminal) {
        let p = [".", ".", "!", "?"][rng.gen_range(0..4)];
        words.last_mut().expect("non-empty").0.push_str(p);
    }
    // Emoticons go before the last word so they never hide the ending.
    let mut emoticons = Vec::new();
    if rng.gen_bool(style.positive_emoticon) {
        emoticons.push(POSITIVE_EMOTICONS[rng.gen_range(0..POSITIVE_EMOTICONS.len())]);
    }
    if rng.gen_bool(style.negative_emoticon) {
        emoticons.push(NEGATIVE_EMOTICONS[rng.gen_range(0..NEGATIVE_EMOTICONS.len())]);
    }
    for e in emoticons {
        let at = rng.gen_range(1..words.len());
        words.insert(at, (e.to_string(), false));
    }
    words
        .into_iter()
        .map(|(w, _)| w)
        .collect::<Vec<_>>()
        .join(" ")
}

fn check(params: &SynthParams) -> Result<(), SynthError> {
    if params.n_concepts < 4 || params.n_concepts % 2 != 0 {
        return Err(SynthError::ConceptCount(params.n_concepts));
    }
    for range in [params.messages_per_concept, params.undersized_messages] {
        if range[0] > range[1] {
            return Err(SynthError::BadRange(range));
        }
    }
    if params.undersized > params.n_concepts {
        return Err(SynthError::TooManyUndersized {
            undersized: params.undersized,
            n: params.n_concepts,
        });
    }
    let s = params.signal;
    if [s.emoticon, s.formality, s.sentiment]
        .iter()
        .any(|v| !(0.0..=1.0).contains(v))
    {
        return Err(SynthError::BadSignal);
    }
    if !(0.0..0.9).contains(&params.middle_band) {
        return Err(SynthError::BadBand(params.middle_band));
    }
    Ok(())
}

fn names(n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let reserved: HashSet<&str> = POSITIVE
        .iter()
        .chain(&NEGATIVE)
        .chain(&FILLER)
        .copied()
        .chain(UNUSED.iter().map(|(s, _)| *s))
        .collect();
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.gen_range(2..=3);
        let mut name: String = (0..syllables)
            .map(|_| SYLLABLES[rng.gen_range(0..SYLLABLES.len())])
            .collect();
        name.push_str(SUFFIXES[rng.gen_range(0..SUFFIXES.len())]);
        if !reserved.contains(name.as_str()) && seen.insert(name.clone()) {
            out.push(name);
        }
    }
    out
}

/// Builds a corpus, utility table, vocabulary and lexicon from `params`.
/// The same parameters always give the same output.
pub fn generate_synthetic_corpus(params: &SynthParams) -> Result<SynthCorpus, SynthError> {
    check(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(params.seed, "synth", 0));
    let n = params.n_concepts;
    let half_gap = params.middle_band / 2.0;

    // Two names per concept: canonical and a possible synonym.
    let pool = names(2 * n, &mut rng);
    let mut concepts: Vec<SynthConcept> = (0..n)
        .map(|i| {
            let designation = if i % 2 == 0 {
                Severity::Mild
            } else {
                Severity::Severe
            };
            let hu = match designation {
                Severity::Mild => rng.gen_range(0.5 + half_gap..=0.98),
                Severity::Severe => rng.gen_range(0.02..=0.5 - half_gap),
            };
            let synonyms = if rng.gen_bool(0.5) {
                vec![pool[n + i].clone()]
            } else {
                Vec::new()
            };
            SynthConcept {
                canonical: pool[i].clone(),
                synonyms,
                designation,
                // Three decimals keep the table readable; the stored value
                // is exactly what the table file says.
                hu: (hu * 1000.0).round() / 1000.0,
                messages: 0,
            }
        })
        .collect();

    let mut undersized = HashSet::new();
    let mut mild: Vec<usize> = (0..n).filter(|&i| i % 2 == 0).collect();
    let mut severe: Vec<usize> = (0..n).filter(|&i| i % 2 == 1).collect();
    mild.sort_by(|&a, &b| concepts[b].hu.total_cmp(&concepts[a].hu));
    severe.sort_by(|&a, &b| concepts[a].hu.total_cmp(&concepts[b].hu));
    for k in 0..params.undersized {
        let list = if k % 2 == 0 { &mild } else { &severe };
        undersized.insert(list[k / 2]);
    }

    let mut lines = Vec::new();
    for (i, c) in concepts.iter_mut().enumerate() {
        let range = if undersized.contains(&i) {
            params.undersized_messages
        } else {
            params.messages_per_concept
        };
        c.messages = rng.gen_range(range[0]..=range[1]);
        let direction = match c.designation {
            Severity::Mild => 1.0,
            Severity::Severe => -1.0,
        };
        let style = Style::sample(&params.signal, direction, &mut rng);
        for _ in 0..c.messages {
            let surface = if !c.synonyms.is_empty() && rng.gen_bool(0.3) {
                &c.synonyms[0]
            } else {
                &c.canonical
            };
            let mention = if rng.gen_bool(0.2) {
                capitalize(surface)
            } else {
                surface.clone()
            };
            lines.push(message(&style, Some(&mention), &mut rng));
        }
    }
    let background = Style::sample(&params.signal, 0.0, &mut rng);
    for _ in 0..params.background_messages {
        lines.push(message(&background, None, &mut rng));
    }
    lines.shuffle(&mut rng);

    Ok(SynthCorpus {
        params: params.clone(),
        concepts,
        lines,
        lexicon: lexicon_entries(),
    })
}

impl SynthCorpus {
    /// Writes `corpus.txt`, `hu.csv`, `vocab.json`, `lexicon.tsv` and
    /// `concepts.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<SynthPaths, ArtifactError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ArtifactError::Io { path, source }
        };
        let csv_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ArtifactError::Csv { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let paths = SynthPaths {
            corpus: dir.join("corpus.txt"),
            hu_table: dir.join("hu.csv"),
            vocabulary: dir.join("vocab.json"),
            lexicon: dir.join("lexicon.tsv"),
            concepts: dir.join("concepts.csv"),
        };

        let mut out = BufWriter::new(fs::File::create(&paths.corpus).map_err(io(&paths.corpus))?);
        for line in &self.lines {
            writeln!(out, "{line}").map_err(io(&paths.corpus))?;
        }
        out.flush().map_err(io(&paths.corpus))?;

        let mut w = csv::Writer::from_path(&paths.hu_table).map_err(csv_err(&paths.hu_table))?;
        w.write_record(["canonical", "hu", "source"])
            .map_err(csv_err(&paths.hu_table))?;
        for c in &self.concepts {
            w.write_record([c.canonical.as_str(), &c.hu.to_string(), "synthetic"])
                .map_err(csv_err(&paths.hu_table))?;
        }
        w.flush().map_err(io(&paths.hu_table))?;

        let vocab: BTreeMap<&str, &[String]> = self
            .concepts
            .iter()
            .filter(|c| !c.synonyms.is_empty())
            .map(|c| (c.canonical.as_str(), c.synonyms.as_slice()))
            .collect();
        write_json(&paths.vocabulary, &vocab)?;

        let lexicon: String = self
            .lexicon
            .iter()
            .map(|(s, v)| format!("{s}\t{v}\n"))
            .collect();
        fs::write(&paths.lexicon, lexicon).map_err(io(&paths.lexicon))?;

        let mut w = csv::Writer::from_path(&paths.concepts).map_err(csv_err(&paths.concepts))?;
        w.write_record(["canonical", "designation", "hu", "messages", "synonyms"])
            .map_err(csv_err(&paths.concepts))?;
        for c in &self.concepts {
            w.write_record([
                c.canonical.clone(),
                c.designation.to_string(),
                c.hu.to_string(),
                c.messages.to_string(),
                c.synonyms.join(";"),
            ])
            .map_err(csv_err(&paths.concepts))?;
        }
        w.flush().map_err(io(&paths.concepts))?;
        Ok(paths)
    }
}
