//! Health-utility tables, synonym vocabularies and mild/severe labeling.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("maximum acceptable risk {0} is outside [0, 1]")]
    RiskOutOfRange(f64),
    #[error("margin fraction {0} is outside [0, 0.5)")]
    BadMargin(f64),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: expected header `canonical,hu,source`")]
    BadHeader { path: PathBuf },
    #[error("duplicate concept {0:?} (names compare case-insensitively)")]
    DuplicateConcept(String),
    #[error("malformed vocabulary {path}: {source}")]
    Vocabulary {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("concept {canonical:?}: {reason}")]
    InvalidConcept { canonical: String, reason: String },
}

/// Health utility from the maximum death risk a patient would accept for a
/// cure in the standard gamble: `u = 1 - m`.
pub fn hu_from_max_risk(max_risk: f64) -> Result<f64, LexiconError> {
    if !(0.0..=1.0).contains(&max_risk) {
        return Err(LexiconError::RiskOutOfRange(max_risk));
    }
    Ok(1.0 - max_risk)
}

pub(crate) fn fold_case(s: &str) -> String {
    s.to_lowercase()
}

fn normalize_term(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// A disease term with its synonym set and literature health utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub canonical: String,
    /// Always contains `canonical`; no two entries are equal ignoring case.
    synonyms: Vec<String>,
    pub hu: f64,
    pub source: String,
}

impl Concept {
    pub fn new(canonical: &str, hu: f64, source: &str) -> Result<Self, LexiconError> {
        let canonical = normalize_term(canonical);
        let invalid = |reason: &str| LexiconError::InvalidConcept {
            canonical: canonical.clone(),
            reason: reason.to_string(),
        };
        if canonical.is_empty() {
            return Err(invalid("empty name"));
        }
        if !(0.0..=1.0).contains(&hu) {
            return Err(invalid(&format!("health utility {hu} outside [0, 1]")));
        }
        Ok(Self {
            synonyms: vec![canonical.clone()],
            canonical,
            hu,
            source: source.trim().to_string(),
        })
    }

    pub fn synonyms(&self) -> &[String] {
        &self.synonyms
    }

    /// Adds a synonym unless it is blank or already present ignoring case.
    /// Returns whether the set grew.
    pub fn add_synonym(&mut self, synonym: &str) -> bool {
        let synonym = normalize_term(synonym);
        if synonym.is_empty() {
            return false;
        }
        let folded = fold_case(&synonym);
        if self.synonyms.iter().any(|s| fold_case(s) == folded) {
            return false;
        }
        self.synonyms.push(synonym);
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Mild,
    Severe,
    Culled,
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClassLabel::Mild => "mild",
            ClassLabel::Severe => "severe",
            ClassLabel::Culled => "culled",
        })
    }
}

impl ClassLabel {
    /// The training class, or `None` for culled concepts.
    pub fn severity(self) -> Option<Severity> {
        match self {
            ClassLabel::Mild => Some(Severity::Mild),
            ClassLabel::Severe => Some(Severity::Severe),
            ClassLabel::Culled => None,
        }
    }
}

/// The two classes a classifier predicts. Encoded as 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Mild = 0,
    Severe = 1,
}

impl Severity {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Severity::Mild),
            1 => Some(Severity::Severe),
            _ => None,
        }
    }
}

impl std::fmt::Display for Severity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Severity::Mild => "mild",
            Severity::Severe => "severe",
        })
    }
}

impl std::str::FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mild" | "0" => Ok(Severity::Mild),
            "severe" | "1" => Ok(Severity::Severe),
            other => Err(format!("unknown class {other:?}")),
        }
    }
}

pub const DEFAULT_MARGIN_FRACTION: f64 = 0.05;

pub fn check_margin(margin_fraction: f64) -> Result<(), LexiconError> {
    if (0.0..0.5).contains(&margin_fraction) {
        Ok(())
    } else {
        Err(LexiconError::BadMargin(margin_fraction))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HuTable {
    concepts: Vec<Concept>,
    pub margin_fraction: f64,
}

impl HuTable {
    pub fn new(concepts: Vec<Concept>, margin_fraction: f64) -> Result<Self, LexiconError> {
        check_margin(margin_fraction)?;
        for (i, c) in concepts.iter().enumerate() {
            let folded = fold_case(&c.canonical);
            if concepts[..i].iter().any(|p| fold_case(&p.canonical) == folded) {
                return Err(LexiconError::DuplicateConcept(c.canonical.clone()));
            }
        }
        Ok(Self {
            concepts,
            margin_fraction,
        })
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }
}

/// A table row that failed validation and was skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct RowIssue {
    /// 1-based line number in the file, counting the header.
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Deserialize)]
struct HuRow {
    canonical: String,
    hu: String,
    source: String,
}

/// Loads a `canonical,hu,source` CSV. Rows with an unparsable or
/// out-of-range utility are dropped and reported; duplicate names are fatal.
pub fn load_hu_table(
    path: &Path,
    margin_fraction: f64,
) -> Result<(HuTable, Vec<RowIssue>), LexiconError> {
    check_margin(margin_fraction)?;
    let file = File::open(path).map_err(|source| LexiconError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let csv_err = |source| LexiconError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(csv_err)?;
    if headers.iter().collect::<Vec<_>>() != ["canonical", "hu", "source"] {
        return Err(LexiconError::BadHeader {
            path: path.to_path_buf(),
        });
    }

    let mut concepts = Vec::new();
    let mut issues = Vec::new();
    for record in reader.deserialize::<HuRow>() {
        let row = record.map_err(csv_err)?;
        let line = concepts.len() as u64 + issues.len() as u64 + 2;
        let concept = row
            .hu
            .parse::<f64>()
            .map_err(|e| format!("health utility {:?}: {e}", row.hu))
            .and_then(|hu| Concept::new(&row.canonical, hu, &row.source).map_err(|e| e.to_string()));
        match concept {
            Ok(c) => concepts.push(c),
            Err(message) => {
                log::warn!("{}:{line}: row dropped: {message}", path.display());
                issues.push(RowIssue { line, message });
            }
        }
    }
    Ok((HuTable::new(concepts, margin_fraction)?, issues))
}

/// Canonical term to layperson synonyms and word forms. Lookups ignore case.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynonymMap {
    entries: HashMap<String, Vec<String>>,
}

impl SynonymMap {
    pub fn new(raw: BTreeMap<String, Vec<String>>) -> Self {
        let mut entries: HashMap<String, Vec<String>> = HashMap::new();
        for (key, values) in raw {
            entries
                .entry(fold_case(&normalize_term(&key)))
                .or_default()
                .extend(values);
        }
        Self { entries }
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let file = File::open(path).map_err(|source| LexiconError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let raw: BTreeMap<String, Vec<String>> =
            serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| {
                LexiconError::Vocabulary {
                    path: path.to_path_buf(),
                    source,
                }
            })?;
        Ok(Self::new(raw))
    }

    pub fn get(&self, canonical: &str) -> Option<&[String]> {
        self.entries
            .get(&fold_case(&normalize_term(canonical)))
            .map(Vec::as_slice)
    }
}

/// Adds the vocabulary's synonyms for `concept`. Unknown concepts come back
/// unchanged.
pub fn expand_synonyms(concept: &Concept, vocabulary: &SynonymMap) -> Concept {
    let mut expanded = concept.clone();
    if let Some(extra) = vocabulary.get(&concept.canonical) {
        for s in extra {
            expanded.add_synonym(s);
        }
    }
    expanded
}

/// Splits the table around its median health utility.
///
/// The median is the lower middle value for even counts. Concepts within
/// `margin_fraction * (max - min)` of the median, boundaries included, are
/// culled; lower utilities are severe and higher ones mild. A zero margin
/// culls nothing and puts the median itself in the severe half.
pub fn assign_labels(table: &HuTable) -> Vec<(String, ClassLabel)> {
    let concepts = table.concepts();
    if concepts.is_empty() {
        return Vec::new();
    }
    let mut hus: Vec<f64> = concepts.iter().map(|c| c.hu).collect();
    hus.sort_by(f64::total_cmp);
    let median = hus[(hus.len() - 1) / 2];
    let half_band = table.margin_fraction * (hus[hus.len() - 1] - hus[0]);

    concepts
        .iter()
        .map(|c| {
            let label = if table.margin_fraction == 0.0 {
                if c.hu <= median {
                    ClassLabel::Severe
                } else {
                    ClassLabel::Mild
                }
            } else if c.hu < median - half_band {
                ClassLabel::Severe
            } else if c.hu > median + half_band {
                ClassLabel::Mild
            } else {
                ClassLabel::Culled
            };
            (c.canonical.clone(), label)
        })
        .collect()
}
