//! Feature screening: lexicon frequency screen, class-separation refinement
//! and greedy backward elimination against a validation set.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{ExampleTokens, FeatureSpec, Unigram};
use crate::lexicon::Severity;
use crate::ml::{evaluate, LabeledVector, MlError, Model};

/// Guard added to the pooled standard deviation in the separation score.
pub const SEPARATION_EPSILON: f64 = 1e-9;

/// Slack for comparing accuracies, which are ratios of small integers.
const ACCURACY_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ScreenError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error("lexicon lists {0:?} twice")]
    DuplicateSurface(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no examples to screen")]
    NoExamples,
    #[error("no {0} examples in the training set")]
    MissingClass(Severity),
    #[error("asked for {k} unigrams but {candidates} candidates give only {available} variants")]
    TooFewCandidates {
        k: usize,
        candidates: usize,
        available: usize,
    },
}

/// A sentiment word list. Valences are kept for provenance only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentimentLexicon {
    entries: Vec<(String, i32)>,
}

impl SentimentLexicon {
    pub fn new(entries: Vec<(String, i32)>) -> Result<Self, ScreenError> {
        let mut seen = HashSet::new();
        let entries: Vec<(String, i32)> = entries
            .into_iter()
            .map(|(s, v)| (s.trim().to_lowercase(), v))
            .collect();
        for (s, _) in &entries {
            if !seen.insert(s.as_str()) {
                return Err(ScreenError::DuplicateSurface(s.clone()));
            }
        }
        Ok(Self { entries })
    }

    /// Reads `surface<TAB>valence` lines. Blank lines are skipped.
    pub fn load(path: &Path) -> Result<Self, ScreenError> {
        let io = |source| ScreenError::Io {
            path: path.display().to_string(),
            source,
        };
        let reader = BufReader::new(File::open(path).map_err(io)?);
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| ScreenError::BadLine {
                line: i + 1,
                message,
            };
            let (surface, valence) = line
                .rsplit_once('\t')
                .ok_or_else(|| bad("expected surface<TAB>valence".into()))?;
            let valence = valence
                .trim()
                .parse::<i32>()
                .map_err(|e| bad(format!("valence {valence:?}: {e}")))?;
            if surface.trim().is_empty() {
                return Err(bad("empty surface".into()));
            }
            entries.push((surface.to_string(), valence));
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[(String, i32)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The `k` lexicon surfaces occurring most often as (lowercased) word tokens
/// across all examples, with their counts. Ties go to the lexicographically
/// smaller surface. Surfaces that never occur are not returned, so fewer
/// than `k` may come back.
pub fn screen_by_frequency(
    lexicon: &SentimentLexicon,
    examples: &[ExampleTokens],
    k: usize,
) -> Result<Vec<(String, usize)>, ScreenError> {
    if k == 0 {
        return Err(ScreenError::ZeroK);
    }
    if examples.is_empty() {
        return Err(ScreenError::NoExamples);
    }
    let mut totals: HashMap<&str, usize> = HashMap::new();
    for ex in examples {
        for (word, count) in ex.folded_counts() {
            *totals.entry(word.as_str()).or_insert(0) += count;
        }
    }
    let mut ranked: Vec<(String, usize)> = lexicon
        .entries()
        .iter()
        .map(|(s, _)| (s.clone(), totals.get(s.as_str()).copied().unwrap_or(0)))
        .filter(|(_, c)| *c > 0)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if ranked.len() < k {
        log::warn!(
            "only {} lexicon entries occur in the corpus; wanted {k}",
            ranked.len()
        );
    }
    ranked.truncate(k);
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredUnigram {
    pub unigram: Unigram,
    pub score: f64,
    pub mean_severe: f64,
    pub mean_mild: f64,
}

fn mean_and_ss(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (mean, values.iter().map(|v| (v - mean).powi(2)).sum())
}

/// `|mean_severe - mean_mild| / (pooled_sd + SEPARATION_EPSILON)`.
pub fn separation_score(severe: &[f64], mild: &[f64]) -> f64 {
    let (ms, ss_s) = mean_and_ss(severe);
    let (mm, ss_m) = mean_and_ss(mild);
    let dof = severe.len() + mild.len();
    let pooled = if dof > 2 {
        ((ss_s + ss_m) / (dof - 2) as f64).sqrt()
    } else {
        0.0
    };
    (ms - mm).abs() / (pooled + SEPARATION_EPSILON)
}

/// Scores the case-insensitive and case-sensitive variant of every candidate
/// on the training examples and keeps the `k` best separated. Ties go to the
/// smaller surface, then to the case-insensitive variant.
pub fn refine_by_separation(
    candidates: &[String],
    train: &[(&ExampleTokens, Severity)],
    k: usize,
) -> Result<Vec<ScoredUnigram>, ScreenError> {
    if k == 0 {
        return Err(ScreenError::ZeroK);
    }
    let available = 2 * candidates.len();
    if k > available {
        return Err(ScreenError::TooFewCandidates {
            k,
            candidates: candidates.len(),
            available,
        });
    }
    for class in [Severity::Mild, Severity::Severe] {
        if !train.iter().any(|(_, l)| *l == class) {
            return Err(ScreenError::MissingClass(class));
        }
    }
    let mut scored: Vec<ScoredUnigram> = candidates
        .iter()
        .flat_map(|s| [Unigram::new(s.clone(), false), Unigram::new(s.clone(), true)])
        .map(|unigram| {
            let mut severe = Vec::new();
            let mut mild = Vec::new();
            for (ex, label) in train {
                let total = ex.word_total();
                let v = if total == 0 {
                    0.0
                } else {
                    ex.word_count(&unigram.surface, unigram.case_sensitive) as f64 / total as f64
                };
                match label {
                    Severity::Severe => severe.push(v),
                    Severity::Mild => mild.push(v),
                }
            }
            ScoredUnigram {
                score: separation_score(&severe, &mild),
                mean_severe: severe.iter().sum::<f64>() / severe.len() as f64,
                mean_mild: mild.iter().sum::<f64>() / mild.len() as f64,
                unigram,
            }
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.unigram.surface.cmp(&b.unigram.surface))
            .then_with(|| a.unigram.case_sensitive.cmp(&b.unigram.case_sensitive))
    });
    scored.truncate(k);
    Ok(scored)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub step: usize,
    pub removed: String,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Every remaining removal would cost more than the tolerance.
    AccuracyDrop,
    SingleFeature,
    TrainerFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub tolerance: f64,
    pub initial_features: Vec<String>,
    pub steps: Vec<SelectionStep>,
    pub stop: StopReason,
    pub kept: Vec<String>,
    pub final_accuracy: f64,
}

#[derive(Debug, Error)]
#[error("backward selection failed at step {step}: {source}")]
pub struct SelectError {
    pub step: usize,
    #[source]
    pub source: MlError,
    pub partial: SelectionTrace,
}

fn subset_accuracy<F>(
    columns: &[usize],
    train: &[LabeledVector],
    validation: &[LabeledVector],
    trainer: &F,
) -> Result<f64, MlError>
where
    F: Fn(&[LabeledVector]) -> Result<Model, MlError> + Sync,
{
    let train: Vec<LabeledVector> = train.iter().map(|r| r.project(columns)).collect();
    let validation: Vec<LabeledVector> = validation.iter().map(|r| r.project(columns)).collect();
    let model = trainer(&train)?;
    Ok(evaluate(&model, &validation)?.accuracy)
}

/// Greedy backward elimination.
///
/// Each step retrains with every remaining feature left out in turn and drops
/// the one whose removal gives the best validation accuracy (the latest in
/// spec order on ties), as long as that accuracy is at least the current one
/// minus `tolerance`. Candidate retrains run in parallel; the decision only
/// looks at the complete, ordered result list.
pub fn backward_select<F>(
    spec: &FeatureSpec,
    train: &[LabeledVector],
    validation: &[LabeledVector],
    trainer: F,
    tolerance: f64,
) -> Result<(FeatureSpec, SelectionTrace), SelectError>
where
    F: Fn(&[LabeledVector]) -> Result<Model, MlError> + Sync,
{
    let names = spec.names();
    let mut trace = SelectionTrace {
        tolerance,
        initial_features: names.clone(),
        steps: Vec::new(),
        stop: StopReason::SingleFeature,
        kept: names.clone(),
        final_accuracy: 0.0,
    };
    let fail = |step: usize, source: MlError, mut partial: SelectionTrace| {
        partial.stop = StopReason::TrainerFailed;
        SelectError {
            step,
            source,
            partial,
        }
    };
    if !(tolerance >= 0.0) || spec.len() < 2 {
        let msg = if spec.len() < 2 {
            "backward selection needs at least two features".to_string()
        } else {
            format!("tolerance {tolerance} must be >= 0")
        };
        return Err(fail(0, MlError::BadParameter(msg), trace));
    }

    let mut current: Vec<usize> = (0..spec.len()).collect();
    let mut accuracy = match subset_accuracy(&current, train, validation, &trainer) {
        Ok(a) => a,
        Err(e) => return Err(fail(0, e, trace)),
    };
    trace.final_accuracy = accuracy;

    while current.len() > 1 {
        let step = trace.steps.len() + 1;
        let results: Vec<Result<f64, MlError>> = (0..current.len())
            .into_par_iter()
            .map(|drop| {
                let without: Vec<usize> = current
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != drop)
                    .map(|(_, &c)| c)
                    .collect();
                subset_accuracy(&without, train, validation, &trainer)
            })
            .collect();
        let mut best: Option<(usize, f64)> = None;
        for (pos, result) in results.into_iter().enumerate() {
            let acc = match result {
                Ok(a) => a,
                Err(e) => return Err(fail(step, e, trace)),
            };
            if best.is_none_or(|(_, b)| acc >= b) {
                best = Some((pos, acc));
            }
        }
        let (pos, best_acc) = best.expect("at least two candidates");
        if best_acc + ACCURACY_SLACK < accuracy - tolerance {
            trace.stop = StopReason::AccuracyDrop;
            break;
        }
        let removed = current.remove(pos);
        trace.steps.push(SelectionStep {
            step,
            removed: names[removed].clone(),
            accuracy_before: accuracy,
            accuracy_after: best_acc,
        });
        accuracy = best_acc;
        trace.final_accuracy = accuracy;
        trace.kept = current.iter().map(|&i| names[i].clone()).collect();
    }
    if current.len() == 1 {
        trace.stop = StopReason::SingleFeature;
    }
    let reduced = spec
        .subset(&current)
        .expect("subset of a valid spec is valid");
    Ok((reduced, trace))
}

/// Whether a logged step respects the tolerance, with the same slack the
/// elimination loop uses.
pub fn step_within_tolerance(step: &SelectionStep, tolerance: f64) -> bool {
    step.accuracy_after + ACCURACY_SLACK >= step.accuracy_before - tolerance
}
