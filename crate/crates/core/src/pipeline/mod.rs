//! End-to-end run: ingest, label, match, split, screen, extract, select,
//! train and evaluate, driven by one [`PipelineConfig`].

pub mod artifacts;
pub mod report;
pub mod synth;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{load_corpus, Emoticon, EmoticonInventory};
use crate::features::{extract_tokens, ExampleTokens, FeatureSpec};
use crate::lexicon::{check_margin, load_hu_table, Severity, SynonymMap, DEFAULT_MARGIN_FRACTION};
use crate::matcher::{build_examples, Example, Exclusion, DEFAULT_MIN_MESSAGES};
use crate::ml::{
    evaluate, stratified_assignment, EvalReport, LabeledVector, ModelConfig, ModelKind, Partition,
    Split, SplitRatios,
};
use crate::screening::{
    backward_select, refine_by_separation, screen_by_frequency, ScoredUnigram, SelectionTrace,
    SentimentLexicon,
};
use crate::seed;

use artifacts::{write_json, write_trace_csv, ArtifactError, FeatureTable, ModelArtifact};
pub use report::{emit_report, render_json, render_text, ReportFormat};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Seed of the stratified split for a given root seed.
pub fn split_seed(root: u64) -> u64 {
    seed::derive(root, "split", 0)
}

/// Seed handed to every trainer fit during backward selection.
pub fn selection_seed(root: u64) -> u64 {
    seed::derive(root, "select", 0)
}

/// Seed of the final model fit.
pub fn training_seed(root: u64) -> u64 {
    seed::derive(root, "train", 0)
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{field} {path} does not exist")]
    MissingPath { field: &'static str, path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub hu_table: PathBuf,
    pub vocabulary: PathBuf,
    pub lexicon: PathBuf,
    pub output_dir: PathBuf,
    pub margin_fraction: f64,
    pub min_messages: usize,
    pub screen_k: usize,
    pub refine_k: usize,
    pub tolerance: f64,
    pub ratios: SplitRatios,
    pub seed: u64,
    /// Replaces the built-in emoticon inventory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emoticons: Option<Vec<Emoticon>>,
    pub model: ModelConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus: PathBuf::new(),
            hu_table: PathBuf::new(),
            vocabulary: PathBuf::new(),
            lexicon: PathBuf::new(),
            output_dir: PathBuf::from("out"),
            margin_fraction: DEFAULT_MARGIN_FRACTION,
            min_messages: DEFAULT_MIN_MESSAGES,
            screen_k: 50,
            refine_k: 16,
            tolerance: 0.0,
            ratios: SplitRatios::default(),
            seed: 0,
            emoticons: None,
            model: ModelConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a TOML config. Relative paths in it are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut config.corpus,
            &mut config.hu_table,
            &mut config.vocabulary,
            &mut config.lexicon,
            &mut config.output_dir,
        ] {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn inventory(&self) -> Result<EmoticonInventory, ConfigError> {
        match &self.emoticons {
            None => Ok(EmoticonInventory::default()),
            Some(list) => EmoticonInventory::new(list.clone())
                .map_err(|e| ConfigError::Invalid(format!("emoticons: {e}"))),
        }
    }

    /// Checks value ranges and that every input file exists.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        for (name, value) in [
            ("min_messages", self.min_messages),
            ("screen_k", self.screen_k),
            ("refine_k", self.refine_k),
        ] {
            if value == 0 {
                return invalid(format!("{name} must be at least 1"));
            }
        }
        if check_margin(self.margin_fraction).is_err() {
            return invalid(format!(
                "margin_fraction {} is outside [0, 0.5)",
                self.margin_fraction
            ));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return invalid(format!("tolerance {} must be >= 0", self.tolerance));
        }
        if self.refine_k > 2 * self.screen_k {
            return invalid(format!(
                "refine_k {} exceeds the {} variants of screen_k candidates",
                self.refine_k,
                2 * self.screen_k
            ));
        }
        self.inventory()?;
        for (field, path) in [
            ("corpus", &self.corpus),
            ("hu_table", &self.hu_table),
            ("vocabulary", &self.vocabulary),
            ("lexicon", &self.lexicon),
        ] {
            if !path.is_file() {
                return Err(ConfigError::MissingPath {
                    field,
                    path: path.clone(),
                });
            }
        }
        if self.output_dir.as_os_str().is_empty() {
            return invalid("output_dir is empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Label,
    Match,
    Split,
    Screen,
    Refine,
    Extract,
    Select,
    Train,
    Evaluate,
    Write,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        f.write_str(s.as_str().expect("unit variant"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageCounts {
    pub messages: usize,
    pub dropped_lines: usize,
    pub over_length: usize,
    /// Concepts loaded from the table, after row issues were dropped.
    pub hu_rows: usize,
    pub row_issues: usize,
    pub culled: usize,
    pub excluded: usize,
    pub examples: usize,
    pub mild_examples: usize,
    pub severe_examples: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueRecord {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub example_id: String,
    pub label: Severity,
    pub hu: f64,
    pub message_count: usize,
    pub partition: Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenedUnigram {
    pub surface: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReports {
    pub train: EvalReport,
    pub validation: EvalReport,
    pub test: EvalReport,
}

impl PartitionReports {
    pub fn get(&self, p: Partition) -> &EvalReport {
        match p {
            Partition::Train => &self.train,
            Partition::Validation => &self.validation,
            Partition::Test => &self.test,
        }
    }
}

/// Everything a run found out, in a stable order. Fields filled by stages
/// that did not run stay empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub completed: Vec<Stage>,
    pub counts: StageCounts,
    pub row_issues: Vec<IssueRecord>,
    pub culled: Vec<String>,
    pub exclusions: Vec<Exclusion>,
    pub assignment: Vec<Assignment>,
    pub screened: Vec<ScreenedUnigram>,
    pub refined: Vec<ScoredUnigram>,
    pub initial_features: Vec<String>,
    pub selection: Option<SelectionTrace>,
    pub surviving_features: Vec<String>,
    pub model_kind: ModelKind,
    pub evaluation: Option<PartitionReports>,
}

impl RunReport {
    fn new(config: &PipelineConfig) -> Self {
        Self {
            version: VERSION.to_string(),
            seed: config.seed,
            config: config.clone(),
            completed: Vec::new(),
            counts: StageCounts::default(),
            row_issues: Vec::new(),
            culled: Vec::new(),
            exclusions: Vec::new(),
            assignment: Vec::new(),
            screened: Vec::new(),
            refined: Vec::new(),
            initial_features: Vec::new(),
            selection: None,
            surviving_features: Vec::new(),
            model_kind: config.model.kind,
            evaluation: None,
        }
    }
}

/// Whether a failure came from unreadable or malformed input files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Config,
    Data,
    Stage,
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: FailureKind,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
    pub partial: Box<RunReport>,
}

/// Outputs of a successful run besides the report.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub initial_spec: FeatureSpec,
    pub selected_spec: FeatureSpec,
    pub features: FeatureTable,
    pub model: ModelArtifact,
}

struct Runner {
    report: RunReport,
}

impl Runner {
    fn fail<E>(&self, stage: Stage, kind: FailureKind, e: E) -> PipelineError
    where
        E: Into<Box<dyn std::error::Error + Send + Sync>>,
    {
        PipelineError {
            stage,
            kind,
            source: e.into(),
            partial: Box::new(self.report.clone()),
        }
    }

    fn done(&mut self, stage: Stage) {
        log::info!("{stage} done");
        self.report.completed.push(stage);
    }
}

/// State after ingest through refinement.
pub struct Prepared {
    pub report: RunReport,
    pub examples: Vec<Example>,
    pub tokens: Vec<ExampleTokens>,
    pub assignment: Vec<Partition>,
    /// The feature spec handed to backward selection.
    pub spec: FeatureSpec,
}

/// Runs the stages up to and including refinement.
pub fn prepare(config: &PipelineConfig) -> Result<Prepared, PipelineError> {
    let mut run = Runner {
        report: RunReport::new(config),
    };
    use FailureKind::{Config, Data, Stage as Failed};

    let inventory = config
        .inventory()
        .map_err(|e| run.fail(Stage::Ingest, Config, e))?;
    config
        .validate()
        .map_err(|e| run.fail(Stage::Ingest, Config, e))?;

    let loaded = load_corpus(&config.corpus, None).map_err(|e| run.fail(Stage::Ingest, Data, e))?;
    run.report.counts.messages = loaded.corpus.len();
    run.report.counts.dropped_lines = loaded.dropped;
    run.report.counts.over_length = loaded.over_length;
    run.done(Stage::Ingest);

    let (table, issues) = load_hu_table(&config.hu_table, config.margin_fraction)
        .map_err(|e| run.fail(Stage::Label, Data, e))?;
    let vocabulary =
        SynonymMap::load(&config.vocabulary).map_err(|e| run.fail(Stage::Label, Data, e))?;
    run.report.counts.hu_rows = table.len();
    run.report.counts.row_issues = issues.len();
    run.report.row_issues = issues
        .into_iter()
        .map(|i| IssueRecord {
            line: i.line,
            message: i.message,
        })
        .collect();
    run.done(Stage::Label);

    let outcome = build_examples(
        &table,
        &vocabulary,
        &loaded.corpus,
        config.min_messages,
        &inventory,
    )
    .map_err(|e| run.fail(Stage::Match, Failed, e))?;
    let examples: Vec<Example> = outcome.examples;
    let counts = &mut run.report.counts;
    counts.culled = outcome.culled.len();
    counts.excluded = outcome.excluded.len();
    counts.examples = examples.len();
    counts.mild_examples = examples.iter().filter(|e| e.label == Severity::Mild).count();
    counts.severe_examples = examples.len() - counts.mild_examples;
    run.report.culled = outcome.culled;
    run.report.exclusions = outcome.excluded;
    run.done(Stage::Match);

    // The split only needs labels and utilities, so it is fixed before
    // screening and refinement can look at the training examples.
    let items: Vec<(Severity, f64, &str)> = examples
        .iter()
        .map(|e| (e.label, e.concept.hu, e.id()))
        .collect();
    let assignment = stratified_assignment(&items, &config.ratios, split_seed(config.seed))
        .map_err(|e| run.fail(Stage::Split, Failed, e))?;
    run.report.assignment = examples
        .iter()
        .zip(&assignment)
        .map(|(e, &partition)| Assignment {
            example_id: e.id().to_string(),
            label: e.label,
            hu: e.concept.hu,
            message_count: e.messages.len(),
            partition,
        })
        .collect();
    for p in &assignment {
        match p {
            Partition::Train => run.report.counts.train += 1,
            Partition::Validation => run.report.counts.validation += 1,
            Partition::Test => run.report.counts.test += 1,
        }
    }
    run.done(Stage::Split);

    let lexicon =
        SentimentLexicon::load(&config.lexicon).map_err(|e| run.fail(Stage::Screen, Data, e))?;
    let tokens: Vec<ExampleTokens> = {
        use rayon::prelude::*;
        examples
            .par_iter()
            .map(|e| ExampleTokens::new(e, &inventory))
            .collect()
    };
    let screened = screen_by_frequency(&lexicon, &tokens, config.screen_k)
        .map_err(|e| run.fail(Stage::Screen, Failed, e))?;
    run.report.screened = screened
        .iter()
        .map(|(surface, count)| ScreenedUnigram {
            surface: surface.clone(),
            count: *count,
        })
        .collect();
    run.done(Stage::Screen);

    let candidates: Vec<String> = screened.into_iter().map(|(s, _)| s).collect();
    let train_tokens: Vec<(&ExampleTokens, Severity)> = tokens
        .iter()
        .zip(&examples)
        .zip(&assignment)
        .filter(|(_, p)| **p == Partition::Train)
        .map(|((t, e), _)| (t, e.label))
        .collect();
    let refined = refine_by_separation(&candidates, &train_tokens, config.refine_k)
        .map_err(|e| run.fail(Stage::Refine, Failed, e))?;
    let unigrams: Vec<_> = refined.iter().map(|s| s.unigram.clone()).collect();
    run.report.refined = refined;
    let spec = FeatureSpec::standard(&unigrams).map_err(|e| run.fail(Stage::Refine, Failed, e))?;
    run.report.initial_features = spec.names();
    run.done(Stage::Refine);
    Ok(Prepared {
        report: run.report,
        examples,
        tokens,
        assignment,
        spec,
    })
}

/// Runs every stage in memory. Nothing is written to disk.
pub fn execute(config: &PipelineConfig) -> Result<(RunReport, RunArtifacts), PipelineError> {
    let Prepared {
        report,
        examples,
        tokens,
        assignment,
        spec,
    } = prepare(config)?;
    let mut run = Runner { report };
    let failed = FailureKind::Stage;

    let vectors: Vec<LabeledVector> = tokens
        .iter()
        .zip(&examples)
        .map(|(t, e)| LabeledVector {
            example_id: e.id().to_string(),
            label: e.label,
            hu: e.concept.hu,
            features: extract_tokens(t, &spec).values,
        })
        .collect();
    let features = FeatureTable {
        names: spec.names(),
        rows: vectors.clone(),
    };
    run.done(Stage::Extract);

    let split = Split::from_assignment(&vectors, &assignment);
    let model_config = &config.model;
    let select_seed = selection_seed(config.seed);
    let (selected, trace) = match backward_select(
        &spec,
        &split.train,
        &split.validation,
        |rows| model_config.train(rows, select_seed),
        config.tolerance,
    ) {
        Ok(r) => r,
        Err(e) => {
            run.report.selection = Some(e.partial.clone());
            return Err(run.fail(Stage::Select, failed, e));
        }
    };
    run.report.surviving_features = trace.kept.clone();
    run.report.selection = Some(trace);
    run.done(Stage::Select);

    let columns = features
        .columns(&selected.names())
        .expect("selected features come from the table");
    let project = |rows: &[LabeledVector]| -> Vec<LabeledVector> {
        rows.iter().map(|r| r.project(&columns)).collect()
    };
    let train = project(&split.train);
    let model = model_config
        .train(&train, training_seed(config.seed))
        .map_err(|e| run.fail(Stage::Train, failed, e))?;
    run.done(Stage::Train);

    let eval = |rows: &[LabeledVector]| evaluate(&model, &project(rows));
    let reports = (|| {
        Ok::<_, crate::ml::MlError>(PartitionReports {
            train: eval(&split.train)?,
            validation: eval(&split.validation)?,
            test: eval(&split.test)?,
        })
    })()
    .map_err(|e| run.fail(Stage::Evaluate, failed, e))?;
    run.report.evaluation = Some(reports);
    run.done(Stage::Evaluate);

    let artifacts = RunArtifacts {
        initial_spec: spec,
        selected_spec: selected.clone(),
        features,
        model: ModelArtifact {
            version: VERSION.to_string(),
            seed: config.seed,
            ratios: config.ratios,
            features: selected.names(),
            model,
        },
    };
    Ok((run.report, artifacts))
}

fn write_outputs(
    dir: &Path,
    report: &RunReport,
    artifacts: &RunArtifacts,
) -> Result<(), ArtifactError> {
    fs::create_dir_all(dir).map_err(|source| ArtifactError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let io = |path: PathBuf| {
        move |source| ArtifactError::Io {
            path: path.clone(),
            source,
        }
    };
    fs::write(dir.join("config.toml"), report.config.to_toml())
        .map_err(io(dir.join("config.toml")))?;
    write_json(&dir.join("spec.json"), &artifacts.initial_spec)?;
    write_json(&dir.join("selected_spec.json"), &artifacts.selected_spec)?;
    artifacts.features.write_csv(&dir.join("features.csv"))?;
    if let Some(trace) = &report.selection {
        write_trace_csv(&dir.join("trace.csv"), trace)?;
    }
    write_json(&dir.join("model.json"), &artifacts.model)?;
    emit_report(report, ReportFormat::Text, &dir.join("report.txt"))?;
    emit_report(report, ReportFormat::Json, &dir.join("report.json"))
}

/// Runs the pipeline and writes `report.json`, `report.txt`, `config.toml`,
/// `spec.json`, `selected_spec.json`, `features.csv`, `trace.csv` and
/// `model.json` into the configured output directory. On failure the partial
/// report is still written to `report.json` when possible.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    let dir = &config.output_dir;
    match execute(config) {
        Ok((mut report, artifacts)) => {
            report.completed.push(Stage::Write);
            if let Err(e) = write_outputs(dir, &report, &artifacts) {
                report.completed.pop();
                return Err(PipelineError {
                    stage: Stage::Write,
                    kind: FailureKind::Stage,
                    source: e.into(),
                    partial: Box::new(report),
                });
            }
            Ok(report)
        }
        Err(e) => {
            if !dir.as_os_str().is_empty() && fs::create_dir_all(dir).is_ok() {
                let _ = emit_report(&e.partial, ReportFormat::Json, &dir.join("report.json"));
            }
            Err(e)
        }
    }
}
