use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use sevminer::lexicon::ClassLabel;
use sevminer::ml::ModelKind;
use sevminer::pipeline::report::{emit_report, render_text, ReportFormat};
use sevminer::pipeline::synth::{generate_synthetic_corpus, SignalStrength, SynthParams};
use sevminer::pipeline::{execute, run_pipeline, FailureKind, PipelineConfig, RunReport, Stage};

fn params(undersized: usize, seed: u64) -> SynthParams {
    SynthParams {
        n_concepts: 30,
        messages_per_concept: [100, 140],
        undersized,
        background_messages: 200,
        signal: SignalStrength::uniform(1.0),
        seed,
        ..SynthParams::default()
    }
}

fn setup(dir: &Path, params: &SynthParams) -> (PipelineConfig, Vec<String>) {
    let synth = generate_synthetic_corpus(params).unwrap();
    let paths = synth.write(dir).unwrap();
    let undersized = synth
        .concepts
        .iter()
        .filter(|c| c.messages < 100)
        .map(|c| c.canonical.clone())
        .collect();
    let config = PipelineConfig {
        corpus: paths.corpus,
        hu_table: paths.hu_table,
        vocabulary: paths.vocabulary,
        lexicon: paths.lexicon,
        output_dir: dir.join("out"),
        seed: 4,
        ..PipelineConfig::default()
    };
    (config, undersized)
}

#[test]
fn same_config_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let (config, _) = setup(dir.path(), &params(0, 1));
    let (a, art_a) = execute(&config).unwrap();
    let (b, art_b) = execute(&config).unwrap();
    assert_eq!(a, b);
    assert_eq!(art_a.model, art_b.model);
    assert_eq!(a.completed.last(), Some(&Stage::Evaluate));
}

#[test]
fn undersized_concepts_are_exactly_the_exclusions() {
    let dir = tempfile::tempdir().unwrap();
    let (config, undersized) = setup(dir.path(), &params(5, 2));
    assert_eq!(undersized.len(), 5);
    let (report, _) = execute(&config).unwrap();
    let excluded: BTreeSet<&str> = report.exclusions.iter().map(|e| e.canonical.as_str()).collect();
    let expected: BTreeSet<&str> = undersized.iter().map(String::as_str).collect();
    assert_eq!(excluded, expected);
    assert!(report.exclusions.iter().all(|e| e.count < 100 && e.label != ClassLabel::Culled));
}

#[test]
fn counts_add_up() {
    let dir = tempfile::tempdir().unwrap();
    let (config, _) = setup(dir.path(), &params(3, 3));
    let (report, _) = execute(&config).unwrap();
    let c = &report.counts;
    assert_eq!(c.examples + c.excluded + c.culled, c.hu_rows);
    assert_eq!(c.mild_examples + c.severe_examples, c.examples);
    assert_eq!(c.train + c.validation + c.test, c.examples);
    assert_eq!(report.assignment.len(), c.examples);
    assert_eq!(report.culled.len(), c.culled);
    let eval = report.evaluation.as_ref().unwrap();
    assert_eq!(eval.test.size, c.test);
    assert_eq!(eval.test.confusion.iter().flatten().sum::<usize>(), c.test);
    assert_eq!(report.initial_features.len(), 24);
    let trace = report.selection.as_ref().unwrap();
    assert_eq!(
        report.surviving_features.len() + trace.steps.len(),
        report.initial_features.len()
    );
}

#[test]
fn report_round_trips_and_renders() {
    let dir = tempfile::tempdir().unwrap();
    let (config, _) = setup(dir.path(), &params(0, 4));
    let (report, _) = execute(&config).unwrap();

    let json_path = dir.path().join("r.json");
    emit_report(&report, ReportFormat::Json, &json_path).unwrap();
    let back: RunReport = serde_json::from_str(&fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(back, report);

    let text = render_text(&report);
    let features: Vec<&str> = text
        .lines()
        .filter_map(|l| l.strip_prefix("  feature "))
        .collect();
    assert_eq!(features, report.surviving_features);
    assert!(text.contains(&format!(
        "surviving features: {}",
        report.surviving_features.len()
    )));
    assert!(text.contains("test accuracy: "));
    assert!(text.contains("<- mild predicted severe"));
}

#[test]
fn run_pipeline_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (mut config, _) = setup(dir.path(), &params(0, 5));
    config.model.kind = ModelKind::Logreg;
    let report = run_pipeline(&config).unwrap();
    for name in [
        "config.toml",
        "spec.json",
        "selected_spec.json",
        "features.csv",
        "trace.csv",
        "model.json",
        "report.txt",
        "report.json",
    ] {
        assert!(config.output_dir.join(name).is_file(), "{name} missing");
    }
    let echoed = PipelineConfig::load(&config.output_dir.join("config.toml")).unwrap();
    assert_eq!(echoed, config);
    let features = fs::read_to_string(config.output_dir.join("features.csv")).unwrap();
    assert_eq!(features.lines().count(), report.counts.examples + 1);
}

#[test]
fn missing_corpus_is_a_config_failure() {
    let dir = tempfile::tempdir().unwrap();
    let (mut config, _) = setup(dir.path(), &params(0, 6));
    config.corpus = dir.path().join("absent.txt");
    let err = run_pipeline(&config).unwrap_err();
    assert_eq!(err.kind, FailureKind::Config);
    assert!(err.partial.completed.is_empty());
}

#[test]
fn malformed_table_is_a_data_failure() {
    let dir = tempfile::tempdir().unwrap();
    let (config, _) = setup(dir.path(), &params(0, 7));
    fs::write(&config.hu_table, "name;value\nflu;0.9\n").unwrap();
    let err = run_pipeline(&config).unwrap_err();
    assert_eq!(err.kind, FailureKind::Data);
    assert_eq!(err.partial.completed, [Stage::Ingest]);
    assert!(config.output_dir.join("report.json").is_file());
}
