use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sevminer::corpus::{load_corpus, tokenize, EmoticonInventory};
use sevminer::features::{extract, ExampleTokens, FeatureSpec};
use sevminer::lexicon::{assign_labels, load_hu_table, Severity, SynonymMap, DEFAULT_MARGIN_FRACTION};
use sevminer::matcher::{build_examples, DEFAULT_MIN_MESSAGES};
use sevminer::ml::{
    evaluate, stratified_assignment, stratified_split, ModelConfig, ModelKind, Partition,
    SplitRatios,
};
use sevminer::pipeline::artifacts::{
    read_examples_dir, read_json, write_examples_dir, write_json, write_trace_csv, FeatureTable,
    ModelArtifact,
};
use sevminer::pipeline::synth::{generate_synthetic_corpus, SignalStrength, SynthParams};
use sevminer::pipeline::{
    render_text, run_pipeline, selection_seed, split_seed, training_seed, FailureKind,
    PipelineConfig, VERSION,
};
use sevminer::screening::{backward_select, refine_by_separation, screen_by_frequency, SentimentLexicon};

const SEED_ENV: &str = "SEVMINER_SEED";

#[derive(Parser)]
#[command(name = "sevminer", version, about = "Mild/severe disease classification from message corpora")]
struct Cli {
    /// Log progress (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus utilities.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
    /// Print canonical, hu and class label for every row of a utility table.
    Labels {
        hu_table: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MARGIN_FRACTION)]
        margin: f64,
    },
    /// Match concepts against a corpus and write an examples directory.
    Match {
        hu_table: PathBuf,
        vocabulary: PathBuf,
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MIN_MESSAGES)]
        min_messages: usize,
        #[arg(long, default_value_t = DEFAULT_MARGIN_FRACTION)]
        margin: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Frequency screen and separation refinement; writes the 24-feature spec.
    Screen {
        examples: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long, default_value_t = 50)]
        top: usize,
        #[arg(long, default_value_t = 16)]
        refine: usize,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract a feature table for an examples directory.
    Features {
        examples: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Backward feature elimination on the validation partition.
    Select {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        tolerance: f64,
        #[arg(long, value_enum, default_value = "tree")]
        model: KindArg,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a classifier on the training partition.
    Train {
        #[arg(long)]
        features: PathBuf,
        /// Restrict to the features of this spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "tree")]
        model: KindArg,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a saved model on one partition.
    Eval {
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value = "test")]
        partition: Partition,
    },
    /// Run the whole pipeline from a TOML config.
    Run(RunArgs),
    /// Generate a synthetic corpus, utility table, vocabulary and lexicon.
    Synth(SynthArgs),
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Print message, dropped-line and token counts.
    Stats {
        path: PathBuf,
        #[arg(long)]
        limit: Option<usize>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum KindArg {
    Tree,
    Forest,
    Logreg,
    Svm,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Tree => ModelKind::Tree,
            KindArg::Forest => ModelKind::Forest,
            KindArg::Logreg => ModelKind::Logreg,
            KindArg::Svm => ModelKind::Svm,
        }
    }
}

#[derive(Args)]
struct SplitArgs {
    /// Root seed; SEVMINER_SEED is used when absent.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "0.5,0.25,0.25")]
    ratios: SplitRatios,
}

#[derive(Args)]
struct ParamArgs {
    /// Tree depth limits to try, comma-separated; `none` for unlimited.
    #[arg(long, value_delimiter = ',', default_value = "none")]
    max_depth: Vec<String>,
    /// Minimum node sizes to try, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    min_split: Vec<usize>,
    #[arg(long)]
    n_trees: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<KindArg>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    min_messages: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    top: Option<usize>,
    #[arg(long)]
    refine: Option<usize>,
    #[arg(long)]
    ratios: Option<SplitRatios>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    hu_table: Option<PathBuf>,
    #[arg(long)]
    vocabulary: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// TOML generation parameters; flags below override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    concepts: Option<usize>,
    /// Signal strength for every feature family, in [0, 1].
    #[arg(long)]
    signal: Option<f64>,
    #[arg(long)]
    undersized: Option<usize>,
    #[arg(long)]
    background: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

enum CliError {
    Config(String),
    Data(String),
    Stage(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Stage(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Stage(m) => m,
        }
    }
}

fn config<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn stage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Stage(e.to_string())
}

/// Flag, then environment, then `fallback`.
fn resolve_seed(flag: Option<u64>, fallback: u64) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|e| CliError::Config(format!("{SEED_ENV}={v:?}: {e}"))),
        Err(_) => Ok(fallback),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Corpus {
            command: CorpusCommand::Stats { path, limit },
        } => corpus_stats(&path, limit),
        Command::Labels { hu_table, margin } => labels(&hu_table, margin),
        Command::Match {
            hu_table,
            vocabulary,
            corpus,
            min_messages,
            margin,
            out,
        } => match_cmd(&hu_table, &vocabulary, &corpus, min_messages, margin, &out),
        Command::Screen {
            examples,
            lexicon,
            top,
            refine,
            split,
            out,
        } => screen(&examples, &lexicon, top, refine, &split, &out),
        Command::Features { examples, spec, out } => features(&examples, &spec, &out),
        Command::Select {
            features,
            spec,
            tolerance,
            model,
            split,
            trace,
            out,
        } => select(&features, &spec, tolerance, model.into(), &split, trace.as_deref(), &out),
        Command::Train {
            features,
            spec,
            model,
            split,
            params,
            out,
        } => train(&features, spec.as_deref(), model.into(), &split, &params, &out),
        Command::Eval {
            model_file,
            features,
            partition,
        } => eval(&model_file, &features, partition),
        Command::Run(args) => run(args),
        Command::Synth(args) => synth(args),
    }
}

fn corpus_stats(path: &Path, limit: Option<usize>) -> Result<(), CliError> {
    let loaded = load_corpus(path, limit).map_err(data)?;
    let inventory = EmoticonInventory::default();
    let tokens: usize = loaded
        .corpus
        .iter()
        .map(|m| tokenize(m.text(), &inventory).len())
        .sum();
    println!("messages: {}", loaded.corpus.len());
    println!("dropped: {}", loaded.dropped);
    println!("tokens: {tokens}");
    Ok(())
}

fn labels(path: &Path, margin: f64) -> Result<(), CliError> {
    let (table, issues) = load_hu_table(path, margin).map_err(data)?;
    for issue in &issues {
        eprintln!("line {}: {} (row skipped)", issue.line, issue.message);
    }
    let mut w = csv::Writer::from_writer(std::io::stdout());
    let write_err = |e: csv::Error| CliError::Stage(e.to_string());
    w.write_record(["canonical", "hu", "label"]).map_err(write_err)?;
    for (concept, (_, label)) in table.concepts().iter().zip(assign_labels(&table)) {
        w.write_record([concept.canonical.clone(), concept.hu.to_string(), label.to_string()])
            .map_err(write_err)?;
    }
    w.flush().map_err(stage)
}

fn match_cmd(
    hu_table: &Path,
    vocabulary: &Path,
    corpus: &Path,
    min_messages: usize,
    margin: f64,
    out: &Path,
) -> Result<(), CliError> {
    let (table, _) = load_hu_table(hu_table, margin).map_err(data)?;
    let vocab = SynonymMap::load(vocabulary).map_err(data)?;
    let loaded = load_corpus(corpus, None).map_err(data)?;
    let outcome = build_examples(
        &table,
        &vocab,
        &loaded.corpus,
        min_messages,
        &EmoticonInventory::default(),
    )
    .map_err(stage)?;
    write_examples_dir(out, &outcome.examples).map_err(stage)?;
    println!(
        "{} examples, {} excluded, {} culled",
        outcome.examples.len(),
        outcome.excluded.len(),
        outcome.culled.len()
    );
    for e in &outcome.excluded {
        println!("excluded {} ({} messages)", e.canonical, e.count);
    }
    Ok(())
}

fn screen(
    dir: &Path,
    lexicon: &Path,
    top: usize,
    refine: usize,
    split: &SplitArgs,
    out: &Path,
) -> Result<(), CliError> {
    let seed = resolve_seed(split.seed, 0)?;
    let examples = read_examples_dir(dir).map_err(data)?;
    let lexicon = SentimentLexicon::load(lexicon).map_err(data)?;
    let inventory = EmoticonInventory::default();
    let tokens: Vec<_> = examples
        .iter()
        .map(|e| ExampleTokens::new(e, &inventory))
        .collect();
    let items: Vec<(Severity, f64, &str)> = examples
        .iter()
        .map(|e| (e.label, e.concept.hu, e.id()))
        .collect();
    let assignment = stratified_assignment(&items, &split.ratios, split_seed(seed)).map_err(stage)?;
    let screened = screen_by_frequency(&lexicon, &tokens, top).map_err(stage)?;
    let candidates: Vec<String> = screened.iter().map(|(s, _)| s.clone()).collect();
    let train: Vec<_> = tokens
        .iter()
        .zip(&examples)
        .zip(&assignment)
        .filter(|(_, p)| **p == Partition::Train)
        .map(|((t, e), _)| (t, e.label))
        .collect();
    let refined = refine_by_separation(&candidates, &train, refine).map_err(stage)?;
    let unigrams: Vec<_> = refined.iter().map(|s| s.unigram.clone()).collect();
    let spec = FeatureSpec::standard(&unigrams).map_err(stage)?;
    write_json(out, &spec).map_err(stage)?;
    for s in &refined {
        println!("{}\t{:.4}", s.unigram.feature_name(), s.score);
    }
    println!("{} features", spec.len());
    Ok(())
}

fn features(dir: &Path, spec: &Path, out: &Path) -> Result<(), CliError> {
    let examples = read_examples_dir(dir).map_err(data)?;
    let spec = FeatureSpec::load(spec).map_err(data)?;
    let inventory = EmoticonInventory::default();
    let rows = examples
        .iter()
        .map(|e| sevminer::ml::LabeledVector {
            example_id: e.id().to_string(),
            label: e.label,
            hu: e.concept.hu,
            features: extract(e, &spec, &inventory).values,
        })
        .collect();
    FeatureTable {
        names: spec.names(),
        rows,
    }
    .write_csv(out)
    .map_err(stage)
}

fn load_split(
    features: &Path,
    names: Option<&[String]>,
    split: &SplitArgs,
) -> Result<(u64, Vec<String>, sevminer::ml::Split), CliError> {
    let seed = resolve_seed(split.seed, 0)?;
    let table = FeatureTable::read_csv(features).map_err(data)?;
    let names = names.map_or_else(|| table.names.clone(), <[String]>::to_vec);
    let columns = table.columns(&names).map_err(CliError::Data)?;
    let rows = table.project(&columns);
    let split = stratified_split(&rows, &split.ratios, split_seed(seed)).map_err(stage)?;
    Ok((seed, names, split))
}

fn select(
    features: &Path,
    spec_path: &Path,
    tolerance: f64,
    kind: ModelKind,
    split: &SplitArgs,
    trace_path: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let spec = FeatureSpec::load(spec_path).map_err(data)?;
    let (seed, _, split) = load_split(features, Some(&spec.names()), split)?;
    let model = ModelConfig::with_kind(kind);
    let select_seed = selection_seed(seed);
    let (selected, trace) = backward_select(
        &spec,
        &split.train,
        &split.validation,
        |rows| model.train(rows, select_seed),
        tolerance,
    )
    .map_err(stage)?;
    if let Some(path) = trace_path {
        write_trace_csv(path, &trace).map_err(stage)?;
    }
    write_json(out, &selected).map_err(stage)?;
    for s in &trace.steps {
        println!(
            "step {}: removed {} ({:.4} -> {:.4})",
            s.step, s.removed, s.accuracy_before, s.accuracy_after
        );
    }
    println!("kept {} features: {}", trace.kept.len(), trace.kept.join(", "));
    Ok(())
}

fn parse_depths(values: &[String]) -> Result<Vec<Option<usize>>, CliError> {
    values
        .iter()
        .map(|v| match v.trim() {
            "none" => Ok(None),
            d => d
                .parse()
                .map(Some)
                .map_err(|e| CliError::Config(format!("--max-depth {d:?}: {e}"))),
        })
        .collect()
}

fn train(
    features: &Path,
    spec: Option<&Path>,
    kind: ModelKind,
    split: &SplitArgs,
    params: &ParamArgs,
    out: &Path,
) -> Result<(), CliError> {
    let names = spec
        .map(|p| FeatureSpec::load(p).map(|s| s.names()))
        .transpose()
        .map_err(data)?;
    let (seed, names, split_rows) = load_split(features, names.as_deref(), split)?;

    let mut base = ModelConfig::with_kind(kind);
    if let Some(n) = params.n_trees {
        base.forest.n_trees = n;
    }
    if let Some(l) = params.lambda {
        base.logistic.lambda = l;
        base.svm.lambda = l;
    }
    if let Some(e) = params.epochs {
        base.svm.epochs = e;
    }
    if let Some(s) = params.max_steps {
        base.logistic.max_steps = s;
    }
    let depths = parse_depths(&params.max_depth)?;
    let mut grid = Vec::new();
    for &depth in &depths {
        for &min_split in &params.min_split {
            let mut c = base.clone();
            c.tree.max_depth = depth;
            c.tree.min_split = min_split;
            c.forest.tree = c.tree.clone();
            grid.push(c);
        }
    }
    let tree_based = matches!(kind, ModelKind::Tree | ModelKind::Forest);
    if !tree_based {
        grid.truncate(1);
    }

    let train_seed = training_seed(seed);
    let mut best: Option<(f64, ModelConfig, sevminer::ml::Model)> = None;
    for c in grid {
        let model = c.train(&split_rows.train, train_seed).map_err(stage)?;
        let acc = evaluate(&model, &split_rows.validation).map_err(stage)?.accuracy;
        if tree_based {
            let depth = c.tree.max_depth.map_or("none".to_string(), |d| d.to_string());
            println!(
                "max_depth={depth} min_split={} validation={acc:.4}",
                c.tree.min_split
            );
        }
        if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
            best = Some((acc, c, model));
        }
    }
    let (acc, _, model) = best.expect("grid is never empty");
    write_json(
        out,
        &ModelArtifact {
            version: VERSION.to_string(),
            seed,
            ratios: split.ratios,
            features: names,
            model,
        },
    )
    .map_err(stage)?;
    println!("trained {kind}, validation accuracy {acc:.4}");
    Ok(())
}

fn eval(model_file: &Path, features: &Path, partition: Partition) -> Result<(), CliError> {
    let artifact: ModelArtifact = read_json(model_file).map_err(data)?;
    let split = SplitArgs {
        seed: Some(artifact.seed),
        ratios: artifact.ratios,
    };
    let (_, _, rows) = load_split(features, Some(&artifact.features), &split)?;
    let report = evaluate(&artifact.model, rows.partition(partition)).map_err(stage)?;
    let m = report.confusion;
    println!("{} accuracy: {:.4} ({}/{})", partition.as_str(), report.accuracy, report.correct(), report.size);
    println!("confusion (rows: truth, columns: predicted)");
    println!("  {:<8} {:>8} {:>8}", "", "mild", "severe");
    println!(
        "  {:<8} {:>8} {:>8}  <- mild predicted severe",
        "mild",
        m[0][0],
        format!("*{}*", m[0][1])
    );
    println!("  {:<8} {:>8} {:>8}", "severe", m[1][0], m[1][1]);
    Ok(())
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let mut cfg = PipelineConfig::load(&args.config).map_err(config)?;
    cfg.seed = resolve_seed(args.seed, cfg.seed)?;
    if let Some(o) = args.out {
        cfg.output_dir = o;
    }
    if let Some(m) = args.model {
        cfg.model.kind = m.into();
    }
    if let Some(t) = args.tolerance {
        cfg.tolerance = t;
    }
    if let Some(m) = args.min_messages {
        cfg.min_messages = m;
    }
    if let Some(m) = args.margin {
        cfg.margin_fraction = m;
    }
    if let Some(k) = args.top {
        cfg.screen_k = k;
    }
    if let Some(k) = args.refine {
        cfg.refine_k = k;
    }
    if let Some(r) = args.ratios {
        cfg.ratios = r;
    }
    for (flag, target) in [
        (args.corpus, &mut cfg.corpus),
        (args.hu_table, &mut cfg.hu_table),
        (args.vocabulary, &mut cfg.vocabulary),
        (args.lexicon, &mut cfg.lexicon),
    ] {
        if let Some(p) = flag {
            *target = p;
        }
    }
    cfg.validate().map_err(config)?;
    match run_pipeline(&cfg) {
        Ok(report) => {
            print!("{}", render_text(&report));
            println!("outputs in {}", cfg.output_dir.display());
            Ok(())
        }
        Err(e) => {
            let msg = e.to_string();
            Err(match e.kind {
                FailureKind::Config => CliError::Config(msg),
                FailureKind::Data => CliError::Data(msg),
                FailureKind::Stage => CliError::Stage(msg),
            })
        }
    }
}

fn synth(args: SynthArgs) -> Result<(), CliError> {
    let mut params = match &args.params {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(data)?;
            SynthParams::from_toml(&text).map_err(config)?
        }
        None => SynthParams::default(),
    };
    if let Some(n) = args.concepts {
        params.n_concepts = n;
    }
    if let Some(s) = args.signal {
        params.signal = SignalStrength::uniform(s);
    }
    if let Some(u) = args.undersized {
        params.undersized = u;
    }
    if let Some(b) = args.background {
        params.background_messages = b;
    }
    params.seed = resolve_seed(args.seed, params.seed)?;
    let corpus = generate_synthetic_corpus(&params).map_err(config)?;
    let paths = corpus.write(&args.out).map_err(stage)?;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "{} concepts, {} messages -> {}",
        corpus.concepts.len(),
        corpus.lines.len(),
        paths.corpus.display()
    );
    Ok(())
}
