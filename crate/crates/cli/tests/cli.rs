use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sevminer"));
    cmd.env_remove("SEVMINER_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/synthetic")
}

fn report_seed(dir: &Path) -> u64 {
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["seed"].as_u64().unwrap()
}

#[test]
fn subcommand_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let data = d.join("data");
    ok(&[
        "synth", "--out", s(&data), "--concepts", "24", "--background", "100", "--seed", "8",
    ]);

    let stats = ok(&["corpus", "stats", s(&data.join("corpus.txt"))]);
    assert!(stats.starts_with("messages: "));

    let examples = d.join("examples");
    ok(&[
        "match",
        s(&data.join("hu.csv")),
        s(&data.join("vocab.json")),
        s(&data.join("corpus.txt")),
        "--out",
        s(&examples),
    ]);
    assert!(examples.join("manifest.csv").is_file());

    let spec = d.join("spec.json");
    let screen = ok(&[
        "screen", s(&examples), "--lexicon", s(&data.join("lexicon.tsv")), "--seed", "1", "--out",
        s(&spec),
    ]);
    assert!(screen.contains("24 features"));

    let features = d.join("features.csv");
    ok(&["features", s(&examples), "--spec", s(&spec), "--out", s(&features)]);

    let selected = d.join("selected.json");
    let trace = d.join("trace.csv");
    let select = ok(&[
        "select", "--features", s(&features), "--spec", s(&spec), "--seed", "1", "--trace",
        s(&trace), "--out", s(&selected),
    ]);
    assert!(select.contains("kept "));
    assert!(trace.is_file());

    let model = d.join("model.json");
    ok(&[
        "train", "--features", s(&features), "--spec", s(&selected), "--model", "tree",
        "--max-depth", "none,3", "--min-split", "2,4", "--seed", "1", "--out", s(&model),
    ]);
    let eval = ok(&["eval", "--model-file", s(&model), "--features", s(&features)]);
    assert!(eval.starts_with("test accuracy: "), "{eval}");
    assert!(eval.contains("<- mild predicted severe"));
}

#[test]
fn labels_lists_every_row() {
    let table = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/hu_sample.csv");
    let out = ok(&["labels", s(&table)]);
    let rows = std::fs::read_to_string(&table).unwrap().lines().count() - 1;
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("canonical,hu,label"));
    assert_eq!(lines.count(), rows);
    assert_eq!(out.matches(",culled").count(), 3);
}

#[test]
fn seed_precedence() {
    let config = fixture().join("run.toml");
    let tmp = tempfile::tempdir().unwrap();

    let from_file = tmp.path().join("file");
    ok(&["run", "--config", s(&config), "--out", s(&from_file)]);
    assert_eq!(report_seed(&from_file), 7);

    let from_env = tmp.path().join("env");
    let out = bin()
        .env("SEVMINER_SEED", "9")
        .args(["run", "--config", s(&config), "--out", s(&from_env)])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(report_seed(&from_env), 9);

    let from_flag = tmp.path().join("flag");
    let out = bin()
        .env("SEVMINER_SEED", "9")
        .args(["run", "--config", s(&config), "--seed", "3", "--out", s(&from_flag)])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(report_seed(&from_flag), 3);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();

    // Unknown flag and bad config are config errors.
    assert_eq!(run(&["run", "--bogus"]).status.code(), Some(2));
    let bad = d.join("bad.toml");
    std::fs::write(&bad, "no_such_key = 1\n").unwrap();
    assert_eq!(run(&["run", "--config", s(&bad)]).status.code(), Some(2));
    assert_eq!(
        run(&["run", "--config", s(&fixture().join("run.toml")), "--margin", "0.7"])
            .status
            .code(),
        Some(2)
    );

    // Unreadable or malformed inputs are data errors.
    assert_eq!(
        run(&["corpus", "stats", s(&d.join("missing.txt"))]).status.code(),
        Some(3)
    );
    let table = d.join("hu.csv");
    std::fs::write(&table, "just,some\ngarbage,here\n").unwrap();
    assert_eq!(run(&["labels", s(&table)]).status.code(), Some(3));
}
