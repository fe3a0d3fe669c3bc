//! Files passed between pipeline stages and CLI subcommands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Message;
use crate::lexicon::{Concept, Severity};
use crate::matcher::Example;
use crate::ml::{LabeledVector, Model, SplitRatios};
use crate::screening::SelectionTrace;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| ArtifactError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| ArtifactError::Json {
        path: path.to_path_buf(),
        source,
    })
}

const FIXED_COLUMNS: [&str; 3] = ["canonical", "label", "hu"];

/// Example feature rows with their column names, as stored in `features.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<LabeledVector>,
}

impl FeatureTable {
    pub fn write_csv(&self, path: &Path) -> Result<(), ArtifactError> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
        let header = FIXED_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain(self.names.iter().cloned());
        w.write_record(header).map_err(csv_err(path))?;
        for row in &self.rows {
            let record = [
                row.example_id.clone(),
                row.label.to_string(),
                row.hu.to_string(),
            ]
            .into_iter()
            .chain(row.features.iter().map(f64::to_string));
            w.write_record(record).map_err(csv_err(path))?;
        }
        w.flush().map_err(io_err(path))
    }

    pub fn read_csv(path: &Path) -> Result<Self, ArtifactError> {
        let bad = |message: String| ArtifactError::Format {
            path: path.to_path_buf(),
            message,
        };
        let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
        let header: Vec<String> = r
            .headers()
            .map_err(csv_err(path))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.len() < FIXED_COLUMNS.len() || header[..3] != FIXED_COLUMNS {
            return Err(bad(format!("header must start with {}", FIXED_COLUMNS.join(","))));
        }
        let names = header[3..].to_vec();
        let mut rows = Vec::new();
        for (i, record) in r.records().enumerate() {
            let record = record.map_err(csv_err(path))?;
            let line = i + 2;
            let label: Severity = record[1]
                .parse()
                .map_err(|e| bad(format!("line {line}: {e}")))?;
            let number = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| bad(format!("line {line}: {s:?}: {e}")))
            };
            let hu = number(&record[2])?;
            let features = record
                .iter()
                .skip(3)
                .map(number)
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(LabeledVector {
                example_id: record[0].to_string(),
                label,
                hu,
                features,
            });
        }
        Ok(Self { names, rows })
    }

    /// Column positions of `names`, in the order given.
    pub fn columns(&self, names: &[String]) -> Result<Vec<usize>, String> {
        names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| format!("feature {n:?} is not in the table"))
            })
            .collect()
    }

    pub fn project(&self, columns: &[usize]) -> Vec<LabeledVector> {
        self.rows.iter().map(|r| r.project(columns)).collect()
    }
}

/// A fitted model with everything needed to rebuild its evaluation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub version: String,
    /// Root seed of the run; the split seed is derived from it.
    pub seed: u64,
    pub ratios: SplitRatios,
    pub features: Vec<String>,
    pub model: Model,
}

pub fn write_trace_csv(path: &Path, trace: &SelectionTrace) -> Result<(), ArtifactError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["step", "removed", "accuracy_before", "accuracy_after"])
        .map_err(csv_err(path))?;
    for s in &trace.steps {
        w.write_record([
            s.step.to_string(),
            s.removed.clone(),
            s.accuracy_before.to_string(),
            s.accuracy_after.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub const MANIFEST: &str = "manifest.csv";

/// One row of an examples directory manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub canonical: String,
    pub label: Severity,
    pub hu: f64,
    pub message_count: usize,
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

/// Message file of the example at `position` in the manifest.
pub fn message_file_name(position: usize, canonical: &str) -> String {
    format!("{position:04}_{}.txt", slug(canonical))
}

/// Writes one message file per example plus `manifest.csv`.
pub fn write_examples_dir(dir: &Path, examples: &[Example]) -> Result<(), ArtifactError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest = dir.join(MANIFEST);
    let mut w = csv::Writer::from_path(&manifest).map_err(csv_err(&manifest))?;
    for (i, ex) in examples.iter().enumerate() {
        let path = dir.join(message_file_name(i, ex.id()));
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut out = BufWriter::new(file);
        for m in &ex.messages {
            writeln!(out, "{}", m.text()).map_err(io_err(&path))?;
        }
        out.flush().map_err(io_err(&path))?;
        w.serialize(ManifestRow {
            canonical: ex.concept.canonical.clone(),
            label: ex.label,
            hu: ex.concept.hu,
            message_count: ex.messages.len(),
        })
        .map_err(csv_err(&manifest))?;
    }
    w.flush().map_err(io_err(&manifest))
}

/// Reads an examples directory back. Message counts must match the manifest.
pub fn read_examples_dir(dir: &Path) -> Result<Vec<Example>, ArtifactError> {
    let manifest = dir.join(MANIFEST);
    let mut r = csv::Reader::from_path(&manifest).map_err(csv_err(&manifest))?;
    let mut examples = Vec::new();
    for (i, row) in r.deserialize::<ManifestRow>().enumerate() {
        let row = row.map_err(csv_err(&manifest))?;
        let path = dir.join(message_file_name(i, &row.canonical));
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let messages: Vec<Message> = text.lines().filter_map(Message::new).collect();
        if messages.len() != row.message_count {
            return Err(ArtifactError::Format {
                path,
                message: format!(
                    "manifest says {} messages, file has {}",
                    row.message_count,
                    messages.len()
                ),
            });
        }
        let concept = Concept::new(&row.canonical, row.hu, "manifest").map_err(|e| {
            ArtifactError::Format {
                path: manifest.clone(),
                message: e.to_string(),
            }
        })?;
        examples.push(Example {
            concept,
            messages,
            label: row.label,
        });
    }
    Ok(examples)
}
