//! Corpus ingestion.
//!
//! A corpus file is UTF-8 and newline-delimited. Each line is either raw
//! message text or a JSON object with a `"text"` member; the format is
//! decided once per file from its first non-blank line. Only the message
//! text is kept, every other JSON member is discarded on ingest.

mod tokenize;

pub use tokenize::{
    tokenize, Emoticon, EmoticonInventory, InventoryError, Polarity, Token, TokenKind,
};

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

/// Messages longer than this are logged, never rejected.
pub const ADVISORY_MAX_CHARS: usize = 140;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The body of one social-media post.
///
/// Always non-empty and free of tabs and line breaks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Message {
    text: String,
}

impl Message {
    /// Normalizes tabs and line breaks to single spaces and trims.
    /// Returns `None` when nothing but whitespace remains.
    pub fn new(raw: &str) -> Option<Self> {
        let mut text = String::with_capacity(raw.len());
        let mut in_break = false;
        for c in raw.chars() {
            if matches!(c, '\t' | '\n' | '\r') {
                if !in_break {
                    text.push(' ');
                }
                in_break = true;
            } else {
                text.push(c);
                in_break = false;
            }
        }
        let trimmed = text.trim();
        if trimmed.is_empty() {
            None
        } else {
            Some(Self {
                text: trimmed.to_string(),
            })
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

impl AsRef<str> for Message {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub source_id: String,
    messages: Vec<Message>,
}

impl Corpus {
    pub fn new(source_id: impl Into<String>, messages: Vec<Message>) -> Self {
        Self {
            source_id: source_id.into(),
            messages,
        }
    }

    /// Builds a corpus from raw strings, silently skipping invalid ones.
    pub fn from_texts<I, S>(source_id: impl Into<String>, texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let messages = texts
            .into_iter()
            .filter_map(|t| Message::new(t.as_ref()))
            .collect();
        Self::new(source_id, messages)
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Message> {
        self.messages.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineFormat {
    Raw,
    Json,
}

/// A loaded corpus together with its ingest counters.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub format: LineFormat,
    /// Lines skipped because they were blank or malformed.
    pub dropped: usize,
    /// Kept messages longer than [`ADVISORY_MAX_CHARS`].
    pub over_length: usize,
}

/// Reads a corpus file, keeping at most `limit` valid messages.
pub fn load_corpus(path: &Path, limit: Option<usize>) -> Result<LoadedCorpus, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut format = None;
    let mut messages = Vec::new();
    let mut dropped = 0;
    let mut over_length = 0;

    for line in reader.lines() {
        if limit.is_some_and(|n| messages.len() >= n) {
            break;
        }
        let line = line.map_err(io_err)?;
        if format.is_none() && !line.trim().is_empty() {
            format = Some(detect_format(&line));
        }
        let parsed = match format {
            None => None,
            Some(LineFormat::Raw) => Message::new(&line),
            Some(LineFormat::Json) => parse_json_line(&line),
        };
        match parsed {
            Some(message) => {
                if message.text().chars().count() > ADVISORY_MAX_CHARS {
                    over_length += 1;
                }
                messages.push(message);
            }
            None => dropped += 1,
        }
    }

    if over_length > 0 {
        log::info!(
            "{}: {over_length} messages exceed {ADVISORY_MAX_CHARS} characters (kept)",
            path.display()
        );
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} blank or malformed lines", path.display());
    }
    Ok(LoadedCorpus {
        corpus: Corpus::new(path.display().to_string(), messages),
        format: format.unwrap_or(LineFormat::Raw),
        dropped,
        over_length,
    })
}

fn detect_format(first_line: &str) -> LineFormat {
    match serde_json::from_str::<serde_json::Value>(first_line) {
        Ok(serde_json::Value::Object(_)) => LineFormat::Json,
        _ => LineFormat::Raw,
    }
}

fn parse_json_line(line: &str) -> Option<Message> {
    let value: serde_json::Value = serde_json::from_str(line).ok()?;
    Message::new(value.get("text")?.as_str()?)
}
