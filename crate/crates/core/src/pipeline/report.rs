use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::artifacts::ArtifactError;
use super::RunReport;
use crate::ml::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

/// Pretty JSON with fields in declaration order and a trailing newline.
pub fn render_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Human-readable summary: stage counts, surviving features (one per line),
/// accuracies and the test confusion matrix.
pub fn render_text(report: &RunReport) -> String {
    let mut out = String::new();
    let c = &report.counts;
    let _ = writeln!(
        out,
        "sevminer {} run, seed {}, model {}",
        report.version, report.seed, report.model_kind
    );
    let _ = writeln!(
        out,
        "messages: {} ({} lines dropped, {} over length)",
        c.messages, c.dropped_lines, c.over_length
    );
    let _ = writeln!(out, "hu table rows: {} ({} row issues)", c.hu_rows, c.row_issues);
    let _ = writeln!(
        out,
        "concepts: {} examples ({} mild, {} severe), {} excluded, {} culled",
        c.examples, c.mild_examples, c.severe_examples, c.excluded, c.culled
    );
    for e in &report.exclusions {
        let _ = writeln!(out, "  excluded {} ({}, {} messages)", e.canonical, e.label, e.count);
    }
    let _ = writeln!(
        out,
        "split: {} train, {} validation, {} test",
        c.train, c.validation, c.test
    );
    let _ = writeln!(out, "initial features: {}", report.initial_features.len());
    if let Some(trace) = &report.selection {
        let _ = writeln!(
            out,
            "backward selection: {} removed, stopped on {:?}",
            trace.steps.len(),
            trace.stop
        );
    }
    let _ = writeln!(out, "surviving features: {}", report.surviving_features.len());
    for f in &report.surviving_features {
        let _ = writeln!(out, "  feature {f}");
    }
    match &report.evaluation {
        None => {
            let _ = writeln!(out, "no evaluation (stages completed: {:?})", report.completed);
        }
        Some(eval) => {
            for p in Partition::ALL {
                let r = eval.get(p);
                let _ = writeln!(
                    out,
                    "{} accuracy: {:.4} ({}/{})",
                    p.as_str(),
                    r.accuracy,
                    r.correct(),
                    r.size
                );
            }
            let m = eval.test.confusion;
            let _ = writeln!(out, "test confusion (rows: truth, columns: predicted)");
            let _ = writeln!(out, "  {:<8} {:>8} {:>8}", "", "mild", "severe");
            let _ = writeln!(
                out,
                "  {:<8} {:>8} {:>8}  <- mild predicted severe",
                "mild",
                m[0][0],
                format!("*{}*", m[0][1])
            );
            let _ = writeln!(out, "  {:<8} {:>8} {:>8}", "severe", m[1][0], m[1][1]);
        }
    }
    out
}

pub fn emit_report(report: &RunReport, format: ReportFormat, path: &Path) -> Result<(), ArtifactError> {
    let text = match format {
        ReportFormat::Json => render_json(report),
        ReportFormat::Text => render_text(report),
    };
    fs::write(path, text).map_err(|source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    })
}
