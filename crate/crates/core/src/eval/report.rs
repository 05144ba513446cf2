use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::grid::MetricsRow;
use super::metrics::Averaging;
use crate::fusion::{BlockKind, FeatureCombo};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report has no rows")]
    EmptyReport,
    #[error("unknown report format {0:?}")]
    UnknownFormat(String),
    #[error("malformed report: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    /// Guesses the format from a file extension (`csv`, `json`, `md`).
    pub fn from_extension(ext: &str) -> Option<Self> {
        ext.parse().ok()
    }
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "md" | "markdown" => Ok(Self::Markdown),
            _ => Err(ReportError::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonReport {
    averaging: Averaging,
    rows: Vec<MetricsRow>,
}

pub const CSV_HEADER: &str = "feature_combo,classifier,accuracy,precision,recall,f1";

/// Serializes grid rows. CSV and markdown print percentages with two
/// decimals and leave the metric cells of failed rows blank; JSON keeps full
/// precision along with confusion matrices and failure reasons.
pub fn render_report(rows: &[MetricsRow], format: ReportFormat, averaging: Averaging) -> Result<Vec<u8>, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::EmptyReport);
    }
    Ok(match format {
        ReportFormat::Csv => csv(rows).into_bytes(),
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(&JsonReport { averaging, rows: rows.to_vec() })?;
            out.push(b'\n');
            out
        }
        ReportFormat::Markdown => markdown(rows, averaging).into_bytes(),
    })
}

/// Inverse of the JSON rendering.
pub fn parse_json_report(bytes: &[u8]) -> Result<(Averaging, Vec<MetricsRow>), ReportError> {
    let r: JsonReport = serde_json::from_slice(bytes)?;
    Ok((r.averaging, r.rows))
}

fn metric_cells(r: &MetricsRow) -> [String; 4] {
    if r.failed.is_some() {
        return Default::default();
    }
    [r.accuracy, r.precision, r.recall, r.f1].map(|v| format!("{v:.2}"))
}

fn csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.feature_combo, r.classifier, metric_cells(r).join(","));
    }
    out
}

fn group_title(combo: &FeatureCombo) -> &'static str {
    let deep = combo.contains(BlockKind::Deep);
    match (deep, combo.blocks().len()) {
        (false, 1) => "Handcrafted feature extraction",
        (false, 2) => "Dual handcrafted feature extraction",
        (false, _) => "Triple handcrafted feature extraction",
        (true, 1) => "Deep feature extraction",
        (true, 2) => "Dual hybrid feature extraction",
        (true, 3) => "Triple hybrid feature extraction",
        (true, _) => "Quadruple hybrid feature extraction",
    }
}

fn markdown(rows: &[MetricsRow], averaging: Averaging) -> String {
    let avg = match averaging {
        Averaging::Macro => "macro",
        Averaging::Weighted => "weighted",
    };
    let mut out = format!("Precision, recall and F1 are {avg}-averaged over classes.\n");
    let mut current = None;
    for r in rows {
        let title = group_title(&r.feature_combo);
        if current != Some(title) {
            current = Some(title);
            let _ = write!(
                out,
                "\n### {title}\n\n\
                 | Feature Extraction Method(s) | Classifier(s) | Accuracy (%) | Precision (%) | Recall (%) | F1-Score (%) |\n\
                 |---|---|---:|---:|---:|---:|\n"
            );
        }
        let [a, p, rc, f] = metric_cells(r);
        let _ = write!(out, "| {} | {} | {a} | {p} | {rc} | {f} |", r.feature_combo.display_name(), r.classifier);
        if let Some(reason) = &r.failed {
            let _ = write!(out, " failed: {}", reason.replace('|', "/"));
        }
        out.push('\n');
    }
    out
}
