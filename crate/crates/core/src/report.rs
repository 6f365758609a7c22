//! Aggregates result sets into the report table layouts and exports
//! CSV/JSON/Markdown plus plot-ready severity-curve data.
//!
//! Aggregation keeps full precision internally; the 3-decimal rounding the
//! tables display is applied only at export time.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{PerturbationKind, RunRecord};
use crate::harness::ResultSet;
use crate::stats::pearson;

pub const SEVERITIES: [u8; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
    Markdown,
}

impl std::str::FromStr for ExportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            "md" | "markdown" => Ok(ExportFormat::Markdown),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no records to report")]
    Empty,
    #[error("unknown export format: {0}")]
    UnknownFormat(String),
    #[error("io error on {0}: {1}")]
    Io(String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TableMetadata {
    pub config_fingerprints: Vec<String>,
    /// Record count behind each cell; zero marks an absent cell.
    pub cell_counts: Vec<Vec<usize>>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDoc {
    pub name: String,
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    /// Full-precision cell values; `None` marks an absent cell.
    pub cells: Vec<Vec<Option<f64>>>,
    pub metadata: TableMetadata,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn metadata_for(results: &[ResultSet], counts: Vec<Vec<usize>>) -> TableMetadata {
    TableMetadata {
        config_fingerprints: results.iter().map(|r| r.config_fingerprint.clone()).collect(),
        cell_counts: counts,
        notes: Vec::new(),
    }
}

fn models_in(results: &[ResultSet]) -> Vec<String> {
    let mut models = Vec::new();
    for result in results {
        for record in &result.records {
            if !models.contains(&record.model_id) {
                models.push(record.model_id.clone());
            }
        }
    }
    models
}

fn records_of<'a>(results: &'a [ResultSet], model: &str) -> Vec<&'a RunRecord> {
    results
        .iter()
        .flat_map(|r| r.records.iter())
        .filter(|r| r.model_id == model)
        .collect()
}

/// Appends an equal-weight-per-model "Average" row.
fn append_average_row(cells: &mut Vec<Vec<Option<f64>>>, counts: &mut Vec<Vec<usize>>) {
    let n_cols = cells.first().map(Vec::len).unwrap_or(0);
    let mut average = Vec::with_capacity(n_cols);
    let mut avg_counts = Vec::with_capacity(n_cols);
    for col in 0..n_cols {
        let values: Vec<f64> = cells.iter().filter_map(|row| row[col]).collect();
        average.push(mean(&values));
        avg_counts.push(counts.iter().map(|row| row[col]).sum());
    }
    cells.push(average);
    counts.push(avg_counts);
}

/// Rows = models (+ Average), columns = the five kinds + Overall; cells are
/// mean aggregate robustness. Overall is the mean over all of a model's
/// records, not the mean of column means.
pub fn table_model_by_perturbation(results: &[ResultSet]) -> Result<TableDoc, ReportError> {
    let models = models_in(results);
    if models.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut column_labels: Vec<String> =
        PerturbationKind::ALL.iter().map(|k| k.as_str().to_string()).collect();
    column_labels.push("Overall".into());

    let mut cells = Vec::new();
    let mut counts = Vec::new();
    for model in &models {
        let records = records_of(results, model);
        let mut row = Vec::new();
        let mut row_counts = Vec::new();
        for kind in PerturbationKind::ALL {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.spec.kind == kind)
                .map(|r| r.scores.aggregate)
                .collect();
            row.push(mean(&values));
            row_counts.push(values.len());
        }
        let all: Vec<f64> = records.iter().map(|r| r.scores.aggregate).collect();
        row.push(mean(&all));
        row_counts.push(all.len());
        cells.push(row);
        counts.push(row_counts);
    }
    append_average_row(&mut cells, &mut counts);

    let mut row_labels = models;
    row_labels.push("Average".into());
    Ok(TableDoc {
        name: "model_by_perturbation".into(),
        row_labels,
        column_labels,
        cells,
        metadata: metadata_for(results, counts),
    })
}

/// Rows = models (+ Average), columns = the four metric components.
pub fn table_per_metric(results: &[ResultSet]) -> Result<TableDoc, ReportError> {
    let models = models_in(results);
    if models.is_empty() {
        return Err(ReportError::Empty);
    }
    let column_labels: Vec<String> =
        ["Semantic", "Keyword", "Structural", "Length"].map(String::from).to_vec();

    let mut cells = Vec::new();
    let mut counts = Vec::new();
    for model in &models {
        let records = records_of(results, model);
        let columns = [
            records.iter().map(|r| r.scores.semantic).collect::<Vec<_>>(),
            records.iter().map(|r| r.scores.keyword).collect(),
            records.iter().map(|r| r.scores.structural).collect(),
            records.iter().map(|r| r.scores.length).collect(),
        ];
        cells.push(columns.iter().map(|c| mean(c)).collect());
        counts.push(columns.iter().map(Vec::len).collect());
    }
    append_average_row(&mut cells, &mut counts);

    let mut row_labels = models;
    row_labels.push("Average".into());
    Ok(TableDoc {
        name: "per_metric".into(),
        row_labels,
        column_labels,
        cells,
        metadata: metadata_for(results, counts),
    })
}

/// Rows = kinds (+ Average), columns = severity levels L1..L5; cells are
/// mean aggregate robustness over users (and models, when several).
pub fn table_severity(results: &[ResultSet]) -> Result<TableDoc, ReportError> {
    let records: Vec<&RunRecord> = results.iter().flat_map(|r| r.records.iter()).collect();
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    let column_labels: Vec<String> = SEVERITIES.iter().map(|s| format!("L{s}")).collect();

    let mut cells = Vec::new();
    let mut counts = Vec::new();
    for kind in PerturbationKind::ALL {
        let mut row = Vec::new();
        let mut row_counts = Vec::new();
        for severity in SEVERITIES {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.spec.kind == kind && r.spec.severity == severity)
                .map(|r| r.scores.aggregate)
                .collect();
            row.push(mean(&values));
            row_counts.push(values.len());
        }
        cells.push(row);
        counts.push(row_counts);
    }
    append_average_row(&mut cells, &mut counts);

    let mut row_labels: Vec<String> =
        PerturbationKind::ALL.iter().map(|k| k.as_str().to_string()).collect();
    row_labels.push("Average".into());
    Ok(TableDoc {
        name: "severity".into(),
        row_labels,
        column_labels,
        cells,
        metadata: metadata_for(results, counts),
    })
}

/// 4x4 symmetric Pearson matrix over the per-record metric components.
/// Constant columns yield absent cells with a note in the metadata.
pub fn table_correlation(results: &[ResultSet]) -> Result<TableDoc, ReportError> {
    let records: Vec<&RunRecord> = results.iter().flat_map(|r| r.records.iter()).collect();
    if records.len() < 2 {
        return Err(ReportError::Empty);
    }
    let labels = ["Semantic", "Keyword", "Structural", "Length"];
    let columns: [Vec<f64>; 4] = [
        records.iter().map(|r| r.scores.semantic).collect(),
        records.iter().map(|r| r.scores.keyword).collect(),
        records.iter().map(|r| r.scores.structural).collect(),
        records.iter().map(|r| r.scores.length).collect(),
    ];

    let mut notes = BTreeSet::new();
    let mut cells = vec![vec![None; 4]; 4];
    let mut counts = vec![vec![records.len(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            if i == j {
                cells[i][j] = Some(1.0);
                continue;
            }
            match pearson(&columns[i], &columns[j]) {
                Ok(r) => cells[i][j] = Some(r),
                Err(_) => {
                    notes.insert(format!(
                        "correlation ({}, {}) undefined: constant column",
                        labels[i], labels[j]
                    ));
                    counts[i][j] = 0;
                }
            }
        }
    }

    let mut metadata = metadata_for(results, counts);
    metadata.notes = notes.into_iter().collect();
    Ok(TableDoc {
        name: "metric_correlation".into(),
        row_labels: labels.map(String::from).to_vec(),
        column_labels: labels.map(String::from).to_vec(),
        cells,
        metadata,
    })
}

fn format_cell(cell: &Option<f64>) -> String {
    match cell {
        Some(v) => format!("{v:.3}"),
        None => String::new(),
    }
}

/// Writes a table in the requested format. CSV and Markdown round to three
/// decimals; JSON carries the full-precision `TableDoc`.
pub fn export(table: &TableDoc, format: ExportFormat, path: &Path) -> Result<(), ReportError> {
    let content = match format {
        ExportFormat::Csv => {
            let mut out = String::new();
            out.push_str(&format!("{}\n", std::iter::once("")
                .chain(table.column_labels.iter().map(String::as_str))
                .collect::<Vec<_>>()
                .join(",")));
            for (label, row) in table.row_labels.iter().zip(&table.cells) {
                let cells: Vec<String> = row.iter().map(format_cell).collect();
                out.push_str(&format!("{label},{}\n", cells.join(",")));
            }
            out
        }
        ExportFormat::Markdown => {
            let mut out = String::new();
            out.push_str(&format!("| | {} |\n", table.column_labels.join(" | ")));
            out.push_str(&format!("|---|{}\n", "---|".repeat(table.column_labels.len())));
            for (label, row) in table.row_labels.iter().zip(&table.cells) {
                let cells: Vec<String> = row.iter().map(format_cell).collect();
                out.push_str(&format!("| {label} | {} |\n", cells.join(" | ")));
            }
            out
        }
        ExportFormat::Json => {
            serde_json::to_string_pretty(table).expect("table serializes") + "\n"
        }
    };
    std::fs::write(path, content)
        .map_err(|e| ReportError::Io(path.display().to_string(), e.to_string()))
}

/// One row of the severity-curve plot data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityCurvePoint {
    pub kind: PerturbationKind,
    pub level: u8,
    pub mean: f64,
    pub stddev: f64,
    pub n: usize,
}

/// Mean/stddev of the aggregate per (kind, level), for external plotting.
pub fn severity_curve(results: &[ResultSet]) -> Vec<SeverityCurvePoint> {
    let records: Vec<&RunRecord> = results.iter().flat_map(|r| r.records.iter()).collect();
    let mut points = Vec::new();
    for kind in PerturbationKind::ALL {
        for level in SEVERITIES {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.spec.kind == kind && r.spec.severity == level)
                .map(|r| r.scores.aggregate)
                .collect();
            let Some(m) = mean(&values) else { continue };
            let stddev = if values.len() < 2 {
                0.0
            } else {
                (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0))
                    .sqrt()
            };
            points.push(SeverityCurvePoint { kind, level, mean: m, stddev, n: values.len() });
        }
    }
    points
}

/// Writes `severity_curve.csv` (columns: kind, level, mean, stddev, n).
pub fn write_severity_curve(results: &[ResultSet], path: &Path) -> Result<(), ReportError> {
    let mut out = String::from("kind,level,mean,stddev,n\n");
    for point in severity_curve(results) {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{}\n",
            point.kind, point.level, point.mean, point.stddev, point.n
        ));
    }
    std::fs::write(path, out)
        .map_err(|e| ReportError::Io(path.display().to_string(), e.to_string()))
}
