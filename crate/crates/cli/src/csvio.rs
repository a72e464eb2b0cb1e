//! `metrics.csv` and `summary.csv`. Floats are written with 17 significant
//! digits, so parsing a cell gives back the exact `f64`; absent values are
//! empty cells.

use std::path::Path;

use noisysgd::train::{AggregateRecord, MetricsRecord, Stat};

use crate::{CliError, CliResult};

pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

pub fn metrics_header(layers: usize) -> Vec<String> {
    let mut h = vec!["run_id".to_string(), "step".into(), "lr".into()];
    h.extend((0..layers).map(|l| format!("norm_w{l}")));
    h.extend(
        ["mean_bias", "active_train", "active_test", "err_train", "err_test"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

fn run_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Run(format!("{}: {e}", path.display()))
}

/// Writes one run's records. `mean_bias` is the first layer's mean bias.
pub fn write_metrics(path: &Path, run_id: u64, records: &[MetricsRecord]) -> CliResult<()> {
    let layers = records.first().map_or(0, |r| r.layer_norms.len());
    let mut w = csv::Writer::from_path(path).map_err(|e| run_err(path, e))?;
    w.write_record(metrics_header(layers)).map_err(|e| run_err(path, e))?;
    for r in records {
        let mut row = vec![run_id.to_string(), r.step.to_string(), fmt17(r.lr)];
        row.extend(r.layer_norms.iter().map(|&v| fmt17(v)));
        row.push(opt(r.bias_means.first().copied().flatten()));
        row.extend([r.active_train, r.active_test, r.err_train, r.err_test].map(opt));
        w.write_record(&row).map_err(|e| run_err(path, e))?;
    }
    w.flush().map_err(|e| run_err(path, e))
}

pub const SUMMARY_HEADER: [&str; 14] = [
    "arm",
    "p",
    "step",
    "runs",
    "total_norm_mean",
    "total_norm_stderr",
    "active_train_mean",
    "active_train_stderr",
    "active_test_mean",
    "active_test_stderr",
    "err_train_mean",
    "err_train_stderr",
    "err_test_mean",
    "err_test_stderr",
];

/// Rows of one arm in a summary: per-step aggregates, then the `final` row.
pub struct SummaryBlock<'a> {
    pub arm: &'a str,
    pub p: Option<f64>,
    pub per_step: &'a [AggregateRecord],
    pub last: Option<&'a AggregateRecord>,
}

pub fn write_summary(path: &Path, blocks: &[SummaryBlock<'_>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| run_err(path, e))?;
    w.write_record(SUMMARY_HEADER).map_err(|e| run_err(path, e))?;
    let stat = |s: Option<Stat>| [opt(s.map(|s| s.mean)), opt(s.and_then(|s| s.stderr))];
    for b in blocks {
        let rows = b
            .per_step
            .iter()
            .map(|a| (a.step.to_string(), a))
            .chain(b.last.map(|a| ("final".to_string(), a)));
        for (step, a) in rows {
            let mut row = vec![b.arm.to_string(), opt(b.p), step, a.total_norm.n.to_string()];
            for s in [Some(a.total_norm), a.active_train, a.active_test, a.err_train, a.err_test] {
                row.extend(stat(s));
            }
            w.write_record(&row).map_err(|e| run_err(path, e))?;
        }
    }
    w.flush().map_err(|e| run_err(path, e))
}

/// A parsed CSV: header plus string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| run_err(path, e))?;
        let header: Vec<String> = r.headers().map_err(|e| run_err(path, e))?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            // Row 1 is the header.
            let rec = rec.map_err(|e| run_err(path, format!("row {}: {e}", i + 2)))?;
            rows.push(rec.iter().map(String::from).collect());
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Cell as a float; empty cells are `None`.
    pub fn float(&self, row: usize, col: usize) -> Result<Option<f64>, String> {
        let cell = self.rows[row][col].trim();
        if cell.is_empty() {
            return Ok(None);
        }
        cell.parse()
            .map(Some)
            .map_err(|_| format!("row {}: column {} is not a number: {cell:?}", row + 2, self.header[col]))
    }
}
