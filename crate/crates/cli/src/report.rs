//! Report rows, trajectory points, and the cross-seed summary.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::CliError;
use crate::fsutil::{find_files, write_atomic};
use crate::pipeline::tsv;

pub const REPORT_HEADER: &str = "method\tseed\ttrain-gm\tval-gm\ttest-gm\tvo-gap\tto-gap\tvalidation-queries\tstatus";
pub const TRAJECTORY_HEADER: &str = "method\tseed\tstep\ttrain-gm\tval-gm\ttest-gm\tto-gap\tvo-gap";
pub const SUMMARY_HEADER: &str = "method\tmetric\tn\tfailed\tmedian\tq1\tq3\tiqr";

/// Summary metrics of report rows, in column order.
pub const REPORT_METRICS: [&str; 6] = ["train-gm", "val-gm", "test-gm", "vo-gap", "to-gap", "validation-queries"];
/// Metrics with one plot series file per method.
pub const SERIES_METRICS: [&str; 5] = ["train-gm", "val-gm", "test-gm", "to-gap", "vo-gap"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub train_gm: f64,
    pub val_gm: f64,
    pub test_gm: f64,
}

impl Metrics {
    /// `(GM_val − GM_test) × 10³`.
    pub fn vo_gap(&self) -> f64 {
        (self.val_gm - self.test_gm) * 1e3
    }

    /// `(GM_train − GM_val) × 10³`.
    pub fn to_gap(&self) -> f64 {
        (self.train_gm - self.val_gm) * 1e3
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Ok { metrics: Metrics, queries: usize },
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub method: String,
    pub seed: u64,
    pub outcome: Outcome,
}

fn one_line(msg: &str) -> String {
    msg.replace(['\t', '\n', '\r'], " ")
}

impl Row {
    pub fn ok(method: String, seed: u64, metrics: Metrics, queries: usize) -> Self {
        Self {
            method,
            seed,
            outcome: Outcome::Ok { metrics, queries },
        }
    }

    pub fn failed(method: String, seed: u64, msg: impl Into<String>) -> Self {
        Self {
            method,
            seed,
            outcome: Outcome::Failed(msg.into()),
        }
    }

    pub fn to_tsv(&self) -> String {
        match &self.outcome {
            Outcome::Ok { metrics: m, queries } => format!(
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.3}\t{:.3}\t{queries}\tok",
                self.method,
                self.seed,
                m.train_gm,
                m.val_gm,
                m.test_gm,
                m.vo_gap(),
                m.to_gap()
            ),
            Outcome::Failed(msg) => format!("{}\t{}\tNA\tNA\tNA\tNA\tNA\tNA\tfailed: {}", self.method, self.seed, one_line(msg)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajPoint {
    pub method: String,
    pub seed: u64,
    /// Epoch, generation or ensemble step, from 1.
    pub step: usize,
    pub metrics: Metrics,
}

impl TrajPoint {
    pub fn to_tsv(&self) -> String {
        let m = &self.metrics;
        format!(
            "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.3}\t{:.3}",
            self.method,
            self.seed,
            self.step,
            m.train_gm,
            m.val_gm,
            m.test_gm,
            m.to_gap(),
            m.vo_gap()
        )
    }
}

/// A parsed tab-separated table.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str, source: &Path) -> Result<Self, CliError> {
        let mut lines = text.lines().filter(|l| !l.is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| CliError::Runtime(format!("{}: empty table", source.display())))?
            .split('\t')
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split('\t').map(String::from).collect();
            if row.len() != header.len() {
                return Err(CliError::Runtime(format!(
                    "{}: line {} has {} fields, expected {}",
                    source.display(),
                    i + 2,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Linear-interpolation quantile of sorted values, `p ∈ [0, 1]`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub metric: String,
    pub n: usize,
    pub failed: usize,
    /// `(median, q1, q3)`, absent when no row succeeded.
    pub quartiles: Option<(f64, f64, f64)>,
}

impl SummaryRow {
    pub fn to_tsv(&self) -> String {
        match self.quartiles {
            Some((med, q1, q3)) => format!(
                "{}\t{}\t{}\t{}\t{med:.6}\t{q1:.6}\t{q3:.6}\t{:.6}",
                self.method,
                self.metric,
                self.n,
                self.failed,
                q3 - q1
            ),
            None => format!("{}\t{}\t0\t{}\tNA\tNA\tNA\tNA", self.method, self.metric, self.failed),
        }
    }
}

fn require_columns(table: &Table, names: &[&str], source: &Path) -> Result<Vec<usize>, CliError> {
    names
        .iter()
        .map(|n| {
            table
                .column(n)
                .ok_or_else(|| CliError::Runtime(format!("{}: missing column `{n}`", source.display())))
        })
        .collect()
}

fn number(field: &str, source: &Path) -> Result<f64, CliError> {
    field
        .parse()
        .map_err(|_| CliError::Runtime(format!("{}: bad number `{field}`", source.display())))
}

/// Median and IQR per (method, metric) over every successful row. Methods
/// keep the order of their first appearance.
pub fn summarize(reports: &[(std::path::PathBuf, Table)]) -> Result<Vec<SummaryRow>, CliError> {
    let mut order: Vec<String> = Vec::new();
    let mut values: BTreeMap<(String, &str), Vec<f64>> = BTreeMap::new();
    let mut failed: BTreeMap<String, usize> = BTreeMap::new();
    for (source, table) in reports {
        let cols = require_columns(table, &REPORT_METRICS, source)?;
        let [method, status] = require_columns(table, &["method", "status"], source)?[..] else {
            unreachable!()
        };
        for row in &table.rows {
            let m = row[method].clone();
            if !order.contains(&m) {
                order.push(m.clone());
            }
            if row[status] != "ok" {
                *failed.entry(m).or_default() += 1;
                continue;
            }
            for (metric, &c) in REPORT_METRICS.iter().zip(&cols) {
                values.entry((m.clone(), metric)).or_default().push(number(&row[c], source)?);
            }
        }
    }
    let mut out = Vec::new();
    for m in order {
        for metric in REPORT_METRICS {
            let mut v = values.remove(&(m.clone(), metric)).unwrap_or_default();
            v.sort_by(f64::total_cmp);
            out.push(SummaryRow {
                method: m.clone(),
                metric: metric.into(),
                n: v.len(),
                failed: failed.get(&m).copied().unwrap_or(0),
                quartiles: (!v.is_empty()).then(|| (quantile(&v, 0.5), quantile(&v, 0.25), quantile(&v, 0.75))),
            });
        }
    }
    Ok(out)
}

fn read_tables(dir: &Path, name: &str) -> Result<Vec<(std::path::PathBuf, Table)>, CliError> {
    find_files(dir, name)?
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p)?;
            let table = Table::parse(&text, &p)?;
            Ok((p, table))
        })
        .collect()
}

/// Summary of every `report.tsv` under `dir`, written to `summary.tsv`, plus
/// one series file per (method, metric) under `plots/` built from every
/// `trajectories.tsv`. Returns the summary table text.
pub fn cmd_report(dir: &Path) -> Result<String, CliError> {
    let reports = read_tables(dir, "report.tsv")?;
    if reports.is_empty() {
        return Err(CliError::Runtime(format!("no report.tsv found under {}", dir.display())));
    }
    let summary = tsv(SUMMARY_HEADER, summarize(&reports)?.iter().map(SummaryRow::to_tsv));
    write_atomic(&dir.join("summary.tsv"), &summary)?;

    let mut series: BTreeMap<(String, &str), Vec<String>> = BTreeMap::new();
    for (source, table) in read_tables(dir, "trajectories.tsv")? {
        let [method, seed, step] = require_columns(&table, &["method", "seed", "step"], &source)?[..] else {
            unreachable!()
        };
        let cols = require_columns(&table, &SERIES_METRICS, &source)?;
        for row in &table.rows {
            for (metric, &c) in SERIES_METRICS.iter().zip(&cols) {
                series
                    .entry((row[method].clone(), metric))
                    .or_default()
                    .push(format!("{}\t{}\t{}", row[seed], row[step], row[c]));
            }
        }
    }
    for ((method, metric), lines) in series {
        write_atomic(&dir.join("plots").join(format!("{method}.{metric}.tsv")), tsv("seed\tstep\tvalue", lines.into_iter()))?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(train: f64, val: f64, test: f64) -> Metrics {
        Metrics {
            train_gm: train,
            val_gm: val,
            test_gm: test,
        }
    }

    #[test]
    fn gaps_and_formatting() {
        let metrics = m(0.9, 0.85, 0.72);
        assert!((metrics.vo_gap() - 130.0).abs() < 1e-9);
        assert!((metrics.to_gap() - 50.0).abs() < 1e-9);
        let row = Row::ok("genex".into(), 3, metrics, 41);
        assert_eq!(row.to_tsv(), "genex\t3\t0.900000\t0.850000\t0.720000\t130.000\t50.000\t41\tok");
        let failed = Row::failed("single-n5-q3".into(), 1, "boom\tbad\nthing");
        assert_eq!(failed.to_tsv(), "single-n5-q3\t1\tNA\tNA\tNA\tNA\tNA\tNA\tfailed: boom bad thing");
    }

    #[test]
    fn quantiles() {
        assert_eq!(quantile(&[1.0, 2.0, 10.0], 0.5), 2.0);
        assert_eq!(quantile(&[1.0, 2.0, 10.0], 0.25), 1.5);
        assert_eq!(quantile(&[1.0, 2.0, 10.0], 0.75), 6.0);
        assert_eq!(quantile(&[4.0], 0.75), 4.0);
        assert_eq!(quantile(&[1.0, 3.0], 0.5), 2.0);
    }

    fn report(rows: &[Row]) -> (std::path::PathBuf, Table) {
        let text = tsv(REPORT_HEADER, rows.iter().map(Row::to_tsv));
        ("r".into(), Table::parse(&text, Path::new("r")).unwrap())
    }

    #[test]
    fn one_row_summary_equals_the_row() {
        let row = Row::ok("genex".into(), 0, m(0.91, 0.8, 0.75), 43);
        let s = summarize(&[report(std::slice::from_ref(&row))]).unwrap();
        assert_eq!(s.len(), REPORT_METRICS.len());
        let get = |metric: &str| s.iter().find(|r| r.metric == metric).unwrap().quartiles.unwrap();
        assert_eq!(get("test-gm"), (0.75, 0.75, 0.75));
        assert_eq!(get("validation-queries"), (43.0, 43.0, 43.0));
        assert!((get("vo-gap").0 - 50.0).abs() < 1e-9);
    }

    #[test]
    fn median_of_three_rows() {
        let rows = [
            Row::ok("single".into(), 0, m(0.9, 0.8, 0.70), 60),
            Row::ok("single".into(), 1, m(0.9, 0.8, 0.60), 60),
            Row::ok("single".into(), 2, m(0.9, 0.8, 0.65), 60),
            Row::failed("single".into(), 3, "x"),
        ];
        let s = summarize(&[report(&rows)]).unwrap();
        let test = s.iter().find(|r| r.metric == "test-gm").unwrap();
        // hand computed: sorted 0.60, 0.65, 0.70
        let (med, q1, q3) = test.quartiles.unwrap();
        assert!((med - 0.65).abs() < 1e-12 && (q1 - 0.625).abs() < 1e-12 && (q3 - 0.675).abs() < 1e-12);
        assert_eq!((test.n, test.failed), (3, 1));
    }
}
