//! File formats: input tables, datasets, distance matrices, experiment
//! configs, and result files.
//!
//! The input table is a UTF-8 CSV with header `cluster,y,x1,...,xp`:
//! a cluster label column (string or integer), a real-valued response,
//! and zero or more real covariate columns (at least one unless distances
//! are supplied separately). Values are written with Rust's shortest
//! round-trip float formatting, so a dataset written and read back
//! reproduces the in-memory numbers exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::graph::DistanceMatrix;
use crate::simulate::{CovariateDist, Dataset, ErrorDist, GroundTruth, LmmConfig, PowerRow, TrialRecord};
use crate::testing::TestResult;

/// Parsed input table.
#[derive(Debug, Clone)]
pub struct InputTable {
    pub clusters: ClusterAssignment,
    /// Original cluster label per compact cluster id.
    pub cluster_names: Vec<String>,
    pub y: Vec<f64>,
    /// Covariate rows; `None` when the file has no x columns.
    pub x: Option<Array2<f64>>,
}

fn parse_float(field: &str, row: usize, col: &str) -> Result<f64> {
    let trimmed = field.trim();
    if trimmed.is_empty() {
        return Err(Error::InvalidInput(format!(
            "missing value in column '{col}' at data row {row}"
        )));
    }
    let v: f64 = trimmed.parse().map_err(|_| {
        Error::InvalidInput(format!(
            "could not parse '{trimmed}' in column '{col}' at data row {row}"
        ))
    })?;
    if !v.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite value in column '{col}' at data row {row}"
        )));
    }
    Ok(v)
}

/// Read an input table. Requires the header to start with `cluster,y`
/// and at least 4 data rows.
pub fn read_input_csv(path: &Path) -> Result<InputTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 2 || headers.get(0) != Some("cluster") || headers.get(1) != Some("y") {
        return Err(Error::InvalidInput(format!(
            "expected header starting with 'cluster,y', found '{}'",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let x_names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
    let p = x_names.len();

    let mut raw_labels: Vec<String> = Vec::new();
    let mut y = Vec::new();
    let mut x_data: Vec<f64> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = idx + 1;
        if record.len() != 2 + p {
            return Err(Error::InvalidInput(format!(
                "data row {row} has {} fields, expected {}",
                record.len(),
                2 + p
            )));
        }
        let label = record.get(0).unwrap_or("").trim();
        if label.is_empty() {
            return Err(Error::InvalidInput(format!(
                "missing cluster label at data row {row}"
            )));
        }
        raw_labels.push(label.to_string());
        y.push(parse_float(record.get(1).unwrap(), row, "y")?);
        for (c, name) in x_names.iter().enumerate() {
            x_data.push(parse_float(record.get(2 + c).unwrap(), row, name)?);
        }
    }

    let n = y.len();
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "input has {n} data rows; the test needs at least 4"
        )));
    }

    // Map distinct labels to compact ids: numerically when every label is
    // an integer, lexicographically otherwise.
    let mut distinct: Vec<String> = raw_labels.clone();
    distinct.sort();
    distinct.dedup();
    if distinct.iter().all(|s| s.parse::<i64>().is_ok()) {
        distinct.sort_by_key(|s| s.parse::<i64>().unwrap());
    }
    let ids: Vec<usize> = raw_labels
        .iter()
        .map(|l| distinct.iter().position(|d| d == l).unwrap())
        .collect();
    let clusters = ClusterAssignment::new(ids)?;

    let x = if p > 0 {
        Some(Array2::from_shape_vec((n, p), x_data).expect("shape checked per row"))
    } else {
        None
    };
    Ok(InputTable {
        clusters,
        cluster_names: distinct,
        y,
        x,
    })
}

/// Write a generated dataset in the input-table schema. Cluster ids are
/// written one-based.
pub fn write_dataset_csv(path: &Path, ds: &Dataset) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    let p = ds.x.ncols();
    write!(w, "cluster,y")?;
    for j in 1..=p {
        write!(w, ",x{j}")?;
    }
    writeln!(w)?;
    for i in 0..ds.y.len() {
        write!(w, "{},{}", ds.clusters.labels()[i] + 1, ds.y[i])?;
        for j in 0..p {
            write!(w, ",{}", ds.x[[i, j]])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a square distance matrix from a headerless CSV of reals.
pub fn read_distance_csv(path: &Path) -> Result<DistanceMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row: Vec<f64> = record
            .iter()
            .enumerate()
            .map(|(c, field)| parse_float(field, idx + 1, &format!("col{}", c + 1)))
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput(format!(
            "distance matrix is not square: {n} rows but row lengths differ"
        )));
    }
    DistanceMatrix::from_matrix(n, rows.into_iter().flatten().collect())
}

/// Serialize the ground truth next to a dataset.
pub fn write_truth_json(path: &Path, truth: &GroundTruth) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, truth)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Serialize a test result as pretty JSON with a trailing newline.
pub fn test_result_to_json(result: &TestResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(result)?;
    s.push('\n');
    Ok(s)
}

/// Apply `key = value` overrides from a plain-text config to an existing
/// configuration. Lines starting with `#` and blank lines are skipped.
pub fn apply_config_overrides(cfg: &mut LmmConfig, text: &str) -> Result<()> {
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!(
                "config line {} is not 'key = value': '{line}'",
                lineno + 1
            ))
        })?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        let bad = |what: &str| {
            Error::InvalidConfig(format!(
                "config line {}: could not parse '{value}' as {what} for key '{key}'",
                lineno + 1
            ))
        };
        match key.as_str() {
            "n" => cfg.n = value.parse().map_err(|_| bad("an integer"))?,
            "p" => cfg.p = value.parse().map_err(|_| bad("an integer"))?,
            "clusters" | "i" => cfg.clusters = value.parse().map_err(|_| bad("an integer"))?,
            "tau2" => cfg.tau2 = value.parse().map_err(|_| bad("a real"))?,
            "snr" => cfg.snr = value.parse().map_err(|_| bad("a real"))?,
            "sigma_eps" => cfg.sigma_eps = value.parse().map_err(|_| bad("a real"))?,
            "rho" => cfg.rho = value.parse().map_err(|_| bad("a real"))?,
            "q" | "slopes" => cfg.slopes = value.parse().map_err(|_| bad("an integer"))?,
            "error_dist" => {
                cfg.error_dist = match value {
                    "normal" => ErrorDist::Normal,
                    "t3" | "scaled-t3" => ErrorDist::ScaledT3,
                    _ => return Err(bad("'normal' or 't3'")),
                }
            }
            "x_dist" => {
                cfg.x_dist = match value {
                    "normal" => CovariateDist::Normal,
                    "t3" => CovariateDist::T3,
                    _ => return Err(bad("'normal' or 't3'")),
                }
            }
            "scale_offdiag_by_tau2" => {
                cfg.scale_offdiag_by_tau2 = value.parse().map_err(|_| bad("a boolean"))?
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "config line {}: unknown key '{other}'",
                    lineno + 1
                )))
            }
        }
    }
    Ok(())
}

/// Write power/calibration rows as CSV, preceded by `#` comment lines.
pub fn write_results_csv(path: &Path, comments: &[String], rows: &[PowerRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(
        w,
        "scenario,n,p,i,tau2,rho,q,snr,method,trials,rejections,power,mc_se"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.n,
            r.p,
            r.clusters,
            r.tau2,
            r.rho,
            r.q,
            r.snr,
            r.method,
            r.trials,
            r.rejections,
            r.power,
            r.mc_se
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Write per-trial records as JSON lines (one object per trial).
pub fn write_trial_log(path: &Path, cells: &[(String, &[TrialRecord])]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (cell, records) in cells {
        for rec in *records {
            let mut value = serde_json::to_value(rec)?;
            if let serde_json::Value::Object(map) = &mut value {
                map.insert(
                    "cell".to_string(),
                    serde_json::Value::String(cell.clone()),
                );
            }
            writeln!(w, "{}", serde_json::to_string(&value)?)?;
        }
    }
    w.flush()?;
    Ok(())
}
