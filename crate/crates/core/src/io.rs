//! File formats.
//!
//! | file              | format                                                        |
//! |-------------------|---------------------------------------------------------------|
//! | permutation batch | CSV `sample_index,cycle_count,image` (image quoted, one-based) |
//! | score matrix      | CSV, `n` rows of `n` plain decimals, no header                |
//! | matrix sidecar    | JSON `{schema, n, theta_used_for_centering, a_dot_dot_before_centering, M}` |
//! | tail curve        | CSV `t,empirical,bound1,bound2,bound3_line1,bound3_line2[,gi14_bound1]` |
//! | covariance curve  | CSV `s,cov`                                                   |
//! | bounds table      | CSV `t,bound1,bound2,bound3_line1,bound3_line2`               |
//!
//! Inapplicable values are written as `NA`. Floats use Rust's shortest
//! round-trip decimal form. JSON documents carry `"schema": "v1"`; the CSV
//! layouts above are version `v1` as recorded in the accompanying JSON.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::TailCurve;
use crate::error::{Error, Result};
use crate::hoeffding::{CenteredMatrix, ScoreMatrix};
use crate::montecarlo::{CovPoint, SimulationSummary};
use crate::perm::Permutation;

pub const SCHEMA_VERSION: &str = "v1";
pub const NA: &str = "NA";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

fn finish(mut w: impl Write, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

// ---- permutations ----

pub fn write_permutations_csv<W: Write>(out: W, perms: &[Permutation]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::NonNumeric)
        .from_writer(out);
    w.write_record(["sample_index", "cycle_count", "image"])?;
    for (k, pi) in perms.iter().enumerate() {
        w.write_record([k.to_string(), pi.cycle_count().to_string(), pi.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn save_permutations_csv(path: &Path, perms: &[Permutation]) -> Result<()> {
    let w = create(path)?;
    write_permutations_csv(w, perms)
}

/// Reads the batch format back, checking indices and cycle counts.
pub fn parse_permutations_csv(text: &str) -> Result<Vec<Permutation>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["sample_index", "cycle_count", "image"] {
        return Err(Error::Parse(format!(
            "unexpected permutation header {headers:?}"
        )));
    }
    let mut out = Vec::new();
    for (k, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != 3 {
            return Err(Error::Parse(format!("row {k}: expected 3 fields")));
        }
        let index: usize = record[0]
            .parse()
            .map_err(|_| Error::Parse(format!("row {k}: bad sample_index {:?}", &record[0])))?;
        let cycles: usize = record[1]
            .parse()
            .map_err(|_| Error::Parse(format!("row {k}: bad cycle_count {:?}", &record[1])))?;
        let pi: Permutation = record[2].parse()?;
        if index != k || cycles != pi.cycle_count() {
            return Err(Error::Parse(format!(
                "row {k}: index or cycle count inconsistent"
            )));
        }
        out.push(pi);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationRecord {
    pub sample_index: usize,
    pub cycle_count: usize,
    pub image: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationBatch {
    pub schema: String,
    pub n: usize,
    pub theta: f64,
    pub samples: Vec<PermutationRecord>,
}

impl PermutationBatch {
    pub fn new(n: usize, theta: f64, perms: &[Permutation]) -> Self {
        Self {
            schema: SCHEMA_VERSION.into(),
            n,
            theta,
            samples: perms
                .iter()
                .enumerate()
                .map(|(k, pi)| PermutationRecord {
                    sample_index: k,
                    cycle_count: pi.cycle_count(),
                    image: pi.to_one_based(),
                })
                .collect(),
        }
    }
}

// ---- matrices ----

/// Parses `n` rows of `n` comma-separated finite decimals into a symmetric
/// matrix.
pub fn parse_matrix_csv(text: &str) -> Result<ScoreMatrix> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Parse(format!(
                        "row {}, column {}: bad number {field:?}",
                        i + 1,
                        j + 1
                    ))
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse(format!(
                        "row {}, column {}: non-finite value",
                        i + 1,
                        j + 1
                    )));
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse(format!(
                    "row {} has {} columns, expected {}",
                    i + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty matrix".into()));
    }
    if rows.len() != rows[0].len() {
        return Err(Error::Parse(format!(
            "matrix is {}x{}, expected square",
            rows.len(),
            rows[0].len()
        )));
    }
    ScoreMatrix::from_rows(&rows).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_matrix_csv(path: &Path) -> Result<ScoreMatrix> {
    parse_matrix_csv(&read_to_string(path)?).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_matrix_csv<W: Write>(out: W, matrix: &ScoreMatrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    for i in 0..matrix.n() {
        w.write_record(matrix.row(i).iter().map(f64::to_string))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn save_matrix_csv(path: &Path, matrix: &ScoreMatrix) -> Result<()> {
    write_matrix_csv(create(path)?, matrix)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSidecar {
    pub schema: String,
    pub n: usize,
    pub theta_used_for_centering: f64,
    pub a_dot_dot_before_centering: f64,
    #[serde(rename = "M")]
    pub m_max: f64,
}

impl MatrixSidecar {
    pub fn for_matrix(a: &CenteredMatrix) -> Self {
        Self {
            schema: SCHEMA_VERSION.into(),
            n: a.n(),
            theta_used_for_centering: a.theta(),
            a_dot_dot_before_centering: a.a_dot_dot_before(),
            m_max: a.m_max(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported sidecar schema {:?}",
                self.schema
            )));
        }
        let finite = [
            self.theta_used_for_centering,
            self.a_dot_dot_before_centering,
            self.m_max,
        ]
        .iter()
        .all(|v| v.is_finite());
        if self.n == 0 || !finite || !(self.theta_used_for_centering > 0.0) || self.m_max < 0.0 {
            return Err(Error::Parse("sidecar fields out of range".into()));
        }
        Ok(())
    }
}

pub fn parse_sidecar(text: &str) -> Result<MatrixSidecar> {
    let s: MatrixSidecar = serde_json::from_str(text)?;
    s.validate()?;
    Ok(s)
}

/// Path of the sidecar next to a matrix file: `a.csv` -> `a.json`.
pub fn sidecar_path(matrix_path: &Path) -> std::path::PathBuf {
    matrix_path.with_extension("json")
}

// ---- curves ----

pub fn write_tail_csv<W: Write>(out: W, summary: &SimulationSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let with_cmp = summary.comparison.is_some();
    let mut header = vec![
        "t",
        "empirical",
        "bound1",
        "bound2",
        "bound3_line1",
        "bound3_line2",
    ];
    if with_cmp {
        header.push("gi14_bound1");
    }
    w.write_record(&header)?;
    for (k, p) in summary.tail.iter().enumerate() {
        let curve = summary.bound_curves.as_ref();
        let mut row = vec![
            p.t.to_string(),
            p.fraction.to_string(),
            opt(curve.map(|c| c.bound1[k])),
            opt(curve.map(|c| c.bound2[k])),
            opt(curve.and_then(|c| c.bound3_line1[k])),
            opt(curve.and_then(|c| c.bound3_line2[k])),
        ];
        if let Some(cmp) = &summary.comparison {
            row.push(cmp.bound1[k].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn save_tail_csv(path: &Path, summary: &SimulationSummary) -> Result<()> {
    write_tail_csv(create(path)?, summary)
}

pub fn write_cov_csv<W: Write>(out: W, curve: &[CovPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s", "cov"])?;
    for p in curve {
        w.write_record([p.s.to_string(), p.cov.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn save_cov_csv(path: &Path, curve: &[CovPoint]) -> Result<()> {
    write_cov_csv(create(path)?, curve)
}

pub fn write_bounds_table_csv<W: Write>(out: W, curve: &TailCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "bound1", "bound2", "bound3_line1", "bound3_line2"])?;
    for k in 0..curve.len() {
        w.write_record([
            curve.t_values[k].to_string(),
            curve.bound1[k].to_string(),
            curve.bound2[k].to_string(),
            opt(curve.bound3_line1[k]),
            opt(curve.bound3_line2[k]),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn save_bounds_table_csv(path: &Path, curve: &TailCurve) -> Result<()> {
    write_bounds_table_csv(create(path)?, curve)
}
