//! Canonical multivariate series, CSV ingestion/emission and correlation
//! diagnostics.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// A `T × L` real-valued series stored row-major.
///
/// Rows are time points, columns are components. All entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultivariateSeries {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
    names: Vec<String>,
    start_index: i64,
}

fn default_names(cols: usize) -> Vec<String> {
    (1..=cols).map(|i| format!("series{i}")).collect()
}

impl MultivariateSeries {
    /// Builds a series from row-major values.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, names: Option<Vec<String>>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyInput);
        }
        if values.len() != rows * cols {
            return Err(Error::InvalidSeries(format!(
                "expected {} values for {rows}x{cols}, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "non-finite value at row {}, column {}",
                pos / cols + 1,
                pos % cols + 1
            )));
        }
        let names = match names {
            Some(n) if n.len() == cols => n,
            Some(n) => {
                return Err(Error::InvalidSeries(format!(
                    "{} names for {cols} components",
                    n.len()
                )))
            }
            None => default_names(cols),
        };
        Ok(Self {
            values,
            rows,
            cols,
            names,
            start_index: 1,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput)?;
        let cols = first.len();
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::InvalidSeries(format!(
                    "row {} has {} values, expected {cols}",
                    i + 1,
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, values, None)
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().ok_or(Error::EmptyInput)?.len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::InvalidSeries("columns differ in length".into()));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for t in 0..rows {
            values.extend(columns.iter().map(|c| c[t]));
        }
        Self::new(rows, cols, values, None)
    }

    /// Univariate convenience constructor.
    pub fn univariate(x: &[f64]) -> Result<Self> {
        Self::new(x.len(), 1, x.to_vec(), None)
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self {
            values: vec![0.0; other.values.len()],
            rows: other.rows,
            cols: other.cols,
            names: other.names.clone(),
            start_index: other.start_index,
        }
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.cols {
            return Err(Error::InvalidSeries(format!(
                "{} names for {} components",
                names.len(),
                self.cols
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn with_start_index(mut self, start: i64) -> Self {
        self.start_index = start;
        self
    }

    /// Number of time points `T`.
    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    /// Number of components `L`.
    pub fn dim(&self) -> usize {
        self.cols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn start_index(&self) -> i64 {
        self.start_index
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row `t` (0-based).
    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.cols..(t + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols)
    }

    pub fn get(&self, t: usize, l: usize) -> f64 {
        self.values[t * self.cols + l]
    }

    pub fn column(&self, l: usize) -> Vec<f64> {
        self.rows().map(|r| r[l]).collect()
    }

    /// Rows `lo..hi` (0-based, half-open) as a new series with the same names.
    pub fn slice_rows(&self, lo: usize, hi: usize) -> Self {
        assert!(lo < hi && hi <= self.rows, "invalid row range {lo}..{hi}");
        Self {
            values: self.values[lo * self.cols..hi * self.cols].to_vec(),
            rows: hi - lo,
            cols: self.cols,
            names: self.names.clone(),
            start_index: self.start_index + lo as i64,
        }
    }

    /// Elementwise map producing a same-shape series.
    pub(crate) fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub(crate) fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            ..self.clone()
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map_values(|v| v * c)
    }

    /// Stacks series with identical component count vertically.
    pub fn concat(parts: &[Self]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptyInput)?;
        let cols = first.cols;
        let mut values = Vec::new();
        let mut rows = 0;
        for p in parts {
            if p.cols != cols {
                return Err(Error::InvalidSeries("component count mismatch".into()));
            }
            values.extend_from_slice(&p.values);
            rows += p.rows;
        }
        Ok(Self {
            values,
            rows,
            cols,
            names: first.names.clone(),
            start_index: first.start_index,
        })
    }

    pub(crate) fn from_parts_unchecked(rows: usize, cols: usize, values: Vec<f64>, names: Vec<String>) -> Self {
        debug_assert_eq!(values.len(), rows * cols);
        Self {
            values,
            rows,
            cols,
            names,
            start_index: 1,
        }
    }

    /// Column means.
    pub fn means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for r in self.rows() {
            for (a, v) in m.iter_mut().zip(r) {
                *a += v;
            }
        }
        m.iter_mut().for_each(|a| *a /= self.rows as f64);
        m
    }

    /// Copy with each column's mean subtracted.
    pub fn centered(&self) -> Self {
        let m = self.means();
        let mut out = self.clone();
        for (i, v) in out.values.iter_mut().enumerate() {
            *v -= m[i % self.cols];
        }
        out
    }

    /// Sample covariance matrix (denominator `T - 1`), row-major `L × L`.
    pub fn covariance(&self) -> Vec<f64> {
        let l = self.cols;
        let m = self.means();
        let mut c = vec![0.0; l * l];
        for r in self.rows() {
            for i in 0..l {
                let di = r[i] - m[i];
                for j in i..l {
                    c[i * l + j] += di * (r[j] - m[j]);
                }
            }
        }
        let denom = (self.rows.max(2) - 1) as f64;
        for i in 0..l {
            for j in i..l {
                c[i * l + j] /= denom;
                c[j * l + i] = c[i * l + j];
            }
        }
        c
    }
}

/// Symmetric `L × L` Pearson correlation matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

pub fn correlation_matrix(s: &MultivariateSeries) -> Result<CorrelationMatrix> {
    if s.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 3 rows, got {}",
            s.len()
        )));
    }
    let l = s.dim();
    let cols: Vec<Vec<f64>> = (0..l).map(|j| s.column(j)).collect();
    if let Some(j) = cols.iter().position(|c| stats::variance(c) <= 0.0) {
        return Err(Error::DegenerateComponent(j));
    }
    let mut entries = vec![0.0; l * l];
    for i in 0..l {
        entries[i * l + i] = 1.0;
        for j in i + 1..l {
            let r = stats::pearson(&cols[i], &cols[j]).ok_or(Error::DegenerateComponent(i))?;
            entries[i * l + j] = r;
            entries[j * l + i] = r;
        }
    }
    Ok(CorrelationMatrix { dim: l, entries })
}

#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { has_header: true }
    }
}

fn is_time_column(name: &str) -> bool {
    matches!(name.trim().to_ascii_lowercase().as_str(), "time" | "timestamp")
}

/// Reads a numeric CSV. A leading `time`/`timestamp` column is dropped.
///
/// Row numbers in errors are 1-based file lines (the header is row 1).
pub fn load_csv<R: Read>(source: R, opts: CsvOptions) -> Result<MultivariateSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut records = reader.records();
    let mut names: Option<Vec<String>> = None;
    let mut skip_first = false;
    let mut expected: Option<usize> = None;
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut line = 0usize;

    if opts.has_header {
        match records.next() {
            None => return Err(Error::EmptyInput),
            Some(rec) => {
                let rec = rec.map_err(|e| csv_error(e, 1))?;
                line = 1;
                let mut header: Vec<String> = rec.iter().map(str::to_string).collect();
                if header.first().is_some_and(|h| is_time_column(h)) {
                    log::warn!("dropping time column '{}'", header[0]);
                    header.remove(0);
                    skip_first = true;
                }
                expected = Some(rec.len());
                names = Some(header);
            }
        }
    }

    for rec in records {
        line += 1;
        let rec = rec.map_err(|e| csv_error(e, line))?;
        let row_no = rec.position().map_or(line, |p| p.line() as usize);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        match expected {
            None => expected = Some(rec.len()),
            Some(n) if n != rec.len() => {
                return Err(Error::Parse {
                    row: row_no,
                    column: rec.len().min(n) + 1,
                    message: format!("expected {n} fields, found {}", rec.len()),
                })
            }
            _ => {}
        }
        for (j, cell) in rec.iter().enumerate() {
            if skip_first && j == 0 {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: row_no,
                column: j + 1,
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: row_no,
                    column: j + 1,
                    message: format!("'{cell}' is not finite"),
                });
            }
            values.push(v);
        }
        rows += 1;
    }

    if rows == 0 {
        return Err(Error::EmptyInput);
    }
    let cols = values.len() / rows;
    if cols == 0 {
        return Err(Error::EmptyInput);
    }
    MultivariateSeries::new(rows, cols, values, names)
}

fn csv_error(e: csv::Error, line: usize) -> Error {
    Error::Parse {
        row: e.position().map_or(line, |p| p.line() as usize),
        column: 0,
        message: e.to_string(),
    }
}

/// Writes a header row plus one row per time point, each value in shortest
/// round-trip decimal form.
pub fn write_csv<W: Write>(series: &MultivariateSeries, sink: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    w.write_record(series.names()).map_err(csv_write_error)?;
    let mut buf = Vec::with_capacity(series.dim());
    for r in series.rows() {
        buf.clear();
        buf.extend(r.iter().map(|v| v.to_string()));
        w.write_record(&buf).map_err(csv_write_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_write_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidSeries(format!("{other:?}")),
    }
}
