//! Tabular data ingestion, standardization and seeded randomness.
//!
//! Everything downstream consumes a [`Dataset`] (an immutable N×d matrix of
//! finite reals with optional binary labels) plus an [`RngSeed`]. There is no
//! hidden global state: the same seed and the same inputs always reproduce
//! the same outputs bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_vec(data: Vec<f64>, rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix shape mismatch");
        Matrix { data, rows, cols }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * d);
        for r in rows {
            assert_eq!(r.len(), d, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix { data, rows: n, cols: d }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Euclidean distance with fixed left-to-right accumulation.
///
/// The accumulation order is part of the library contract: it makes
/// `dist(a, b)` bit-identical to `dist(b, a)` and keeps independently
/// computed oracles exactly comparable.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut sum = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        sum += d * d;
    }
    sum.sqrt()
}

/// A 64-bit seed from which every random stream in the pipeline is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Deterministic stream for this seed.
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Derive an independent child seed for a tagged sub-task (per batch,
    /// per iteration, per point). splitmix64 finalizer over (seed, tag).
    pub fn derive(self, tag: u64) -> RngSeed {
        let mut z = self
            .0
            .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(tag.wrapping_add(1)));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        RngSeed(z ^ (z >> 31))
    }
}

/// An immutable N×d table of finite reals with named features and optional
/// binary ground-truth labels (1 = anomaly).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub values: Matrix,
    pub feature_names: Vec<String>,
    pub labels: Option<Vec<u8>>,
}

impl Dataset {
    pub fn new(values: Matrix, feature_names: Vec<String>, labels: Option<Vec<u8>>) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::CsvFormat("dataset must have at least 1 row and 1 column".into()));
        }
        if feature_names.len() != values.cols() {
            return Err(Error::CsvFormat(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                values.cols()
            )));
        }
        if let Some(ref l) = labels {
            if l.len() != values.rows() {
                return Err(Error::CsvFormat(format!(
                    "{} labels for {} rows",
                    l.len(),
                    values.rows()
                )));
            }
        }
        if let Some(pos) = values.as_slice().iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos / values.cols(), pos % values.cols());
            return Err(Error::CsvParse {
                row: r + 1,
                col: c + 1,
                msg: "non-finite value".into(),
            });
        }
        Ok(Dataset {
            values,
            feature_names,
            labels,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.values.cols()
    }
}

/// Parse CSV text: comma-separated, mandatory header row, '.' decimal, UTF-8.
///
/// When `label_column` names a header, that column is extracted as labels and
/// its values must be exactly 0 or 1. Every other cell must parse as a finite
/// real. Never panics on malformed input.
pub fn parse_csv(text: &str, label_column: Option<&str>) -> Result<Dataset> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate()
        .filter(|(_, l)| !l.is_empty());

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::CsvFormat("empty input: header row required".into()))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.iter().any(String::is_empty) {
        return Err(Error::CsvFormat("empty column name in header".into()));
    }
    let width = names.len();

    let label_idx = match label_column {
        Some(name) => Some(names.iter().position(|n| n == name).ok_or_else(|| {
            Error::CsvFormat(format!("label column `{name}` not found in header"))
        })?),
        None => None,
    };

    let mut values: Vec<f64> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    let mut n_rows = 0usize;

    for (line_no, line) in lines {
        let row_no = line_no + 1; // 1-based, header is row 1
        let mut col_count = 0usize;
        for (c, cell) in line.split(',').enumerate() {
            col_count += 1;
            if col_count > width {
                break;
            }
            let v: f64 = cell.trim().parse().map_err(|_| Error::CsvParse {
                row: row_no,
                col: c + 1,
                msg: format!("cell `{}` is not a number", cell.trim()),
            })?;
            if Some(c) == label_idx {
                if v != 0.0 && v != 1.0 {
                    return Err(Error::CsvParse {
                        row: row_no,
                        col: c + 1,
                        msg: format!("label value `{}` must be 0 or 1", cell.trim()),
                    });
                }
                labels.push(v as u8);
            } else {
                if !v.is_finite() {
                    return Err(Error::CsvParse {
                        row: row_no,
                        col: c + 1,
                        msg: format!("cell `{}` is not finite", cell.trim()),
                    });
                }
                values.push(v);
            }
        }
        if col_count != width {
            return Err(Error::CsvFormat(format!(
                "ragged row {row_no}: expected {width} cells, got {col_count}"
            )));
        }
        n_rows += 1;
    }

    if n_rows == 0 {
        return Err(Error::CsvFormat("no data rows".into()));
    }

    let d = width - usize::from(label_idx.is_some());
    if d == 0 {
        return Err(Error::CsvFormat("no feature columns".into()));
    }
    let feature_names: Vec<String> = names
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != label_idx)
        .map(|(_, n)| n.clone())
        .collect();

    Dataset::new(
        Matrix::from_vec(values, n_rows, d),
        feature_names,
        label_idx.map(|_| labels),
    )
}

/// Load a dataset from a CSV file. See [`parse_csv`] for the dialect.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, label_column)
}

/// Render a dataset back to CSV text. Values use Rust's shortest
/// round-trippable decimal form, so `parse_csv(write_csv(d))` is an identity.
/// Labels, when present, are written as a trailing `label` column.
pub fn csv_string(data: &Dataset) -> String {
    let mut out = String::new();
    out.push_str(&data.feature_names.join(","));
    if data.labels.is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for i in 0..data.n() {
        let row = data.values.row(i);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        if let Some(ref labels) = data.labels {
            let _ = write!(out, ",{}", labels[i]);
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, csv_string(data))?;
    Ok(())
}

/// Z-score each feature to mean 0, standard deviation 1 (population std).
/// Constant features map to all-zeros. Idempotent to within 1e-9.
pub fn standardize(data: &Dataset) -> Result<Dataset> {
    let n = data.n();
    if n < 2 {
        return Err(Error::param("data", "standardize requires at least 2 rows"));
    }
    let d = data.d();
    let mut out = data.values.clone();
    for j in 0..d {
        let mut mean = 0.0;
        for i in 0..n {
            mean += data.values.get(i, j);
        }
        mean /= n as f64;
        let mut var = 0.0;
        for i in 0..n {
            let dev = data.values.get(i, j) - mean;
            var += dev * dev;
        }
        let std = (var / n as f64).sqrt();
        for i in 0..n {
            let v = if std == 0.0 {
                0.0
            } else {
                (data.values.get(i, j) - mean) / std
            };
            out.set(i, j, v);
        }
    }
    Dataset::new(out, data.feature_names.clone(), data.labels.clone())
}
