use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    /// Standard normal entries, columns scaled to unit L2 norm.
    Gaussian,
    /// Uniform on `[0, 1)`.
    Uniform01,
    /// `0` or `1` with equal probability.
    Bernoulli,
}

/// Dense `K x N` sampling matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    kind: Option<MatrixKind>,
    seed: Option<u64>,
}

impl SamplingMatrix {
    pub fn generate(rows: usize, cols: usize, kind: MatrixKind, seed: u64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid(format!("sampling matrix needs K, N >= 1, got {rows}x{cols}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries: Vec<f64> = match kind {
            MatrixKind::Gaussian => (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect(),
            MatrixKind::Uniform01 => (0..rows * cols).map(|_| rng.random::<f64>()).collect(),
            MatrixKind::Bernoulli => (0..rows * cols).map(|_| f64::from(u8::from(rng.random::<bool>()))).collect(),
        };
        if kind == MatrixKind::Gaussian {
            for c in 0..cols {
                let norm = (0..rows).map(|r| entries[r * cols + c].powi(2)).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for r in 0..rows {
                        entries[r * cols + c] /= norm;
                    }
                }
            }
        }
        Ok(Self { rows, cols, entries, kind: Some(kind), seed: Some(seed) })
    }

    /// Matrix from explicit row-major entries.
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(mismatch(format!(
                "{} entries cannot form a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sampling matrix entries must be finite"));
        }
        Ok(Self { rows, cols, entries, kind: None, seed: None })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self) -> Option<MatrixKind> {
        self.kind
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.cols)
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.entries)
    }

    /// `A·x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(mismatch(format!("vector length {} != {} columns", x.len(), self.cols)));
        }
        Ok(self.row_iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect())
    }

    /// `K` lines of `N` comma-separated values in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.row_iter() {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write!(out, "{v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut rows = 0;
        let mut cols = None;
        for (line_no, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let before = entries.len();
            for field in line.split(',') {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Parse(format!("line {}: bad number {field:?}", line_no + 1))
                })?;
                entries.push(v);
            }
            let count = entries.len() - before;
            match cols {
                None => cols = Some(count),
                Some(c) if c != count => {
                    return Err(Error::Parse(format!(
                        "line {}: expected {c} columns, found {count}",
                        line_no + 1
                    )))
                }
                _ => {}
            }
            rows += 1;
        }
        let cols = cols.ok_or_else(|| Error::Parse("empty matrix".into()))?;
        Self::from_entries(rows, cols, entries)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationVector(Vec<f64>);

impl ObservationVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("observations must be finite"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `Aᵀ·o`, the starting estimate of an iterative reconstruction.
pub fn initial_estimate(a: &SamplingMatrix, o: &ObservationVector) -> Result<Vec<f64>> {
    if o.len() != a.rows() {
        return Err(mismatch(format!(
            "observation length {} does not match {} rows",
            o.len(),
            a.rows()
        )));
    }
    let mut out = vec![0.0; a.cols()];
    for (row, &oi) in a.row_iter().zip(o.values()) {
        for (acc, &aij) in out.iter_mut().zip(row) {
            *acc += aij * oi;
        }
    }
    Ok(out)
}

pub fn l1_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}
