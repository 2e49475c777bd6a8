//! Feature matrices, label files, and persisted artifacts.
//!
//! Two matrix encodings are supported: headerless CSV (one datapoint per
//! row) and a little-endian binary layout
//!
//! ```text
//! b"DCCMATRX" | rows: u64 | cols: u64 | rows*cols f64, row-major
//! ```
//!
//! which round-trips bit-exactly.

mod checkpoint;
mod codec;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};

use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;

use crate::{Error, Result};

const MATRIX_MAGIC: &[u8; 8] = b"DCCMATRX";

/// An N x D feature matrix (row = datapoint) with optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    labels: Option<Vec<usize>>,
}

impl DataMatrix {
    /// Wraps a matrix, rejecting NaN and infinities.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        check_finite(&values)?;
        Ok(Self {
            values,
            labels: None,
        })
    }

    /// Attaches ground-truth labels; their count must equal `n_points`.
    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n_points() {
            return Err(Error::LengthMismatch {
                expected: self.n_points(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n_points(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_dims(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

fn check_finite(values: &Array2<f64>) -> Result<()> {
    for ((row, col), v) in values.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
    }
    Ok(())
}

/// On-disk matrix encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// `.bin` selects the binary layout; everything else is read as CSV.
    pub fn infer(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => MatrixFormat::Binary,
            _ => MatrixFormat::Csv,
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(MatrixFormat::Csv),
            "bin" | "binary" | "binary-matrix" => Ok(MatrixFormat::Binary),
            other => Err(Error::InvalidConfig(format!("unknown matrix format '{other}'"))),
        }
    }
}

pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<DataMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let values = match format {
        MatrixFormat::Csv => {
            let text = String::from_utf8(bytes).map_err(|e| Error::Parse {
                location: path.display().to_string(),
                message: e.to_string(),
            })?;
            parse_csv(&text, &path.display().to_string())?
        }
        MatrixFormat::Binary => decode_binary_matrix(&bytes, &path.display().to_string())?,
    };
    DataMatrix::new(values)
}

pub fn save_matrix(path: impl AsRef<Path>, values: &Array2<f64>, format: MatrixFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        MatrixFormat::Csv => {
            let mut out = String::new();
            for row in values.rows() {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
            out.into_bytes()
        }
        MatrixFormat::Binary => encode_binary_matrix(values),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Parses headerless comma-separated rows. Blank lines are skipped.
pub fn parse_csv(text: &str, location: &str) -> Result<Array2<f64>> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for token in line.split(',') {
            let token = token.trim();
            let v: f64 = token.parse().map_err(|_| Error::Parse {
                location: format!("{location}:{}", line_no + 1),
                message: format!("non-numeric token '{token}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row: rows, col: count });
            }
            data.push(v);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(Error::Parse {
                    location: format!("{location}:{}", line_no + 1),
                    message: format!("row has {count} fields, expected {c}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    Ok(Array2::from_shape_vec((rows, cols), data).expect("row lengths checked"))
}

pub fn encode_binary_matrix(values: &Array2<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + values.len() * 8);
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&(values.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(values.ncols() as u64).to_le_bytes());
    for v in values.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_binary_matrix(bytes: &[u8], location: &str) -> Result<Array2<f64>> {
    let parse_err = |message: &str| Error::Parse {
        location: location.to_string(),
        message: message.to_string(),
    };
    if bytes.len() < 24 || &bytes[..8] != MATRIX_MAGIC {
        return Err(parse_err("missing binary matrix header"));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| parse_err("dimensions overflow"))?;
    let payload = &bytes[24..];
    if payload.len() != expected {
        return Err(parse_err(&format!(
            "payload has {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), data).expect("payload length checked"))
}

/// Column-wise min-max rescaling to [0, 1]. Constant columns become 0.
pub fn normalize_features(m: &DataMatrix) -> DataMatrix {
    let mut values = m.values.clone();
    for mut col in values.columns_mut() {
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        if range > 0.0 {
            col.mapv_inplace(|v| (v - lo) / range);
        } else {
            col.fill(0.0);
        }
    }
    DataMatrix {
        values,
        labels: m.labels.clone(),
    }
}

/// Reads one integer per line and relabels to contiguous codes `0..K`.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text, &path.display().to_string())
}

pub fn parse_labels(text: &str, location: &str) -> Result<Vec<usize>> {
    let mut codes = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let code: i64 = line.parse().map_err(|_| Error::Parse {
            location: format!("{location}:{}", line_no + 1),
            message: format!("invalid label '{line}'"),
        })?;
        codes.push(code);
    }
    Ok(relabel_contiguous(&codes))
}

/// Maps arbitrary integer codes to `0..K` in sorted-code order.
pub fn relabel_contiguous(codes: &[i64]) -> Vec<usize> {
    let mut unique = codes.to_vec();
    unique.sort_unstable();
    unique.dedup();
    codes
        .iter()
        .map(|c| unique.binary_search(c).expect("code present"))
        .collect()
}

pub fn save_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
