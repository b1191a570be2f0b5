//! Training/query data model, CSV ingestion, and rescaling.
//!
//! The CSV interchange format is deliberately rigid: comma-separated, `.`
//! decimal, no quoting, UTF-8, mandatory `x1,...,xd,y` header. Floats are
//! emitted with 17 significant digits so a load/save round trip is
//! bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::numkit::Matrix;

/// Scattered training data: `n` points in `d` dimensions with paired
/// scalar responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Matrix,
    responses: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("file is empty")]
    EmptyFile,
    #[error("malformed header: expected x1,...,xd,y, got '{found}'")]
    MalformedHeader { found: String },
    #[error("record {row} is malformed: {reason}")]
    MalformedRecord { row: usize, reason: String },
    #[error("non-finite value in record {row}")]
    NonFiniteValue { row: usize },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Dataset {
    /// Builds a dataset, validating finiteness and matching lengths.
    pub fn new(points: Matrix, responses: Vec<f64>) -> Result<Self, DatasetError> {
        if points.rows() != responses.len() {
            return Err(DatasetError::DimensionMismatch {
                expected: points.rows(),
                found: responses.len(),
            });
        }
        assert!(points.rows() >= 1, "dataset needs at least one point");
        for i in 0..points.rows() {
            if !points.row(i).iter().all(|v| v.is_finite()) || !responses[i].is_finite() {
                return Err(DatasetError::NonFiniteValue { row: i });
            }
        }
        Ok(Self { points, responses })
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn response(&self, i: usize) -> f64 {
        self.responses[i]
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }
}

/// Parses a dataset from the CSV interchange format.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(&text)
}

pub(crate) fn parse_csv(text: &str) -> Result<Dataset, DatasetError> {
    let mut lines = text.lines().filter(|l| !l.is_empty());
    let header = lines.next().ok_or(DatasetError::EmptyFile)?;
    let d = check_header(header)?;

    let mut data = Vec::new();
    let mut responses = Vec::new();
    let mut rows = 0usize;
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            return Err(DatasetError::MalformedRecord {
                row,
                reason: format!("expected {} fields, got {}", d + 1, fields.len()),
            });
        }
        let mut parsed = Vec::with_capacity(d + 1);
        for field in &fields {
            let v: f64 = field.trim().parse().map_err(|_| DatasetError::MalformedRecord {
                row,
                reason: format!("cannot parse '{field}' as a number"),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::NonFiniteValue { row });
            }
            parsed.push(v);
        }
        responses.push(parsed.pop().unwrap());
        data.extend_from_slice(&parsed);
        rows += 1;
    }
    if rows == 0 {
        return Err(DatasetError::EmptyFile);
    }
    Dataset::new(Matrix::from_vec(rows, d, data), responses)
}

fn check_header(header: &str) -> Result<usize, DatasetError> {
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    let bad = || DatasetError::MalformedHeader {
        found: header.to_string(),
    };
    if fields.len() < 2 || fields.last() != Some(&"y") {
        return Err(bad());
    }
    let d = fields.len() - 1;
    for (i, f) in fields[..d].iter().enumerate() {
        if *f != format!("x{}", i + 1) {
            return Err(bad());
        }
    }
    Ok(d)
}

/// Writes a dataset in the CSV interchange format (17 significant digits).
pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let text = to_csv(data);
    fs::write(path, text).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn to_csv(data: &Dataset) -> String {
    let mut out = String::new();
    for j in 0..data.dim() {
        let _ = write!(out, "x{},", j + 1);
    }
    out.push_str("y\n");
    for i in 0..data.len() {
        for v in data.point(i) {
            let _ = write!(out, "{},", format_float(*v));
        }
        let _ = writeln!(out, "{}", format_float(data.response(i)));
    }
    out
}

/// 17 significant digits: lossless for f64 round trips.
pub(crate) fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Loads query points: same format as [`load_csv`] but the trailing `y`
/// column is optional (header `x1,...,xd` alone is accepted).
pub fn load_query_csv(path: impl AsRef<Path>) -> Result<(Matrix, Option<Vec<f64>>), DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text.lines().filter(|l| !l.is_empty());
    let header = lines.next().ok_or(DatasetError::EmptyFile)?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    let has_y = fields.last() == Some(&"y");
    let d = if has_y { fields.len() - 1 } else { fields.len() };
    if d == 0 {
        return Err(DatasetError::MalformedHeader {
            found: header.to_string(),
        });
    }
    for (i, f) in fields[..d].iter().enumerate() {
        if *f != format!("x{}", i + 1) {
            return Err(DatasetError::MalformedHeader {
                found: header.to_string(),
            });
        }
    }

    let width = d + usize::from(has_y);
    let mut data = Vec::new();
    let mut ys = Vec::new();
    let mut rows = 0usize;
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(DatasetError::MalformedRecord {
                row,
                reason: format!("expected {width} fields, got {}", fields.len()),
            });
        }
        for (k, field) in fields.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| DatasetError::MalformedRecord {
                row,
                reason: format!("cannot parse '{field}' as a number"),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::NonFiniteValue { row });
            }
            if k < d {
                data.push(v);
            } else {
                ys.push(v);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(DatasetError::EmptyFile);
    }
    Ok((Matrix::from_vec(rows, d, data), has_y.then_some(ys)))
}

/// Direction of a rescaling transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Affine input/output rescaler fitted on a dataset.
///
/// Forward maps each input coordinate's observed `[min, max]` onto `[-1, 1]`
/// and responses to zero mean, unit sample standard deviation. Constant
/// input coordinates and constant responses map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rescaler {
    input_shift: Vec<f64>,
    input_scale: Vec<f64>,
    output_shift: f64,
    output_scale: f64,
}

impl Rescaler {
    /// Identity transform in `d` input dimensions.
    pub fn identity(d: usize) -> Self {
        Self {
            input_shift: vec![0.0; d],
            input_scale: vec![1.0; d],
            output_shift: 0.0,
            output_scale: 1.0,
        }
    }

    pub fn fit(data: &Dataset) -> Self {
        let d = data.dim();
        let n = data.len();
        let mut input_shift = vec![0.0; d];
        let mut input_scale = vec![1.0; d];
        for j in 0..d {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in 0..n {
                let v = data.point(i)[j];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            input_shift[j] = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            input_scale[j] = if half > 0.0 { half } else { 1.0 };
        }

        let mean = data.responses().iter().sum::<f64>() / n as f64;
        let output_scale = if n > 1 {
            let var = data
                .responses()
                .iter()
                .map(|y| (y - mean) * (y - mean))
                .sum::<f64>()
                / (n - 1) as f64;
            let sd = var.sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        } else {
            1.0
        };

        Self {
            input_shift,
            input_scale,
            output_shift: mean,
            output_scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.input_shift.len()
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    pub fn transform_point(&self, x: &[f64], dir: Direction) -> Result<Vec<f64>, DatasetError> {
        if x.len() != self.dim() {
            return Err(DatasetError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(match dir {
            Direction::Forward => x
                .iter()
                .zip(self.input_shift.iter().zip(&self.input_scale))
                .map(|(v, (sh, sc))| (v - sh) / sc)
                .collect(),
            Direction::Inverse => x
                .iter()
                .zip(self.input_shift.iter().zip(&self.input_scale))
                .map(|(v, (sh, sc))| v * sc + sh)
                .collect(),
        })
    }

    pub fn transform_points(&self, pts: &Matrix, dir: Direction) -> Result<Matrix, DatasetError> {
        let mut out = pts.clone();
        for i in 0..pts.rows() {
            let mapped = self.transform_point(pts.row(i), dir)?;
            out.row_mut(i).copy_from_slice(&mapped);
        }
        Ok(out)
    }

    pub fn transform_response(&self, y: f64, dir: Direction) -> f64 {
        match dir {
            Direction::Forward => (y - self.output_shift) / self.output_scale,
            Direction::Inverse => y * self.output_scale + self.output_shift,
        }
    }

    /// Applies the transform to a whole dataset.
    pub fn apply(&self, data: &Dataset, dir: Direction) -> Result<Dataset, DatasetError> {
        let points = self.transform_points(data.points(), dir)?;
        let responses = data
            .responses()
            .iter()
            .map(|&y| self.transform_response(y, dir))
            .collect();
        Dataset::new(points, responses)
    }
}
