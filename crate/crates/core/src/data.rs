//! Synthetic data, IDX and CSV ingestion, and train/test splits.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{BigEndian, ByteOrder};

use crate::edf::sigmoid;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Columns of the synthetic loading matrix that carry signal, per factor.
pub const SYNTHETIC_BLOCK: usize = 20;
const SYNTHETIC_FACTOR_VARIANCES: [f64; 2] = [0.09, 0.25];

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Matrix,
    pub test: Matrix,
    pub name: String,
}

impl Dataset {
    /// Checks equal column counts and that every entry lies in `[0, 1]`.
    pub fn new(train: Matrix, test: Matrix, name: impl Into<String>) -> Result<Self> {
        if train.cols() != test.cols() {
            return Err(Error::DimensionMismatch(format!(
                "train has {} columns, test has {}",
                train.cols(),
                test.cols()
            )));
        }
        check_unit_range(&train)?;
        check_unit_range(&test)?;
        Ok(Self {
            train,
            test,
            name: name.into(),
        })
    }

    /// First `train_rows` rows for training, the rest for testing.
    pub fn split_first(x: &Matrix, train_rows: usize, name: impl Into<String>) -> Result<Self> {
        if train_rows > x.rows() {
            return Err(Error::DimensionMismatch(format!(
                "cannot take {train_rows} training rows from {}",
                x.rows()
            )));
        }
        Self::new(x.slice_rows(0, train_rows), x.slice_rows(train_rows, x.rows()), name)
    }

    pub fn d(&self) -> usize {
        self.train.cols()
    }
}

pub fn check_unit_range(x: &Matrix) -> Result<()> {
    match x.as_slice().iter().position(|v| !(0.0..=1.0).contains(v)) {
        None => Ok(()),
        Some(k) => Err(Error::Domain(format!(
            "entry ({}, {}) = {} is outside [0, 1]",
            k / x.cols(),
            k % x.cols(),
            x.as_slice()[k]
        ))),
    }
}

/// Success probabilities `Π = sigmoid(A Bᵀ)` of the synthetic model: two
/// Gaussian factors with variances 0.09 and 0.25, each loading with weight
/// one on its own block of 20 coordinates.
pub fn synthetic_probabilities(n: usize, d: usize, rng: &mut Rng) -> Matrix {
    let a: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let mut f = [0.0; 2];
            for (fk, v) in f.iter_mut().zip(SYNTHETIC_FACTOR_VARIANCES) {
                *fk = rng.normal(0.0, v.sqrt());
            }
            f
        })
        .collect();
    Matrix::from_fn(n, d, |i, j| {
        let logit = match j / SYNTHETIC_BLOCK {
            0 => a[i][0],
            1 => a[i][1],
            _ => 0.0,
        };
        sigmoid(logit)
    })
}

/// Bernoulli draws from [`synthetic_probabilities`], split 67% / 33% by
/// leading rows.
pub fn synthetic_bernoulli(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if n < 2 || d == 0 {
        return Err(Error::Domain(format!("synthetic data needs n >= 2 and d >= 1, got n={n}, d={d}")));
    }
    let mut rng = Rng::new(seed);
    let pi = synthetic_probabilities(n, d, &mut rng);
    let x = pi.as_slice().iter().map(|&p| rng.bernoulli(p) as u8 as f64).collect();
    let x = Matrix::from_vec(n, d, x)?;
    Dataset::split_first(&x, synthetic_train_rows(n), "synthetic")
}

pub fn synthetic_train_rows(n: usize) -> usize {
    n * 67 / 100
}

const IDX_UBYTE: u8 = 0x08;

/// Parses an unsigned-byte IDX tensor with 1 to 3 dimensions. The first
/// dimension indexes rows; remaining dimensions are flattened row-major.
/// Bytes are scaled by `1/255`.
pub fn parse_idx(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::Format("bad IDX magic".into()));
    }
    if bytes[2] != IDX_UBYTE {
        return Err(Error::Format(format!("unsupported IDX element type 0x{:02x}", bytes[2])));
    }
    let ndim = bytes[3] as usize;
    if !(1..=3).contains(&ndim) {
        return Err(Error::Format(format!("unsupported IDX rank {ndim}")));
    }
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(Error::Format("truncated IDX header".into()));
    }
    let dims: Vec<usize> = (0..ndim)
        .map(|k| BigEndian::read_u32(&bytes[4 + 4 * k..8 + 4 * k]) as usize)
        .collect();
    let rows = dims[0];
    let cols: usize = dims[1..].iter().product();
    let expected = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("IDX dimensions overflow".into()))?;
    let payload = &bytes[header..];
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "IDX payload has {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    Matrix::from_vec(rows, cols, payload.iter().map(|&b| b as f64 / 255.0).collect())
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<Matrix> {
    parse_idx(&fs::read(path)?)
}

/// Encodes `x` (values in `[0, 1]`) as an unsigned-byte IDX tensor.
/// `image_shape` splits each row into a 2-D image, giving a rank-3 file;
/// otherwise the file has rank 2.
pub fn encode_idx(x: &Matrix, image_shape: Option<(usize, usize)>) -> Result<Vec<u8>> {
    check_unit_range(x)?;
    let mut dims = vec![x.rows()];
    match image_shape {
        Some((h, w)) if h * w == x.cols() => dims.extend([h, w]),
        Some((h, w)) => {
            return Err(Error::DimensionMismatch(format!(
                "image shape {h}x{w} does not match {} columns",
                x.cols()
            )))
        }
        None => dims.push(x.cols()),
    }
    let mut out = vec![0, 0, IDX_UBYTE, dims.len() as u8];
    for &d in &dims {
        let d = u32::try_from(d).map_err(|_| Error::Format("dimension exceeds u32".into()))?;
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend(x.as_slice().iter().map(|&v| (v * 255.0).round() as u8));
    Ok(out)
}

pub fn write_idx(path: impl AsRef<Path>, x: &Matrix, image_shape: Option<(usize, usize)>) -> Result<()> {
    let bytes = encode_idx(x, image_shape)?;
    fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}

/// Reads a rectangular numeric CSV. Unless `allow_raw`, values must lie in
/// `[0, 1]`.
pub fn read_csv_matrix(reader: impl std::io::Read, has_header: bool, allow_raw: bool) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("CSV row {}: {e}", i + 1)))?;
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(Error::Format(format!(
                    "CSV row {} has {} fields, expected {c}",
                    i + 1,
                    rec.len()
                )))
            }
            _ => {}
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Format(format!("CSV row {}, column {}: {field:?} is not a number", i + 1, j + 1)))?;
            data.push(v);
        }
        rows += 1;
    }
    let x = Matrix::from_vec(rows, cols.unwrap_or(0), data)?;
    if !allow_raw {
        check_unit_range(&x)?;
    }
    Ok(x)
}

pub fn load_csv(path: impl AsRef<Path>, has_header: bool, allow_raw: bool) -> Result<Matrix> {
    read_csv_matrix(fs::File::open(path)?, has_header, allow_raw)
}

pub fn write_csv_matrix(w: impl Write, x: &Matrix) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in x.row_iter() {
        out.write_record(r.iter().map(|v| v.to_string()))?;
    }
    out.flush()?;
    Ok(())
}
