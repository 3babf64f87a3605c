//! Dataset readers and writers: IDX (MNIST) binaries, CSV sample matrices and
//! the synthetic 2-D toy sets.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::SampleBatch;
use crate::numerics::{Matrix, Rng};

pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_UBYTE: u8 = 0x08;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxHeader {
    pub magic: u32,
    pub dims: Vec<u32>,
}

impl IdxHeader {
    pub fn element_type(&self) -> u8 {
        (self.magic >> 8) as u8
    }

    pub fn rank(&self) -> usize {
        (self.magic & 0xff) as usize
    }

    fn payload_len(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }
}

/// Parsed IDX file: header plus the raw unsigned-byte payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxArray {
    pub header: IdxHeader,
    pub data: Vec<u8>,
}

/// Samples with optional integer labels. Image pixels are scaled to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetHandle {
    pub data: Matrix,
    pub labels: Option<Vec<u32>>,
}

impl DatasetHandle {
    pub fn new(data: Matrix, labels: Option<Vec<u32>>) -> Result<Self> {
        if !data.is_finite() {
            return Err(Error::NonFinite("dataset".into()));
        }
        if let Some(l) = &labels {
            if l.len() != data.rows() {
                return Err(Error::invalid(
                    "labels",
                    format!("{} labels for {} samples", l.len(), data.rows()),
                ));
            }
        }
        Ok(Self { data, labels })
    }

    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Parses IDX bytes; `path` is only used in error messages.
pub fn parse_idx(bytes: &[u8], path: &Path) -> Result<IdxArray> {
    let truncated = |expected: usize| Error::IdxTruncated {
        path: path.to_path_buf(),
        expected,
        actual: bytes.len(),
    };
    if bytes.len() < 4 {
        return Err(truncated(4));
    }
    let magic = be_u32(bytes, 0);
    if magic >> 16 != 0 || magic & 0xff == 0 {
        return Err(Error::IdxBadMagic {
            path: path.to_path_buf(),
            magic,
        });
    }
    let rank = (magic & 0xff) as usize;
    let code = (magic >> 8) as u8;
    if code != IDX_UBYTE {
        return Err(Error::IdxUnsupportedType {
            path: path.to_path_buf(),
            code,
        });
    }
    let header_len = 4 + 4 * rank;
    if bytes.len() < header_len {
        return Err(truncated(header_len));
    }
    let dims: Vec<u32> = (0..rank).map(|i| be_u32(bytes, 4 + 4 * i)).collect();
    let header = IdxHeader { magic, dims };
    let expected = header_len + header.payload_len();
    if bytes.len() < expected {
        return Err(truncated(expected));
    }
    if bytes.len() > expected {
        return Err(Error::IdxTrailing {
            path: path.to_path_buf(),
            extra: bytes.len() - expected,
        });
    }
    Ok(IdxArray {
        header,
        data: bytes[header_len..].to_vec(),
    })
}

pub fn read_idx(path: impl AsRef<Path>) -> Result<IdxArray> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx(&bytes, path)
}

/// Reads an image file, flattening trailing dimensions and scaling bytes by `1/255`.
pub fn read_idx_images(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let idx = read_idx(path)?;
    if idx.header.rank() < 2 {
        return Err(Error::IdxKind {
            path: path.to_path_buf(),
            expected: "image (rank >= 2)",
            found: format!("rank {}", idx.header.rank()),
        });
    }
    let n = idx.header.dims[0] as usize;
    let d: usize = idx.header.dims[1..].iter().map(|&v| v as usize).product();
    let values = idx.data.iter().map(|&b| f64::from(b) / 255.0).collect();
    Matrix::new(n, d, values)
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u32>> {
    let path = path.as_ref();
    let idx = read_idx(path)?;
    if idx.header.rank() != 1 {
        return Err(Error::IdxKind {
            path: path.to_path_buf(),
            expected: "label (rank 1)",
            found: format!("rank {}", idx.header.rank()),
        });
    }
    Ok(idx.data.iter().map(|&b| u32::from(b)).collect())
}

pub fn load_idx_dataset(images: impl AsRef<Path>, labels: Option<&Path>) -> Result<DatasetHandle> {
    let data = read_idx_images(images)?;
    let labels = labels.map(read_idx_labels).transpose()?;
    DatasetHandle::new(data, labels)
}

/// Serialises unsigned-byte data as IDX bytes.
pub fn encode_idx(dims: &[u32], data: &[u8]) -> Result<Vec<u8>> {
    let rank =
        u8::try_from(dims.len()).map_err(|_| Error::invalid("IDX rank", "too many dimensions"))?;
    let expected: usize = dims.iter().map(|&d| d as usize).product();
    if expected != data.len() {
        return Err(Error::invalid(
            "IDX payload",
            format!("dims need {expected} bytes, got {}", data.len()),
        ));
    }
    let magic = u32::from(IDX_UBYTE) << 8 | u32::from(rank);
    let mut out = Vec::with_capacity(4 + 4 * dims.len() + data.len());
    out.extend_from_slice(&magic.to_be_bytes());
    for d in dims {
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(data);
    Ok(out)
}

/// Reads a numeric CSV with one header row. All rows must have the header's width.
pub fn read_csv_samples(path: impl AsRef<Path>) -> Result<SampleBatch> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    let cols = reader.headers()?.len();
    if cols == 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: "missing header row".into(),
        });
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        // header is row 1
        let row = i + 2;
        let record = record.map_err(|e| Error::CsvRow {
            path: path.to_path_buf(),
            row,
            reason: e.to_string(),
        })?;
        if record.len() != cols {
            return Err(Error::CsvRow {
                path: path.to_path_buf(),
                row,
                reason: format!("expected {cols} fields, found {}", record.len()),
            });
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::CsvRow {
                path: path.to_path_buf(),
                row,
                reason: format!("column {c}: {field:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::CsvRow {
                    path: path.to_path_buf(),
                    row,
                    reason: format!("column {c}: non-finite value"),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: "no data rows".into(),
        });
    }
    SampleBatch::new(Matrix::new(rows, cols, values)?)
}

fn write_csv(path: &Path, header: Vec<String>, m: &Matrix, labels: Option<&[u32]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    w.write_record(&header)?;
    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for (i, row) in m.row_iter().enumerate() {
        fields.clear();
        // `{:?}` is the shortest representation that parses back to the same f64
        fields.extend(row.iter().map(|v| format!("{v:?}")));
        if let Some(l) = labels {
            fields.push(l[i].to_string());
        }
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn column_header(cols: usize) -> Vec<String> {
    (0..cols).map(|c| format!("c{c}")).collect()
}

/// Writes samples under a `c0,c1,...` header with round-trip exact values.
pub fn write_csv_samples(batch: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    write_csv(path.as_ref(), column_header(batch.cols()), batch, None)
}

/// Like [`write_csv_samples`] with a trailing `label` column when labels are given.
pub fn write_csv_with_labels(
    batch: &Matrix,
    labels: Option<&[u32]>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut header = column_header(batch.cols());
    if let Some(l) = labels {
        if l.len() != batch.rows() {
            return Err(Error::invalid(
                "labels",
                format!("{} labels for {} rows", l.len(), batch.rows()),
            ));
        }
        header.push("label".into());
    }
    write_csv(path.as_ref(), header, batch, labels)
}

pub const SYNTHETIC_NAMES: [&str; 3] = ["ring8", "two_moons", "grid25"];

/// Toy 2-D datasets.
///
/// - `ring8`: 8 Gaussian blobs centred on a radius-4 circle at 45 degree spacing.
/// - `two_moons`: two interleaved half circles (label 0 upper, 1 lower).
/// - `grid25`: 25 Gaussian blobs on the grid `{-4, -2, 0, 2, 4}^2`.
///
/// Points are assigned to components round-robin; `noise` is the std of the
/// isotropic Gaussian added to every point.
pub fn make_synthetic(name: &str, n: usize, noise: f64, rng: &mut Rng) -> Result<DatasetHandle> {
    if n == 0 {
        return Err(Error::invalid(
            "n",
            "synthetic dataset needs at least one sample",
        ));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid(
            "noise",
            format!("must be non-negative, got {noise}"),
        ));
    }
    let mut values = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    match name {
        "ring8" => {
            for i in 0..n {
                let k = i % 8;
                let angle = k as f64 * PI / 4.0;
                values.push(4.0 * angle.cos());
                values.push(4.0 * angle.sin());
                labels.push(k as u32);
            }
        }
        "two_moons" => {
            let upper = n.div_ceil(2);
            let lower = n - upper;
            let step = |count: usize, j: usize| {
                if count > 1 {
                    PI * j as f64 / (count - 1) as f64
                } else {
                    0.0
                }
            };
            for j in 0..upper {
                let t = step(upper, j);
                values.push(t.cos());
                values.push(t.sin());
                labels.push(0);
            }
            for j in 0..lower {
                let t = step(lower, j);
                values.push(1.0 - t.cos());
                values.push(0.5 - t.sin());
                labels.push(1);
            }
        }
        "grid25" => {
            for i in 0..n {
                let k = i % 25;
                values.push(-4.0 + 2.0 * (k % 5) as f64);
                values.push(-4.0 + 2.0 * (k / 5) as f64);
                labels.push(k as u32);
            }
        }
        other => {
            return Err(Error::UnknownDataset {
                name: other.to_string(),
                valid: SYNTHETIC_NAMES.join(", "),
            })
        }
    }
    if noise > 0.0 {
        for v in &mut values {
            *v += noise * rng.standard_normal();
        }
    }
    DatasetHandle::new(Matrix::new(n, 2, values)?, Some(labels))
}
