//! File formats: trajectories (CSV and binary) and fitted models.
//!
//! Trajectory binary layout, little-endian:
//!
//! ```text
//! b"EVOTRAJ\0" | u32 version | u64 T | u64 d | T·d f64, row-major
//! ```
//!
//! Model file layout, little-endian:
//!
//! ```text
//! b"EVOLOPMD" | u32 version | u64 header_len | header (JSON) | sections | SHA-256 (32 bytes)
//! ```
//!
//! Sections are f64 row-major blocks in the order listed by the header
//! (`x_train`, `y_train`, `u`, `v`, then `singular_values` when present). The
//! checksum covers every preceding byte.

use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, FittedOperator, SnapshotPair};
use crate::kernels::{DataMatrix, KernelSpec};

const TRAJ_MAGIC: &[u8; 8] = b"EVOTRAJ\0";
const TRAJ_VERSION: u32 = 1;
const MODEL_MAGIC: &[u8; 8] = b"EVOLOPMD";
const MODEL_VERSION: u32 = 1;
pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// CSV with header `t,x0,...,x{d-1}`; `t` is `i·dt`, or the row index for maps.
pub fn trajectory_to_csv(values: &DataMatrix, dt: Option<f64>) -> String {
    let mut out = String::from("t");
    for j in 0..values.ncols() {
        out.push_str(&format!(",x{j}"));
    }
    out.push('\n');
    for (i, row) in values.rows().enumerate() {
        match dt {
            Some(dt) => out.push_str(&(i as f64 * dt).to_string()),
            None => out.push_str(&i.to_string()),
        }
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn trajectory_from_csv(text: &str) -> Result<DataMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Corrupt("empty trajectory CSV".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err(Error::Corrupt(format!("unexpected CSV header {header:?}")));
    }
    let d = cols.len() - 1;
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != d + 1 {
            return Err(Error::Corrupt(format!("row {i} has {} fields, expected {}", cells.len(), d + 1)));
        }
        for c in &cells[1..] {
            values.push(c.parse::<f64>().map_err(|e| Error::Corrupt(format!("row {i}: {e}")))?);
        }
        rows += 1;
    }
    DataMatrix::new(rows, d, values).map_err(|e| Error::Corrupt(e.to_string()))
}

pub fn trajectory_to_bytes(values: &DataMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(28 + 8 * values.as_slice().len());
    out.extend_from_slice(TRAJ_MAGIC);
    out.extend_from_slice(&TRAJ_VERSION.to_le_bytes());
    out.extend_from_slice(&(values.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(values.ncols() as u64).to_le_bytes());
    for v in values.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Corrupt("unexpected end of file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let len = count.checked_mul(8).ok_or_else(|| Error::Corrupt("section size overflow".into()))?;
        let raw = self.take(len)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

fn to_usize(v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Corrupt("size does not fit in memory".into()))
}

pub fn trajectory_from_bytes(bytes: &[u8]) -> Result<DataMatrix> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != TRAJ_MAGIC {
        return Err(Error::Corrupt("not a trajectory file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != TRAJ_VERSION {
        return Err(Error::Corrupt(format!("unsupported trajectory version {version}")));
    }
    let t = to_usize(r.u64()?)?;
    let d = to_usize(r.u64()?)?;
    let count = t.checked_mul(d).ok_or_else(|| Error::Corrupt("size overflow".into()))?;
    let values = r.f64s(count)?;
    if r.pos != bytes.len() {
        return Err(Error::Corrupt("trailing bytes after trajectory payload".into()));
    }
    DataMatrix::new(t, d, values).map_err(|e| Error::Corrupt(e.to_string()))
}

/// Reads either trajectory format, telling them apart by the binary magic.
pub fn trajectory_from_file_bytes(bytes: &[u8]) -> Result<DataMatrix> {
    if bytes.starts_with(TRAJ_MAGIC) {
        return trajectory_from_bytes(bytes);
    }
    let text = std::str::from_utf8(bytes).map_err(|_| Error::Corrupt("trajectory is neither binary nor UTF-8 CSV".into()))?;
    trajectory_from_csv(text)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Section {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ModelHeader {
    schema_version: u32,
    kernel: KernelSpec,
    config: EstimatorConfig,
    lag: usize,
    n_samples: usize,
    state_dim: usize,
    rank: usize,
    inducing: Option<Vec<usize>>,
    provenance: serde_json::Value,
    sections: Vec<Section>,
}

fn push_mat(out: &mut Vec<u8>, m: faer::MatRef<'_, f64>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
}

/// Serializes a model; `provenance` is stored verbatim in the header.
pub fn model_to_bytes(model: &FittedOperator, provenance: &serde_json::Value) -> Result<Vec<u8>> {
    let n = model.n_samples();
    let d = model.state_dim();
    let r = model.rank();
    let mut sections = vec![
        Section { name: "x_train".into(), rows: n, cols: d },
        Section { name: "y_train".into(), rows: n, cols: d },
        Section { name: "u".into(), rows: model.u().nrows(), cols: r },
        Section { name: "v".into(), rows: n, cols: r },
    ];
    if model.singular_values().is_some() {
        sections.push(Section { name: "singular_values".into(), rows: r, cols: 1 });
    }
    let header = ModelHeader {
        schema_version: MODEL_SCHEMA_VERSION,
        kernel: *model.kernel(),
        config: *model.config(),
        lag: model.lag(),
        n_samples: n,
        state_dim: d,
        rank: r,
        inducing: model.inducing().map(<[usize]>::to_vec),
        provenance: provenance.clone(),
        sections,
    };
    let header = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for v in model.x_train().as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in model.y_train().as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    push_mat(&mut out, model.u());
    push_mat(&mut out, model.v());
    if let Some(s) = model.singular_values() {
        for v in s {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

/// Parses and verifies a model file, returning the model and its provenance.
pub fn model_from_bytes(bytes: &[u8]) -> Result<(FittedOperator, serde_json::Value)> {
    if bytes.len() < 8 + 4 + 8 + 32 {
        return Err(Error::Corrupt("model file too short".into()));
    }
    if &bytes[..8] != MODEL_MAGIC {
        return Err(Error::Corrupt("not a model file (bad magic)".into()));
    }
    let (body, stored) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != stored {
        return Err(Error::Corrupt("model checksum mismatch".into()));
    }
    let mut r = Reader { bytes: body, pos: 8 };
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::Corrupt(format!("unsupported model version {version}")));
    }
    let header_len = to_usize(r.u64()?)?;
    let header: ModelHeader =
        serde_json::from_slice(r.take(header_len)?).map_err(|e| Error::Corrupt(format!("model header: {e}")))?;
    if header.schema_version != MODEL_SCHEMA_VERSION {
        return Err(Error::Corrupt(format!("unsupported schema version {}", header.schema_version)));
    }
    let mut x = None;
    let mut y = None;
    let mut u = None;
    let mut v = None;
    let mut sv = None;
    for s in &header.sections {
        let count = s.rows.checked_mul(s.cols).ok_or_else(|| Error::Corrupt("section size overflow".into()))?;
        let data = r.f64s(count)?;
        match s.name.as_str() {
            "x_train" => x = Some(DataMatrix::new(s.rows, s.cols, data)?),
            "y_train" => y = Some(DataMatrix::new(s.rows, s.cols, data)?),
            "u" => u = Some(Mat::from_fn(s.rows, s.cols, |i, j| data[i * s.cols + j])),
            "v" => v = Some(Mat::from_fn(s.rows, s.cols, |i, j| data[i * s.cols + j])),
            "singular_values" => sv = Some(data),
            other => return Err(Error::Corrupt(format!("unknown section {other:?}"))),
        }
    }
    if r.pos != body.len() {
        return Err(Error::Corrupt("trailing bytes after model sections".into()));
    }
    let missing = |name: &str| Error::Corrupt(format!("missing section {name}"));
    let x = x.ok_or_else(|| missing("x_train"))?;
    let y = y.ok_or_else(|| missing("y_train"))?;
    let pairs = SnapshotPair::new(x, y, header.lag)?;
    let model = FittedOperator::from_parts(
        header.kernel,
        header.config,
        pairs,
        header.inducing,
        u.ok_or_else(|| missing("u"))?,
        v.ok_or_else(|| missing("v"))?,
        sv,
    )
    .map_err(|e| Error::Corrupt(e.to_string()))?;
    Ok((model, header.provenance))
}

pub fn save_model(path: &Path, model: &FittedOperator, provenance: &serde_json::Value) -> Result<()> {
    std::fs::write(path, model_to_bytes(model, provenance)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(FittedOperator, serde_json::Value)> {
    model_from_bytes(&std::fs::read(path)?)
}
