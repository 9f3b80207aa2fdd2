//! ODPT tensor container and validated prediction sets.
//!
//! Layout of an ODPT file, all integers little-endian:
//!
//! | bytes        | content                                  |
//! |--------------|------------------------------------------|
//! | 4            | magic `ODPT`                             |
//! | 4            | format version, `u32`, currently 1       |
//! | 1            | dtype code, `u8`: 1 = f32, 2 = i64       |
//! | 1            | ndim, `u8`                               |
//! | 8 * ndim     | dims, `u64` each                         |
//! | rest         | row-major payload                        |

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"ODPT";
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 1;
pub const DTYPE_I64: u8 = 2;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: format error: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("{path}: payload length mismatch: expected {expected} bytes, found {actual}")]
    Length {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("invalid shape {dims:?}: {msg}")]
    Shape { dims: Vec<usize>, msg: String },
    #[error("shape mismatch between {left_name} {left:?} and {right_name} {right:?}")]
    Assembly {
        left_name: &'static str,
        left: Vec<usize>,
        right_name: &'static str,
        right: Vec<usize>,
    },
    #[error("label {label} at index {index} out of range for {classes} classes")]
    LabelRange {
        index: usize,
        label: i64,
        classes: usize,
    },
    #[error("model record {model_id}: {msg}")]
    Record { model_id: String, msg: String },
}

impl TensorError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        TensorError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn format(path: &Path, msg: impl Into<String>) -> Self {
        TensorError::Format {
            path: path.to_path_buf(),
            msg: msg.into(),
        }
    }
}

fn check_dims(dims: &[usize], len: usize) -> Result<(), TensorError> {
    if dims.is_empty() {
        return Err(TensorError::Shape {
            dims: dims.to_vec(),
            msg: "zero-dimensional tensors are not allowed".into(),
        });
    }
    if dims.len() > u8::MAX as usize {
        return Err(TensorError::Shape {
            dims: dims.to_vec(),
            msg: "too many dimensions".into(),
        });
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(TensorError::Shape {
            dims: dims.to_vec(),
            msg: "every dimension must be positive".into(),
        });
    }
    let product = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| TensorError::Shape {
            dims: dims.to_vec(),
            msg: "element count overflows".into(),
        })?;
    if product != len {
        return Err(TensorError::Shape {
            dims: dims.to_vec(),
            msg: format!("product of dims is {product} but data has {len} elements"),
        });
    }
    Ok(())
}

/// Dense row-major f32 array. Every element is finite.
#[derive(Clone, PartialEq)]
pub struct TensorF32 {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl fmt::Debug for TensorF32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TensorF32").field("dims", &self.dims).finish()
    }
}

impl TensorF32 {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self, TensorError> {
        check_dims(&dims, data.len())?;
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { index });
        }
        Ok(Self { dims, data })
    }

    /// Builds an `[rows × cols]` tensor from f64 rows, rounding to f32.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TensorError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(TensorError::Shape {
                dims: vec![rows.len(), cols],
                msg: "ragged rows".into(),
            });
        }
        let data = rows.iter().flatten().map(|&v| v as f32).collect();
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Size of the last axis.
    pub fn row_len(&self) -> usize {
        *self.dims.last().expect("tensors have at least one dim")
    }

    /// Row `i` of the tensor viewed as `[len / row_len × row_len]`.
    pub fn row(&self, i: usize) -> &[f32] {
        let w = self.row_len();
        &self.data[i * w..(i + 1) * w]
    }
}

/// Dense row-major i64 array, used for label vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorI64 {
    dims: Vec<usize>,
    data: Vec<i64>,
}

impl TensorI64 {
    pub fn new(dims: Vec<usize>, data: Vec<i64>) -> Result<Self, TensorError> {
        check_dims(&dims, data.len())?;
        Ok(Self { dims, data })
    }

    pub fn from_labels(labels: &[usize]) -> Result<Self, TensorError> {
        Self::new(
            vec![labels.len()],
            labels.iter().map(|&l| l as i64).collect(),
        )
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[i64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    F32(TensorF32),
    I64(TensorI64),
}

impl Tensor {
    pub fn dims(&self) -> &[usize] {
        match self {
            Tensor::F32(t) => t.dims(),
            Tensor::I64(t) => t.dims(),
        }
    }
}

impl From<TensorF32> for Tensor {
    fn from(t: TensorF32) -> Self {
        Tensor::F32(t)
    }
}

impl From<TensorI64> for Tensor {
    fn from(t: TensorI64) -> Self {
        Tensor::I64(t)
    }
}

fn encode_header(dtype: u8, dims: &[usize]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(10 + 8 * dims.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(dtype);
    buf.push(dims.len() as u8);
    for &d in dims {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    buf
}

/// Serializes a tensor to its exact on-disk byte representation.
pub fn encode_tensor(t: &Tensor) -> Vec<u8> {
    match t {
        Tensor::F32(t) => {
            let mut buf = encode_header(DTYPE_F32, t.dims());
            buf.reserve(4 * t.data.len());
            for v in &t.data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            buf
        }
        Tensor::I64(t) => {
            let mut buf = encode_header(DTYPE_I64, t.dims());
            buf.reserve(8 * t.data.len());
            for v in &t.data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            buf
        }
    }
}

pub fn write_tensor(t: &Tensor, path: impl AsRef<Path>) -> Result<(), TensorError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| TensorError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode_tensor(t))
        .and_then(|_| w.flush())
        .map_err(|e| TensorError::io(path, e))
}

pub struct Header {
    pub dtype: u8,
    pub dims: Vec<usize>,
    pub header_len: usize,
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header, TensorError> {
    if bytes.len() < 10 {
        return Err(TensorError::format(path, "file shorter than fixed header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(TensorError::format(
            path,
            format!("bad magic {:?}", String::from_utf8_lossy(&bytes[0..4])),
        ));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(TensorError::format(
            path,
            format!("unsupported version {version}"),
        ));
    }
    let dtype = bytes[8];
    if dtype != DTYPE_F32 && dtype != DTYPE_I64 {
        return Err(TensorError::format(path, format!("unknown dtype {dtype}")));
    }
    let ndim = bytes[9] as usize;
    if ndim == 0 {
        return Err(TensorError::format(path, "ndim is zero"));
    }
    let header_len = 10 + 8 * ndim;
    if bytes.len() < header_len {
        return Err(TensorError::format(path, "truncated dims"));
    }
    let mut dims = Vec::with_capacity(ndim);
    for k in 0..ndim {
        let off = 10 + 8 * k;
        let d = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let d = usize::try_from(d).map_err(|_| TensorError::format(path, "dim too large"))?;
        if d == 0 {
            return Err(TensorError::format(path, "zero-sized dim"));
        }
        dims.push(d);
    }
    Ok(Header {
        dtype,
        dims,
        header_len,
    })
}

/// Reads only the header of an ODPT file.
pub fn read_header(path: impl AsRef<Path>) -> Result<Header, TensorError> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| TensorError::io(path, e))?;
    let mut fixed = [0u8; 10];
    file.read_exact(&mut fixed)
        .map_err(|_| TensorError::format(path, "file shorter than fixed header"))?;
    let ndim = fixed[9] as usize;
    let mut rest = vec![0u8; 8 * ndim];
    file.read_exact(&mut rest)
        .map_err(|_| TensorError::format(path, "truncated dims"))?;
    let mut bytes = fixed.to_vec();
    bytes.extend_from_slice(&rest);
    parse_header(&bytes, path)
}

/// Decodes an in-memory ODPT image; `path` is only used in error messages.
pub fn decode_tensor(bytes: &[u8], path: &Path) -> Result<Tensor, TensorError> {
    let header = parse_header(bytes, path)?;
    let count = header
        .dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| TensorError::format(path, "element count overflows"))?;
    let width = if header.dtype == DTYPE_F32 { 4 } else { 8 };
    let payload = &bytes[header.header_len..];
    let expected = count as u64 * width as u64;
    if payload.len() as u64 != expected {
        return Err(TensorError::Length {
            path: path.to_path_buf(),
            expected,
            actual: payload.len() as u64,
        });
    }
    let tensor = if header.dtype == DTYPE_F32 {
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::F32(TensorF32::new(header.dims, data)?)
    } else {
        let data: Vec<i64> = payload
            .chunks_exact(8)
            .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::I64(TensorI64::new(header.dims, data)?)
    };
    Ok(tensor)
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor, TensorError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| TensorError::io(path, e))?;
    decode_tensor(&bytes, path)
}

pub fn read_f32(path: impl AsRef<Path>) -> Result<TensorF32, TensorError> {
    let path = path.as_ref();
    match read_tensor(path)? {
        Tensor::F32(t) => Ok(t),
        Tensor::I64(_) => Err(TensorError::format(path, "expected f32 tensor, found i64")),
    }
}

pub fn read_i64(path: impl AsRef<Path>) -> Result<TensorI64, TensorError> {
    let path = path.as_ref();
    match read_tensor(path)? {
        Tensor::I64(t) => Ok(t),
        Tensor::F32(_) => Err(TensorError::format(path, "expected i64 tensor, found f32")),
    }
}

/// One model's recorded outputs on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    logits: TensorF32,
    features: Option<TensorF32>,
    labels: Option<Vec<usize>>,
    aug_logits: Option<TensorF32>,
}

/// Validates cross-tensor shapes and builds a [`PredictionSet`].
pub fn assemble_prediction_set(
    logits: TensorF32,
    features: Option<TensorF32>,
    labels: Option<TensorI64>,
    aug_logits: Option<TensorF32>,
) -> Result<PredictionSet, TensorError> {
    if logits.ndim() != 2 {
        return Err(TensorError::Shape {
            dims: logits.dims().to_vec(),
            msg: "logits must be [n × C]".into(),
        });
    }
    let (n, classes) = (logits.dims()[0], logits.dims()[1]);
    if classes < 2 {
        return Err(TensorError::Shape {
            dims: logits.dims().to_vec(),
            msg: "at least two classes are required".into(),
        });
    }
    if let Some(f) = &features {
        if f.ndim() != 2 || f.dims()[0] != n {
            return Err(TensorError::Assembly {
                left_name: "logits",
                left: logits.dims().to_vec(),
                right_name: "features",
                right: f.dims().to_vec(),
            });
        }
    }
    if let Some(a) = &aug_logits {
        let bad = a.ndim() != 3 || a.dims()[1] != n || a.dims()[2] != classes;
        if bad {
            return Err(TensorError::Assembly {
                left_name: "logits",
                left: logits.dims().to_vec(),
                right_name: "aug_logits",
                right: a.dims().to_vec(),
            });
        }
        if a.dims()[0] < 2 {
            return Err(TensorError::Shape {
                dims: a.dims().to_vec(),
                msg: "aug_logits needs at least two views".into(),
            });
        }
    }
    let labels = match labels {
        None => None,
        Some(l) => {
            if l.dims().len() != 1 || l.dims()[0] != n {
                return Err(TensorError::Assembly {
                    left_name: "logits",
                    left: logits.dims().to_vec(),
                    right_name: "labels",
                    right: l.dims().to_vec(),
                });
            }
            let mut out = Vec::with_capacity(n);
            for (index, &label) in l.data().iter().enumerate() {
                if label < 0 || label as u64 >= classes as u64 {
                    return Err(TensorError::LabelRange {
                        index,
                        label,
                        classes,
                    });
                }
                out.push(label as usize);
            }
            Some(out)
        }
    };
    Ok(PredictionSet {
        logits,
        features,
        labels,
        aug_logits,
    })
}

impl PredictionSet {
    /// Shorthand for [`assemble_prediction_set`] with only logits and labels.
    pub fn with_labels(logits: TensorF32, labels: &[usize]) -> Result<Self, TensorError> {
        assemble_prediction_set(logits, None, Some(TensorI64::from_labels(labels)?), None)
    }

    pub fn n(&self) -> usize {
        self.logits.dims()[0]
    }

    pub fn classes(&self) -> usize {
        self.logits.dims()[1]
    }

    pub fn logits(&self) -> &TensorF32 {
        &self.logits
    }

    pub fn features(&self) -> Option<&TensorF32> {
        self.features.as_ref()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn aug_logits(&self) -> Option<&TensorF32> {
        self.aug_logits.as_ref()
    }

    /// Number of augmented views, if present.
    pub fn views(&self) -> Option<usize> {
        self.aug_logits.as_ref().map(|a| a.dims()[0])
    }

    /// Argmax class of every row (first maximum wins).
    pub fn predictions(&self) -> Vec<usize> {
        (0..self.n()).map(|i| argmax(self.logits.row(i))).collect()
    }

    /// Argmax accuracy against the stored labels.
    pub fn accuracy(&self) -> Option<f64> {
        let labels = self.labels.as_ref()?;
        let correct = self
            .predictions()
            .iter()
            .zip(labels)
            .filter(|(p, l)| p == l)
            .count();
        Some(correct as f64 / self.n() as f64)
    }
}

pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// A model, represented by its recorded validation and test outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRecord {
    pub model_id: String,
    pub arch_tag: Option<String>,
    pub val: PredictionSet,
    pub test: PredictionSet,
}

impl ModelRecord {
    pub fn new(
        model_id: impl Into<String>,
        val: PredictionSet,
        test: PredictionSet,
        arch_tag: Option<String>,
    ) -> Result<Self, TensorError> {
        let model_id = model_id.into();
        if val.labels().is_none() {
            return Err(TensorError::Record {
                model_id,
                msg: "validation labels are required".into(),
            });
        }
        if val.classes() != test.classes() {
            return Err(TensorError::Record {
                msg: format!(
                    "class count differs: val {} vs test {}",
                    val.classes(),
                    test.classes()
                ),
                model_id,
            });
        }
        Ok(Self {
            model_id,
            arch_tag,
            val,
            test,
        })
    }
}
