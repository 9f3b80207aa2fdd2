//! Dataset manifests: one JSON file per dataset listing every model's tensors.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::tensor_io::{
    assemble_prediction_set, decode_tensor, encode_tensor, read_header, ModelRecord, Tensor, TensorF32, TensorI64,
    DTYPE_F32, DTYPE_I64,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arch_tag: Option<String>,
    pub val_logits: PathBuf,
    pub val_labels: PathBuf,
    pub test_logits: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_features: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_aug_logits: Option<PathBuf>,
}

impl ModelEntry {
    fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        [&self.val_logits, &self.val_labels, &self.test_logits]
            .into_iter()
            .chain(self.test_labels.iter())
            .chain(self.test_features.iter())
            .chain(self.test_aug_logits.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset_id: String,
    pub num_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_type: Option<String>,
    pub models: Vec<ModelEntry>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// A loaded model together with a digest of its input files.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub record: ModelRecord,
    pub digest: String,
}

impl LoadedModel {
    /// Wraps an in-memory record. The digest matches the one computed when the
    /// same tensors are written with `write_tensor` and loaded from disk.
    pub fn from_record(record: ModelRecord) -> Self {
        let mut hasher = Sha256::new();
        let mut feed = |t: Tensor| {
            let bytes = encode_tensor(&t);
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(&bytes);
        };
        let labels = |l: &[usize]| Tensor::I64(TensorI64::from_labels(l).expect("labels fit in i64"));
        feed(Tensor::F32(record.val.logits().clone()));
        feed(labels(record.val.labels().expect("records carry val labels")));
        feed(Tensor::F32(record.test.logits().clone()));
        if let Some(l) = record.test.labels() {
            feed(labels(l));
        }
        if let Some(f) = record.test.features() {
            feed(Tensor::F32(f.clone()));
        }
        if let Some(a) = record.test.aug_logits() {
            feed(Tensor::F32(a.clone()));
        }
        LoadedModel {
            digest: hex::encode(hasher.finalize()),
            record,
        }
    }
}

impl Manifest {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn entry(&self, model_id: &str) -> Option<&ModelEntry> {
        self.models.iter().find(|m| m.model_id == model_id)
    }

    /// Reads and validates every tensor of one model.
    pub fn load_model(&self, entry: &ModelEntry) -> Result<LoadedModel, HarnessError> {
        let mut hasher = Sha256::new();
        let mut read = |p: &Path| -> Result<Tensor, HarnessError> {
            let path = self.resolve(p);
            let bytes = std::fs::read(&path).map_err(|e| HarnessError::io(&path, e))?;
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(&bytes);
            Ok(decode_tensor(&bytes, &path)?)
        };
        let f32_at = |t: Tensor, p: &Path| -> Result<TensorF32, HarnessError> {
            match t {
                Tensor::F32(t) => Ok(t),
                Tensor::I64(_) => Err(HarnessError::manifest(p, "expected an f32 tensor")),
            }
        };
        let i64_at = |t: Tensor, p: &Path| -> Result<TensorI64, HarnessError> {
            match t {
                Tensor::I64(t) => Ok(t),
                Tensor::F32(_) => Err(HarnessError::manifest(p, "expected an i64 label tensor")),
            }
        };

        let val_logits = f32_at(read(&entry.val_logits)?, &entry.val_logits)?;
        let val_labels = i64_at(read(&entry.val_labels)?, &entry.val_labels)?;
        let test_logits = f32_at(read(&entry.test_logits)?, &entry.test_logits)?;
        let test_labels = match &entry.test_labels {
            Some(p) => Some(i64_at(read(p)?, p)?),
            None => None,
        };
        let test_features = match &entry.test_features {
            Some(p) => Some(f32_at(read(p)?, p)?),
            None => None,
        };
        let test_aug = match &entry.test_aug_logits {
            Some(p) => Some(f32_at(read(p)?, p)?),
            None => None,
        };
        let val = assemble_prediction_set(val_logits, None, Some(val_labels), None)?;
        let test = assemble_prediction_set(test_logits, test_features, test_labels, test_aug)?;
        if val.classes() != self.num_classes {
            return Err(HarnessError::manifest(
                &entry.val_logits,
                format!(
                    "model {} has {} classes, manifest declares {}",
                    entry.model_id,
                    val.classes(),
                    self.num_classes
                ),
            ));
        }
        let record = ModelRecord::new(entry.model_id.clone(), val, test, entry.arch_tag.clone())?;
        Ok(LoadedModel {
            record,
            digest: hex::encode(hasher.finalize()),
        })
    }

    pub fn load_all(&self) -> Result<Vec<LoadedModel>, HarnessError> {
        self.models.iter().map(|e| self.load_model(e)).collect()
    }

    /// Writes the manifest as pretty JSON.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), HarnessError> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
    }
}

fn check_header(
    manifest: &Manifest,
    p: &Path,
    dtype: u8,
    ndim: usize,
) -> Result<Vec<usize>, HarnessError> {
    let path = manifest.resolve(p);
    if !path.is_file() {
        return Err(HarnessError::MissingFile(path));
    }
    let header = read_header(&path)?;
    if header.dtype != dtype || header.dims.len() != ndim {
        return Err(HarnessError::manifest(
            &path,
            format!(
                "expected {ndim}-d {} tensor, found {}-d dtype {}",
                if dtype == DTYPE_F32 { "f32" } else { "i64" },
                header.dims.len(),
                header.dtype
            ),
        ));
    }
    Ok(header.dims)
}

/// Parses a manifest and checks ids, file presence and header shapes without
/// reading any payloads.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| HarnessError::manifest(path, format!("malformed JSON: {e}")))?;
    manifest.base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    if manifest.num_classes < 2 {
        return Err(HarnessError::manifest(path, "num_classes must be at least 2"));
    }
    let mut seen = HashSet::new();
    for m in &manifest.models {
        if !seen.insert(m.model_id.as_str()) {
            return Err(HarnessError::DuplicateModel(m.model_id.clone()));
        }
    }
    let c = manifest.num_classes;
    for m in &manifest.models {
        for p in m.paths() {
            let full = manifest.resolve(p);
            if !full.is_file() {
                return Err(HarnessError::MissingFile(full));
            }
        }
        let shape_err = |p: &Path, msg: String| HarnessError::manifest(&manifest.resolve(p), msg);
        let vl = check_header(&manifest, &m.val_logits, DTYPE_F32, 2)?;
        if vl[1] != c {
            return Err(shape_err(&m.val_logits, format!("val logits {vl:?} disagree with num_classes {c}")));
        }
        let vy = check_header(&manifest, &m.val_labels, DTYPE_I64, 1)?;
        if vy[0] != vl[0] {
            return Err(shape_err(&m.val_labels, format!("val labels {vy:?} vs val logits {vl:?}")));
        }
        let tl = check_header(&manifest, &m.test_logits, DTYPE_F32, 2)?;
        if tl[1] != c {
            return Err(shape_err(&m.test_logits, format!("test logits {tl:?} disagree with num_classes {c}")));
        }
        if let Some(p) = &m.test_labels {
            let ty = check_header(&manifest, p, DTYPE_I64, 1)?;
            if ty[0] != tl[0] {
                return Err(shape_err(p, format!("test labels {ty:?} vs test logits {tl:?}")));
            }
        }
        if let Some(p) = &m.test_features {
            let tf = check_header(&manifest, p, DTYPE_F32, 2)?;
            if tf[0] != tl[0] {
                return Err(shape_err(p, format!("test features {tf:?} vs test logits {tl:?}")));
            }
        }
        if let Some(p) = &m.test_aug_logits {
            let ta = check_header(&manifest, p, DTYPE_F32, 3)?;
            if ta[1] != tl[0] || ta[2] != c {
                return Err(shape_err(p, format!("test aug logits {ta:?} vs test logits {tl:?}")));
            }
        }
    }
    Ok(manifest)
}
