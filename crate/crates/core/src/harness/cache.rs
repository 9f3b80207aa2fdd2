//! On-disk score cache.
//!
//! Entries are keyed by a digest of (dataset, model, method, method
//! configuration, input-file contents), so changing any hyperparameter, seed or
//! tensor invalidates the entry automatically. Values are stored as raw bits to
//! keep cached and fresh scores bit-identical.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{HarnessError, Manifest};
use crate::scoring::{Method, ScoreConfig, ScoreReport};

pub const CACHE_ENV: &str = "ODP_CACHE_DIR";
const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct ScoreCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    value_bits: u64,
    report: ScoreReport,
}

impl ScoreCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `$ODP_CACHE_DIR` if set, otherwise `.odp-cache` beside the manifest.
    pub fn for_manifest(manifest: &Manifest) -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(dir) if !dir.is_empty() => Self::new(dir),
            _ => Self::new(manifest.base_dir.join(".odp-cache")),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<ScoreReport> {
        let text = std::fs::read_to_string(self.path(key)).ok()?;
        let entry: Entry = serde_json::from_str(&text).ok()?;
        if entry.key != key {
            return None;
        }
        let mut report = entry.report;
        report.value = f64::from_bits(entry.value_bits);
        Some(report)
    }

    /// Writes atomically through a temporary file in the same directory.
    pub fn put(&self, key: &str, report: &ScoreReport) -> Result<(), HarnessError> {
        let path = self.path(key);
        let dir = path.parent().expect("cache path has a parent");
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let entry = Entry {
            key: key.to_string(),
            value_bits: report.value.to_bits(),
            report: report.clone(),
        };
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string(&entry).expect("cache entry serializes");
        std::fs::write(&tmp, text).map_err(|e| HarnessError::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| HarnessError::io(&path, e))
    }
}

/// The hyperparameters a method actually reads. `pool_digest` covers the
/// whole model pool for methods whose score depends on the other models.
pub fn method_params(method: Method, config: &ScoreConfig, pool_digest: &str) -> serde_json::Value {
    match method {
        Method::Atc => json!({ "confidence": config.atc_confidence }),
        Method::MaNo => json!({ "p": config.mano_p }),
        Method::Mde => json!({ "temperature": config.mde_temperature.to_bits() }),
        Method::Ni => json!({ "mode": config.ni_mode }),
        Method::Agreement => json!({ "eps": config.agreement_eps.to_bits(), "pool": pool_digest }),
        Method::Cot | Method::Cott => json!({ "max_points": config.cot_max_points, "seed": config.seed }),
        Method::NuclearNorm | Method::Doc | Method::Dispersion => json!({}),
    }
}

pub fn config_hash(method: Method, config: &ScoreConfig, pool_digest: &str) -> String {
    let v = json!({
        "version": CACHE_VERSION,
        "method": method.name(),
        "params": method_params(method, config, pool_digest),
    });
    hex::encode(Sha256::digest(v.to_string().as_bytes()))
}

pub fn cache_key(dataset_id: &str, model_id: &str, method: Method, config_hash: &str, input_digest: &str) -> String {
    let mut h = Sha256::new();
    for part in [dataset_id, model_id, method.name(), config_hash, input_digest] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::ScoreFlag;

    #[test]
    fn round_trip_keeps_bits() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ScoreCache::new(dir.path());
        let report = ScoreReport::new(Method::Cott, "m", 0.1 + 0.2).with_flag(ScoreFlag::DegenerateThreshold);
        let key = cache_key("d", "m", Method::Cott, "h", "x");
        assert!(cache.get(&key).is_none());
        cache.put(&key, &report).unwrap();
        let back = cache.get(&key).unwrap();
        assert_eq!(back.value.to_bits(), report.value.to_bits());
        assert_eq!(back, report);
    }

    #[test]
    fn hyperparameters_change_the_hash() {
        let base = ScoreConfig::default();
        let mut other = base.clone();
        other.seed = 7;
        assert_ne!(config_hash(Method::Cot, &base, ""), config_hash(Method::Cot, &other, ""));
        // DoC reads no hyperparameters
        assert_eq!(config_hash(Method::Doc, &base, ""), config_hash(Method::Doc, &other, ""));
        assert_ne!(config_hash(Method::Agreement, &base, "a"), config_hash(Method::Agreement, &base, "b"));
    }
}
