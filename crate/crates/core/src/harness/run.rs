//! Method × model scoring with caching and skip-not-fail semantics.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::cache::{cache_key, config_hash};
use super::{HarnessError, LoadedModel, Manifest, ScoreCache};
use crate::scoring::{
    fit_agreement_line, score_agreement, score_atc, score_cot, score_cott, score_dispersion, score_doc, score_mano,
    score_mde, score_ni, score_nuclear_norm, AgreementFit, Method, ScoreConfig, ScoreError, ScoreReport,
};
use crate::tensor_io::ModelRecord;

/// A method that could not be scored. `model_id` is `None` when the whole
/// method was skipped for the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Skip {
    pub method: Method,
    pub model_id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub reports: Vec<ScoreReport>,
    pub skips: Vec<Skip>,
    /// Scores computed in this run.
    pub computed: usize,
    /// Scores served from the cache.
    pub cache_hits: usize,
}

/// Loads every model of the manifest and scores it.
pub fn run_matrix(
    manifest: &Manifest,
    methods: &[Method],
    config: &ScoreConfig,
    cache: Option<&ScoreCache>,
) -> Result<RunOutcome, HarnessError> {
    if manifest.models.is_empty() {
        return Err(HarnessError::manifest(&manifest.base_dir, "manifest lists no models"));
    }
    let models = manifest.load_all()?;
    run_models(&manifest.dataset_id, &models, methods, config, cache)
}

fn score_one(
    method: Method,
    record: &ModelRecord,
    config: &ScoreConfig,
    fit: Option<&AgreementFit>,
) -> Result<ScoreReport, ScoreError> {
    let id = record.model_id.as_str();
    let (val, test) = (&record.val, &record.test);
    match method {
        Method::Atc => score_atc(id, val, test, config.atc_confidence),
        Method::NuclearNorm => score_nuclear_norm(id, test),
        Method::Doc => score_doc(id, val, test),
        Method::Ni => score_ni(id, test, config.ni_mode),
        Method::MaNo => score_mano(id, test, config.mano_p),
        Method::Dispersion => score_dispersion(id, test),
        Method::Mde => score_mde(id, test, config.mde_temperature),
        Method::Agreement => score_agreement(record, fit.expect("agreement fit precedes scoring")),
        Method::Cot => score_cot(id, val, test, config.cot_max_points, config.seed).map(|o| o.report),
        Method::Cott => score_cott(id, val, test, config.cot_max_points, config.seed),
    }
}

/// Scores already-loaded models. Reports come back grouped by method, in the
/// order the methods were requested, then in model order.
pub fn run_models(
    dataset_id: &str,
    models: &[LoadedModel],
    methods: &[Method],
    config: &ScoreConfig,
    cache: Option<&ScoreCache>,
) -> Result<RunOutcome, HarnessError> {
    let mut wanted: Vec<Method> = Vec::new();
    for &m in methods {
        if !wanted.contains(&m) {
            wanted.push(m);
        }
    }
    let pool_digest = {
        let mut h = Sha256::new();
        for m in models {
            h.update(m.record.model_id.as_bytes());
            h.update([0]);
            h.update(m.digest.as_bytes());
        }
        hex::encode(h.finalize())
    };

    let mut outcome = RunOutcome::default();
    // slot per (method, model); None until filled from cache or computation
    let mut slots: Vec<Vec<Option<ScoreReport>>> = Vec::with_capacity(wanted.len());
    let mut keys: Vec<Vec<String>> = Vec::with_capacity(wanted.len());
    let mut method_skipped = vec![false; wanted.len()];
    for (mi, &method) in wanted.iter().enumerate() {
        let hash = config_hash(method, config, &pool_digest);
        let k: Vec<String> = models
            .iter()
            .map(|m| cache_key(dataset_id, &m.record.model_id, method, &hash, &m.digest))
            .collect();
        let s: Vec<Option<ScoreReport>> = match cache {
            Some(c) => k.iter().map(|key| c.get(key)).collect(),
            None => vec![None; models.len()],
        };
        outcome.cache_hits += s.iter().filter(|r| r.is_some()).count();
        if method == Method::Agreement && models.len() < 2 {
            method_skipped[mi] = true;
            outcome.skips.push(Skip {
                method,
                model_id: None,
                reason: format!("agreement needs at least 2 models, manifest has {}", models.len()),
            });
        }
        slots.push(s);
        keys.push(k);
    }

    // the agreement line is a batch fit over the whole pool
    let agreement_fit = match wanted.iter().position(|&m| m == Method::Agreement) {
        Some(mi) if !method_skipped[mi] && slots[mi].iter().any(Option::is_none) => {
            let records: Vec<&ModelRecord> = models.iter().map(|m| &m.record).collect();
            match fit_agreement_line(&records, config.agreement_eps) {
                Ok(fit) => Some(fit),
                Err(e) => {
                    method_skipped[mi] = true;
                    outcome.skips.push(Skip {
                        method: Method::Agreement,
                        model_id: None,
                        reason: e.to_string(),
                    });
                    None
                }
            }
        }
        _ => None,
    };

    let jobs: Vec<(usize, usize)> = (0..wanted.len())
        .filter(|&mi| !method_skipped[mi])
        .flat_map(|mi| (0..models.len()).map(move |j| (mi, j)))
        .filter(|&(mi, j)| slots[mi][j].is_none())
        .collect();
    let results: Vec<Result<ScoreReport, ScoreError>> = jobs
        .par_iter()
        .map(|&(mi, j)| score_one(wanted[mi], &models[j].record, config, agreement_fit.as_ref()))
        .collect();

    // single writer: cache updates happen here, after the parallel section
    for (&(mi, j), result) in jobs.iter().zip(results) {
        match result {
            Ok(report) => {
                outcome.computed += 1;
                if let Some(c) = cache {
                    c.put(&keys[mi][j], &report)?;
                }
                slots[mi][j] = Some(report);
            }
            Err(e) => outcome.skips.push(Skip {
                method: wanted[mi],
                model_id: Some(models[j].record.model_id.clone()),
                reason: e.to_string(),
            }),
        }
    }
    outcome.reports = slots.into_iter().flatten().flatten().collect();
    Ok(outcome)
}
