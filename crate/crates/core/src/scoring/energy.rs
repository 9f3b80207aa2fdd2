//! Meta-distribution energy (MDE): mean free energy of the test logits.

use super::softmax::logsumexp;
use super::{Method, ScoreError, ScoreReport};
use crate::tensor_io::PredictionSet;

/// `−T · log Σ_c exp(logit_c / T)`.
pub fn energy(logits: &[f32], temperature: f64) -> f64 {
    -temperature * logsumexp(logits.iter().map(|&l| l as f64 / temperature))
}

/// Raw mean energy; lower energy means higher confidence, so this score
/// anti-correlates with accuracy.
pub fn score_mde(model_id: &str, test: &PredictionSet, temperature: f64) -> Result<ScoreReport, ScoreError> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(ScoreError::InvalidParameter {
            name: "mde_temperature",
            value: temperature,
        });
    }
    let n = test.n();
    let total: f64 = (0..n).map(|i| energy(test.logits().row(i), temperature)).sum();
    Ok(ScoreReport::new(Method::Mde, model_id, total / n as f64))
}
