//! Prediction-matrix norms: nuclear norm and MaNo.

use nalgebra::{linalg::SVD, DMatrix};

use super::softmax::{softmax, Probabilities};
use super::{Method, ScoreError, ScoreFlag, ScoreReport};
use crate::tensor_io::PredictionSet;

const SVD_MAX_ITER: usize = 100_000;

/// Sum of singular values of a probability matrix.
pub fn nuclear_norm(probs: &Probabilities) -> Result<f64, ScoreError> {
    let (rows, cols) = (probs.n(), probs.classes());
    let m = DMatrix::from_row_slice(rows, cols, probs.data());
    let svd = SVD::try_new_unordered(m, false, false, f64::EPSILON, SVD_MAX_ITER)
        .ok_or(ScoreError::Numerical { rows, cols })?;
    Ok(svd.singular_values.iter().sum())
}

/// `‖P‖_* / sqrt(n · min(n, C))`, in `(0, 1]`.
pub fn normalized_nuclear_norm(probs: &Probabilities) -> Result<f64, ScoreError> {
    let (n, c) = (probs.n() as f64, probs.classes() as f64);
    Ok(nuclear_norm(probs)? / (n * n.min(c)).sqrt())
}

pub fn score_nuclear_norm(model_id: &str, test: &PredictionSet) -> Result<ScoreReport, ScoreError> {
    let value = normalized_nuclear_norm(&softmax(test.logits()))?;
    Ok(ScoreReport::new(Method::NuclearNorm, model_id, value))
}

/// `((1/(nC)) Σ |P_ij|^p)^(1/p)`.
pub fn mean_power_norm(probs: &Probabilities, p: u32) -> f64 {
    let p_i = p as i32;
    let total: f64 = probs.data().iter().map(|v| v.abs().powi(p_i)).sum();
    (total / probs.data().len() as f64).powf(1.0 / p as f64)
}

/// MaNo with a plain softmax normalization (reported with the `mano-simplified` flag).
pub fn score_mano(model_id: &str, test: &PredictionSet, p: u32) -> Result<ScoreReport, ScoreError> {
    if p < 1 {
        return Err(ScoreError::InvalidParameter {
            name: "mano_p",
            value: p as f64,
        });
    }
    let value = mean_power_norm(&softmax(test.logits()), p);
    Ok(ScoreReport::new(Method::MaNo, model_id, value).with_flag(ScoreFlag::MaNoSimplified))
}
