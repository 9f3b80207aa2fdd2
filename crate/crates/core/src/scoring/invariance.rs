//! Neighborhood invariance (NI) across augmented views.

use serde::{Deserialize, Serialize};

use super::{Method, ScoreError, ScoreReport};
use crate::tensor_io::{argmax, PredictionSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum NiMode {
    /// Pairs among the augmented views only.
    #[default]
    Pairwise,
    /// The unaugmented prediction joins the views.
    WithOriginal,
}

/// Fraction of unordered view pairs whose labels agree.
pub fn pair_agreement(labels: &[usize], classes: usize) -> f64 {
    let k = labels.len();
    let mut counts = vec![0usize; classes];
    for &l in labels {
        counts[l] += 1;
    }
    let agreeing: usize = counts.iter().map(|&c| c * c.saturating_sub(1) / 2).sum();
    agreeing as f64 / (k * (k - 1) / 2) as f64
}

pub fn score_ni(model_id: &str, test: &PredictionSet, mode: NiMode) -> Result<ScoreReport, ScoreError> {
    let aug = test.aug_logits().ok_or(ScoreError::MissingAugLogits)?;
    let views = aug.dims()[0];
    let (n, classes) = (test.n(), test.classes());
    if views < 2 {
        return Err(ScoreError::Arity(format!("NI needs at least 2 views, got {views}")));
    }
    let mut labels = Vec::with_capacity(views + 1);
    let mut total = 0.0;
    for i in 0..n {
        labels.clear();
        if mode == NiMode::WithOriginal {
            labels.push(argmax(test.logits().row(i)));
        }
        labels.extend((0..views).map(|v| argmax(aug.row(v * n + i))));
        total += pair_agreement(&labels, classes);
    }
    Ok(ScoreReport::new(Method::Ni, model_id, total / n as f64))
}
