//! Confidence-based direct estimators: ATC and DoC.

use serde::{Deserialize, Serialize};

use super::softmax::softmax;
use super::{check_classes, require_labels, Method, ScoreError, ScoreFlag, ScoreReport};
use crate::tensor_io::PredictionSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ConfidenceFn {
    #[default]
    MaxConfidence,
    /// `Σ p log p`, higher for peaked predictions.
    NegativeEntropy,
}

impl std::str::FromStr for ConfidenceFn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "maxconfidence" | "max" => Ok(ConfidenceFn::MaxConfidence),
            "negativeentropy" | "negentropy" | "entropy" => Ok(ConfidenceFn::NegativeEntropy),
            _ => Err(format!("unknown confidence function {s:?}")),
        }
    }
}

pub fn confidences(set: &PredictionSet, f: ConfidenceFn) -> Vec<f64> {
    let probs = softmax(set.logits());
    match f {
        ConfidenceFn::MaxConfidence => probs.max_confidence(),
        ConfidenceFn::NegativeEntropy => probs
            .rows()
            .map(|r| r.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum())
            .collect(),
    }
}

fn correctness(set: &PredictionSet) -> Result<Vec<bool>, ScoreError> {
    let labels = require_labels(set)?;
    Ok(set
        .predictions()
        .iter()
        .zip(labels)
        .map(|(p, l)| p == l)
        .collect())
}

/// Outcome of thresholding: predicted accuracy and whether the threshold was degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtcEstimate {
    pub accuracy: f64,
    pub threshold: Option<f64>,
    pub degenerate: bool,
}

/// ATC on raw confidence vectors.
///
/// The threshold is the k-th largest validation confidence with
/// `k = #correct = n·acc`, and the prediction is the fraction of test
/// confidences at or above it.
pub fn atc_from_confidences(val_conf: &[f64], val_correct: &[bool], test_conf: &[f64]) -> AtcEstimate {
    assert_eq!(val_conf.len(), val_correct.len());
    let k = val_correct.iter().filter(|&&c| c).count();
    if k == 0 {
        return AtcEstimate {
            accuracy: 0.0,
            threshold: None,
            degenerate: true,
        };
    }
    let mut sorted = val_conf.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[k - 1];
    let above = test_conf.iter().filter(|&&c| c >= threshold).count();
    AtcEstimate {
        accuracy: above as f64 / test_conf.len() as f64,
        threshold: Some(threshold),
        degenerate: false,
    }
}

pub fn score_atc(
    model_id: &str,
    val: &PredictionSet,
    test: &PredictionSet,
    confidence_fn: ConfidenceFn,
) -> Result<ScoreReport, ScoreError> {
    check_classes(val, test)?;
    let correct = correctness(val)?;
    let est = atc_from_confidences(
        &confidences(val, confidence_fn),
        &correct,
        &confidences(test, confidence_fn),
    );
    let report = ScoreReport::new(Method::Atc, model_id, est.accuracy);
    Ok(if est.degenerate {
        report.with_flag(ScoreFlag::DegenerateThreshold)
    } else {
        report
    })
}

/// `clamp(acc_va − (conf_va − conf_te), 0, 1)` on mean max-confidences.
pub fn doc_from_means(val_accuracy: f64, val_mean_conf: f64, test_mean_conf: f64) -> f64 {
    (val_accuracy - (val_mean_conf - test_mean_conf)).clamp(0.0, 1.0)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn score_doc(
    model_id: &str,
    val: &PredictionSet,
    test: &PredictionSet,
) -> Result<ScoreReport, ScoreError> {
    check_classes(val, test)?;
    let correct = correctness(val)?;
    let acc = correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64;
    let conf_va = mean(&confidences(val, ConfidenceFn::MaxConfidence));
    let conf_te = mean(&confidences(test, ConfidenceFn::MaxConfidence));
    Ok(ScoreReport::new(
        Method::Doc,
        model_id,
        doc_from_means(acc, conf_va, conf_te),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_io::TensorF32;

    #[test]
    fn hand_thresholds() {
        let est = atc_from_confidences(
            &[0.9, 0.8, 0.6, 0.4],
            &[true, true, false, false],
            &[0.95, 0.7, 0.5],
        );
        assert_eq!(est.threshold, Some(0.8));
        assert!((est.accuracy - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn below_min_val_confidence_is_zero() {
        let est = atc_from_confidences(&[0.9, 0.8], &[true, true], &[0.5, 0.1]);
        assert_eq!(est.threshold, Some(0.8));
        assert_eq!(est.accuracy, 0.0);
    }

    #[test]
    fn zero_val_accuracy_is_degenerate() {
        let est = atc_from_confidences(&[0.9, 0.8], &[false, false], &[0.95]);
        assert_eq!(est.accuracy, 0.0);
        assert!(est.degenerate);
    }

    #[test]
    fn full_val_accuracy_uses_min_confidence() {
        let est = atc_from_confidences(&[0.9, 0.6, 0.8], &[true, true, true], &[0.61, 0.59, 0.6]);
        assert_eq!(est.threshold, Some(0.6));
        assert!((est.accuracy - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn doc_arithmetic() {
        assert!((doc_from_means(0.8, 0.9, 0.7) - 0.6).abs() < 1e-12);
        assert_eq!(doc_from_means(0.1, 0.9, 0.4), 0.0);
        assert_eq!(doc_from_means(0.7, 0.5, 0.5), 0.7);
    }

    #[test]
    fn atc_self_consistency_on_sets() {
        let logits = TensorF32::from_rows(&[
            vec![3.0, 0.0],
            vec![2.0, 0.0],
            vec![0.0, 1.0],
            vec![0.5, 0.0],
            vec![0.0, 4.0],
        ])
        .unwrap();
        let val = PredictionSet::with_labels(logits, &[0, 0, 0, 1, 1]).unwrap();
        let r = score_atc("m", &val, &val, ConfidenceFn::MaxConfidence).unwrap();
        assert!((r.value - 0.6).abs() <= 1.0 / 5.0);
        let r = score_atc("m", &val, &val, ConfidenceFn::NegativeEntropy).unwrap();
        assert!((r.value - 0.6).abs() <= 1.0 / 5.0);
        let d = score_doc("m", &val, &val).unwrap();
        assert_eq!(d.value, 0.6);
    }
}
