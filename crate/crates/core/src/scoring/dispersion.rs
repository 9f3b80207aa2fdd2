//! Dispersion score: spread of pseudo-class feature centroids.

use super::{Method, ScoreError, ScoreFlag, ScoreReport};
use crate::tensor_io::{PredictionSet, TensorF32};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionEstimate {
    pub value: f64,
    pub occupied: usize,
}

/// Mean Euclidean distance from each occupied class centroid to the global centroid.
pub fn dispersion(features: &TensorF32, pseudo_labels: &[usize], classes: usize) -> DispersionEstimate {
    let d = features.row_len();
    let n = pseudo_labels.len();
    let mut sums = vec![0.0f64; classes * d];
    let mut counts = vec![0usize; classes];
    let mut global = vec![0.0f64; d];
    for (i, &c) in pseudo_labels.iter().enumerate() {
        counts[c] += 1;
        for (j, &x) in features.row(i).iter().enumerate() {
            sums[c * d + j] += x as f64;
            global[j] += x as f64;
        }
    }
    global.iter_mut().for_each(|g| *g /= n as f64);

    let occupied: Vec<usize> = (0..classes).filter(|&c| counts[c] > 0).collect();
    if occupied.len() < 2 {
        return DispersionEstimate {
            value: 0.0,
            occupied: occupied.len(),
        };
    }
    let total: f64 = occupied
        .iter()
        .map(|&c| {
            let inv = 1.0 / counts[c] as f64;
            sums[c * d..(c + 1) * d]
                .iter()
                .zip(&global)
                .map(|(s, g)| (s * inv - g).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    DispersionEstimate {
        value: total / occupied.len() as f64,
        occupied: occupied.len(),
    }
}

pub fn score_dispersion(model_id: &str, test: &PredictionSet) -> Result<ScoreReport, ScoreError> {
    let features = test.features().ok_or(ScoreError::MissingFeatures)?;
    let est = dispersion(features, &test.predictions(), test.classes());
    let report = ScoreReport::new(Method::Dispersion, model_id, est.value);
    Ok(if est.occupied < 2 {
        report.with_flag(ScoreFlag::DegenerateClusters)
    } else {
        report
    })
}
