//! Confidence optimal transport (COT) and its thresholded variant (COTT).
//!
//! The test softmax rows are matched one-to-one against one-hot vectors that
//! realize the validation label marginal. Ground cost is `½‖p − e‖₁`, which is
//! exactly 1 between one-hot vectors of different classes, so the mean matched
//! cost reads as an error rate.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::assignment::solve_capacitated;
use super::softmax::{softmax_rows, Probabilities};
use super::{check_classes, require_labels, Method, ScoreError, ScoreFlag, ScoreReport};
use crate::tensor_io::PredictionSet;

#[derive(Debug, Clone, PartialEq)]
pub struct CotOutcome {
    pub report: ScoreReport,
    /// Matched cost of every subsampled row, aligned with `indices`.
    pub costs: Vec<f64>,
    /// Sorted sample indices that were transported.
    pub indices: Vec<usize>,
}

/// `min(n, max_points)` sorted indices drawn uniformly without replacement.
pub fn subsample_indices(n: usize, max_points: usize, seed: u64) -> Vec<usize> {
    if max_points >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, n, max_points).into_vec();
    idx.sort_unstable();
    idx
}

/// Number of one-hot targets per class realizing the label marginal with `m` points.
///
/// Largest-remainder apportionment: `floor(m·f_c)` each, leftovers to the
/// largest fractional parts, ties to the lower class index.
pub fn quota_counts(labels: &[usize], classes: usize, m: usize) -> Vec<usize> {
    let n = labels.len();
    let mut hist = vec![0usize; classes];
    for &l in labels {
        hist[l] += 1;
    }
    let mut counts: Vec<usize> = hist.iter().map(|&h| h * m / n).collect();
    let mut order: Vec<usize> = (0..classes).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse(hist[c] * m % n), c));
    let assigned: usize = counts.iter().sum();
    for &c in order.iter().take(m - assigned) {
        counts[c] += 1;
    }
    counts
}

/// `½‖p − e_k‖₁` for a probability row `p` with precomputed sum.
fn one_hot_cost(row_sum: f64, p_k: f64) -> f64 {
    0.5 * (row_sum - p_k + (1.0 - p_k).abs())
}

/// Optimal matched cost of every row against `counts[k]` copies of `e_k`.
pub fn transport_costs(probs: &Probabilities, counts: &[usize]) -> Vec<f64> {
    let classes = probs.classes();
    let mut costs = Vec::with_capacity(probs.n() * classes);
    for row in probs.rows() {
        let s: f64 = row.iter().sum();
        costs.extend(row.iter().map(|&p| one_hot_cost(s, p)));
    }
    let groups = solve_capacitated(&costs, classes, counts);
    groups
        .iter()
        .enumerate()
        .map(|(r, &g)| costs[r * classes + g])
        .collect()
}

fn transport_set(
    set: &PredictionSet,
    val_labels: &[usize],
    max_points: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<usize>), ScoreError> {
    let indices = subsample_indices(set.n(), max_points, seed);
    if indices.is_empty() {
        return Err(ScoreError::Arity("COT needs at least one transported point".into()));
    }
    let probs = softmax_rows(set.logits(), &indices);
    let counts = quota_counts(val_labels, set.classes(), indices.len());
    Ok((transport_costs(&probs, &counts), indices))
}

pub fn score_cot(
    model_id: &str,
    val: &PredictionSet,
    test: &PredictionSet,
    max_points: usize,
    seed: u64,
) -> Result<CotOutcome, ScoreError> {
    check_classes(val, test)?;
    let labels = require_labels(val)?;
    let (costs, indices) = transport_set(test, labels, max_points, seed)?;
    let mean = costs.iter().sum::<f64>() / costs.len() as f64;
    Ok(CotOutcome {
        report: ScoreReport::new(Method::Cot, model_id, mean.clamp(0.0, 1.0)),
        costs,
        indices,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostThreshold {
    pub tau: f64,
    pub degenerate: bool,
}

/// Threshold such that the fraction of validation costs strictly above it is
/// `round(m · val_error) / m`. Zero error puts it at the maximum cost.
pub fn cost_threshold(val_costs: &[f64], val_error: f64) -> CostThreshold {
    let m = val_costs.len();
    let mut sorted = val_costs.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = (m as f64 * val_error).round() as usize;
    if val_error <= 0.0 || k == 0 {
        return CostThreshold {
            tau: sorted[0],
            degenerate: val_error <= 0.0,
        };
    }
    let tau = if k >= m { f64::NEG_INFINITY } else { sorted[k] };
    CostThreshold {
        tau,
        degenerate: false,
    }
}

pub fn fraction_above(costs: &[f64], tau: f64) -> f64 {
    costs.iter().filter(|&&c| c > tau).count() as f64 / costs.len() as f64
}

pub fn score_cott(
    model_id: &str,
    val: &PredictionSet,
    test: &PredictionSet,
    max_points: usize,
    seed: u64,
) -> Result<ScoreReport, ScoreError> {
    check_classes(val, test)?;
    let labels = require_labels(val)?;
    let val_error = 1.0 - val.accuracy().expect("labels checked");
    let (val_costs, _) = transport_set(val, labels, max_points, seed)?;
    let threshold = cost_threshold(&val_costs, val_error);
    let (test_costs, _) = transport_set(test, labels, max_points, seed)?;
    let report = ScoreReport::new(Method::Cott, model_id, fraction_above(&test_costs, threshold.tau));
    Ok(if threshold.degenerate {
        report.with_flag(ScoreFlag::DegenerateThreshold)
    } else {
        report
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_io::TensorF32;

    #[test]
    fn quota_apportionment() {
        assert_eq!(quota_counts(&[0, 1], 2, 2), vec![1, 1]);
        assert_eq!(quota_counts(&[0, 0, 1], 2, 4), vec![3, 1]);
        // 1/3 each over 4 points: remainders tie, lowest class wins
        assert_eq!(quota_counts(&[0, 1, 2], 3, 4), vec![2, 1, 1]);
        assert_eq!(quota_counts(&[2, 2, 2], 4, 5), vec![0, 0, 5, 0]);
    }

    #[test]
    fn two_points_one_mismatch() {
        let probs = Probabilities::from_rows(vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        let mut costs = transport_costs(&probs, &[1, 1]);
        costs.sort_by(f64::total_cmp);
        assert_eq!(costs, vec![0.0, 1.0]);
    }

    #[test]
    fn perfect_histogram_costs_nothing() {
        let logits = TensorF32::from_rows(&[
            vec![50.0, 0.0, 0.0],
            vec![0.0, 50.0, 0.0],
            vec![0.0, 0.0, 50.0],
            vec![50.0, 0.0, 0.0],
        ])
        .unwrap();
        let val = PredictionSet::with_labels(logits.clone(), &[0, 1, 2, 0]).unwrap();
        let test = PredictionSet::with_labels(logits, &[0, 0, 0, 0]).unwrap();
        let out = score_cot("m", &val, &test, 2000, 1).unwrap();
        assert!(out.report.value < 1e-12);
    }

    #[test]
    fn threshold_counting() {
        assert_eq!(fraction_above(&[0.0, 0.2, 0.8, 0.9], 0.5), 0.5);
        let t = cost_threshold(&[0.1, 0.9, 0.5, 0.3], 0.5);
        assert_eq!(t.tau, 0.3);
        assert_eq!(fraction_above(&[0.1, 0.9, 0.5, 0.3], t.tau), 0.5);
        let t = cost_threshold(&[0.1, 0.9], 0.0);
        assert_eq!(t.tau, 0.9);
        assert!(t.degenerate);
        let t = cost_threshold(&[0.1, 0.9], 1.0);
        assert_eq!(fraction_above(&[0.0, 0.0], t.tau), 1.0);
    }

    #[test]
    fn subsample_is_sorted_and_seeded() {
        let a = subsample_indices(100, 10, 7);
        assert_eq!(a, subsample_indices(100, 10, 7));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subsample_indices(5, 10, 7), vec![0, 1, 2, 3, 4]);
    }
}
