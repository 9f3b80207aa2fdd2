//! Metrics comparing predicted scores against ground-truth accuracies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {0} scores vs {1} accuracies")]
    Length(usize, usize),
    #[error("need at least {need} values, got {got}")]
    Arity { need: usize, got: usize },
    #[error("correlation undefined: {0} has zero variance")]
    Undefined(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    SpearmanRho,
    RSquared,
    #[serde(rename = "MAE")]
    Mae,
    PrecisionAtTop,
    RhoAtTop,
    #[serde(rename = "CACE")]
    Cace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub metric: Metric,
    pub value: f64,
    pub n: usize,
}

fn check_pair(scores: &[f64], accs: &[f64], need: usize) -> Result<(), MetricError> {
    if scores.len() != accs.len() {
        return Err(MetricError::Length(scores.len(), accs.len()));
    }
    if scores.len() < need {
        return Err(MetricError::Arity {
            need,
            got: scores.len(),
        });
    }
    Ok(())
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64], x_name: &'static str, y_name: &'static str) -> Result<f64, MetricError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(MetricError::Undefined(x_name));
    }
    if syy == 0.0 {
        return Err(MetricError::Undefined(y_name));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's ρ: Pearson correlation of average ranks.
///
/// Without ties this equals `1 − 6Σd²/(n(n²−1))`.
pub fn spearman_rho(scores: &[f64], accs: &[f64]) -> Result<MetricResult, MetricError> {
    check_pair(scores, accs, 2)?;
    let value = pearson(&average_ranks(scores), &average_ranks(accs), "scores", "accuracies")?;
    Ok(MetricResult {
        metric: Metric::SpearmanRho,
        value,
        n: scores.len(),
    })
}

/// R² of the least-squares regression of accuracies on scores.
pub fn r_squared(scores: &[f64], accs: &[f64]) -> Result<MetricResult, MetricError> {
    check_pair(scores, accs, 3)?;
    let n = scores.len() as f64;
    let mx = scores.iter().sum::<f64>() / n;
    let my = accs.iter().sum::<f64>() / n;
    let sxx: f64 = scores.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(MetricError::Undefined("scores"));
    }
    let sst: f64 = accs.iter().map(|y| (y - my).powi(2)).sum();
    if sst == 0.0 {
        return Err(MetricError::Undefined("accuracies"));
    }
    let sxy: f64 = scores.iter().zip(accs).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = scores
        .iter()
        .zip(accs)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    Ok(MetricResult {
        metric: Metric::RSquared,
        value: 1.0 - ssr / sst,
        n: scores.len(),
    })
}

pub fn mae_direct(predicted: &[f64], truth: &[f64]) -> Result<MetricResult, MetricError> {
    check_pair(predicted, truth, 1)?;
    let total: f64 = predicted.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(MetricResult {
        metric: Metric::Mae,
        value: total / predicted.len() as f64,
        n: predicted.len(),
    })
}

/// Size of the top set: `ceil(fraction·n)` for pools of 100 or more models,
/// otherwise the top 10 (or everything, for fewer than 10).
pub fn top_k(n: usize, fraction: f64) -> usize {
    if n >= 100 {
        ((fraction * n as f64).ceil() as usize).clamp(1, n)
    } else {
        n.min(10)
    }
}

/// Indices of the `k` largest values; ties go to the lower index.
pub fn top_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

pub fn precision_at_top(scores: &[f64], accs: &[f64], fraction: f64) -> Result<MetricResult, MetricError> {
    check_pair(scores, accs, 2)?;
    let k = top_k(scores.len(), fraction);
    let predicted = top_indices(scores, k);
    let truth = top_indices(accs, k);
    let hits = predicted.iter().filter(|i| truth.contains(i)).count();
    Ok(MetricResult {
        metric: Metric::PrecisionAtTop,
        value: hits as f64 / k as f64,
        n: scores.len(),
    })
}

pub fn rho_at_top(scores: &[f64], accs: &[f64], fraction: f64) -> Result<MetricResult, MetricError> {
    check_pair(scores, accs, 2)?;
    let k = top_k(scores.len(), fraction);
    let subset = top_indices(scores, k);
    let s: Vec<f64> = subset.iter().map(|&i| scores[i]).collect();
    let a: Vec<f64> = subset.iter().map(|&i| accs[i]).collect();
    let rho = spearman_rho(&s, &a)?;
    Ok(MetricResult {
        metric: Metric::RhoAtTop,
        value: rho.value,
        n: k,
    })
}

/// Class-aggregated calibration error with `bins` equal-width bins per class.
///
/// `probs` is row-major `[n × C]`. For every class and bin the deviation between
/// mean predicted probability and empirical frequency is weighted by the bin's
/// share of samples; the result sums over classes and bins.
pub fn cace(probs: &[f64], classes: usize, labels: &[usize], bins: usize) -> Result<MetricResult, MetricError> {
    let n = labels.len();
    if n == 0 || classes == 0 || bins == 0 {
        return Err(MetricError::Arity { need: 1, got: 0 });
    }
    if probs.len() != n * classes {
        return Err(MetricError::Length(probs.len(), n * classes));
    }
    let mut total = 0.0;
    let mut count = vec![0usize; bins];
    let mut prob_sum = vec![0.0f64; bins];
    let mut hits = vec![0usize; bins];
    for c in 0..classes {
        count.iter_mut().for_each(|v| *v = 0);
        prob_sum.iter_mut().for_each(|v| *v = 0.0);
        hits.iter_mut().for_each(|v| *v = 0);
        for (i, &label) in labels.iter().enumerate() {
            let p = probs[i * classes + c];
            let b = ((p * bins as f64).floor() as usize).min(bins - 1);
            count[b] += 1;
            prob_sum[b] += p;
            if label == c {
                hits[b] += 1;
            }
        }
        for b in 0..bins {
            if count[b] == 0 {
                continue;
            }
            let k = count[b] as f64;
            total += (k / n as f64) * (prob_sum[b] / k - hits[b] as f64 / k).abs();
        }
    }
    Ok(MetricResult {
        metric: Metric::Cace,
        value: total,
        n,
    })
}
