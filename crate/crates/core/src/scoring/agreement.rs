//! Agreement-on-the-line accuracy prediction.
//!
//! Pairwise argmax agreement rates of a model pool are measured on the
//! validation and test splits, probit-transformed, and related by a line fit
//! with ordinary least squares. A model's test accuracy is then predicted by
//! pushing its probit validation accuracy through the same line.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use super::{require_labels, Method, ScoreError, ScoreFlag, ScoreReport};
use crate::tensor_io::ModelRecord;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF on `(0, 1)`.
pub fn probit(p: f64) -> f64 {
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    // one Newton step against the CDF tightens the tails
    let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    x - (normal_cdf(x) - p) / density
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementFit {
    pub slope: f64,
    pub intercept: f64,
    pub n_pairs: usize,
    /// One entry per pair: whether either rate hit the clip bounds.
    pub clipped: Vec<bool>,
    pub eps: f64,
}

fn clip(rate: f64, eps: f64) -> (f64, bool) {
    let c = rate.clamp(eps, 1.0 - eps);
    (c, c != rate)
}

impl AgreementFit {
    /// Fits the probit line through `(val_rate, test_rate)` pairs.
    ///
    /// With no spread in the validation coordinate the fit falls back to slope 1
    /// and the mean probit offset.
    pub fn from_rate_pairs(pairs: &[(f64, f64)], eps: f64) -> Result<Self, ScoreError> {
        if pairs.is_empty() {
            return Err(ScoreError::Arity("agreement fit needs at least one pair".into()));
        }
        if !(eps > 0.0 && eps < 0.5) {
            return Err(ScoreError::InvalidParameter {
                name: "agreement_eps",
                value: eps,
            });
        }
        let mut xs = Vec::with_capacity(pairs.len());
        let mut ys = Vec::with_capacity(pairs.len());
        let mut clipped = Vec::with_capacity(pairs.len());
        for &(v, t) in pairs {
            let (v, cv) = clip(v, eps);
            let (t, ct) = clip(t, eps);
            xs.push(probit(v));
            ys.push(probit(t));
            clipped.push(cv || ct);
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let (slope, intercept) = if sxx <= 1e-12 * n {
            (1.0, my - mx)
        } else {
            let slope = sxy / sxx;
            (slope, my - slope * mx)
        };
        Ok(Self {
            slope,
            intercept,
            n_pairs: pairs.len(),
            clipped,
            eps,
        })
    }

    pub fn any_clipped(&self) -> bool {
        self.clipped.iter().any(|&c| c)
    }

    /// `Φ(slope · Φ⁻¹(clip(acc)) + intercept)`.
    pub fn predict(&self, val_accuracy: f64) -> f64 {
        let (acc, _) = clip(val_accuracy, self.eps);
        normal_cdf(self.slope * probit(acc) + self.intercept)
    }
}

fn agreement_rate(a: &[usize], b: &[usize]) -> f64 {
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    same as f64 / a.len() as f64
}

pub fn fit_agreement_line(records: &[&ModelRecord], eps: f64) -> Result<AgreementFit, ScoreError> {
    if records.len() < 2 {
        return Err(ScoreError::Arity(format!(
            "agreement needs at least 2 models, got {}",
            records.len()
        )));
    }
    let (n_va, n_te) = (records[0].val.n(), records[0].test.n());
    if let Some(r) = records.iter().find(|r| r.val.n() != n_va || r.test.n() != n_te) {
        return Err(ScoreError::Arity(format!(
            "model {} has {}/{} val/test samples, expected {n_va}/{n_te}",
            r.model_id,
            r.val.n(),
            r.test.n()
        )));
    }
    let preds: Vec<(Vec<usize>, Vec<usize>)> = records
        .iter()
        .map(|r| (r.val.predictions(), r.test.predictions()))
        .collect();
    let mut pairs = Vec::with_capacity(preds.len() * (preds.len() - 1) / 2);
    for i in 0..preds.len() {
        for j in i + 1..preds.len() {
            pairs.push((
                agreement_rate(&preds[i].0, &preds[j].0),
                agreement_rate(&preds[i].1, &preds[j].1),
            ));
        }
    }
    AgreementFit::from_rate_pairs(&pairs, eps)
}

pub fn score_agreement(record: &ModelRecord, fit: &AgreementFit) -> Result<ScoreReport, ScoreError> {
    require_labels(&record.val)?;
    let acc = record.val.accuracy().expect("labels checked");
    let report = ScoreReport::new(Method::Agreement, record.model_id.as_str(), fit.predict(acc));
    Ok(if fit.any_clipped() {
        report.with_flag(ScoreFlag::ClippedAgreement)
    } else {
        report
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probit_inverts_cdf() {
        for &p in &[1e-4, 0.01, 0.2, 0.5, 0.9, 0.9999] {
            let back = normal_cdf(probit(p));
            assert!((back - p).abs() <= 1e-13 * p, "{p} -> {back}");
        }
        assert_eq!(probit(0.5), 0.0);
        let q = probit(0.975);
        assert!((q - 1.959963984540054).abs() < 1e-12, "{q}");
    }

    #[test]
    fn identity_line_returns_val_accuracy() {
        let fit = AgreementFit::from_rate_pairs(&[(0.3, 0.3), (0.6, 0.6), (0.8, 0.8)], 1e-4).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12 && fit.intercept.abs() < 1e-12);
        assert!((fit.predict(0.7) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn all_ones_falls_back_to_identity() {
        let fit = AgreementFit::from_rate_pairs(&[(1.0, 1.0); 6], 1e-4).unwrap();
        assert_eq!((fit.slope, fit.intercept), (1.0, 0.0));
        assert!(fit.any_clipped());
        let p = fit.predict(1.0);
        assert!(p.is_finite() && p < 1.0 && (p - (1.0 - 1e-4)).abs() < 1e-12);
    }

    #[test]
    fn single_pair_interpolates() {
        let fit = AgreementFit::from_rate_pairs(&[(0.7, 0.55)], 1e-4).unwrap();
        assert_eq!(fit.slope, 1.0);
        assert!((fit.intercept - (probit(0.55) - probit(0.7))).abs() < 1e-15);
        assert!((fit.predict(0.7) - 0.55).abs() < 1e-12);
    }
}
