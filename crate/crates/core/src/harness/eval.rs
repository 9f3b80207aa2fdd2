//! Comparing scores with ground-truth test accuracy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::metrics::{mae_direct, precision_at_top, r_squared, rho_at_top, spearman_rho, MetricResult};
use crate::scoring::{Method, ScoreKind, ScoreReport, SignConvention};
use crate::tensor_io::ModelRecord;

/// Methods with ρ above this count as effective.
pub const EFFECTIVE_RHO: f64 = 0.7;
pub const TOP_FRACTION: f64 = 0.1;

/// Metrics of one method on one dataset. `None` marks a metric that is
/// undefined for the method (MAE of a surrogate score) or for the data
/// (correlation against constant values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEval {
    pub method: Method,
    pub n_models: usize,
    pub rho: Option<f64>,
    pub r_squared: Option<f64>,
    pub mae: Option<f64>,
    pub precision_at_10: Option<f64>,
    pub rho_at_10: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub dataset_id: String,
    pub rows: Vec<MethodEval>,
}

pub fn effective_count(rhos: &[f64]) -> usize {
    rhos.iter().filter(|&&r| r > EFFECTIVE_RHO).count()
}

impl EvalTable {
    pub fn get(&self, method: Method) -> Option<&MethodEval> {
        self.rows.iter().find(|r| r.method == method)
    }

    fn rhos(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rho).collect()
    }

    /// Mean ρ over methods with a defined correlation, MDE's negative value included.
    pub fn average_rho(&self) -> Option<f64> {
        let rhos = self.rhos();
        (!rhos.is_empty()).then(|| rhos.iter().sum::<f64>() / rhos.len() as f64)
    }

    pub fn effective_count(&self) -> usize {
        effective_count(&self.rhos())
    }
}

/// Argmax test accuracy of every model, keyed by model id.
pub fn ground_truth<'a>(
    records: impl IntoIterator<Item = &'a ModelRecord>,
) -> Result<BTreeMap<String, f64>, HarnessError> {
    records
        .into_iter()
        .map(|r| {
            r.test
                .accuracy()
                .map(|a| (r.model_id.clone(), a))
                .ok_or_else(|| HarnessError::Evaluation(format!("model {} has no test labels", r.model_id)))
        })
        .collect()
}

/// Orientation used for top-k selection: larger means predicted to be better.
fn ranking_score(r: &ScoreReport) -> f64 {
    match (r.kind, r.sign_convention) {
        (ScoreKind::SurrogateScore, SignConvention::LowerIsBetter) => -r.value,
        _ => r.accuracy_axis(),
    }
}

/// Per-method metrics. ρ and R² use each report's accuracy axis without
/// re-orienting lower-is-better surrogates, so MDE keeps its negative
/// correlation. The top-10% metrics select models by predicted quality.
pub fn evaluate(
    dataset_id: &str,
    reports: &[ScoreReport],
    truth: &BTreeMap<String, f64>,
) -> Result<EvalTable, HarnessError> {
    let mut by_method: Vec<(Method, Vec<&ScoreReport>)> = Vec::new();
    for r in reports {
        match by_method.iter_mut().find(|(m, _)| *m == r.method) {
            Some((_, v)) => v.push(r),
            None => by_method.push((r.method, vec![r])),
        }
    }
    by_method.sort_by_key(|(m, _)| Method::ALL.iter().position(|x| x == m));

    let mut rows = Vec::with_capacity(by_method.len());
    for (method, rs) in by_method {
        let mut axis = Vec::with_capacity(rs.len());
        let mut ranking = Vec::with_capacity(rs.len());
        let mut accs = Vec::with_capacity(rs.len());
        for r in &rs {
            let acc = truth.get(&r.model_id).ok_or_else(|| {
                HarnessError::Evaluation(format!("no ground-truth accuracy for model {}", r.model_id))
            })?;
            axis.push(r.accuracy_axis());
            ranking.push(ranking_score(r));
            accs.push(*acc);
        }
        let value = |m: Result<MetricResult, _>| m.ok().map(|m: MetricResult| m.value);
        rows.push(MethodEval {
            method,
            n_models: rs.len(),
            rho: value(spearman_rho(&axis, &accs)),
            r_squared: value(r_squared(&axis, &accs)),
            mae: if method.kind().is_direct() {
                value(mae_direct(&axis, &accs))
            } else {
                None
            },
            precision_at_10: value(precision_at_top(&ranking, &accs, TOP_FRACTION)),
            rho_at_10: value(rho_at_top(&ranking, &accs, TOP_FRACTION)),
        });
    }
    Ok(EvalTable {
        dataset_id: dataset_id.to_string(),
        rows,
    })
}

fn mean_option(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    match v.first() {
        None => None,
        // identical splits reproduce their value exactly
        Some(&x) if v.iter().all(|&y| y == x) => Some(x),
        Some(_) => Some(v.iter().sum::<f64>() / v.len() as f64),
    }
}

/// Averages the per-split tables of one domain-generalization dataset.
/// Metrics undefined on some split are averaged over the splits where they exist.
pub fn aggregate_dg(dataset_id: &str, tables: &[EvalTable]) -> Result<EvalTable, HarnessError> {
    let first = tables
        .first()
        .ok_or_else(|| HarnessError::Aggregation("no split tables given".into()))?;
    let methods: Vec<Method> = first.rows.iter().map(|r| r.method).collect();
    for t in &tables[1..] {
        let other: Vec<Method> = t.rows.iter().map(|r| r.method).collect();
        if other != methods {
            return Err(HarnessError::Aggregation(format!(
                "split {} scores methods {:?}, split {} scores {:?}",
                t.dataset_id, other, first.dataset_id, methods
            )));
        }
    }
    let rows = methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let col = |f: fn(&MethodEval) -> Option<f64>| mean_option(tables.iter().map(|t| f(&t.rows[i])));
            MethodEval {
                method,
                n_models: tables.iter().map(|t| t.rows[i].n_models).min().unwrap_or(0),
                rho: col(|r| r.rho),
                r_squared: col(|r| r.r_squared),
                mae: col(|r| r.mae),
                precision_at_10: col(|r| r.precision_at_10),
                rho_at_10: col(|r| r.rho_at_10),
            }
        })
        .collect();
    Ok(EvalTable {
        dataset_id: dataset_id.to_string(),
        rows,
    })
}
