//! CSV files exchanged between pipeline stages, scatter data, and writing
//! synthetic families to disk.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value parses back to the same bits.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EvalTable, HarnessError, Manifest, MethodEval, ModelEntry};
use crate::scoring::{Method, ScoreFlag, ScoreKind, ScoreReport, SignConvention};
use crate::synth::SynthFamily;
use crate::tensor_io::{write_tensor, Tensor, TensorI64};

#[derive(Serialize, Deserialize)]
struct ReportRow {
    method: String,
    model_id: String,
    value: String,
    kind: String,
    sign_convention: String,
    flags: String,
}

fn kind_name(k: ScoreKind) -> &'static str {
    match k {
        ScoreKind::DirectAccuracy => "direct-accuracy",
        ScoreKind::DirectError => "direct-error",
        ScoreKind::SurrogateScore => "surrogate",
    }
}

fn parse_kind(s: &str) -> Option<ScoreKind> {
    [ScoreKind::DirectAccuracy, ScoreKind::DirectError, ScoreKind::SurrogateScore]
        .into_iter()
        .find(|k| kind_name(*k) == s)
}

fn sign_name(s: SignConvention) -> &'static str {
    match s {
        SignConvention::HigherIsBetter => "higher-is-better",
        SignConvention::LowerIsBetter => "lower-is-better",
    }
}

fn parse_sign(s: &str) -> Option<SignConvention> {
    [SignConvention::HigherIsBetter, SignConvention::LowerIsBetter]
        .into_iter()
        .find(|k| sign_name(*k) == s)
}

fn float(s: &str, path: &Path) -> Result<f64, HarnessError> {
    s.parse::<f64>()
        .map_err(|e| HarnessError::parse(path, format!("bad number {s:?}: {e}")))
}

fn opt_float(s: &str, path: &Path) -> Result<Option<f64>, HarnessError> {
    if s.is_empty() {
        Ok(None)
    } else {
        float(s, path).map(Some)
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, HarnessError> {
    csv::Writer::from_path(path).map_err(|e| HarnessError::parse(path, e))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, HarnessError> {
    csv::Reader::from_path(path).map_err(|e| HarnessError::parse(path, e))
}

pub fn write_reports(reports: &[ScoreReport], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    for r in reports {
        let flags: Vec<&str> = r.flags.iter().map(|f| f.name()).collect();
        w.serialize(ReportRow {
            method: r.method.name().into(),
            model_id: r.model_id.clone(),
            value: r.value.to_string(),
            kind: kind_name(r.kind).into(),
            sign_convention: sign_name(r.sign_convention).into(),
            flags: flags.join(";"),
        })
        .map_err(|e| HarnessError::parse(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_reports(path: impl AsRef<Path>) -> Result<Vec<ScoreReport>, HarnessError> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for row in reader(path)?.deserialize::<ReportRow>() {
        let row = row.map_err(|e| HarnessError::parse(path, e))?;
        let method: Method = row.method.parse().map_err(|e| HarnessError::parse(path, e))?;
        let mut report = ScoreReport::new(method, row.model_id, float(&row.value, path)?);
        report.kind = parse_kind(&row.kind).ok_or_else(|| HarnessError::parse(path, format!("bad kind {:?}", row.kind)))?;
        report.sign_convention = parse_sign(&row.sign_convention)
            .ok_or_else(|| HarnessError::parse(path, format!("bad sign convention {:?}", row.sign_convention)))?;
        for f in row.flags.split(';').filter(|f| !f.is_empty()) {
            let flag: ScoreFlag = f.parse().map_err(|e| HarnessError::parse(path, e))?;
            report = report.with_flag(flag);
        }
        out.push(report);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct EvalRow {
    dataset_id: String,
    method: String,
    n_models: usize,
    rho: String,
    r_squared: String,
    mae: String,
    precision_at_10: String,
    rho_at_10: String,
}

/// Appends nothing: each call writes a fresh file holding the given tables.
pub fn write_eval_table(tables: &[EvalTable], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    for t in tables {
        for r in &t.rows {
            w.serialize(EvalRow {
                dataset_id: t.dataset_id.clone(),
                method: r.method.name().into(),
                n_models: r.n_models,
                rho: opt_cell(r.rho),
                r_squared: opt_cell(r.r_squared),
                mae: opt_cell(r.mae),
                precision_at_10: opt_cell(r.precision_at_10),
                rho_at_10: opt_cell(r.rho_at_10),
            })
            .map_err(|e| HarnessError::parse(path, e))?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Reads tables back, one per dataset id in order of first appearance.
pub fn read_eval_tables(path: impl AsRef<Path>) -> Result<Vec<EvalTable>, HarnessError> {
    let path = path.as_ref();
    let mut tables: Vec<EvalTable> = Vec::new();
    for row in reader(path)?.deserialize::<EvalRow>() {
        let row = row.map_err(|e| HarnessError::parse(path, e))?;
        let eval = MethodEval {
            method: row.method.parse().map_err(|e| HarnessError::parse(path, e))?,
            n_models: row.n_models,
            rho: opt_float(&row.rho, path)?,
            r_squared: opt_float(&row.r_squared, path)?,
            mae: opt_float(&row.mae, path)?,
            precision_at_10: opt_float(&row.precision_at_10, path)?,
            rho_at_10: opt_float(&row.rho_at_10, path)?,
        };
        match tables.iter_mut().find(|t| t.dataset_id == row.dataset_id) {
            Some(t) => t.rows.push(eval),
            None => tables.push(EvalTable {
                dataset_id: row.dataset_id,
                rows: vec![eval],
            }),
        }
    }
    Ok(tables)
}

/// Writes `score, accuracy, model_id, method` rows for external plotting.
pub fn emit_scatter_data(
    reports: &[ScoreReport],
    truth: &std::collections::BTreeMap<String, f64>,
    path: impl AsRef<Path>,
) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let write_err = |e: csv::Error| HarnessError::parse(path, e);
    w.write_record(["score", "accuracy", "model_id", "method"]).map_err(write_err)?;
    for r in reports {
        let acc = truth
            .get(&r.model_id)
            .ok_or_else(|| HarnessError::Evaluation(format!("no ground-truth accuracy for model {}", r.model_id)))?;
        w.write_record([r.value.to_string(), acc.to_string(), r.model_id.clone(), r.method.name().to_string()])
            .map_err(write_err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Writes every record of a family as ODPT files plus `manifest.json` and
/// returns the manifest path.
pub fn write_family(
    family: &SynthFamily,
    dataset_id: &str,
    shift_type: Option<&str>,
    dir: impl AsRef<Path>,
) -> Result<PathBuf, HarnessError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let classes = family.records.first().map(|r| r.val.classes()).unwrap_or(2);
    let mut models = Vec::with_capacity(family.records.len());
    for r in &family.records {
        let put = |name: &str, t: Tensor| -> Result<PathBuf, HarnessError> {
            let file = PathBuf::from(format!("{}.{name}.odpt", r.model_id));
            write_tensor(&t, dir.join(&file))?;
            Ok(file)
        };
        let labels = |l: &[usize]| -> Result<Tensor, HarnessError> { Ok(Tensor::I64(TensorI64::from_labels(l)?)) };
        let val_labels = r.val.labels().expect("records carry val labels");
        models.push(ModelEntry {
            model_id: r.model_id.clone(),
            arch_tag: r.arch_tag.clone(),
            val_logits: put("val_logits", Tensor::F32(r.val.logits().clone()))?,
            val_labels: put("val_labels", labels(val_labels)?)?,
            test_logits: put("test_logits", Tensor::F32(r.test.logits().clone()))?,
            test_labels: r.test.labels().map(|l| put("test_labels", labels(l)?)).transpose()?,
            test_features: r
                .test
                .features()
                .map(|f| put("test_features", Tensor::F32(f.clone())))
                .transpose()?,
            test_aug_logits: r
                .test
                .aug_logits()
                .map(|a| put("test_aug_logits", Tensor::F32(a.clone())))
                .transpose()?,
        });
    }
    let manifest = Manifest {
        dataset_id: dataset_id.to_string(),
        num_classes: classes,
        shift_type: shift_type.map(str::to_string),
        models,
        base_dir: dir.to_path_buf(),
    };
    let path = dir.join("manifest.json");
    manifest.write(&path)?;
    Ok(path)
}
