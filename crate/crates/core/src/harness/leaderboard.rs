//! Leaderboard rendering: one row per dataset, ρ per method, then the average
//! and the number of effective methods.

use std::str::FromStr;

use super::EvalTable;
use crate::scoring::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(format!("unknown format {s:?} (expected csv or markdown)")),
        }
    }
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.3}"),
        None => "-".to_string(),
    }
}

/// Datasets sorted by descending average ρ (datasets without any ρ last),
/// ties broken by ascending dataset id.
pub fn sorted_tables(tables: &[EvalTable]) -> Vec<&EvalTable> {
    let mut sorted: Vec<&EvalTable> = tables.iter().collect();
    sorted.sort_by(|a, b| {
        let (x, y) = (a.average_rho(), b.average_rho());
        match (x, y) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
        .then_with(|| a.dataset_id.cmp(&b.dataset_id))
    });
    sorted
}

pub fn render_leaderboard(tables: &[EvalTable], format: Format) -> String {
    let methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| tables.iter().any(|t| t.get(*m).is_some()))
        .collect();
    let mut header = vec!["Dataset".to_string()];
    header.extend(methods.iter().map(|m| m.column_label().to_string()));
    header.push("Avg.".into());
    header.push("#Effective".into());

    let rows: Vec<Vec<String>> = sorted_tables(tables)
        .into_iter()
        .map(|t| {
            let mut row = vec![t.dataset_id.clone()];
            row.extend(methods.iter().map(|&m| cell(t.get(m).and_then(|r| r.rho))));
            row.push(cell(t.average_rho()));
            row.push(t.effective_count().to_string());
            row
        })
        .collect();

    let mut out = String::new();
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header).expect("in-memory write");
            for r in &rows {
                w.write_record(r).expect("in-memory write");
            }
            out = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells");
        }
        Format::Markdown => {
            let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
            out.push_str(&line(&header));
            let rule: Vec<String> = header
                .iter()
                .enumerate()
                .map(|(i, _)| if i == 0 { ":---".into() } else { "---:".into() })
                .collect();
            out.push_str(&line(&rule));
            for r in &rows {
                out.push_str(&line(r));
            }
        }
    }
    out
}
