//! Regression tables and AIC figure data.
//!
//! Rounding happens only in the markdown table; CSV and JSON carry full
//! precision.

use std::fmt::Write as _;

use serde::Serialize;

use crate::ladder::{Failure, LadderModel, LadderResult, RobustnessResult};
use crate::survival::{CoefficientRow, CoxFit, SurvivalError};

pub const FOOTNOTE: &str = "* p<0.05 ** p<0.01 *** p<0.001";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(TableFormat::Markdown),
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            _ => Err(format!("unknown format `{s}` (csv, markdown, json)")),
        }
    }
}

/// One table column: a labelled fit, or a model that failed.
#[derive(Debug, Clone, Copy)]
pub struct Column<'a> {
    pub label: &'a str,
    pub fit: Option<&'a CoxFit>,
    pub failure: Option<&'a Failure>,
}

impl<'a> From<&'a LadderModel> for Column<'a> {
    fn from(m: &'a LadderModel) -> Self {
        Column { label: &m.label, fit: m.fit.as_ref(), failure: m.failure.as_ref() }
    }
}

/// Human label for a predictor or interaction column name.
pub fn display_name(name: &str) -> String {
    if let Some((a, b)) = name.split_once(':') {
        return format!("{} x {}", display_name(a), display_name(b));
    }
    match name {
        "eci_trade" => "ECI (trade)",
        "eci_research" => "ECI (research)",
        "rqe" => "Regulatory quality",
        "interest" => "Interest expenses as % GDP",
        "growth" => "Real GDP growth",
        "rle" => "Rule of law",
        other => other,
    }
    .to_string()
}

fn fixed(v: f64, digits: usize) -> String {
    let s = format!("{v:.digits$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.chars().all(|c| c == '0' || c == '.') => rest.to_string(),
        _ => s,
    }
}

/// `beta stars (lo – hi)` rounded to two decimals.
pub fn format_cell(beta: f64, stars: &str, lo: f64, hi: f64) -> String {
    let head = if stars.is_empty() { fixed(beta, 2) } else { format!("{} {stars}", fixed(beta, 2)) };
    format!("{head} ({} \u{2013} {})", fixed(lo, 2), fixed(hi, 2))
}

fn term_order(columns: &[Column]) -> Vec<String> {
    let mut order: Vec<String> = Vec::new();
    for f in columns.iter().filter_map(|c| c.fit) {
        for n in f.names() {
            if !order.contains(&n) {
                order.push(n);
            }
        }
    }
    order
}

fn coefficient_rows(columns: &[Column], level: f64) -> Result<Vec<Option<Vec<CoefficientRow>>>, SurvivalError> {
    columns.iter().map(|c| c.fit.map(|f| f.coefficients(level)).transpose()).collect()
}

fn render_markdown(columns: &[Column], level: f64) -> Result<String, SurvivalError> {
    let rows = coefficient_rows(columns, level)?;
    let terms = term_order(columns);
    let mut out = String::new();
    let line = |cells: Vec<String>| format!("| {} |\n", cells.join(" | "));

    let mut header = vec![String::new()];
    header.extend(columns.iter().map(|c| c.label.to_string()));
    out += &line(header);
    out += &format!("|{}\n", "---|".repeat(columns.len() + 1));

    for t in &terms {
        let mut cells = vec![display_name(t)];
        for r in &rows {
            let cell = r
                .as_ref()
                .and_then(|r| r.iter().find(|c| &c.name == t))
                .map(|c| format_cell(c.beta, &c.stars, c.lo, c.hi))
                .unwrap_or_default();
            cells.push(cell);
        }
        out += &line(cells);
    }
    let stat = |name: &str, f: &dyn Fn(&CoxFit) -> String| {
        let mut cells = vec![name.to_string()];
        cells.extend(columns.iter().map(|c| c.fit.map(f).unwrap_or_default()));
        line(cells)
    };
    out += &stat("Observations", &|f| f.n_spells.to_string());
    out += &stat("AIC", &|f| fixed(f.aic, 3));
    out += &stat("log-Likelihood", &|f| fixed(f.loglik, 3));
    if columns.iter().any(|c| c.fit.is_none()) {
        let mut cells = vec!["Status".to_string()];
        cells.extend(columns.iter().map(|c| match (c.fit, c.failure) {
            (Some(_), _) => "ok".to_string(),
            (None, Some(f)) => format!("failed ({})", f.category),
            (None, None) => "failed".to_string(),
        }));
        out += &line(cells);
    }
    out += &format!("\n{FOOTNOTE}\n");
    Ok(out)
}

fn render_csv(columns: &[Column], level: f64) -> Result<String, SurvivalError> {
    let rows = coefficient_rows(columns, level)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "model", "status", "term", "beta", "se", "ci_lo", "ci_hi", "p_value", "stars", "observations", "events",
        "aic", "loglik",
    ];
    let mut records: Vec<Vec<String>> = Vec::new();
    for (c, r) in columns.iter().zip(&rows) {
        match (c.fit, r) {
            (Some(f), Some(r)) => {
                let tail = [f.n_spells.to_string(), f.n_events.to_string(), f.aic.to_string(), f.loglik.to_string()];
                if r.is_empty() {
                    let mut rec = vec![c.label.to_string(), "ok".into()];
                    rec.extend(std::iter::repeat_n(String::new(), 7));
                    rec.extend(tail.iter().cloned());
                    records.push(rec);
                }
                for row in r {
                    let mut rec = vec![
                        c.label.to_string(),
                        "ok".into(),
                        row.name.clone(),
                        row.beta.to_string(),
                        row.se.to_string(),
                        row.lo.to_string(),
                        row.hi.to_string(),
                        row.p.to_string(),
                        row.stars.clone(),
                    ];
                    rec.extend(tail.iter().cloned());
                    records.push(rec);
                }
            }
            _ => {
                let status = c.failure.map_or("failed".to_string(), |f| format!("failed: {}", f.message));
                let mut rec = vec![c.label.to_string(), status];
                rec.extend(std::iter::repeat_n(String::new(), 11));
                records.push(rec);
            }
        }
    }
    w.write_record(header).expect("in-memory csv write");
    for r in records {
        w.write_record(r).expect("in-memory csv write");
    }
    let bytes = w.into_inner().expect("in-memory csv flush");
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Serialize)]
struct JsonColumn<'a> {
    label: &'a str,
    fit: Option<&'a CoxFit>,
    failure: Option<&'a Failure>,
    coefficients: Option<Vec<CoefficientRow>>,
}

fn render_json(columns: &[Column], level: f64) -> Result<String, SurvivalError> {
    let rows = coefficient_rows(columns, level)?;
    let cols: Vec<JsonColumn> = columns
        .iter()
        .zip(rows)
        .map(|(c, r)| JsonColumn { label: c.label, fit: c.fit, failure: c.failure, coefficients: r })
        .collect();
    let mut s = serde_json::to_string_pretty(&cols).expect("table serialises");
    s.push('\n');
    Ok(s)
}

/// Renders columns with Wald intervals at `level`.
pub fn render_columns(columns: &[Column], format: TableFormat, level: f64) -> Result<String, SurvivalError> {
    match format {
        TableFormat::Markdown => render_markdown(columns, level),
        TableFormat::Csv => render_csv(columns, level),
        TableFormat::Json => render_json(columns, level),
    }
}

/// One column per fit, labelled `Model 1..n`, 95% intervals.
pub fn render_regression_table(fits: &[CoxFit], format: TableFormat) -> Result<String, SurvivalError> {
    let labels: Vec<String> = (1..=fits.len()).map(|i| format!("Model {i}")).collect();
    let columns: Vec<Column> =
        fits.iter().zip(&labels).map(|(f, l)| Column { label: l, fit: Some(f), failure: None }).collect();
    render_columns(&columns, format, 0.95)
}

pub fn render_ladder(ladder: &LadderResult, format: TableFormat, level: f64) -> Result<String, SurvivalError> {
    let columns: Vec<Column> = ladder.models.iter().map(Column::from).collect();
    render_columns(&columns, format, level)
}

pub fn render_robustness(r: &RobustnessResult, format: TableFormat, level: f64) -> Result<String, SurvivalError> {
    let columns: Vec<Column> = r.models.iter().map(Column::from).collect();
    render_columns(&columns, format, level)
}

/// `model_label,k,loglik,aic,is_best,status` in ladder order.
pub fn emit_aic_figure_data(ladder: &LadderResult) -> String {
    let mut out = String::from("model_label,k,loglik,aic,is_best,status\n");
    for (i, m) in ladder.models.iter().enumerate() {
        let label = if m.label.contains(',') { format!("\"{}\"", m.label) } else { m.label.clone() };
        let is_best = ladder.best_index == Some(i);
        match &m.fit {
            Some(f) => {
                let _ = writeln!(out, "{label},{},{},{},{is_best},ok", f.k(), f.loglik, f.aic);
            }
            None => {
                let _ = writeln!(out, "{label},{},,,false,failed", m.spec.k());
            }
        }
    }
    out
}
