//! Country-year panels and their conversion into crisis spells.
//!
//! A country is at risk from its first observed non-crisis year. The spell
//! ends with an event in the onset year of the next crisis episode, or is
//! censored at the last observed year. Consecutive crisis years form one
//! episode; risk resumes `reentry_gap` years after the episode's last year
//! and the clock restarts at zero (gap time).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorCategory;
use crate::survival::{ModelSpec, SurvivalData, Term};

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("duplicate panel row for ({country}, {year})")]
    Duplicate { country: String, year: i32 },
    #[error("required column `{0}` not found in header")]
    MissingColumn(String),
    #[error("panel is empty")]
    EmptyPanel,
    #[error("unknown predictor `{0}`")]
    UnknownPredictor(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("csv i/o error: {0}")]
    Io(String),
}

impl PanelError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            PanelError::Parse { .. } => ErrorCategory::Parse,
            PanelError::Duplicate { .. } | PanelError::EmptyPanel => ErrorCategory::Data,
            PanelError::MissingColumn(_) => ErrorCategory::Schema,
            PanelError::UnknownPredictor(_) => ErrorCategory::Spec,
            PanelError::InvalidArgument(_) => ErrorCategory::Argument,
            PanelError::Io(_) => ErrorCategory::Io,
        }
    }
}

fn csv_error(e: csv::Error) -> PanelError {
    let line = e.position().map(|p| p.line());
    match (e.kind(), line) {
        (csv::ErrorKind::Io(_), _) => PanelError::Io(e.to_string()),
        (_, Some(line)) => PanelError::Parse { line, message: e.to_string() },
        _ => PanelError::Io(e.to_string()),
    }
}

/// Panel covariates, in the order used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Covariate {
    Growth,
    Interest,
    Rqe,
    Rle,
}

impl Covariate {
    pub const ALL: [Covariate; 4] =
        [Covariate::Growth, Covariate::Interest, Covariate::Rqe, Covariate::Rle];

    pub fn name(self) -> &'static str {
        match self {
            Covariate::Growth => "growth",
            Covariate::Interest => "interest",
            Covariate::Rqe => "rqe",
            Covariate::Rle => "rle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub country: String,
    pub year: i32,
    pub crisis: bool,
    pub growth: Option<f64>,
    pub interest: Option<f64>,
    pub rqe: Option<f64>,
    pub rle: Option<f64>,
}

impl PanelRow {
    pub fn get(&self, c: Covariate) -> Option<f64> {
        match c {
            Covariate::Growth => self.growth,
            Covariate::Interest => self.interest,
            Covariate::Rqe => self.rqe,
            Covariate::Rle => self.rle,
        }
    }
}

/// Header names for each panel field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelSchema {
    pub country: String,
    pub year: String,
    pub crisis: String,
    pub growth: String,
    pub interest: String,
    pub rqe: String,
    pub rle: String,
}

impl Default for PanelSchema {
    fn default() -> Self {
        PanelSchema {
            country: "country".into(),
            year: "year".into(),
            crisis: "crisis".into(),
            growth: "growth".into(),
            interest: "interest".into(),
            rqe: "rqe".into(),
            rle: "rle".into(),
        }
    }
}

/// Row count and per-column count of missing cells.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows: usize,
    pub missing: BTreeMap<String, usize>,
}

impl LoadReport {
    pub fn total_missing(&self) -> usize {
        self.missing.values().sum()
    }
}

/// Country-year rows, unique on `(country, year)` and sorted by both.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    rows: Vec<PanelRow>,
    index: BTreeMap<(String, i32), usize>,
    report: LoadReport,
}

impl Panel {
    pub fn from_rows(mut rows: Vec<PanelRow>) -> Result<Self, PanelError> {
        rows.sort_by(|a, b| (&a.country, a.year).cmp(&(&b.country, b.year)));
        let mut index = BTreeMap::new();
        for (i, r) in rows.iter().enumerate() {
            if index.insert((r.country.clone(), r.year), i).is_some() {
                return Err(PanelError::Duplicate { country: r.country.clone(), year: r.year });
            }
        }
        let mut missing: BTreeMap<String, usize> =
            Covariate::ALL.iter().map(|c| (c.name().to_string(), 0)).collect();
        for r in &rows {
            for c in Covariate::ALL {
                if r.get(c).is_none() {
                    *missing.get_mut(c.name()).unwrap() += 1;
                }
            }
        }
        let report = LoadReport { rows: rows.len(), missing };
        Ok(Panel { rows, index, report })
    }

    pub fn rows(&self) -> &[PanelRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn report(&self) -> &LoadReport {
        &self.report
    }

    pub fn get(&self, country: &str, year: i32) -> Option<&PanelRow> {
        self.index.get(&(country.to_string(), year)).map(|&i| &self.rows[i])
    }

    pub fn countries(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.rows.iter().map(|r| r.country.as_str()).collect();
        set.into_iter().collect()
    }

    /// Rows for `country`, ordered by year.
    pub fn country_rows<'a>(&'a self, country: &'a str) -> impl Iterator<Item = &'a PanelRow> + 'a {
        self.index
            .range((country.to_string(), i32::MIN)..=(country.to_string(), i32::MAX))
            .map(|(_, &i)| &self.rows[i])
    }
}

fn parse_optional(cell: &str, line: u64, column: &str) -> Result<Option<f64>, PanelError> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    let v: f64 = cell.parse().map_err(|_| PanelError::Parse {
        line,
        message: format!("column `{column}`: cannot parse `{cell}` as a number"),
    })?;
    if !v.is_finite() {
        return Err(PanelError::Parse { line, message: format!("column `{column}`: non-finite value") });
    }
    Ok(Some(v))
}

/// Reads a comma-delimited panel with a header row.
///
/// Empty (or `NA`) covariate cells are kept as missing.
pub fn load_panel<R: Read>(source: R, schema: &PanelSchema) -> Result<Panel, PanelError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PanelError::MissingColumn(name.to_string()))
    };
    let idx = [
        col(&schema.country)?,
        col(&schema.year)?,
        col(&schema.crisis)?,
        col(&schema.growth)?,
        col(&schema.interest)?,
        col(&schema.rqe)?,
        col(&schema.rle)?,
    ];

    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let cell = |i: usize| rec.get(idx[i]).unwrap_or("");
        let country = cell(0).to_string();
        if country.is_empty() {
            return Err(PanelError::Parse { line, message: "empty country code".into() });
        }
        let year: i32 = cell(1).parse().map_err(|_| PanelError::Parse {
            line,
            message: format!("cannot parse year `{}`", cell(1)),
        })?;
        let crisis = match cell(2) {
            "1" | "true" | "TRUE" => true,
            "0" | "false" | "FALSE" => false,
            other => {
                return Err(PanelError::Parse {
                    line,
                    message: format!("crisis flag must be 0 or 1, got `{other}`"),
                })
            }
        };
        if !seen.insert((country.clone(), year)) {
            return Err(PanelError::Duplicate { country, year });
        }
        rows.push(PanelRow {
            country,
            year,
            crisis,
            growth: parse_optional(cell(3), line, &schema.growth)?,
            interest: parse_optional(cell(4), line, &schema.interest)?,
            rqe: parse_optional(cell(5), line, &schema.rqe)?,
            rle: parse_optional(cell(6), line, &schema.rle)?,
        });
    }
    Panel::from_rows(rows)
}

/// Inclusive calendar-year window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearWindow {
    pub start: i32,
    pub end: i32,
}

impl YearWindow {
    pub fn new(start: i32, end: i32) -> Result<Self, PanelError> {
        if start > end {
            return Err(PanelError::InvalidArgument(format!("window {start}:{end} is reversed")));
        }
        Ok(YearWindow { start, end })
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }
}

impl Default for YearWindow {
    fn default() -> Self {
        YearWindow { start: 1998, end: 2021 }
    }
}

impl FromStr for YearWindow {
    type Err = PanelError;

    /// `1998:2021`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PanelError::InvalidArgument(format!("window `{s}` is not START:END"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        YearWindow::new(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)
    }
}

impl fmt::Display for YearWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpellConfig {
    pub window: YearWindow,
    /// Years after an episode's last crisis year before risk resumes.
    pub reentry_gap: u32,
    /// Covariates are read at `entry + covariate_lag`.
    pub covariate_lag: u32,
}

impl Default for SpellConfig {
    fn default() -> Self {
        SpellConfig { window: YearWindow::default(), reentry_gap: 1, covariate_lag: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spell {
    pub subject: String,
    pub entry: i32,
    pub exit: i32,
    pub duration: i32,
    pub event: bool,
    /// Calendar year the covariates are taken from.
    pub covariate_year: i32,
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpellSet {
    pub spells: Vec<Spell>,
    pub predictor_names: Vec<String>,
}

impl SpellSet {
    pub fn len(&self) -> usize {
        self.spells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spells.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.spells.iter().filter(|s| s.event).count()
    }

    /// Durations become survival times.
    pub fn to_survival_data(&self) -> Result<SurvivalData, crate::survival::SurvivalError> {
        SurvivalData::new(
            self.predictor_names.clone(),
            self.spells.iter().map(|s| s.duration as f64).collect(),
            self.spells.iter().map(|s| s.event).collect(),
            self.spells.iter().map(|s| s.covariates.clone()).collect(),
        )
    }

    /// `subject,entry,exit,duration,event,<predictors...>`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), PanelError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["subject", "entry", "exit", "duration", "event"];
        header.extend(self.predictor_names.iter().map(String::as_str));
        w.write_record(&header).map_err(csv_error)?;
        for s in &self.spells {
            let mut rec = vec![
                s.subject.clone(),
                s.entry.to_string(),
                s.exit.to_string(),
                s.duration.to_string(),
                u8::from(s.event).to_string(),
            ];
            rec.extend(s.covariates.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_error)?;
        }
        w.flush().map_err(|e| PanelError::Io(e.to_string()))
    }

    pub fn read_csv<R: Read>(source: R) -> Result<Self, PanelError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let headers = rdr.headers().map_err(csv_error)?.clone();
        let fixed = ["subject", "entry", "exit", "duration", "event"];
        for (i, name) in fixed.iter().enumerate() {
            if headers.get(i) != Some(*name) {
                return Err(PanelError::MissingColumn(name.to_string()));
            }
        }
        let predictor_names: Vec<String> = headers.iter().skip(fixed.len()).map(String::from).collect();
        let mut spells = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_error)?;
            let line = rec.position().map_or(0, |p| p.line());
            let int = |i: usize| -> Result<i32, PanelError> {
                rec[i].parse().map_err(|_| PanelError::Parse {
                    line,
                    message: format!("column `{}`: expected an integer, got `{}`", fixed[i], &rec[i]),
                })
            };
            let (entry, exit, duration) = (int(1)?, int(2)?, int(3)?);
            if duration < 1 || exit - entry != duration {
                return Err(PanelError::Parse { line, message: "duration must equal exit - entry and be >= 1".into() });
            }
            let event = match &rec[4] {
                "1" => true,
                "0" => false,
                other => {
                    return Err(PanelError::Parse { line, message: format!("event must be 0 or 1, got `{other}`") })
                }
            };
            let covariates = (fixed.len()..rec.len())
                .map(|i| {
                    parse_optional(&rec[i], line, &headers[i])?.ok_or_else(|| PanelError::Parse {
                        line,
                        message: format!("column `{}` is empty", &headers[i]),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            spells.push(Spell {
                subject: rec[0].to_string(),
                entry,
                exit,
                duration,
                event,
                covariate_year: entry,
                covariates,
            });
        }
        Ok(SpellSet { spells, predictor_names })
    }
}

/// Converts each country's crisis history into consecutive spells.
pub fn build_spells(panel: &Panel, cfg: &SpellConfig) -> Result<SpellSet, PanelError> {
    if panel.is_empty() {
        return Err(PanelError::EmptyPanel);
    }
    let gap = cfg.reentry_gap as i32;
    let mut spells = Vec::new();
    for country in panel.countries() {
        let before = spells.len();
        let mut push = |entry: i32, exit: i32, event: bool| {
            if exit > entry {
                spells.push(Spell {
                    subject: country.to_string(),
                    entry,
                    exit,
                    duration: exit - entry,
                    event,
                    covariate_year: entry + cfg.covariate_lag as i32,
                    covariates: Vec::new(),
                });
            }
        };

        let mut current: Option<i32> = None;
        let mut eligible_from = i32::MIN;
        let mut in_episode = false;
        let mut last_crisis = i32::MIN;
        let mut prev: Option<i32> = None;

        for row in panel.country_rows(country).filter(|r| cfg.window.contains(r.year)) {
            let y = row.year;
            if let Some(p) = prev {
                if y != p + 1 {
                    // unobserved years: censor at the last observed year
                    if let Some(entry) = current.take() {
                        push(entry, p, false);
                    }
                    if in_episode {
                        in_episode = false;
                        eligible_from = last_crisis + gap;
                    }
                }
            }
            if row.crisis {
                if !in_episode {
                    in_episode = true;
                    if let Some(entry) = current.take() {
                        push(entry, y, true);
                    }
                }
                last_crisis = y;
            } else {
                if in_episode {
                    in_episode = false;
                    eligible_from = last_crisis + gap;
                }
                if current.is_none() && y >= eligible_from {
                    current = Some(y);
                }
            }
            prev = Some(y);
        }
        if let (Some(entry), Some(last)) = (current, prev) {
            push(entry, last, false);
        }
        if spells.len() == before {
            warn!("country {country} contributes no spells");
        }
    }
    Ok(SpellSet { spells, predictor_names: Vec::new() })
}

/// Per-country trade and research complexity scores.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EciTable {
    pub entries: BTreeMap<String, (Option<f64>, Option<f64>)>,
}

impl EciTable {
    pub fn insert(&mut self, country: &str, trade: Option<f64>, research: Option<f64>) {
        self.entries.insert(country.to_string(), (trade, research));
    }

    /// Reads `country,eci_trade,eci_research`.
    pub fn read_csv<R: Read>(source: R) -> Result<Self, PanelError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let headers = rdr.headers().map_err(csv_error)?.clone();
        let find = |n: &str| {
            headers.iter().position(|h| h == n).ok_or_else(|| PanelError::MissingColumn(n.into()))
        };
        let (ci, ti, ri) = (find("country")?, find("eci_trade")?, find("eci_research")?);
        let mut t = EciTable::default();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_error)?;
            let line = rec.position().map_or(0, |p| p.line());
            t.insert(
                &rec[ci],
                parse_optional(&rec[ti], line, "eci_trade")?,
                parse_optional(&rec[ri], line, "eci_research")?,
            );
        }
        Ok(t)
    }

    /// Merges two single-dimension score files (`country,eci,...`).
    pub fn from_score_files<R1: Read, R2: Read>(trade: R1, research: R2) -> Result<Self, PanelError> {
        fn read<R: Read>(r: R) -> Result<BTreeMap<String, f64>, PanelError> {
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
            let headers = rdr.headers().map_err(csv_error)?.clone();
            let find = |n: &str| {
                headers.iter().position(|h| h == n).ok_or_else(|| PanelError::MissingColumn(n.into()))
            };
            let (ci, ei) = (find("country")?, find("eci")?);
            let mut out = BTreeMap::new();
            for rec in rdr.records() {
                let rec = rec.map_err(csv_error)?;
                let line = rec.position().map_or(0, |p| p.line());
                if let Some(v) = parse_optional(&rec[ei], line, "eci")? {
                    out.insert(rec[ci].to_string(), v);
                }
            }
            Ok(out)
        }
        let trade = read(trade)?;
        let research = read(research)?;
        let mut t = EciTable::default();
        let countries: BTreeSet<&String> = trade.keys().chain(research.keys()).collect();
        for c in countries {
            t.insert(c, trade.get(c).copied(), research.get(c).copied());
        }
        Ok(t)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), PanelError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["country", "eci_trade", "eci_research"]).map_err(csv_error)?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (c, (t, r)) in &self.entries {
            w.write_record([c.clone(), cell(*t), cell(*r)]).map_err(csv_error)?;
        }
        w.flush().map_err(|e| PanelError::Io(e.to_string()))
    }
}

/// Source of a predictor value for a spell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Predictor {
    EciTrade,
    EciResearch,
    Panel(Covariate),
}

impl Predictor {
    fn resolve(name: &str) -> Option<Predictor> {
        Some(match name {
            "eci_trade" | "eciT" => Predictor::EciTrade,
            "eci_research" | "eciR" => Predictor::EciResearch,
            "growth" => Predictor::Panel(Covariate::Growth),
            "interest" => Predictor::Panel(Covariate::Interest),
            "rqe" => Predictor::Panel(Covariate::Rqe),
            "rle" => Predictor::Panel(Covariate::Rle),
            _ => return None,
        })
    }

    fn canonical(self) -> &'static str {
        match self {
            Predictor::EciTrade => "eci_trade",
            Predictor::EciResearch => "eci_research",
            Predictor::Panel(c) => c.name(),
        }
    }
}

/// Spells with covariates attached, plus the listwise-deletion count.
#[derive(Debug, Clone, PartialEq)]
pub struct Attached {
    pub spells: SpellSet,
    pub dropped: usize,
}

/// Attaches the covariates named by `spec` to every spell.
///
/// Values come from the panel at each spell's covariate year and from the
/// per-country ECI table; interaction terms are products. Spells missing any
/// required value, or whose covariate year is not before an event exit, are
/// dropped. Predictor aliases `eciT`/`eciR` are accepted and rewritten to
/// `eci_trade`/`eci_research`.
pub fn attach_covariates(
    spells: &SpellSet,
    panel: &Panel,
    eci: &EciTable,
    spec: &ModelSpec,
) -> Result<Attached, PanelError> {
    let resolve = |n: &str| Predictor::resolve(n).ok_or_else(|| PanelError::UnknownPredictor(n.to_string()));
    let mut plan = Vec::with_capacity(spec.k());
    let mut canon_terms = Vec::with_capacity(spec.k());
    for term in spec.terms() {
        match term {
            Term::Main(n) => {
                let p = resolve(n)?;
                canon_terms.push(Term::Main(p.canonical().into()));
                plan.push((p, None));
            }
            Term::Interaction(a, b) => {
                let (pa, pb) = (resolve(a)?, resolve(b)?);
                canon_terms.push(Term::Interaction(pa.canonical().into(), pb.canonical().into()));
                plan.push((pa, Some(pb)));
            }
        }
    }
    let canon = ModelSpec::from_terms(canon_terms)
        .map_err(|e| PanelError::InvalidArgument(e.to_string()))?;

    let value = |p: Predictor, s: &Spell| -> Option<f64> {
        match p {
            Predictor::EciTrade => eci.entries.get(&s.subject).and_then(|e| e.0),
            Predictor::EciResearch => eci.entries.get(&s.subject).and_then(|e| e.1),
            Predictor::Panel(c) => panel.get(&s.subject, s.covariate_year).and_then(|r| r.get(c)),
        }
    };

    let mut kept = Vec::with_capacity(spells.len());
    let mut dropped = 0;
    'spells: for s in &spells.spells {
        if s.event && s.covariate_year >= s.exit {
            dropped += 1;
            continue;
        }
        let mut covs = Vec::with_capacity(plan.len());
        for &(a, b) in &plan {
            let Some(va) = value(a, s) else {
                dropped += 1;
                continue 'spells;
            };
            let v = match b {
                None => va,
                Some(b) => match value(b, s) {
                    Some(vb) => va * vb,
                    None => {
                        dropped += 1;
                        continue 'spells;
                    }
                },
            };
            covs.push(v);
        }
        kept.push(Spell { covariates: covs, ..s.clone() });
    }
    Ok(Attached { spells: SpellSet { spells: kept, predictor_names: canon.term_names() }, dropped })
}
