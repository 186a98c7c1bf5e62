//! Economic Complexity Index from a country x activity matrix.
//!
//! Pipeline: Balassa revealed comparative advantage, binarisation at a
//! threshold, then the eigenvector of the second-largest eigenvalue of the
//! country-country transition matrix
//!
//! ```text
//! Mcc'[c, c'] = sum_p M[c, p] M[c', p] / (k_c k_p)
//! ```
//!
//! `Mcc'` is similar to the symmetric `D^-1/2 M U^-1 M' D^-1/2` (`D`, `U`
//! diagonal diversity and ubiquity), so the eigenproblem is solved in that
//! symmetric form and mapped back with `D^-1/2`.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorCategory;

const EIGEN_RESIDUAL_TOL: f64 = 1e-10;
const SPECTRAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ComplexityError {
    #[error("entry ({country}, {activity}) must be finite and non-negative, got {value}")]
    InvalidEntry { country: String, activity: String, value: f64 },
    #[error("matrix shape {rows}x{cols} does not match {countries} countries and {activities} activities")]
    Shape { rows: usize, cols: usize, countries: usize, activities: usize },
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("country `{0}` has no activity")]
    ZeroCountry(String),
    #[error("activity `{0}` has no country")]
    ZeroActivity(String),
    #[error("matrix total is zero")]
    ZeroTotal,
    #[error("degenerate structure after binarisation: country `{0}` has no specialisation")]
    DegenerateCountry(String),
    #[error("degenerate structure after binarisation: activity `{0}` has no specialised country")]
    DegenerateActivity(String),
    #[error("binarisation threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("at least two countries are required, got {0}")]
    TooFewCountries(usize),
    #[error("method of reflections needs a positive even iteration count, got {0}")]
    InvalidIterations(usize),
    #[error("eigen solver residual {0:e} above tolerance")]
    EigenNonConvergence(f64),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("csv i/o error: {0}")]
    Io(String),
}

impl ComplexityError {
    pub fn category(&self) -> ErrorCategory {
        use ComplexityError::*;
        match self {
            InvalidEntry { .. } | DuplicateLabel(_) | ZeroCountry(_) | ZeroActivity(_) | ZeroTotal
            | DegenerateCountry(_) | DegenerateActivity(_) | TooFewCountries(_) => ErrorCategory::Data,
            Shape { .. } | InvalidThreshold(_) | InvalidIterations(_) => ErrorCategory::Argument,
            EigenNonConvergence(_) => ErrorCategory::Numeric,
            Parse { .. } => ErrorCategory::Parse,
            Io(_) => ErrorCategory::Io,
        }
    }
}

fn csv_error(e: csv::Error) -> ComplexityError {
    match (e.kind(), e.position()) {
        (csv::ErrorKind::Io(_), _) | (_, None) => ComplexityError::Io(e.to_string()),
        (_, Some(p)) => ComplexityError::Parse { line: p.line(), message: e.to_string() },
    }
}

fn check_labels(labels: &[String]) -> Result<(), ComplexityError> {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l) {
            return Err(ComplexityError::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

/// Permutation that sorts `labels`.
fn sort_order(labels: &[String]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..labels.len()).collect();
    idx.sort_by(|&a, &b| labels[a].cmp(&labels[b]));
    idx
}

fn permuted(values: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| values[(rows[i], cols[j])])
}

/// Non-negative country x activity volumes (exports, publications).
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityMatrix {
    countries: Vec<String>,
    activities: Vec<String>,
    values: DMatrix<f64>,
}

impl ActivityMatrix {
    pub fn new(
        countries: Vec<String>,
        activities: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self, ComplexityError> {
        if values.nrows() != countries.len() || values.ncols() != activities.len() {
            return Err(ComplexityError::Shape {
                rows: values.nrows(),
                cols: values.ncols(),
                countries: countries.len(),
                activities: activities.len(),
            });
        }
        check_labels(&countries)?;
        check_labels(&activities)?;
        for i in 0..values.nrows() {
            for j in 0..values.ncols() {
                let v = values[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(ComplexityError::InvalidEntry {
                        country: countries[i].clone(),
                        activity: activities[j].clone(),
                        value: v,
                    });
                }
            }
        }
        if let Some(i) = (0..values.nrows()).find(|&i| values.row(i).iter().all(|&v| v == 0.0)) {
            return Err(ComplexityError::ZeroCountry(countries[i].clone()));
        }
        if let Some(j) = (0..values.ncols()).find(|&j| values.column(j).iter().all(|&v| v == 0.0)) {
            return Err(ComplexityError::ZeroActivity(activities[j].clone()));
        }
        Ok(ActivityMatrix { countries, activities, values })
    }

    /// Builds from long-form triples, summing duplicates and dropping
    /// all-zero countries and activities. Labels come out sorted.
    pub fn from_triples<I, S>(triples: I) -> Result<Self, ComplexityError>
    where
        I: IntoIterator<Item = (S, S, f64)>,
        S: Into<String>,
    {
        let mut acc: BTreeMap<(String, String), f64> = BTreeMap::new();
        for (c, a, v) in triples {
            let (c, a) = (c.into(), a.into());
            if !v.is_finite() || v < 0.0 {
                return Err(ComplexityError::InvalidEntry { country: c, activity: a, value: v });
            }
            *acc.entry((c, a)).or_insert(0.0) += v;
        }
        let mut row_tot: BTreeMap<&str, f64> = BTreeMap::new();
        let mut col_tot: BTreeMap<&str, f64> = BTreeMap::new();
        for ((c, a), v) in &acc {
            *row_tot.entry(c).or_default() += v;
            *col_tot.entry(a).or_default() += v;
        }
        for (c, _) in row_tot.iter().filter(|(_, &t)| t == 0.0) {
            warn!("dropping country {c}: all-zero row");
        }
        for (a, _) in col_tot.iter().filter(|(_, &t)| t == 0.0) {
            warn!("dropping activity {a}: all-zero column");
        }
        let countries: Vec<String> =
            row_tot.iter().filter(|(_, &t)| t > 0.0).map(|(c, _)| c.to_string()).collect();
        let activities: Vec<String> =
            col_tot.iter().filter(|(_, &t)| t > 0.0).map(|(a, _)| a.to_string()).collect();
        let ci: BTreeMap<&str, usize> = countries.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let ai: BTreeMap<&str, usize> = activities.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
        let mut values = DMatrix::zeros(countries.len(), activities.len());
        for ((c, a), v) in &acc {
            if let (Some(&i), Some(&j)) = (ci.get(c.as_str()), ai.get(a.as_str())) {
                values[(i, j)] = *v;
            }
        }
        ActivityMatrix::new(countries, activities, values)
    }

    /// Reads `country,activity,value`.
    pub fn read_long_csv<R: Read>(source: R) -> Result<Self, ComplexityError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let headers = rdr.headers().map_err(csv_error)?.clone();
        let find = |n: &str| {
            headers.iter().position(|h| h == n).ok_or_else(|| ComplexityError::Parse {
                line: 1,
                message: format!("missing column `{n}`"),
            })
        };
        let (ci, ai, vi) = (find("country")?, find("activity")?, find("value")?);
        let mut triples = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_error)?;
            let line = rec.position().map_or(0, |p| p.line());
            let v: f64 = rec[vi].parse().map_err(|_| ComplexityError::Parse {
                line,
                message: format!("cannot parse value `{}`", &rec[vi]),
            })?;
            triples.push((rec[ci].to_string(), rec[ai].to_string(), v));
        }
        Self::from_triples(triples)
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn activities(&self) -> &[String] {
        &self.activities
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Same matrix with rows and columns sorted by label.
    pub fn canonical(&self) -> ActivityMatrix {
        let r = sort_order(&self.countries);
        let c = sort_order(&self.activities);
        ActivityMatrix {
            countries: r.iter().map(|&i| self.countries[i].clone()).collect(),
            activities: c.iter().map(|&j| self.activities[j].clone()).collect(),
            values: permuted(&self.values, &r, &c),
        }
    }
}

/// Revealed comparative advantage values with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RcaMatrix {
    pub countries: Vec<String>,
    pub activities: Vec<String>,
    pub values: DMatrix<f64>,
}

/// Balassa index: a country's share of an activity relative to the world's.
pub fn rca(m: &ActivityMatrix) -> Result<RcaMatrix, ComplexityError> {
    let x = &m.values;
    let total: f64 = x.iter().sum();
    if total <= 0.0 {
        return Err(ComplexityError::ZeroTotal);
    }
    let row: Vec<f64> = x.row_iter().map(|r| r.sum()).collect();
    let col: Vec<f64> = x.column_iter().map(|c| c.sum()).collect();
    let values = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        (x[(i, j)] / row[i]) / (col[j] / total)
    });
    Ok(RcaMatrix { countries: m.countries.clone(), activities: m.activities.clone(), values })
}

/// Binary country x activity specialisation matrix with no empty row or
/// column.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecializationMatrix {
    countries: Vec<String>,
    activities: Vec<String>,
    m: DMatrix<f64>,
}

impl SpecializationMatrix {
    pub fn new(
        countries: Vec<String>,
        activities: Vec<String>,
        rows: &[Vec<u8>],
    ) -> Result<Self, ComplexityError> {
        let ncols = activities.len();
        if rows.len() != countries.len() || rows.iter().any(|r| r.len() != ncols) {
            return Err(ComplexityError::Shape {
                rows: rows.len(),
                cols: rows.first().map_or(0, Vec::len),
                countries: countries.len(),
                activities: ncols,
            });
        }
        let m = DMatrix::from_fn(rows.len(), ncols, |i, j| if rows[i][j] != 0 { 1.0 } else { 0.0 });
        Self::from_binary(countries, activities, m)
    }

    /// Labels `c000, c001, ...` and `p000, p001, ...`.
    pub fn unlabeled(rows: &[Vec<u8>]) -> Result<Self, ComplexityError> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        Self::new(
            (0..n).map(|i| format!("c{i:03}")).collect(),
            (0..p).map(|j| format!("p{j:03}")).collect(),
            rows,
        )
    }

    fn from_binary(
        countries: Vec<String>,
        activities: Vec<String>,
        m: DMatrix<f64>,
    ) -> Result<Self, ComplexityError> {
        check_labels(&countries)?;
        check_labels(&activities)?;
        if let Some(i) = (0..m.nrows()).find(|&i| m.row(i).sum() == 0.0) {
            return Err(ComplexityError::DegenerateCountry(countries[i].clone()));
        }
        if let Some(j) = (0..m.ncols()).find(|&j| m.column(j).sum() == 0.0) {
            return Err(ComplexityError::DegenerateActivity(activities[j].clone()));
        }
        Ok(SpecializationMatrix { countries, activities, m })
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn activities(&self) -> &[String] {
        &self.activities
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn canonical(&self) -> SpecializationMatrix {
        let r = sort_order(&self.countries);
        let c = sort_order(&self.activities);
        SpecializationMatrix {
            countries: r.iter().map(|&i| self.countries[i].clone()).collect(),
            activities: c.iter().map(|&j| self.activities[j].clone()).collect(),
            m: permuted(&self.m, &r, &c),
        }
    }

    /// `Mcc'` in the matrix's own country order.
    pub fn country_transition(&self) -> DMatrix<f64> {
        let (kc, kp) = diversity_ubiquity(self);
        let n = self.m.nrows();
        DMatrix::from_fn(n, n, |c, d| {
            (0..self.m.ncols()).map(|p| self.m[(c, p)] * self.m[(d, p)] / kp[p]).sum::<f64>() / kc[c]
        })
    }
}

/// `M[c, p] = 1` iff `R[c, p] >= threshold`.
pub fn binarize(r: &RcaMatrix, threshold: f64) -> Result<SpecializationMatrix, ComplexityError> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(ComplexityError::InvalidThreshold(threshold));
    }
    let m = r.values.map(|v| if v >= threshold { 1.0 } else { 0.0 });
    SpecializationMatrix::from_binary(r.countries.clone(), r.activities.clone(), m)
}

/// Row sums (diversity) and column sums (ubiquity).
pub fn diversity_ubiquity(m: &SpecializationMatrix) -> (Vec<f64>, Vec<f64>) {
    (
        m.m.row_iter().map(|r| r.sum()).collect(),
        m.m.column_iter().map(|c| c.sum()).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountryScore {
    /// Min-max normalised to `[0, 1]`.
    pub eci: f64,
    /// Standardised: mean 0, population sd 1.
    pub raw: f64,
    /// 1 = most complex.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EciScores {
    pub scores: BTreeMap<String, CountryScore>,
    /// Set when the structure carries no ranking signal; every score is 0.5.
    pub degenerate: bool,
    /// Eigenvalue the scores were taken from.
    pub eigenvalue: f64,
}

impl EciScores {
    pub fn get(&self, country: &str) -> Option<&CountryScore> {
        self.scores.get(country)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Countries from most to least complex.
    pub fn by_rank(&self) -> Vec<(&str, &CountryScore)> {
        let mut v: Vec<_> = self.scores.iter().map(|(c, s)| (c.as_str(), s)).collect();
        v.sort_by_key(|(_, s)| s.rank);
        v
    }

    /// `country,eci,raw,rank`, in rank order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ComplexityError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["country", "eci", "raw", "rank"]).map_err(csv_error)?;
        for (c, s) in self.by_rank() {
            w.write_record([c.to_string(), s.eci.to_string(), s.raw.to_string(), s.rank.to_string()])
                .map_err(csv_error)?;
        }
        w.flush().map_err(|e| ComplexityError::Io(e.to_string()))
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub(crate) fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    if sa == 0.0 || sb == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 * sa * sb)
}

fn degenerate_scores(countries: &[String], eigenvalue: f64) -> EciScores {
    warn!("degenerate complexity structure: all countries scored 0.5");
    let mut sorted: Vec<&String> = countries.iter().collect();
    sorted.sort();
    let scores = sorted
        .into_iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), CountryScore { eci: 0.5, raw: 0.0, rank: i + 1 }))
        .collect();
    EciScores { scores, degenerate: true, eigenvalue }
}

/// Standardise, orient so that the correlation with diversity is
/// non-negative, min-max normalise and rank.
fn finish_scores(countries: &[String], diversity: &[f64], v: &[f64], eigenvalue: f64) -> EciScores {
    let (mean, sd) = mean_sd(v);
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if sd.is_nan() || sd <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return degenerate_scores(countries, eigenvalue);
    }
    let mut raw: Vec<f64> = v.iter().map(|x| (x - mean) / sd).collect();
    if pearson(&raw, diversity) < 0.0 {
        raw.iter_mut().for_each(|x| *x = -*x);
    }
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]).then_with(|| countries[a].cmp(&countries[b])));
    let mut rank = vec![0; raw.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    let scores = countries
        .iter()
        .enumerate()
        .map(|(i, c)| {
            (c.clone(), CountryScore { eci: (raw[i] - lo) / (hi - lo), raw: raw[i], rank: rank[i] })
        })
        .collect();
    EciScores { scores, degenerate: false, eigenvalue }
}

/// Eigenvector ECI.
///
/// The computation runs on the label-sorted matrix, so any relabelling of
/// the input yields identical scores per country.
pub fn eci_eigen(m: &SpecializationMatrix) -> Result<EciScores, ComplexityError> {
    let n = m.m.nrows();
    if n < 2 {
        return Err(ComplexityError::TooFewCountries(n));
    }
    let m = m.canonical();
    let (kc, kp) = diversity_ubiquity(&m);
    let inv_sqrt_kc: Vec<f64> = kc.iter().map(|k| 1.0 / k.sqrt()).collect();

    let scaled = DMatrix::from_fn(n, m.m.ncols(), |c, p| m.m[(c, p)] * inv_sqrt_kc[c] / kp[p].sqrt());
    let sym = &scaled * scaled.transpose();
    let eig = SymmetricEigen::new(sym);

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (l1, l2) = (eig.eigenvalues[idx[0]], eig.eigenvalues[idx[1]]);
    if l2 <= SPECTRAL_TOL || l1 - l2 <= SPECTRAL_TOL {
        // no signal (rank one) or a disconnected network
        return Ok(degenerate_scores(&m.countries, l2));
    }

    let w = eig.eigenvectors.column(idx[1]);
    let v = DVector::from_fn(n, |c, _| w[c] * inv_sqrt_kc[c]);
    let mcc = m.country_transition();
    let residual = (&mcc * &v - &v * l2).amax() / v.amax();
    if residual.is_nan() || residual >= EIGEN_RESIDUAL_TOL {
        return Err(ComplexityError::EigenNonConvergence(residual));
    }
    Ok(finish_scores(&m.countries, &kc, v.as_slice(), l2))
}

/// Iterated neighbour averages on the bipartite network, starting from
/// diversity and ubiquity. Returns the standardised country values after
/// `iterations` half-steps, in the matrix's country order. A constant
/// result comes back as all zeros.
///
/// The informative part of the iterate shrinks like `lambda_2^(iterations/2)`
/// relative to the constant part, so beyond about
/// `2 ln(eps) / ln(lambda_2)` iterations only rounding noise is left.
pub fn method_of_reflections(
    m: &SpecializationMatrix,
    iterations: usize,
) -> Result<Vec<f64>, ComplexityError> {
    if iterations == 0 || !iterations.is_multiple_of(2) {
        return Err(ComplexityError::InvalidIterations(iterations));
    }
    let (kc0, kp0) = diversity_ubiquity(m);
    let mat = &m.m;
    let mut kc = DVector::from_vec(kc0.clone());
    let mut kp = DVector::from_vec(kp0.clone());
    for _ in 0..iterations {
        let next_c = DVector::from_fn(kc.len(), |c, _| (mat.row(c) * &kp)[0] / kc0[c]);
        let next_p = DVector::from_fn(kp.len(), |p, _| mat.column(p).dot(&kc) / kp0[p]);
        kc = next_c;
        kp = next_p;
    }
    let (mean, sd) = mean_sd(kc.as_slice());
    if sd.is_nan() || sd <= 0.0 {
        return Ok(vec![0.0; kc.len()]);
    }
    Ok(kc.iter().map(|x| (x - mean) / sd).collect())
}

/// `rca -> binarize -> eci_eigen`.
pub fn eci_from_raw(m: &ActivityMatrix, threshold: f64) -> Result<EciScores, ComplexityError> {
    let r = rca(&m.canonical())?;
    eci_eigen(&binarize(&r, threshold)?)
}
