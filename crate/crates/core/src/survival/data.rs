use serde::{Deserialize, Serialize};

use super::spec::{ModelSpec, Term};
use super::SurvivalError;

/// Right-censored survival data with a dense covariate matrix.
///
/// All subjects enter at time zero; `time` is the exit time and `event`
/// marks a failure (`false` = censored). Covariates are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalData {
    names: Vec<String>,
    time: Vec<f64>,
    event: Vec<bool>,
    x: Vec<f64>,
}

impl SurvivalData {
    pub fn new(
        names: Vec<String>,
        time: Vec<f64>,
        event: Vec<bool>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, SurvivalError> {
        let n = time.len();
        if event.len() != n {
            return Err(SurvivalError::DimensionMismatch { expected: n, actual: event.len() });
        }
        if rows.len() != n {
            return Err(SurvivalError::DimensionMismatch { expected: n, actual: rows.len() });
        }
        let k = names.len();
        let mut x = Vec::with_capacity(n * k);
        for r in &rows {
            if r.len() != k {
                return Err(SurvivalError::DimensionMismatch { expected: k, actual: r.len() });
            }
            x.extend_from_slice(r);
        }
        Self::from_parts(names, time, event, x)
    }

    pub(crate) fn from_parts(
        names: Vec<String>,
        time: Vec<f64>,
        event: Vec<bool>,
        x: Vec<f64>,
    ) -> Result<Self, SurvivalError> {
        if time.iter().any(|t| !t.is_finite()) {
            return Err(SurvivalError::NonFinite { what: "survival times".into() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SurvivalError::NonFinite { what: "covariates".into() });
        }
        debug_assert_eq!(x.len(), time.len() * names.len());
        Ok(SurvivalData { names, time, event, x })
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn k(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn time(&self) -> &[f64] {
        &self.time
    }

    pub fn event(&self) -> &[bool] {
        &self.event
    }

    pub fn n_events(&self) -> usize {
        self.event.iter().filter(|&&e| e).count()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.k();
        &self.x[i * k..(i + 1) * k]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let k = self.k();
        (0..self.len()).map(move |i| self.x[i * k + j])
    }

    fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Builds the design matrix for `spec`: terms present as columns are
    /// copied, interactions missing as columns are formed as products.
    pub fn design_for(&self, spec: &ModelSpec) -> Result<SurvivalData, SurvivalError> {
        if self.names == spec.term_names() {
            return Ok(self.clone());
        }
        enum Source {
            Column(usize),
            Product(usize, usize),
        }
        let mut sources = Vec::with_capacity(spec.k());
        for term in spec.terms() {
            let src = match term {
                Term::Main(n) => Source::Column(
                    self.column_index(n).ok_or_else(|| SurvivalError::UnknownPredictor(n.clone()))?,
                ),
                Term::Interaction(a, b) => {
                    if let Some(j) = self
                        .column_index(&format!("{a}:{b}"))
                        .or_else(|| self.column_index(&format!("{b}:{a}")))
                    {
                        Source::Column(j)
                    } else {
                        let ia = self
                            .column_index(a)
                            .ok_or_else(|| SurvivalError::UnknownPredictor(a.clone()))?;
                        let ib = self
                            .column_index(b)
                            .ok_or_else(|| SurvivalError::UnknownPredictor(b.clone()))?;
                        Source::Product(ia, ib)
                    }
                }
            };
            sources.push(src);
        }
        let mut x = Vec::with_capacity(self.len() * sources.len());
        for i in 0..self.len() {
            let row = self.row(i);
            for s in &sources {
                x.push(match *s {
                    Source::Column(j) => row[j],
                    Source::Product(a, b) => row[a] * row[b],
                });
            }
        }
        Ok(SurvivalData {
            names: spec.term_names(),
            time: self.time.clone(),
            event: self.event.clone(),
            x,
        })
    }
}
