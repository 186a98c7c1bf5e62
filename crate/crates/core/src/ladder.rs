//! The ten-model specification ladder, AIC selection and the tie-method
//! robustness sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorCategory;
use crate::survival::{fit_cox, CoxFit, FitConfig, ModelSpec, SurvivalData, SurvivalError, Ties};

pub const CONTROLS: [&str; 4] = ["rqe", "interest", "growth", "rle"];
pub const INTERACTION: &str = "eci_trade:eci_research";

#[derive(Debug, Error, PartialEq)]
pub enum LadderError {
    #[error("no converged fit to select from")]
    NoConvergedFits,
    #[error("unknown standard specification `{0}` (use 1-10, baseline or final)")]
    UnknownSpec(String),
}

impl LadderError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            LadderError::NoConvergedFits => ErrorCategory::Numeric,
            LadderError::UnknownSpec(_) => ErrorCategory::Spec,
        }
    }
}

fn spec(terms: &[&str]) -> ModelSpec {
    ModelSpec::parse_terms(terms).expect("standard specification is well formed")
}

fn with_controls(head: &[&str]) -> ModelSpec {
    let mut terms = head.to_vec();
    terms.extend(CONTROLS);
    spec(&terms)
}

/// Models 1-10 in table order.
pub fn standard_specs() -> Vec<ModelSpec> {
    vec![
        spec(&["eci_trade"]),
        spec(&["eci_research"]),
        spec(&["eci_trade", "eci_research"]),
        spec(&["eci_trade", "eci_research", INTERACTION]),
        spec(&[INTERACTION]),
        spec(&CONTROLS),
        with_controls(&["eci_trade"]),
        with_controls(&["eci_research"]),
        with_controls(&[INTERACTION]),
        with_controls(&["eci_trade", "eci_research", INTERACTION]),
    ]
}

/// Display labels for [`standard_specs`].
pub fn model_labels() -> Vec<String> {
    (1..=10)
        .map(|i| match i {
            6 => "Model 6 (Baseline)".to_string(),
            10 => "Model 10 (Final)".to_string(),
            _ => format!("Model {i}"),
        })
        .collect()
}

/// Every column any standard spec needs; listwise deletion against this
/// spec gives the common estimation sample.
pub fn union_spec() -> ModelSpec {
    standard_specs().pop().expect("ten specs")
}

/// Looks up `1`..`10`, `baseline` (6) or `final` (10).
pub fn standard_spec(name: &str) -> Result<ModelSpec, LadderError> {
    let idx = match name.trim().to_ascii_lowercase().as_str() {
        "baseline" => 6,
        "final" => 10,
        other => other.parse::<usize>().ok().filter(|i| (1..=10).contains(i)).ok_or_else(|| LadderError::UnknownSpec(name.into()))?,
    };
    Ok(standard_specs().swap_remove(idx - 1))
}

/// Why a model could not be fitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub category: String,
    pub message: String,
}

impl From<&SurvivalError> for Failure {
    fn from(e: &SurvivalError) -> Self {
        Failure { category: e.category().as_str().into(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderModel {
    pub label: String,
    pub spec: ModelSpec,
    pub fit: Option<CoxFit>,
    pub failure: Option<Failure>,
}

impl LadderModel {
    fn from_result(label: String, spec: ModelSpec, r: Result<CoxFit, SurvivalError>) -> Self {
        match r {
            Ok(fit) => LadderModel { label, spec, fit: Some(fit), failure: None },
            Err(e) => LadderModel { label, spec, fit: None, failure: Some(Failure::from(&e)) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderResult {
    pub models: Vec<LadderModel>,
    /// Minimum-AIC converged model, if any.
    pub best_index: Option<usize>,
    pub ties: Ties,
}

impl LadderResult {
    pub fn best(&self) -> Option<&LadderModel> {
        self.best_index.map(|i| &self.models[i])
    }

    /// Fits in model order, `None` for failed models.
    pub fn fits(&self) -> Vec<Option<&CoxFit>> {
        self.models.iter().map(|m| m.fit.as_ref()).collect()
    }
}

fn best_of<'a>(fits: impl Iterator<Item = (usize, &'a CoxFit)>) -> Option<usize> {
    fits.filter(|(_, f)| f.converged && f.aic.is_finite())
        .min_by(|(_, a), (_, b)| {
            a.aic
                .total_cmp(&b.aic)
                .then(b.loglik.total_cmp(&a.loglik))
                .then(a.k().cmp(&b.k()))
        })
        .map(|(i, _)| i)
}

/// Index of the minimum-AIC converged fit; ties go to the higher
/// log-likelihood, then to fewer predictors, then to the earlier fit.
pub fn select_best(fits: &[CoxFit]) -> Result<usize, LadderError> {
    best_of(fits.iter().enumerate()).ok_or(LadderError::NoConvergedFits)
}

/// Fits `specs` on one shared data set, concurrently, keeping failures in
/// place.
pub fn run_specs(
    data: &SurvivalData,
    specs: &[ModelSpec],
    labels: &[String],
    ties: Ties,
    cfg: &FitConfig,
) -> LadderResult {
    let models: Vec<LadderModel> = specs
        .par_iter()
        .zip(labels.par_iter())
        .map(|(s, l)| LadderModel::from_result(l.clone(), s.clone(), fit_cox(data, s, ties, cfg)))
        .collect();
    let best_index = best_of(models.iter().enumerate().filter_map(|(i, m)| m.fit.as_ref().map(|f| (i, f))));
    LadderResult { models, best_index, ties }
}

/// The standard ladder on `data`, which must carry every column of
/// [`union_spec`].
pub fn run_ladder(data: &SurvivalData, ties: Ties, cfg: &FitConfig) -> LadderResult {
    run_specs(data, &standard_specs(), &model_labels(), ties, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessResult {
    pub spec: ModelSpec,
    /// Exact, Breslow and Efron, in that order.
    pub models: Vec<LadderModel>,
}

/// Refits `spec` under each tie method; a capacity error for the exact
/// method is recorded in its row.
pub fn run_robustness(data: &SurvivalData, spec: &ModelSpec, cfg: &FitConfig) -> RobustnessResult {
    let methods = [Ties::Exact, Ties::Breslow, Ties::Efron];
    let models = methods
        .par_iter()
        .map(|&t| {
            let label = match t {
                Ties::Exact => "Exact",
                Ties::Breslow => "Breslow",
                Ties::Efron => "Efron",
            };
            LadderModel::from_result(label.into(), spec.clone(), fit_cox(data, spec, t, cfg))
        })
        .collect();
    RobustnessResult { spec: spec.clone(), models }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake(k: usize, loglik: f64) -> CoxFit {
        let names: Vec<String> = (0..k).map(|i| format!("x{i}")).collect();
        CoxFit {
            spec: ModelSpec::parse_terms(&names).unwrap(),
            beta: vec![0.0; k],
            se: vec![1.0; k],
            cov: vec![vec![0.0; k]; k],
            loglik,
            loglik_null: loglik,
            aic: crate::survival::aic(k, loglik),
            ties: Ties::Efron,
            n_spells: 10,
            n_events: 5,
            iterations: 1,
            converged: true,
        }
    }

    #[test]
    fn registry_matches_table_layout() {
        let names: Vec<Vec<String>> = standard_specs().iter().map(ModelSpec::term_names).collect();
        let c = ["rqe", "interest", "growth", "rle"];
        let with = |h: &[&str]| h.iter().chain(c.iter()).map(|s| s.to_string()).collect::<Vec<_>>();
        let plain = |h: &[&str]| h.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let expected = vec![
            plain(&["eci_trade"]),
            plain(&["eci_research"]),
            plain(&["eci_trade", "eci_research"]),
            plain(&["eci_trade", "eci_research", "eci_trade:eci_research"]),
            plain(&["eci_trade:eci_research"]),
            plain(&c),
            with(&["eci_trade"]),
            with(&["eci_research"]),
            with(&["eci_trade:eci_research"]),
            with(&["eci_trade", "eci_research", "eci_trade:eci_research"]),
        ];
        assert_eq!(names, expected);
        let ks: Vec<usize> = standard_specs().iter().map(ModelSpec::k).collect();
        assert_eq!(ks, vec![1, 1, 2, 3, 1, 4, 5, 5, 5, 7]);
    }

    #[test]
    fn named_specs() {
        assert_eq!(standard_spec("final").unwrap(), union_spec());
        assert_eq!(standard_spec("baseline").unwrap().k(), 4);
        assert_eq!(standard_spec("5").unwrap().term_names(), vec!["eci_trade:eci_research"]);
        assert!(standard_spec("11").is_err());
        assert!(standard_spec("0").is_err());
    }

    #[test]
    fn argmin_aic() {
        let fits = vec![fake(1, -363.318), fake(7, -342.587), fake(4, -350.102)];
        assert_eq!(select_best(&fits), Ok(1));
    }

    #[test]
    fn table_aics_pick_final_model() {
        let table = [
            (1, -363.318),
            (1, -373.010),
            (2, -362.959),
            (3, -356.973),
            (1, -360.866),
            (4, -350.102),
            (5, -347.031),
            (5, -350.017),
            (5, -346.732),
            (7, -342.587),
        ];
        let fits: Vec<CoxFit> = table.iter().map(|&(k, ll)| fake(k, ll)).collect();
        assert_eq!(select_best(&fits), Ok(9));
    }

    #[test]
    fn equal_aic_prefers_higher_loglik() {
        let fits = vec![fake(2, -350.0), fake(3, -349.0)];
        assert_eq!(fits[0].aic, fits[1].aic);
        assert_eq!(select_best(&fits), Ok(1));
    }

    #[test]
    fn unconverged_fits_are_skipped() {
        let mut fits = vec![fake(1, -10.0), fake(1, -20.0)];
        fits[0].converged = false;
        assert_eq!(select_best(&fits), Ok(1));
        fits[1].converged = false;
        assert_eq!(select_best(&fits), Err(LadderError::NoConvergedFits));
        assert_eq!(select_best(&[]), Err(LadderError::NoConvergedFits));
    }

    #[test]
    fn missing_columns_fail_every_model_without_aborting() {
        let data = SurvivalData::new(
            vec!["x".into()],
            vec![1.0, 2.0, 3.0],
            vec![true, true, false],
            vec![vec![0.1], vec![0.5], vec![0.2]],
        )
        .unwrap();
        let r = run_ladder(&data, Ties::Efron, &FitConfig::default());
        assert_eq!(r.models.len(), 10);
        assert!(r.models.iter().all(|m| m.fit.is_none() && m.failure.is_some()));
        assert_eq!(r.best_index, None);
    }
}
