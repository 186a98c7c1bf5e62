//! Cox proportional-hazards estimation.
//!
//! The partial likelihood is evaluated on gap-time data (every subject enters
//! at time zero) with one of three tie treatments:
//!
//! - **Breslow**: every failure in a tied set sees the full risk set.
//! - **Efron**: the tied failures are removed from the risk-set denominator
//!   in equal fractions.
//! - **Exact**: the discrete conditional likelihood, summing over every
//!   size-`d` subset of the risk set through elementary symmetric
//!   polynomials.
//!
//! With no tied event times the three coincide bit for bit.

mod data;
mod fit;
mod likelihood;
mod spec;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorCategory;

pub use data::SurvivalData;
pub use fit::{
    aic, baseline_hazard, fit_cox, hazard_ratio, likelihood_ratio_test, significance_stars,
    wald_ci, wald_p_value, BaselineHazard, CoefficientRow, CoxFit, FitConfig, LikelihoodRatio,
};
pub use likelihood::{partial_loglik, score_and_information, Evaluation, PartialLikelihood};
pub use spec::{ModelSpec, Term};

/// Default cap on the number of tied failures the exact method will handle
/// in a single risk set.
pub const DEFAULT_EXACT_TIE_CAP: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ties {
    Breslow,
    Efron,
    Exact,
}

impl Ties {
    pub const ALL: [Ties; 3] = [Ties::Breslow, Ties::Efron, Ties::Exact];

    pub fn as_str(self) -> &'static str {
        match self {
            Ties::Breslow => "breslow",
            Ties::Efron => "efron",
            Ties::Exact => "exact",
        }
    }
}

impl fmt::Display for Ties {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ties {
    type Err = SurvivalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "breslow" => Ok(Ties::Breslow),
            "efron" => Ok(Ties::Efron),
            "exact" | "discrete" => Ok(Ties::Exact),
            other => Err(SurvivalError::UnknownTies(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SurvivalError {
    #[error("no events in the data; at least one failure is required")]
    NoEvents,
    #[error("survival data is empty")]
    EmptyData,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite value in {what}")]
    NonFinite { what: String },
    #[error("unknown predictor `{0}`")]
    UnknownPredictor(String),
    #[error("duplicate model term `{0}`")]
    DuplicateTerm(String),
    #[error("malformed model term `{0}`")]
    MalformedTerm(String),
    #[error("unknown tie method `{0}` (expected breslow, efron or exact)")]
    UnknownTies(String),
    #[error(
        "exact tie handling capacity exceeded: {tied} tied failures at time {time} (cap {cap}); \
         use --ties efron instead"
    )]
    TieCapacity { time: f64, tied: usize, cap: usize },
    #[error("monotone likelihood: coefficient for `{predictor}` diverges ({reason})")]
    Divergence { predictor: String, reason: String },
    #[error("predictor `{0}` is constant within every risk set; its coefficient is not identifiable")]
    Identifiability(String),
    #[error("information matrix is singular or not positive definite ({0})")]
    Rank(String),
    #[error("fit did not converge")]
    NotConverged,
    #[error("confidence level must lie strictly between 0 and 1, got {0}")]
    InvalidLevel(f64),
}

impl SurvivalError {
    pub fn category(&self) -> ErrorCategory {
        use SurvivalError::*;
        match self {
            NoEvents | EmptyData | NonFinite { .. } => ErrorCategory::Data,
            DimensionMismatch { .. } | InvalidLevel(_) | UnknownTies(_) => ErrorCategory::Argument,
            UnknownPredictor(_) | DuplicateTerm(_) | MalformedTerm(_) => ErrorCategory::Spec,
            TieCapacity { .. } => ErrorCategory::Capacity,
            Divergence { .. } | Identifiability(_) | Rank(_) | NotConverged => {
                ErrorCategory::Numeric
            }
        }
    }
}
