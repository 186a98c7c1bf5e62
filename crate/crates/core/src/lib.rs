//! Fiscal-crisis hazard modelling with multidimensional economic complexity.
//!
//! The crate is organised along the analysis pipeline:
//!
//! - [`complexity`]: revealed comparative advantage, binarisation and the
//!   eigenvector Economic Complexity Index, with the method of reflections as
//!   an independent cross-check.
//! - [`panel`]: country-year panel ingestion and conversion of crisis
//!   histories into right-censored spells.
//! - [`survival`]: Cox proportional-hazards fitting with Breslow, Efron and
//!   exact-discrete tie handling.
//! - [`ladder`]: the ten-specification model ladder, AIC selection and the
//!   tie-method robustness sweep.
//! - [`simgen`]: synthetic survival data with known coefficients.
//! - [`report`]: regression tables and AIC figure data.

pub mod complexity;
pub mod error;
pub mod ladder;
pub mod panel;
pub mod report;
pub mod simgen;
pub mod survival;

pub use complexity::{eci_eigen, eci_from_raw, ActivityMatrix, EciScores, SpecializationMatrix};
pub use error::{Error, ErrorCategory, Result};
pub use ladder::{run_ladder, run_robustness, select_best, standard_specs, LadderResult, RobustnessResult};
pub use panel::{attach_covariates, build_spells, load_panel, Panel, Spell, SpellConfig, SpellSet};
pub use survival::{fit_cox, CoxFit, FitConfig, ModelSpec, SurvivalData, Ties};
