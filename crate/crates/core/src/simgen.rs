//! Synthetic survival data with known coefficients.
//!
//! Event times invert a proportional hazard with constant baseline rate,
//! `T = -ln(U) / (rate * exp(beta'x))`, are censored at a horizon and rounded
//! up to whole years so that ties appear as they do in annual panels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorCategory;
use crate::panel::{Spell, SpellSet};
use crate::survival::{fit_cox, wald_ci, CoxFit, FitConfig, ModelSpec, SurvivalData, SurvivalError, Ties};

/// Recorded in every report so that runs can be reproduced elsewhere.
pub const RNG_NAME: &str = "ChaCha20 (rand_chacha); master seed via seed_from_u64, stream = replicate index";

/// Column order of [`CovariateLaw::LadderPanel`].
pub const LADDER_COLUMNS: [&str; 7] =
    ["eci_trade", "eci_research", "eci_trade:eci_research", "rqe", "interest", "growth", "rle"];

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation parameter: {0}")]
    InvalidParams(String),
    #[error("no events before the censoring horizon {horizon}; use a longer horizon or a higher rate")]
    NoEvents { horizon: f64 },
    #[error("all {0} replicates failed to fit")]
    AllFailed(usize),
    #[error(transparent)]
    Fit(#[from] SurvivalError),
}

impl SimError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            SimError::InvalidParams(_) => ErrorCategory::Argument,
            SimError::NoEvents { .. } | SimError::AllFailed(_) => ErrorCategory::Data,
            SimError::Fit(e) => e.category(),
        }
    }
}

/// How covariates are drawn for each subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateLaw {
    /// Independent uniform(0, 1) columns `x1..xk`.
    Uniform01,
    /// Independent standard normal columns `x1..xk`.
    StandardNormal,
    /// `x1, x2` uniform(0, 1) and `x1:x2 = x1 * x2`; needs three coefficients.
    ProductPair,
    /// Uniform ECI pair with their product and four standard normal
    /// controls, named as in [`LADDER_COLUMNS`]; needs seven coefficients.
    LadderPanel,
}

impl CovariateLaw {
    pub fn names(self, k: usize) -> Vec<String> {
        match self {
            CovariateLaw::Uniform01 | CovariateLaw::StandardNormal => {
                (1..=k).map(|i| format!("x{i}")).collect()
            }
            CovariateLaw::ProductPair => vec!["x1".into(), "x2".into(), "x1:x2".into()],
            CovariateLaw::LadderPanel => LADDER_COLUMNS.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn required_k(self) -> Option<usize> {
        match self {
            CovariateLaw::ProductPair => Some(3),
            CovariateLaw::LadderPanel => Some(7),
            _ => None,
        }
    }

    fn draw<R: Rng>(self, k: usize, rng: &mut R) -> Vec<f64> {
        match self {
            CovariateLaw::Uniform01 => (0..k).map(|_| rng.random::<f64>()).collect(),
            CovariateLaw::StandardNormal => (0..k).map(|_| rng.sample(StandardNormal)).collect(),
            CovariateLaw::ProductPair => {
                let (a, b) = (rng.random::<f64>(), rng.random::<f64>());
                vec![a, b, a * b]
            }
            CovariateLaw::LadderPanel => {
                let (a, b) = (rng.random::<f64>(), rng.random::<f64>());
                let mut x = vec![a, b, a * b];
                x.extend((0..4).map(|_| rng.sample::<f64, _>(StandardNormal)));
                x
            }
        }
    }
}

impl std::str::FromStr for CovariateLaw {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "uniform01" => Ok(CovariateLaw::Uniform01),
            "standard_normal" => Ok(CovariateLaw::StandardNormal),
            "product_pair" => Ok(CovariateLaw::ProductPair),
            "ladder_panel" => Ok(CovariateLaw::LadderPanel),
            _ => Err(SimError::InvalidParams(format!(
                "unknown covariate law `{s}` (uniform01, standard_normal, product_pair, ladder_panel)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub n_subjects: usize,
    pub true_beta: Vec<f64>,
    /// Constant baseline hazard, events per year.
    pub baseline_rate: f64,
    /// Years of follow-up before administrative censoring.
    pub censor_horizon: f64,
    pub covariate_law: CovariateLaw,
    pub seed: u64,
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidParams(m));
        if self.n_subjects < 2 {
            return bad(format!("n_subjects must be at least 2, got {}", self.n_subjects));
        }
        if self.true_beta.is_empty() || self.true_beta.iter().any(|b| !b.is_finite()) {
            return bad("true_beta must be a non-empty vector of finite values".into());
        }
        if !(self.baseline_rate > 0.0 && self.baseline_rate.is_finite()) {
            return bad(format!("baseline_rate must be positive, got {}", self.baseline_rate));
        }
        if !(self.censor_horizon > 0.0 && self.censor_horizon.is_finite()) {
            return bad(format!("censor_horizon must be positive, got {}", self.censor_horizon));
        }
        if let Some(k) = self.covariate_law.required_k() {
            if self.true_beta.len() != k {
                return bad(format!(
                    "covariate law {:?} needs {k} coefficients, got {}",
                    self.covariate_law,
                    self.true_beta.len()
                ));
            }
        }
        Ok(())
    }

    pub fn predictor_names(&self) -> Vec<String> {
        self.covariate_law.names(self.true_beta.len())
    }

    /// Generator for replicate `stream`.
    pub fn rng(&self, stream: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

struct Draw {
    x: Vec<f64>,
    time: f64,
    event: bool,
}

fn draw_subjects<R: Rng>(p: &SimParams, rng: &mut R) -> Vec<Draw> {
    let k = p.true_beta.len();
    (0..p.n_subjects)
        .map(|_| {
            let x = p.covariate_law.draw(k, rng);
            let eta: f64 = x.iter().zip(&p.true_beta).map(|(a, b)| a * b).sum();
            let u = 1.0 - rng.random::<f64>();
            let t = -u.ln() / (p.baseline_rate * eta.exp());
            if t <= p.censor_horizon {
                Draw { x, time: t, event: true }
            } else {
                Draw { x, time: p.censor_horizon, event: false }
            }
        })
        .collect()
}

fn to_spells(p: &SimParams, draws: Vec<Draw>) -> Result<SpellSet, SimError> {
    if !draws.iter().any(|d| d.event) {
        return Err(SimError::NoEvents { horizon: p.censor_horizon });
    }
    let width = p.n_subjects.to_string().len();
    let spells = draws
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let duration = (d.time.ceil() as i32).max(1);
            Spell {
                subject: format!("s{:0width$}", i + 1),
                entry: 0,
                exit: duration,
                duration,
                event: d.event,
                covariate_year: 0,
                covariates: d.x,
            }
        })
        .collect();
    Ok(SpellSet { spells, predictor_names: p.predictor_names() })
}

/// Year-discretised spells from stream 0 of the seed.
pub fn simulate_spells(p: &SimParams) -> Result<SpellSet, SimError> {
    simulate_replicate(p, 0)
}

/// Year-discretised spells from the given stream of the seed.
pub fn simulate_replicate(p: &SimParams, stream: u64) -> Result<SpellSet, SimError> {
    p.validate()?;
    to_spells(p, draw_subjects(p, &mut p.rng(stream)))
}

/// Same draws as [`simulate_replicate`] without rounding: continuous times,
/// ties only by coincidence.
pub fn simulate_continuous(p: &SimParams, stream: u64) -> Result<SurvivalData, SimError> {
    p.validate()?;
    let draws = draw_subjects(p, &mut p.rng(stream));
    if !draws.iter().any(|d| d.event) {
        return Err(SimError::NoEvents { horizon: p.censor_horizon });
    }
    let time = draws.iter().map(|d| d.time).collect();
    let event = draws.iter().map(|d| d.event).collect();
    let rows = draws.into_iter().map(|d| d.x).collect();
    Ok(SurvivalData::new(p.predictor_names(), time, event, rows)?)
}

/// Fits of the full model on replicates `0..replicates`, in replicate order.
pub fn run_replicates(
    p: &SimParams,
    replicates: usize,
    ties: Ties,
    cfg: &FitConfig,
) -> Result<Vec<Result<CoxFit, SimError>>, SimError> {
    p.validate()?;
    let spec = ModelSpec::parse_terms(&p.predictor_names())?;
    Ok((0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let data = simulate_replicate(p, r)?.to_survival_data()?;
            Ok(fit_cox(&data, &spec, ties, cfg)?)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub replicates: usize,
    /// Replicates whose simulation or fit failed; excluded from the summaries.
    pub failures: usize,
    pub names: Vec<String>,
    pub true_beta: Vec<f64>,
    pub mean_beta_hat: Vec<f64>,
    pub bias: Vec<f64>,
    /// Share of successful replicates whose Wald interval covers the truth.
    pub empirical_coverage: Vec<f64>,
    pub level: f64,
    pub ties: Ties,
    pub seed: u64,
    pub rng: String,
}

/// Bias and Wald-interval coverage over `replicates` simulated data sets.
pub fn coverage_experiment(p: &SimParams, replicates: usize, ties: Ties) -> Result<SimReport, SimError> {
    const LEVEL: f64 = 0.95;
    if replicates == 0 {
        return Err(SimError::InvalidParams("replicates must be at least 1".into()));
    }
    let k = p.true_beta.len();
    let outcomes = run_replicates(p, replicates, ties, &FitConfig::default())?;
    let mut sum = vec![0.0; k];
    let mut covered = vec![0usize; k];
    let mut ok = 0usize;
    for outcome in &outcomes {
        let Ok(fit) = outcome else { continue };
        let Ok(ci) = wald_ci(fit, LEVEL) else { continue };
        ok += 1;
        for j in 0..k {
            sum[j] += fit.beta[j];
            if ci[j].0 <= p.true_beta[j] && p.true_beta[j] <= ci[j].1 {
                covered[j] += 1;
            }
        }
    }
    if ok == 0 {
        return Err(SimError::AllFailed(replicates));
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / ok as f64).collect();
    Ok(SimReport {
        replicates,
        failures: replicates - ok,
        names: p.predictor_names(),
        true_beta: p.true_beta.clone(),
        bias: mean.iter().zip(&p.true_beta).map(|(m, t)| m - t).collect(),
        mean_beta_hat: mean,
        empirical_coverage: covered.iter().map(|&c| c as f64 / ok as f64).collect(),
        level: LEVEL,
        ties,
        seed: p.seed,
        rng: RNG_NAME.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(beta: Vec<f64>, law: CovariateLaw) -> SimParams {
        SimParams {
            n_subjects: 200,
            true_beta: beta,
            baseline_rate: 0.1,
            censor_horizon: 25.0,
            covariate_law: law,
            seed: 42,
        }
    }

    #[test]
    fn same_seed_same_spells() {
        let p = params(vec![0.5, -0.5], CovariateLaw::StandardNormal);
        let (a, b) = (simulate_spells(&p).unwrap(), simulate_spells(&p).unwrap());
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ba).unwrap();
        b.write_csv(&mut bb).unwrap();
        assert_eq!(ba, bb);
        let other = simulate_spells(&SimParams { seed: 43, ..p }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn streams_differ() {
        let p = params(vec![0.5], CovariateLaw::Uniform01);
        assert_ne!(simulate_replicate(&p, 0).unwrap(), simulate_replicate(&p, 1).unwrap());
    }

    #[test]
    fn durations_are_whole_years_within_horizon() {
        let p = params(vec![1.0, -1.0], CovariateLaw::StandardNormal);
        let s = simulate_spells(&p).unwrap();
        assert_eq!(s.len(), 200);
        for sp in &s.spells {
            assert!(sp.duration >= 1 && sp.duration <= 25);
            if !sp.event {
                assert_eq!(sp.duration, 25);
            }
        }
        assert!(s.n_events() > 0);
    }

    #[test]
    fn product_pair_third_column_is_product() {
        let p = params(vec![0.0, 0.0, -2.0], CovariateLaw::ProductPair);
        let s = simulate_spells(&p).unwrap();
        assert_eq!(s.predictor_names, vec!["x1", "x2", "x1:x2"]);
        for sp in &s.spells {
            assert_eq!(sp.covariates[2], sp.covariates[0] * sp.covariates[1]);
        }
    }

    #[test]
    fn law_dimension_checked() {
        let p = params(vec![1.0], CovariateLaw::ProductPair);
        assert!(matches!(simulate_spells(&p), Err(SimError::InvalidParams(_))));
        let p = SimParams { n_subjects: 1, ..params(vec![1.0], CovariateLaw::Uniform01) };
        assert!(matches!(simulate_spells(&p), Err(SimError::InvalidParams(_))));
    }

    #[test]
    fn tiny_horizon_has_no_events() {
        let p = SimParams {
            baseline_rate: 1e-9,
            censor_horizon: 0.5,
            ..params(vec![0.0], CovariateLaw::Uniform01)
        };
        assert_eq!(simulate_spells(&p), Err(SimError::NoEvents { horizon: 0.5 }));
    }

    #[test]
    fn doubling_rate_halves_continuous_times() {
        let p = SimParams { censor_horizon: 1e9, ..params(vec![0.3], CovariateLaw::Uniform01) };
        let a = simulate_continuous(&p, 0).unwrap();
        let b = simulate_continuous(&SimParams { baseline_rate: 0.2, ..p }, 0).unwrap();
        let median = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            (v[99] + v[100]) / 2.0
        };
        let ratio = median(a.time()) / median(b.time());
        assert!((ratio - 2.0).abs() < 1e-12, "{ratio}");
    }

    #[test]
    fn single_replicate_coverage_is_boolean() {
        let p = params(vec![0.5, -0.5], CovariateLaw::StandardNormal);
        let r = coverage_experiment(&p, 1, Ties::Efron).unwrap();
        assert_eq!(r.replicates, 1);
        assert!(r.empirical_coverage.iter().all(|&c| c == 0.0 || c == 1.0));
    }

    #[test]
    fn law_names_parse() {
        for (s, law) in [
            ("uniform01", CovariateLaw::Uniform01),
            ("standard_normal", CovariateLaw::StandardNormal),
            ("product_pair", CovariateLaw::ProductPair),
            ("ladder_panel", CovariateLaw::LadderPanel),
        ] {
            assert_eq!(s.parse::<CovariateLaw>().unwrap(), law);
        }
        assert!("gamma".parse::<CovariateLaw>().is_err());
    }
}
