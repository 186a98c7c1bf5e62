use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use super::likelihood::{Evaluation, PartialLikelihood};
use super::{ModelSpec, SurvivalData, SurvivalError, Ties, DEFAULT_EXACT_TIE_CAP};

/// Newton-Raphson controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iter: usize,
    pub max_halvings: usize,
    pub score_tol: f64,
    pub loglik_tol: f64,
    /// Largest Newton step still counted as converged; guards against the
    /// flat tail of a monotone likelihood passing the score test.
    pub step_tol: f64,
    /// Any |coefficient| beyond this is reported as monotone likelihood.
    pub max_abs_beta: f64,
    pub exact_tie_cap: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iter: 50,
            max_halvings: 10,
            score_tol: 1e-8,
            loglik_tol: 1e-10,
            step_tol: 1e-4,
            max_abs_beta: 50.0,
            exact_tie_cap: DEFAULT_EXACT_TIE_CAP,
        }
    }
}

/// A fitted Cox model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub spec: ModelSpec,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    /// Inverse observed information, row-major `k x k`.
    pub cov: Vec<Vec<f64>>,
    pub loglik: f64,
    pub loglik_null: f64,
    pub aic: f64,
    pub ties: Ties,
    pub n_spells: usize,
    pub n_events: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// One row of a coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub name: String,
    pub beta: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
    pub p: f64,
    pub stars: String,
}

impl CoxFit {
    pub fn k(&self) -> usize {
        self.spec.k()
    }

    pub fn names(&self) -> Vec<String> {
        self.spec.term_names()
    }

    pub fn hazard_ratios(&self) -> Vec<f64> {
        self.beta.iter().map(|&b| hazard_ratio(b)).collect()
    }

    pub fn p_values(&self) -> Vec<f64> {
        self.beta.iter().zip(&self.se).map(|(&b, &s)| wald_p_value(b, s)).collect()
    }

    /// Coefficient table with Wald intervals at `level`.
    pub fn coefficients(&self, level: f64) -> Result<Vec<CoefficientRow>, SurvivalError> {
        let ci = wald_ci(self, level)?;
        Ok(self
            .names()
            .into_iter()
            .zip(self.beta.iter().zip(&self.se))
            .zip(ci)
            .map(|((name, (&beta, &se)), (lo, hi))| {
                let p = wald_p_value(beta, se);
                CoefficientRow { name, beta, se, lo, hi, p, stars: significance_stars(p).into() }
            })
            .collect())
    }
}

/// `2k - 2 loglik`.
pub fn aic(k: usize, loglik: f64) -> f64 {
    2.0 * k as f64 - 2.0 * loglik
}

pub fn hazard_ratio(beta: f64) -> f64 {
    beta.exp()
}

/// Two-sided Wald z-test p-value.
pub fn wald_p_value(beta: f64, se: f64) -> f64 {
    let z = (beta / se).abs();
    if z.is_nan() {
        return f64::NAN;
    }
    erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// `***` for p < 0.001, `**` for p < 0.01, `*` for p < 0.05.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

fn normal_quantile(q: f64) -> f64 {
    Normal::standard().inverse_cdf(q)
}

/// `beta_j -/+ z_{(1+level)/2} se_j` for every coefficient.
pub fn wald_ci(fit: &CoxFit, level: f64) -> Result<Vec<(f64, f64)>, SurvivalError> {
    if !fit.converged {
        return Err(SurvivalError::NotConverged);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(SurvivalError::InvalidLevel(level));
    }
    let z = normal_quantile((1.0 + level) / 2.0);
    Ok(fit.beta.iter().zip(&fit.se).map(|(&b, &s)| (b - z * s, b + z * s)).collect())
}

/// Likelihood-ratio test of the fitted model against `beta = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodRatio {
    pub statistic: f64,
    pub df: usize,
    pub p: f64,
}

pub fn likelihood_ratio_test(fit: &CoxFit) -> Result<LikelihoodRatio, SurvivalError> {
    if !fit.converged {
        return Err(SurvivalError::NotConverged);
    }
    let statistic = (2.0 * (fit.loglik - fit.loglik_null)).max(0.0);
    let df = fit.k();
    let p = if df == 0 {
        1.0
    } else {
        let chi = ChiSquared::new(df as f64).map_err(|e| SurvivalError::Rank(e.to_string()))?;
        1.0 - chi.cdf(statistic)
    };
    Ok(LikelihoodRatio { statistic, df, p })
}

/// Breslow estimate of the cumulative baseline hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineHazard {
    pub times: Vec<f64>,
    pub increments: Vec<f64>,
}

impl BaselineHazard {
    pub fn cumulative(&self) -> Vec<f64> {
        self.increments
            .iter()
            .scan(0.0, |acc, &h| {
                *acc += h;
                Some(*acc)
            })
            .collect()
    }
}

/// Baseline hazard increments `d_t / sum_{j in R(t)} exp(b'x_j)` at each
/// distinct event time, on the raw (uncentred) covariate scale.
pub fn baseline_hazard(fit: &CoxFit, data: &SurvivalData) -> Result<BaselineHazard, SurvivalError> {
    if !fit.converged {
        return Err(SurvivalError::NotConverged);
    }
    let design = data.design_for(&fit.spec)?;
    if design.n_events() == 0 {
        return Err(SurvivalError::NoEvents);
    }
    let risk: Vec<f64> = (0..design.len())
        .map(|i| design.row(i).iter().zip(&fit.beta).map(|(x, b)| x * b).sum::<f64>().exp())
        .collect();
    let mut times: Vec<f64> = design
        .time()
        .iter()
        .zip(design.event())
        .filter(|(_, &e)| e)
        .map(|(&t, _)| t)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let increments = times
        .iter()
        .map(|&t| {
            let mut deaths = 0usize;
            let mut denom = 0.0;
            for ((&ti, &ev), &r) in design.time().iter().zip(design.event()).zip(&risk) {
                if ti >= t {
                    denom += r;
                }
                if ti == t && ev {
                    deaths += 1;
                }
            }
            deaths as f64 / denom
        })
        .collect();
    Ok(BaselineHazard { times, increments })
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Fits the Cox model by Newton-Raphson from `beta = 0` with step halving.
pub fn fit_cox(
    data: &SurvivalData,
    spec: &ModelSpec,
    ties: Ties,
    cfg: &FitConfig,
) -> Result<CoxFit, SurvivalError> {
    let design = data.design_for(spec)?;
    let lik = PartialLikelihood::with_exact_cap(&design, ties, cfg.exact_tie_cap)?;
    check_identifiable(&design)?;
    let names = spec.term_names();
    let k = spec.k();

    let mut beta = vec![0.0; k];
    let mut eval = lik.evaluate(&beta)?;
    let loglik_null = eval.loglik;
    let mut iterations = 0;

    let mut last_delta = f64::INFINITY;
    if k > 0 {
        loop {
            let step = match newton_step(&eval) {
                Ok(step) => step,
                // the information was regular at the start, so it vanished along an
                // increasing path: the flat tail of a monotone likelihood
                Err(_) if iterations > 0 => {
                    return Err(divergence(&names, &beta, "information vanished".into()))
                }
                Err(e) => return Err(e),
            };
            let stationary =
                max_abs(&eval.score) < cfg.score_tol || last_delta.abs() < cfg.loglik_tol;
            if stationary && max_abs(&step) <= cfg.step_tol {
                break;
            }
            if iterations >= cfg.max_iter {
                return Err(divergence(
                    &names,
                    &beta,
                    format!("no convergence in {} iterations", cfg.max_iter),
                ));
            }
            iterations += 1;

            let mut scale = 1.0;
            let mut halvings = 0;
            let (candidate, cand_eval) = loop {
                let cand: Vec<f64> =
                    beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
                if let Some(j) = cand.iter().position(|b| b.abs() > cfg.max_abs_beta) {
                    return Err(SurvivalError::Divergence {
                        predictor: names[j].clone(),
                        reason: format!("|beta| exceeded {}", cfg.max_abs_beta),
                    });
                }
                let ce = lik.evaluate(&cand)?;
                if ce.loglik.is_finite() && ce.loglik >= eval.loglik {
                    break (cand, Some(ce));
                }
                if halvings == cfg.max_halvings {
                    break (cand, None);
                }
                scale *= 0.5;
                halvings += 1;
            };

            let Some(cand_eval) = cand_eval else {
                // no halving raised the likelihood: accept the current point only
                // when it is already numerically stationary
                if max_abs(&eval.score) < cfg.score_tol.sqrt() && max_abs(&step) <= cfg.step_tol {
                    break;
                }
                return Err(divergence(
                    &names,
                    &candidate,
                    "step halving failed to increase the likelihood".into(),
                ));
            };
            last_delta = cand_eval.loglik - eval.loglik;
            beta = candidate;
            eval = cand_eval;
        }
    }

    let cov = if k == 0 { DMatrix::zeros(0, 0) } else { invert_information(&eval.information)? };
    let se = (0..k).map(|j| cov[(j, j)].sqrt()).collect();
    Ok(CoxFit {
        spec: spec.clone(),
        beta,
        se,
        cov: (0..k).map(|i| (0..k).map(|j| cov[(i, j)]).collect()).collect(),
        loglik: eval.loglik,
        loglik_null,
        aic: aic(k, eval.loglik),
        ties,
        n_spells: design.len(),
        n_events: design.n_events(),
        iterations,
        converged: true,
    })
}

fn divergence(names: &[String], beta: &[f64], reason: String) -> SurvivalError {
    let j = beta
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map_or(0, |(j, _)| j);
    SurvivalError::Divergence { predictor: names.get(j).cloned().unwrap_or_default(), reason }
}

fn newton_step(eval: &Evaluation) -> Result<DVector<f64>, SurvivalError> {
    let chol = eval
        .information
        .clone()
        .cholesky()
        .ok_or_else(|| SurvivalError::Rank("Cholesky factorisation failed".into()))?;
    Ok(chol.solve(&eval.score))
}

fn invert_information(info: &DMatrix<f64>) -> Result<DMatrix<f64>, SurvivalError> {
    let chol = info
        .clone()
        .cholesky()
        .ok_or_else(|| SurvivalError::Rank("information not positive definite at the optimum".into()))?;
    let inv = chol.inverse();
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(SurvivalError::Rank("non-finite covariance".into()));
    }
    Ok(inv)
}

/// A column is flat for the likelihood when it is constant on the largest
/// risk set that contains an event (every later risk set is a subset).
fn check_identifiable(design: &SurvivalData) -> Result<(), SurvivalError> {
    let first_event = design
        .time()
        .iter()
        .zip(design.event())
        .filter(|(_, &e)| e)
        .map(|(&t, _)| t)
        .fold(f64::INFINITY, f64::min);
    for (j, name) in design.names().iter().enumerate() {
        let (lo, hi) = design
            .column(j)
            .zip(design.time())
            .filter(|(_, &t)| t >= first_event)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (v, _)| (lo.min(v), hi.max(v)));
        let scale = lo.abs().max(hi.abs()).max(1.0);
        if hi - lo <= 1e-12 * scale {
            return Err(SurvivalError::Identifiability(name.clone()));
        }
    }
    Ok(())
}
