use nalgebra::{DMatrix, DVector};

use super::{SurvivalData, SurvivalError, Ties, DEFAULT_EXACT_TIE_CAP};

/// Log partial likelihood with its gradient and negative Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loglik: f64,
    pub score: DVector<f64>,
    pub information: DMatrix<f64>,
}

#[derive(Debug, Clone)]
struct TimeGroup {
    time: f64,
    /// First sorted position with this time.
    start: usize,
    /// Risk set is sorted positions `0..end`.
    end: usize,
    events: Vec<usize>,
}

/// Pre-sorted evaluator of the Cox log partial likelihood.
///
/// Subjects are ordered by decreasing time so every risk set is a prefix of
/// the ordering. Covariates are centred on their column means, which leaves
/// all three likelihoods unchanged but keeps `exp(x'b)` well scaled.
#[derive(Debug, Clone)]
pub struct PartialLikelihood {
    ties: Ties,
    exact_cap: usize,
    k: usize,
    n: usize,
    n_events: usize,
    xs: Vec<f64>,
    groups: Vec<TimeGroup>,
}

impl PartialLikelihood {
    pub fn new(data: &SurvivalData, ties: Ties) -> Result<Self, SurvivalError> {
        Self::with_exact_cap(data, ties, DEFAULT_EXACT_TIE_CAP)
    }

    pub fn with_exact_cap(
        data: &SurvivalData,
        ties: Ties,
        exact_cap: usize,
    ) -> Result<Self, SurvivalError> {
        if data.is_empty() {
            return Err(SurvivalError::EmptyData);
        }
        let n_events = data.n_events();
        if n_events == 0 {
            return Err(SurvivalError::NoEvents);
        }
        let n = data.len();
        let k = data.k();
        let time = data.time();

        let mut order: Vec<usize> = (0..n).collect();
        // stable: equal times keep input order
        order.sort_by(|&a, &b| time[b].total_cmp(&time[a]));

        let means: Vec<f64> =
            (0..k).map(|j| data.column(j).sum::<f64>() / n as f64).collect();
        let mut xs = Vec::with_capacity(n * k);
        for &i in &order {
            xs.extend(data.row(i).iter().zip(&means).map(|(v, m)| v - m));
        }

        let mut groups = Vec::new();
        let mut p = 0;
        while p < n {
            let t = time[order[p]];
            let start = p;
            let mut events = Vec::new();
            while p < n && time[order[p]] == t {
                if data.event()[order[p]] {
                    events.push(p);
                }
                p += 1;
            }
            groups.push(TimeGroup { time: t, start, end: p, events });
        }

        Ok(PartialLikelihood { ties, exact_cap, k, n, n_events, xs, groups })
    }

    pub fn ties(&self) -> Ties {
        self.ties
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_events(&self) -> usize {
        self.n_events
    }

    /// Largest number of tied failures at any single time.
    pub fn max_tied(&self) -> usize {
        self.groups.iter().map(|g| g.events.len()).max().unwrap_or(0)
    }

    pub fn loglik(&self, beta: &[f64]) -> Result<f64, SurvivalError> {
        Ok(self.evaluate_inner(beta, false)?.0)
    }

    pub fn evaluate(&self, beta: &[f64]) -> Result<Evaluation, SurvivalError> {
        let (loglik, score, info) = self.evaluate_inner(beta, true)?;
        let k = self.k;
        Ok(Evaluation {
            loglik,
            score: DVector::from_vec(score),
            information: DMatrix::from_row_slice(k, k, &info),
        })
    }

    fn x(&self, p: usize) -> &[f64] {
        &self.xs[p * self.k..(p + 1) * self.k]
    }

    fn evaluate_inner(
        &self,
        beta: &[f64],
        derivs: bool,
    ) -> Result<(f64, Vec<f64>, Vec<f64>), SurvivalError> {
        let k = self.k;
        if beta.len() != k {
            return Err(SurvivalError::DimensionMismatch { expected: k, actual: beta.len() });
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(SurvivalError::NonFinite { what: "coefficients".into() });
        }
        let n = self.n;
        let eta: Vec<f64> = (0..n)
            .map(|p| self.x(p).iter().zip(beta).map(|(x, b)| x * b).sum())
            .collect();
        let offset = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = eta.iter().map(|e| (e - offset).exp()).collect();

        let mut s0 = 0.0;
        let mut s1 = vec![0.0; k];
        let mut s2 = vec![0.0; k * k];
        let mut loglik = 0.0;
        let mut score = vec![0.0; k];
        let mut info = vec![0.0; k * k];
        // exact-method scratch
        let mut prefix_max = f64::NEG_INFINITY;

        for g in &self.groups {
            for p in g.start..g.end {
                let wp = w[p];
                s0 += wp;
                prefix_max = prefix_max.max(eta[p]);
                if derivs {
                    let xp = self.x(p);
                    for a in 0..k {
                        s1[a] += wp * xp[a];
                        for b in 0..k {
                            s2[a * k + b] += wp * xp[a] * xp[b];
                        }
                    }
                }
            }
            let d = g.events.len();
            if d == 0 {
                continue;
            }
            let eta_sum: f64 = g.events.iter().map(|&p| eta[p]).sum();
            let mut xsum = vec![0.0; k];
            if derivs {
                for &p in &g.events {
                    for (s, x) in xsum.iter_mut().zip(self.x(p)) {
                        *s += x;
                    }
                }
            }

            let method = if d == 1 { Ties::Breslow } else { self.ties };
            let (log_denom, mean, second) = match method {
                Ties::Breslow => {
                    let df = d as f64;
                    let ld = df * (s0.ln() + offset);
                    let (mut m, mut sec) = (vec![0.0; k], vec![0.0; k * k]);
                    if derivs {
                        for a in 0..k {
                            m[a] = df * (s1[a] / s0);
                            for b in 0..k {
                                sec[a * k + b] =
                                    df * (s2[a * k + b] / s0 - s1[a] * s1[b] / (s0 * s0));
                            }
                        }
                    }
                    (ld, m, sec)
                }
                Ties::Efron => self.efron_terms(g, &w, offset, s0, &s1, &s2, derivs),
                Ties::Exact => {
                    if d > self.exact_cap {
                        return Err(SurvivalError::TieCapacity {
                            time: g.time,
                            tied: d,
                            cap: self.exact_cap,
                        });
                    }
                    self.exact_terms(g, &eta, prefix_max, derivs)
                }
            };

            loglik += eta_sum - log_denom;
            if derivs {
                for a in 0..k {
                    score[a] += xsum[a] - mean[a];
                    for b in 0..k {
                        info[a * k + b] += second[a * k + b];
                    }
                }
            }
        }

        if derivs {
            for a in 0..k {
                for b in 0..a {
                    let v = 0.5 * (info[a * k + b] + info[b * k + a]);
                    info[a * k + b] = v;
                    info[b * k + a] = v;
                }
            }
        }
        Ok((loglik, score, info))
    }

    #[allow(clippy::too_many_arguments)]
    fn efron_terms(
        &self,
        g: &TimeGroup,
        w: &[f64],
        offset: f64,
        s0: f64,
        s1: &[f64],
        s2: &[f64],
        derivs: bool,
    ) -> (f64, Vec<f64>, Vec<f64>) {
        let k = self.k;
        let d = g.events.len();
        let mut d0 = 0.0;
        let mut d1 = vec![0.0; k];
        let mut d2 = vec![0.0; k * k];
        for &p in &g.events {
            let wp = w[p];
            d0 += wp;
            if derivs {
                let xp = self.x(p);
                for a in 0..k {
                    d1[a] += wp * xp[a];
                    for b in 0..k {
                        d2[a * k + b] += wp * xp[a] * xp[b];
                    }
                }
            }
        }
        let mut log_denom = 0.0;
        let mut mean = vec![0.0; k];
        let mut second = vec![0.0; k * k];
        let mut a1 = vec![0.0; k];
        for l in 0..d {
            let f = l as f64 / d as f64;
            let a0 = s0 - f * d0;
            log_denom += a0.ln() + offset;
            if derivs {
                for a in 0..k {
                    a1[a] = s1[a] - f * d1[a];
                    mean[a] += a1[a] / a0;
                }
                for a in 0..k {
                    for b in 0..k {
                        let a2 = s2[a * k + b] - f * d2[a * k + b];
                        second[a * k + b] += a2 / a0 - a1[a] * a1[b] / (a0 * a0);
                    }
                }
            }
        }
        (log_denom, mean, second)
    }

    /// Elementary symmetric polynomial recursion over the risk set, carrying
    /// first and second derivatives with respect to the coefficients.
    fn exact_terms(
        &self,
        g: &TimeGroup,
        eta: &[f64],
        risk_max: f64,
        derivs: bool,
    ) -> (f64, Vec<f64>, Vec<f64>) {
        let k = self.k;
        let d = g.events.len();
        let mut e = vec![0.0; d + 1];
        e[0] = 1.0;
        let (mut gr, mut h) = if derivs {
            (vec![0.0; (d + 1) * k], vec![0.0; (d + 1) * k * k])
        } else {
            (Vec::new(), Vec::new())
        };
        let kk = k * k;
        for (p, &eta_p) in eta.iter().enumerate().take(g.end) {
            let v = (eta_p - risk_max).exp();
            let xp = self.x(p);
            let top = d.min(p + 1);
            for j in (1..=top).rev() {
                let e_prev = e[j - 1];
                if derivs {
                    for a in 0..k {
                        let g_prev_a = gr[(j - 1) * k + a];
                        for b in 0..k {
                            let g_prev_b = gr[(j - 1) * k + b];
                            h[j * kk + a * k + b] += v
                                * (h[(j - 1) * kk + a * k + b]
                                    + xp[a] * g_prev_b
                                    + g_prev_a * xp[b]
                                    + xp[a] * xp[b] * e_prev);
                        }
                    }
                    for a in 0..k {
                        gr[j * k + a] += v * (gr[(j - 1) * k + a] + xp[a] * e_prev);
                    }
                }
                e[j] += v * e_prev;
            }
        }
        let ed = e[d];
        let log_denom = ed.ln() + d as f64 * risk_max;
        let mut mean = vec![0.0; k];
        let mut second = vec![0.0; kk];
        if derivs {
            let gd = &gr[d * k..(d + 1) * k];
            for a in 0..k {
                mean[a] = gd[a] / ed;
                for b in 0..k {
                    second[a * k + b] = h[d * kk + a * k + b] / ed - gd[a] * gd[b] / (ed * ed);
                }
            }
        }
        (log_denom, mean, second)
    }
}

/// Log partial likelihood at `beta`.
pub fn partial_loglik(data: &SurvivalData, beta: &[f64], ties: Ties) -> Result<f64, SurvivalError> {
    PartialLikelihood::new(data, ties)?.loglik(beta)
}

/// Score vector and observed information (negative Hessian) at `beta`.
pub fn score_and_information(
    data: &SurvivalData,
    beta: &[f64],
    ties: Ties,
) -> Result<(DVector<f64>, DMatrix<f64>), SurvivalError> {
    let ev = PartialLikelihood::new(data, ties)?.evaluate(beta)?;
    Ok((ev.score, ev.information))
}
