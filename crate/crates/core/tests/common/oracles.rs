//! Reference computations written from the textbook definitions, sharing no
//! code with the library. Shared by the core integration tests and the
//! acceptance suite.
#![allow(dead_code)]

use fiscrisk_core::survival::{SurvivalData, Ties};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Every size-`d` subset of `0..n`.
pub fn subsets(n: usize, d: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, d: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, d, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, d, &mut Vec::new(), &mut out);
    out
}

/// Partial log-likelihood straight from the definitions: Breslow and Efron
/// denominators summed per event time, the exact-discrete denominator by
/// enumerating every subset of the risk set of the tied size.
pub fn loglik(data: &SurvivalData, beta: &[f64], ties: Ties) -> f64 {
    let n = data.len();
    let eta: Vec<f64> = (0..n).map(|i| data.row(i).iter().zip(beta).map(|(x, b)| x * b).sum()).collect();
    let mut times: Vec<f64> = (0..n).filter(|&i| data.event()[i]).map(|i| data.time()[i]).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut ll = 0.0;
    for t in times {
        let risk: Vec<usize> = (0..n).filter(|&i| data.time()[i] >= t).collect();
        let dead: Vec<usize> = (0..n).filter(|&i| data.time()[i] == t && data.event()[i]).collect();
        let d = dead.len();
        let eta_d: f64 = dead.iter().map(|&i| eta[i]).sum();
        let s_r: f64 = risk.iter().map(|&i| eta[i].exp()).sum();
        let s_d: f64 = dead.iter().map(|&i| eta[i].exp()).sum();
        ll += eta_d;
        match ties {
            Ties::Breslow => ll -= d as f64 * s_r.ln(),
            Ties::Efron => {
                for l in 0..d {
                    ll -= (s_r - l as f64 / d as f64 * s_d).ln();
                }
            }
            Ties::Exact => {
                let denom: f64 = subsets(risk.len(), d)
                    .iter()
                    .map(|s| s.iter().map(|&j| eta[risk[j]]).sum::<f64>().exp())
                    .sum();
                ll -= denom.ln();
            }
        }
    }
    ll
}

/// Maximises a one-dimensional concave function over `[lo, hi]`: coarse
/// grid, then golden-section search on the bracketing cell.
pub fn maximise_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let steps = 2000;
    let h = (hi - lo) / steps as f64;
    let best = (0..=steps).map(|i| lo + i as f64 * h).max_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap();
    let (mut a, mut b) = (best - h, best + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-10 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Small survival data set with `k` normal covariates. Times come from
/// `1..=distinct_times` so that ties are frequent when that range is small.
pub fn random_data(rng: &mut ChaCha8Rng, n: usize, k: usize, distinct_times: u32) -> SurvivalData {
    loop {
        let time: Vec<f64> = (0..n).map(|_| rng.random_range(1..=distinct_times) as f64).collect();
        let event: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.7).collect();
        if !event.iter().any(|&e| e) {
            continue;
        }
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
        let names = (1..=k).map(|j| format!("x{j}")).collect();
        return SurvivalData::new(names, time, event, rows).unwrap();
    }
}

/// Second-largest eigenpair of `Mcc' = D^-1 M U^-1 M'` computed on the
/// non-symmetric matrix itself: eigenvalues from the real Schur form, the
/// eigenvector as the null vector of `Mcc' - lambda I` via SVD.
pub fn eci_second_eigenvector(m: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let (n, p) = m.shape();
    let kc: Vec<f64> = (0..n).map(|c| m.row(c).sum()).collect();
    let kp: Vec<f64> = (0..p).map(|j| m.column(j).sum()).collect();
    let mcc = DMatrix::from_fn(n, n, |c, d| (0..p).map(|j| m[(c, j)] * m[(d, j)] / (kc[c] * kp[j])).sum());
    let mut eig: Vec<f64> = mcc.complex_eigenvalues().iter().map(|z| z.re).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let lambda = eig[1];
    let shifted = &mcc - DMatrix::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let j = (0..n).min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b])).unwrap();
    (lambda, v_t.row(j).iter().copied().collect())
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// A random `n x p` binary matrix with nested structure,
/// `P(M[c, p] = 1) = logistic(2 (a_c - b_p))`, redrawn until no row or
/// column is empty.
pub fn nested_binary(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<u8>> {
    loop {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let rows: Vec<Vec<u8>> = (0..n)
            .map(|c| {
                (0..p)
                    .map(|j| {
                        let pr = 1.0 / (1.0 + (-2.0 * (a[c] - b[j])).exp());
                        u8::from(rng.random::<f64>() < pr)
                    })
                    .collect()
            })
            .collect();
        let empty_row = rows.iter().any(|r| r.iter().all(|&v| v == 0));
        let empty_col = (0..p).any(|j| rows.iter().all(|r| r[j] == 0));
        if !empty_row && !empty_col {
            return rows;
        }
    }
}
