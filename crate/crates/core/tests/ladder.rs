use fiscrisk_core::ladder::{run_ladder, run_robustness, select_best, standard_spec, union_spec};
use fiscrisk_core::simgen::{simulate_continuous, simulate_replicate, CovariateLaw, SimParams};
use fiscrisk_core::survival::{aic, CoxFit, FitConfig, ModelSpec, Ties};
use proptest::prelude::*;

fn ladder_params(beta: Vec<f64>, seed: u64) -> SimParams {
    SimParams {
        n_subjects: 300,
        true_beta: beta,
        baseline_rate: 0.1,
        censor_horizon: 25.0,
        covariate_law: CovariateLaw::LadderPanel,
        seed,
    }
}

fn fake(k: usize, loglik: f64) -> CoxFit {
    let names: Vec<String> = (0..k).map(|i| format!("x{i}")).collect();
    CoxFit {
        spec: ModelSpec::parse_terms(&names).unwrap(),
        beta: vec![0.0; k],
        se: vec![1.0; k],
        cov: vec![vec![0.0; k]; k],
        loglik,
        loglik_null: loglik,
        aic: aic(k, loglik),
        ties: Ties::Efron,
        n_spells: 10,
        n_events: 5,
        iterations: 1,
        converged: true,
    }
}

proptest! {
    #[test]
    fn selection_ignores_a_common_aic_shift(
        fits in prop::collection::vec((1usize..8, -500.0f64..-10.0), 1..12),
        shift in -1000.0f64..1000.0,
    ) {
        let base: Vec<CoxFit> = fits.iter().map(|&(k, ll)| fake(k, ll)).collect();
        let shifted: Vec<CoxFit> = base.iter().map(|f| CoxFit { aic: f.aic + shift, ..f.clone() }).collect();
        let i = select_best(&base).unwrap();
        let j = select_best(&shifted).unwrap();
        prop_assert!(i == j || (base[i].aic - base[j].aic).abs() < 1e-9);
    }
}

#[test]
fn ladder_is_deterministic() {
    let data = simulate_replicate(&ladder_params(vec![0.0, 0.0, -3.0, -0.4, 0.4, -0.3, -0.3], 1), 0)
        .unwrap()
        .to_survival_data()
        .unwrap();
    let a = run_ladder(&data, Ties::Efron, &FitConfig::default());
    let b = run_ladder(&data, Ties::Efron, &FitConfig::default());
    assert_eq!(a, b);
    assert_eq!(a.models.len(), 10);
    assert!(a.models.iter().all(|m| m.fit.is_some()));
    assert!(a.models.iter().all(|m| m.fit.as_ref().unwrap().n_spells == 300));
}

#[test]
fn trade_only_data_prefers_model_7_over_model_8() {
    let beta = vec![1.5, 0.0, 0.0, -0.4, 0.4, -0.3, -0.3];
    let mut wins = 0;
    for r in 0..30 {
        let data = simulate_replicate(&ladder_params(beta.clone(), 2), r).unwrap().to_survival_data().unwrap();
        let l = run_ladder(&data, Ties::Efron, &FitConfig::default());
        let (m7, m8) = (l.models[6].fit.as_ref().unwrap(), l.models[7].fit.as_ref().unwrap());
        if m7.aic < m8.aic {
            wins += 1;
        }
    }
    assert!(wins >= 24, "model 7 won {wins} of 30");
}

#[test]
fn robustness_on_untied_data_gives_identical_columns() {
    let p = SimParams { n_subjects: 200, ..ladder_params(vec![0.0, 0.0, -3.0, -0.4, 0.4, -0.3, -0.3], 3) };
    let data = simulate_continuous(&p, 0).unwrap();
    let r = run_robustness(&data, &union_spec(), &FitConfig::default());
    let fits: Vec<&CoxFit> = r.models.iter().map(|m| m.fit.as_ref().unwrap()).collect();
    for f in &fits[1..] {
        assert!((f.loglik - fits[0].loglik).abs() < 1e-6);
        for (a, b) in f.beta.iter().zip(&fits[0].beta) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn heavy_ties_change_exact_scale_but_not_signs() {
    let p = SimParams { n_subjects: 200, ..ladder_params(vec![0.0, 0.0, -3.0, -0.8, 0.8, -0.6, -0.6], 4) };
    let data = simulate_replicate(&p, 0).unwrap().to_survival_data().unwrap();
    let r = run_robustness(&data, &standard_spec("9").unwrap(), &FitConfig::default());
    let fits: Vec<&CoxFit> = r.models.iter().map(|m| m.fit.as_ref().unwrap()).collect();
    let (exact, breslow, efron) = (fits[0], fits[1], fits[2]);
    assert!(exact.loglik > efron.loglik + 10.0);
    assert!(efron.loglik > breslow.loglik);
    for j in 0..exact.beta.len() {
        assert_eq!(exact.beta[j].signum(), breslow.beta[j].signum());
        assert_eq!(exact.beta[j].signum(), efron.beta[j].signum());
    }
    assert!(fits.iter().all(|f| f.beta[0] < 0.0), "interaction stays negative");
}

#[test]
fn exact_capacity_failure_stays_in_its_row() {
    let p = SimParams { n_subjects: 600, baseline_rate: 0.3, ..ladder_params(vec![0.0; 7], 5) };
    let data = simulate_replicate(&p, 0).unwrap().to_survival_data().unwrap();
    let r = run_robustness(&data, &union_spec(), &FitConfig::default());
    let failure = r.models[0].failure.as_ref().expect("exact exceeds the tie cap");
    assert_eq!(failure.category, "capacity");
    assert!(r.models[1].fit.is_some() && r.models[2].fit.is_some());
}
