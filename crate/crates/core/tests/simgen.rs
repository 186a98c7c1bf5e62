use fiscrisk_core::simgen::{
    coverage_experiment, run_replicates, simulate_continuous, CovariateLaw, SimParams,
};
use fiscrisk_core::survival::{fit_cox, FitConfig, ModelSpec, Ties};

fn params(n: usize, beta: Vec<f64>, law: CovariateLaw) -> SimParams {
    SimParams {
        n_subjects: n,
        true_beta: beta,
        baseline_rate: 0.1,
        censor_horizon: 25.0,
        covariate_law: law,
        seed: 2024,
    }
}

#[test]
fn replicate_results_do_not_depend_on_scheduling() {
    let p = params(100, vec![0.5, -0.5], CovariateLaw::StandardNormal);
    let parallel = run_replicates(&p, 16, Ties::Efron, &FitConfig::default()).unwrap();
    let serial: Vec<_> = (0..16)
        .map(|r| {
            let data = fiscrisk_core::simgen::simulate_replicate(&p, r).unwrap().to_survival_data().unwrap();
            fit_cox(&data, &ModelSpec::parse_terms(&["x1", "x2"]).unwrap(), Ties::Efron, &FitConfig::default())
                .unwrap()
        })
        .collect();
    for (a, b) in parallel.iter().zip(&serial) {
        assert_eq!(a.as_ref().unwrap(), b);
    }
    let r1 = coverage_experiment(&p, 16, Ties::Efron).unwrap();
    let r2 = coverage_experiment(&p, 16, Ties::Efron).unwrap();
    assert_eq!(r1, r2);
}

#[test]
fn null_effect_is_recovered() {
    let p = params(200, vec![0.0, 0.0], CovariateLaw::StandardNormal);
    let r = coverage_experiment(&p, 500, Ties::Efron).unwrap();
    assert_eq!(r.failures, 0);
    for b in &r.bias {
        assert!(b.abs() < 0.05, "bias {b}");
    }
}

#[test]
fn estimation_error_shrinks_with_sample_size() {
    let spec = ModelSpec::parse_terms(&["x1", "x2"]).unwrap();
    let mean_abs_error = |n: usize| {
        let p = params(n, vec![0.5, -0.5], CovariateLaw::StandardNormal);
        let total: f64 = (0..20)
            .map(|r| {
                let data = simulate_continuous(&p, r).unwrap();
                let fit = fit_cox(&data, &spec, Ties::Breslow, &FitConfig::default()).unwrap();
                fit.beta.iter().zip(&p.true_beta).map(|(b, t)| (b - t).abs()).sum::<f64>()
            })
            .sum();
        total / 20.0
    };
    let (small, large) = (mean_abs_error(200), mean_abs_error(2000));
    assert!(large < small, "{large} vs {small}");
}

#[test]
fn product_pair_interaction_sign_is_recovered() {
    let p = params(400, vec![0.0, 0.0, -2.0], CovariateLaw::ProductPair);
    let fits = run_replicates(&p, 100, Ties::Efron, &FitConfig::default()).unwrap();
    let negative = fits.iter().filter(|f| matches!(f, Ok(f) if f.beta[2] < 0.0)).count();
    assert!(negative >= 95, "negative in {negative} of 100");
}
