#[path = "common/oracles.rs"]
mod oracles;

use fiscrisk_core::simgen::{simulate_continuous, CovariateLaw, SimParams};
use fiscrisk_core::survival::{fit_cox, partial_loglik, CoxFit, FitConfig, ModelSpec, SurvivalData, Ties};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data_from(time: Vec<f64>, event: Vec<bool>, x: Vec<Vec<f64>>) -> SurvivalData {
    let k = x[0].len();
    SurvivalData::new((1..=k).map(|j| format!("x{j}")).collect(), time, event, x).unwrap()
}

fn names(k: usize) -> ModelSpec {
    ModelSpec::parse_terms(&(1..=k).map(|j| format!("x{j}")).collect::<Vec<_>>()).unwrap()
}

#[test]
fn loglik_matches_definitions_on_tied_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let n = rng.random_range(3..=10);
        let k = rng.random_range(1..=3);
        let data = oracles::random_data(&mut rng, n, k, 3);
        let beta: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        for ties in Ties::ALL {
            let got = partial_loglik(&data, &beta, ties).unwrap();
            let want = oracles::loglik(&data, &beta, ties);
            assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{ties}: {got} vs {want}");
        }
    }
}

#[test]
fn exact_method_matches_enumeration_for_large_tie_groups() {
    // 5 tied failures out of 9 at risk
    let time = vec![1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
    let event = vec![true, true, true, true, true, false, true, true, false];
    let x: Vec<Vec<f64>> = (0..9).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
    let data = data_from(time, event, x);
    for beta in [[0.0, 0.0], [0.8, -1.2], [-2.0, 0.5]] {
        let got = partial_loglik(&data, &beta, Ties::Exact).unwrap();
        let want = oracles::loglik(&data, &beta, Ties::Exact);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn newton_matches_brute_force_on_small_examples() {
    let data = data_from(
        vec![1.0, 2.0, 2.0, 3.0, 4.0, 5.0],
        vec![true, true, false, true, true, false],
        vec![vec![1.2], vec![0.3], vec![-0.5], vec![0.9], vec![-1.1], vec![0.1]],
    );
    for ties in Ties::ALL {
        let fit = fit_cox(&data, &names(1), ties, &FitConfig::default()).unwrap();
        let b = oracles::maximise_1d(|b| oracles::loglik(&data, &[b], ties), -10.0, 10.0);
        assert!((fit.beta[0] - b).abs() < 1e-6, "{ties}: {} vs {b}", fit.beta[0]);
    }
}

#[test]
fn continuous_simulated_data_fits_agree_across_tie_methods() {
    let p = SimParams {
        n_subjects: 150,
        true_beta: vec![0.5, -0.5],
        baseline_rate: 0.1,
        censor_horizon: 25.0,
        covariate_law: CovariateLaw::StandardNormal,
        seed: 5,
    };
    let data = simulate_continuous(&p, 0).unwrap();
    let fits: Vec<CoxFit> =
        Ties::ALL.iter().map(|&t| fit_cox(&data, &names(2), t, &FitConfig::default()).unwrap()).collect();
    for f in &fits[1..] {
        for j in 0..2 {
            assert!((f.beta[j] - fits[0].beta[j]).abs() < 1e-8);
        }
        assert!((f.loglik - fits[0].loglik).abs() < 1e-8);
    }
}

#[test]
fn fit_json_round_trip_is_exact() {
    let data = oracles::random_data(&mut ChaCha8Rng::seed_from_u64(3), 12, 2, 12);
    let fit = fit_cox(&data, &names(2), Ties::Efron, &FitConfig::default()).unwrap();
    let text = serde_json::to_string(&fit).unwrap();
    let back: CoxFit = serde_json::from_str(&text).unwrap();
    assert_eq!(back, fit);
}

fn arb_data(distinct: bool) -> impl Strategy<Value = (SurvivalData, Vec<f64>)> {
    (4usize..10, 1usize..3).prop_flat_map(move |(n, k)| {
        (
            prop::collection::vec(1u32..6, n),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(prop::collection::vec(-2.0f64..2.0, k), n),
            prop::collection::vec(-1.5f64..1.5, k),
        )
            .prop_filter_map("needs an event", move |(t, mut e, x, beta)| {
                let time: Vec<f64> =
                    if distinct { (0..t.len()).map(|i| (i + 1) as f64).collect() } else { t.iter().map(|&v| v as f64).collect() };
                e[0] = true;
                Some((data_from(time, e, x), beta))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn no_ties_collapse_the_methods((data, beta) in arb_data(true)) {
        let b = partial_loglik(&data, &beta, Ties::Breslow).unwrap();
        let e = partial_loglik(&data, &beta, Ties::Efron).unwrap();
        let x = partial_loglik(&data, &beta, Ties::Exact).unwrap();
        prop_assert!((b - e).abs() <= 1e-12 * b.abs().max(1.0));
        prop_assert!((b - x).abs() <= 1e-12 * b.abs().max(1.0));
    }

    #[test]
    fn monotone_time_relabelling_leaves_loglik_unchanged((data, beta) in arb_data(false)) {
        let relabelled = SurvivalData::new(
            data.names().to_vec(),
            data.time().iter().map(|t| t * t + 3.0 * t).collect(),
            data.event().to_vec(),
            (0..data.len()).map(|i| data.row(i).to_vec()).collect(),
        ).unwrap();
        for ties in Ties::ALL {
            let a = partial_loglik(&data, &beta, ties).unwrap();
            let b = partial_loglik(&relabelled, &beta, ties).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn covariate_shift_leaves_loglik_unchanged((data, beta) in arb_data(false), shift in -5.0f64..5.0) {
        let shifted = SurvivalData::new(
            data.names().to_vec(),
            data.time().to_vec(),
            data.event().to_vec(),
            (0..data.len()).map(|i| data.row(i).iter().map(|v| v + shift).collect()).collect(),
        ).unwrap();
        for ties in Ties::ALL {
            let a = partial_loglik(&data, &beta, ties).unwrap();
            let b = partial_loglik(&shifted, &beta, ties).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn adding_a_predictor_never_lowers_the_maximum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = oracles::random_data(&mut rng, 30, 2, 8);
        let cfg = FitConfig::default();
        if let (Ok(small), Ok(big)) = (
            fit_cox(&data, &names(1), Ties::Efron, &cfg),
            fit_cox(&data, &names(2), Ties::Efron, &cfg),
        ) {
            prop_assert!(big.loglik >= small.loglik - 1e-8);
            prop_assert!(small.loglik >= small.loglik_null - 1e-8);
        }
    }
}
