//! Workloads shared by the benchmarks.

use fiscrisk_core::complexity::SpecializationMatrix;
use fiscrisk_core::simgen::{simulate_replicate, CovariateLaw, SimParams};
use fiscrisk_core::SurvivalData;

/// Year-discretised synthetic data carrying every ladder column.
pub fn ladder_data(n_subjects: usize, seed: u64) -> SurvivalData {
    let p = SimParams {
        n_subjects,
        true_beta: vec![0.0, 0.0, -3.0, -0.4, 0.4, -0.3, -0.3],
        baseline_rate: 0.1,
        censor_horizon: 25.0,
        covariate_law: CovariateLaw::LadderPanel,
        seed,
    };
    simulate_replicate(&p, 0).and_then(|s| Ok(s.to_survival_data()?)).expect("benchmark data")
}

/// Nested `n x p` specialisation pattern with a sprinkling of exceptions.
pub fn nested_matrix(n: usize, p: usize) -> SpecializationMatrix {
    let rows: Vec<Vec<u8>> = (0..n)
        .map(|c| {
            let diversity = 1 + (c * p) / n;
            (0..p).map(|j| u8::from((j < diversity) ^ ((c * 31 + j * 17) % 11 == 0))).collect()
        })
        .collect();
    SpecializationMatrix::unlabeled(&rows).expect("no empty row or column")
}
