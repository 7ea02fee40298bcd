//! Shared fixtures for the criterion benchmarks in `benches/`.

use ndarray::Array2;
use skewnet_core::optimizer::{DigingState, GradientOracle};
use skewnet_core::problems::ProblemPreset;
use skewnet_core::rng::NoiseKey;
use skewnet_core::StochasticProblem;

/// Logistic-regression preset on `n` nodes with the default data set.
pub fn logreg(n: usize) -> Box<dyn StochasticProblem> {
    ProblemPreset::logreg_default(n, 0)
        .build()
        .expect("logreg preset")
}

/// Rows drawn from `NoiseKey(seed, i, 0, 0)`.
pub fn seeded_rows(seed: u64, n: usize, d: usize) -> Array2<f64> {
    let mut out = Array2::zeros((n, d));
    let mut buf = vec![0.0; d];
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        NoiseKey::new(seed, i, 0, 0).fill_normal(&mut buf);
        row.iter_mut().zip(&buf).for_each(|(x, b)| *x = *b);
    }
    out
}

/// Push-DIGing state at a seeded starting point.
pub fn diging_state(problem: &dyn StochasticProblem, oracle: &GradientOracle) -> DigingState {
    let x0 = seeded_rows(1, problem.nodes(), problem.dim());
    DigingState::init(problem, x0, oracle).expect("initial state")
}
