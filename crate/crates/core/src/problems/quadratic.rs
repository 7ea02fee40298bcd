use ndarray::{Array1, Array2, ArrayView1, ArrayViewMut1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::StochasticProblem;
use crate::error::{Error, Result};
use crate::linalg::{random_orthogonal, solve};

/// `f_i(x) = 1/2 (x - b_i)^T A_i (x - b_i)` with `A_i` symmetric positive
/// definite, spectrum spread evenly over `[1, cond]`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub a: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
    minimizer: Array1<f64>,
    cond: f64,
    sigma: f64,
}

impl Quadratic {
    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }
}

pub fn gen_quadratic(n: usize, d: usize, cond: f64, hetero: f64, seed: u64) -> Result<Quadratic> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("n and d must be positive".into()));
    }
    if !(cond >= 1.0) || !(hetero >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need cond >= 1 and hetero >= 0, got cond={cond}, hetero={hetero}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = Array1::from_iter((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let spectrum = Array1::from_iter((0..d).map(|j| {
        if d == 1 {
            1.0
        } else {
            1.0 + (cond - 1.0) * j as f64 / (d - 1) as f64
        }
    }));
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        let q = random_orthogonal(d, &mut rng);
        let scaled = &q * &spectrum;
        let mut ai = scaled.dot(&q.t());
        // Symmetrize away rounding.
        let sym = (&ai + &ai.t()) / 2.0;
        ai.assign(&sym);
        let offset = Array1::from_iter((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        b.push(&center + &(offset * hetero));
        a.push(ai);
    }
    let mut h = Array2::zeros((d, d));
    let mut rhs = Array1::zeros(d);
    for (ai, bi) in a.iter().zip(&b) {
        h += ai;
        rhs += &ai.dot(bi);
    }
    let minimizer = solve(&h, &rhs)?;
    Ok(Quadratic {
        a,
        b,
        minimizer,
        cond,
        sigma: 0.0,
    })
}

impl StochasticProblem for Quadratic {
    fn nodes(&self) -> usize {
        self.a.len()
    }

    fn dim(&self) -> usize {
        self.minimizer.len()
    }

    fn local_value(&self, node: usize, x: ArrayView1<f64>) -> f64 {
        let r = &x - &self.b[node];
        0.5 * r.dot(&self.a[node].dot(&r))
    }

    fn local_grad(&self, node: usize, x: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        let r = &x - &self.b[node];
        out.assign(&self.a[node].dot(&r));
    }

    fn noise_std(&self) -> f64 {
        self.sigma
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.cond)
    }

    fn minimizer(&self) -> Option<Array1<f64>> {
        Some(self.minimizer.clone())
    }
}
