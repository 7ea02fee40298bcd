//! Local-loss collections `{f_i}` with exact and noisy gradient oracles.

mod logreg;
mod quadratic;

use ndarray::{Array1, ArrayView1, ArrayViewMut1};

use crate::rng::NoiseKey;

pub use logreg::{gen_logreg, grad_logreg, value_logreg, LogReg, LogRegData, LogRegParams};
pub use quadratic::{gen_quadratic, Quadratic};

/// A decentralized problem `f = (1/n) sum_i f_i` on `R^d`, where node `i`
/// can query `f_i`, `grad f_i` and an unbiased noisy gradient.
pub trait StochasticProblem: Send + Sync {
    fn nodes(&self) -> usize;
    fn dim(&self) -> usize;
    fn local_value(&self, node: usize, x: ArrayView1<f64>) -> f64;
    /// Writes `grad f_i(x)` into `out`.
    fn local_grad(&self, node: usize, x: ArrayView1<f64>, out: ArrayViewMut1<f64>);
    /// Per-coordinate standard deviation of the additive gradient noise.
    fn noise_std(&self) -> f64;
    /// Smoothness constant, when known.
    fn smoothness(&self) -> Option<f64> {
        None
    }
    /// Global minimizer, when known in closed form.
    fn minimizer(&self) -> Option<Array1<f64>> {
        None
    }
    /// Upper bound on `f(x0) - inf f`, when one is available.
    fn initial_gap(&self, x0: ArrayView1<f64>) -> Option<f64> {
        self.minimizer()
            .map(|m| (self.value(x0) - self.value(m.view())).max(0.0))
    }

    /// `f(x) = (1/n) sum_i f_i(x)`.
    fn value(&self, x: ArrayView1<f64>) -> f64 {
        (0..self.nodes()).map(|i| self.local_value(i, x)).sum::<f64>() / self.nodes() as f64
    }

    /// `grad f(x)`.
    fn grad(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let mut acc = Array1::zeros(self.dim());
        let mut buf = Array1::zeros(self.dim());
        for i in 0..self.nodes() {
            self.local_grad(i, x, buf.view_mut());
            acc += &buf;
        }
        acc / self.nodes() as f64
    }

    /// `grad f_i(x) + eps`, `eps ~ N(0, noise_std^2 I)` drawn from `key`.
    fn noisy_grad(&self, node: usize, x: ArrayView1<f64>, key: NoiseKey, mut out: ArrayViewMut1<f64>) {
        self.local_grad(node, x, out.view_mut());
        let s = self.noise_std();
        if s > 0.0 {
            let mut eps = vec![0.0; self.dim()];
            key.fill_normal(&mut eps);
            for (o, e) in out.iter_mut().zip(eps) {
                *o += s * e;
            }
        }
    }
}

/// Single noisy gradient draw as an owned vector.
pub fn noisy_oracle<P: StochasticProblem + ?Sized>(
    problem: &P,
    node: usize,
    x: ArrayView1<f64>,
    key: NoiseKey,
) -> Array1<f64> {
    let mut out = Array1::zeros(problem.dim());
    problem.noisy_grad(node, x, key, out.view_mut());
    out
}

/// Average of `batch` draws at rounds `0..batch` of `(seed, node, iter)`.
pub fn batched_oracle<P: StochasticProblem + ?Sized>(
    problem: &P,
    node: usize,
    x: ArrayView1<f64>,
    seed: u64,
    iter: usize,
    batch: usize,
    mut out: ArrayViewMut1<f64>,
) {
    out.fill(0.0);
    let mut buf = Array1::zeros(problem.dim());
    for r in 0..batch {
        problem.noisy_grad(node, x, NoiseKey::new(seed, node, iter, r), buf.view_mut());
        out += &buf;
    }
    out /= batch as f64;
}

/// Central finite-difference gradient of `f_i`, used to validate the
/// closed-form gradients.
pub fn finite_difference_grad<P: StochasticProblem + ?Sized>(
    problem: &P,
    node: usize,
    x: ArrayView1<f64>,
    step: f64,
) -> Array1<f64> {
    let mut xp = x.to_owned();
    Array1::from_iter((0..x.len()).map(|j| {
        let orig = xp[j];
        xp[j] = orig + step;
        let up = problem.local_value(node, xp.view());
        xp[j] = orig - step;
        let down = problem.local_value(node, xp.view());
        xp[j] = orig;
        (up - down) / (2.0 * step)
    }))
}

/// Named problem presets addressable from configs and the CLI.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemPreset {
    /// Regularized logistic regression with planted heterogeneous solutions.
    LogReg(LogRegParams),
    Quadratic {
        n: usize,
        d: usize,
        cond: f64,
        hetero: f64,
        sigma: f64,
        seed: u64,
    },
    /// Zero-chain instance sized for a communication budget.
    HardChain {
        n: usize,
        budget: usize,
        l: f64,
        delta: f64,
    },
}

impl ProblemPreset {
    /// `logreg-sec5` defaults for `n` nodes: d=10, M=2000, rho=0.001,
    /// sigma_h=1, sigma_n=0.001.
    pub fn logreg_default(n: usize, seed: u64) -> Self {
        ProblemPreset::LogReg(LogRegParams {
            n,
            seed,
            ..LogRegParams::default()
        })
    }

    pub fn quadratic_default(n: usize, seed: u64) -> Self {
        ProblemPreset::Quadratic {
            n,
            d: 5,
            cond: 10.0,
            hetero: 1.0,
            sigma: 0.0,
            seed,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemPreset::LogReg(_) => "logreg-sec5",
            ProblemPreset::Quadratic { .. } => "quadratic",
            ProblemPreset::HardChain { .. } => "hard",
        }
    }

    pub fn nodes(&self) -> usize {
        match self {
            ProblemPreset::LogReg(p) => p.n,
            ProblemPreset::Quadratic { n, .. } => *n,
            ProblemPreset::HardChain { n, .. } => *n,
        }
    }

    pub fn build(&self) -> crate::Result<Box<dyn StochasticProblem>> {
        Ok(match self {
            ProblemPreset::LogReg(p) => Box::new(gen_logreg(p)?),
            ProblemPreset::Quadratic {
                n,
                d,
                cond,
                hetero,
                sigma,
                seed,
            } => Box::new(gen_quadratic(*n, *d, *cond, *hetero, *seed)?.with_noise(*sigma)),
            ProblemPreset::HardChain {
                n,
                budget,
                l,
                delta,
            } => Box::new(crate::lowerbound::build_hard_instance_for_budget(*n, *budget, *l, *delta)?.1),
        })
    }
}
