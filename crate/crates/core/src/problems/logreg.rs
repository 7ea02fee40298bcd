use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView1, ArrayViewMut1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::StochasticProblem;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegParams {
    pub n: usize,
    pub d: usize,
    /// Samples per node.
    pub m: usize,
    pub rho: f64,
    /// Spread of the per-node planted solutions around the shared one.
    pub sigma_h: f64,
    /// Standard deviation of the additive gradient noise.
    pub sigma_n: f64,
    pub seed: u64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        Self {
            n: 7,
            d: 10,
            m: 2000,
            rho: 0.001,
            sigma_h: 1.0,
            sigma_n: 0.001,
            seed: 0,
        }
    }
}

/// Synthetic per-node datasets with planted solutions `x_i* = x* + v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegData {
    /// One `M x d` feature matrix per node.
    pub features: Vec<Array2<f64>>,
    /// Labels in `{-1, +1}`, one vector per node.
    pub labels: Vec<Array1<f64>>,
    pub rho: f64,
    pub sigma_h: f64,
    pub x_star: Array1<f64>,
    pub local_solutions: Vec<Array1<f64>>,
}

impl LogRegData {
    pub fn nodes(&self) -> usize {
        self.features.len()
    }

    pub fn dim(&self) -> usize {
        self.x_star.len()
    }

    /// `node,label,h_1,...,h_d`, one line per sample.
    pub fn samples_csv(&self) -> String {
        let d = self.dim();
        let mut out = String::from("node,label");
        for j in 1..=d {
            let _ = write!(out, ",h_{j}");
        }
        out.push('\n');
        for (i, (h, y)) in self.features.iter().zip(&self.labels).enumerate() {
            for (row, label) in h.rows().into_iter().zip(y.iter()) {
                let _ = write!(out, "{i},{label:?}");
                for v in row {
                    let _ = write!(out, ",{v:?}");
                }
                out.push('\n');
            }
        }
        out
    }

    /// `node,x_1,...,x_d` for every planted local solution; the shared
    /// solution is written with node id `-1`.
    pub fn solutions_csv(&self) -> String {
        let d = self.dim();
        let mut out = String::from("node");
        for j in 1..=d {
            let _ = write!(out, ",x_{j}");
        }
        out.push('\n');
        let rows = std::iter::once((-1i64, &self.x_star))
            .chain(self.local_solutions.iter().enumerate().map(|(i, x)| (i as i64, x)));
        for (i, x) in rows {
            let _ = write!(out, "{i}");
            for v in x {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
        out
    }
}

/// Logistic regression with the non-convex regularizer
/// `r(x) = sum_j x_j^2 / (1 + x_j^2)` and Gaussian gradient noise.
#[derive(Debug, Clone)]
pub struct LogReg {
    data: LogRegData,
    sigma_n: f64,
    smoothness: f64,
}

impl LogReg {
    pub fn data(&self) -> &LogRegData {
        &self.data
    }
}

/// Draws the synthetic datasets deterministically from `params.seed`.
pub fn gen_logreg(params: &LogRegParams) -> Result<LogReg> {
    let LogRegParams {
        n,
        d,
        m,
        rho,
        sigma_h,
        sigma_n,
        seed,
    } = *params;
    if n == 0 || d == 0 || m == 0 {
        return Err(Error::InvalidParameter("n, d and M must be positive".into()));
    }
    if !(rho >= 0.0 && sigma_h >= 0.0 && sigma_n >= 0.0) {
        return Err(Error::InvalidParameter("rho, sigma_h, sigma_n must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = move |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);
    let x_star = Array1::from_iter((0..d).map(|_| normal(&mut rng)));
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut local_solutions = Vec::with_capacity(n);
    let mut max_row_energy = 0.0f64;
    for _ in 0..n {
        let xi = Array1::from_iter(x_star.iter().map(|&c| c + sigma_h * normal(&mut rng)));
        let mut h = Array2::zeros((m, d));
        let mut y = Array1::zeros(m);
        for l in 0..m {
            for j in 0..d {
                h[[l, j]] = normal(&mut rng);
            }
            let margin = h.row(l).dot(&xi);
            let z: f64 = rng.random();
            y[l] = if z < sigmoid(margin) { 1.0 } else { -1.0 };
        }
        let gram = h.t().dot(&h) / m as f64;
        max_row_energy = max_row_energy.max(gershgorin_bound(&gram));
        features.push(h);
        labels.push(y);
        local_solutions.push(xi);
    }
    // Logistic curvature is at most 1/4; |r''| <= 2.
    let smoothness = 0.25 * max_row_energy + 2.0 * rho;
    Ok(LogReg {
        data: LogRegData {
            features,
            labels,
            rho,
            sigma_h,
            x_star,
            local_solutions,
        },
        sigma_n,
        smoothness,
    })
}

fn gershgorin_bound(a: &Array2<f64>) -> f64 {
    a.rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Numerically stable `1 / (1 + e^{-t})`.
pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + e^t)`.
pub(crate) fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `f_i(x) = (1/M) sum_l ln(1 + exp(-y h^T x)) + rho r(x)`.
pub fn value_logreg(data: &LogRegData, node: usize, x: ArrayView1<f64>) -> f64 {
    let h = &data.features[node];
    let y = &data.labels[node];
    let margins = h.dot(&x);
    let loss = margins
        .iter()
        .zip(y.iter())
        .map(|(mg, yl)| softplus(-yl * mg))
        .sum::<f64>()
        / h.nrows() as f64;
    let reg = x.iter().map(|v| v * v / (1.0 + v * v)).sum::<f64>();
    loss + data.rho * reg
}

/// Closed-form gradient of [`value_logreg`].
pub fn grad_logreg(data: &LogRegData, node: usize, x: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
    let h = &data.features[node];
    let y = &data.labels[node];
    let m = h.nrows() as f64;
    let margins = h.dot(&x);
    let coeff = Array1::from_iter(
        margins
            .iter()
            .zip(y.iter())
            .map(|(mg, yl)| -yl * sigmoid(-yl * mg) / m),
    );
    out.assign(&h.t().dot(&coeff));
    for (o, v) in out.iter_mut().zip(x.iter()) {
        let q = 1.0 + v * v;
        *o += data.rho * 2.0 * v / (q * q);
    }
}

impl StochasticProblem for LogReg {
    fn nodes(&self) -> usize {
        self.data.nodes()
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn local_value(&self, node: usize, x: ArrayView1<f64>) -> f64 {
        value_logreg(&self.data, node, x)
    }

    fn local_grad(&self, node: usize, x: ArrayView1<f64>, out: ArrayViewMut1<f64>) {
        grad_logreg(&self.data, node, x, out)
    }

    fn noise_std(&self) -> f64 {
        self.sigma_n
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.smoothness)
    }

    /// Both the loss and the regularizer are non-negative.
    fn initial_gap(&self, x0: ArrayView1<f64>) -> Option<f64> {
        Some(self.value(x0))
    }
}
