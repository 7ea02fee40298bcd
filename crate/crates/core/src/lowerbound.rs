//! Zero-chain hard instance for first-order methods over a directed
//! network, and the progress measure it is built around.
//!
//! Coordinates are 1-based in the formulas below and 0-based in code.
//!
//! ```text
//! psi(z)  = 0                          z <= 1/2
//!         = exp(1 - 1/(2z - 1)^2)      z >  1/2
//! phi(z)  = sqrt(e) * int_{-inf}^z exp(-t^2/2) dt
//! term_j  = psi(-x_j) phi(-x_{j+1}) - psi(x_j) phi(x_{j+1})
//! h(x)    = -psi(1) phi(x_1) + sum_{j<d} term_j
//! h1(x)   = 2 (-psi(1) phi(x_1) + sum_{j even} term_j)
//! h2(x)   = 2 sum_{j odd} term_j
//! ```

use std::f64::consts::{E, PI, SQRT_2};

use ndarray::{Array1, ArrayView1, ArrayViewMut1};

use crate::error::{Error, Result};
use crate::problems::StochasticProblem;

/// Suboptimality constant: `h(x) - inf h <= 12 d`.
pub const DELTA0: f64 = 12.0;
/// Smoothness of `h`, `h1` and `h2`.
pub const L0: f64 = 152.0;
/// Bound on `|grad h|_inf`.
pub const GINF: f64 = 23.0;

/// Highest 1-based index of a nonzero entry, 0 for the zero vector.
pub fn prog(x: ArrayView1<f64>) -> usize {
    x.iter().rposition(|&t| t != 0.0).map_or(0, |j| j + 1)
}

pub fn psi(z: f64) -> f64 {
    if z <= 0.5 {
        0.0
    } else {
        let t = 2.0 * z - 1.0;
        (1.0 - 1.0 / (t * t)).exp()
    }
}

pub fn psi_prime(z: f64) -> f64 {
    let p = psi(z);
    if p == 0.0 {
        0.0
    } else {
        let t = 2.0 * z - 1.0;
        p * 4.0 / (t * t * t)
    }
}

pub fn phi(z: f64) -> f64 {
    E.sqrt() * (2.0 * PI).sqrt() * 0.5 * libm::erfc(-z / SQRT_2)
}

pub fn phi_prime(z: f64) -> f64 {
    E.sqrt() * (-0.5 * z * z).exp()
}

/// Which component of the split a chain function keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainPart {
    /// `h`: head plus every link.
    Full,
    /// `h1`: doubled head plus doubled even links.
    Even,
    /// `h2`: doubled odd links.
    Odd,
}

impl ChainPart {
    fn head_weight(self) -> f64 {
        match self {
            ChainPart::Full => 1.0,
            ChainPart::Even => 2.0,
            ChainPart::Odd => 0.0,
        }
    }

    /// Weight of link `j` (1-based), joining coordinates `j` and `j + 1`.
    fn link_weight(self, j: usize) -> f64 {
        match self {
            ChainPart::Full => 1.0,
            ChainPart::Even if j % 2 == 0 => 2.0,
            ChainPart::Odd if j % 2 == 1 => 2.0,
            _ => 0.0,
        }
    }
}

pub fn chain_value(part: ChainPart, x: ArrayView1<f64>) -> f64 {
    let d = x.len();
    if d == 0 {
        return 0.0;
    }
    let mut acc = -part.head_weight() * psi(1.0) * phi(x[0]);
    for j in 1..d {
        let c = part.link_weight(j);
        if c == 0.0 {
            continue;
        }
        let (a, b) = (x[j - 1], x[j]);
        acc += c * (psi(-a) * phi(-b) - psi(a) * phi(b));
    }
    acc
}

/// Writes the gradient of [`chain_value`] into `out`.
pub fn chain_grad(part: ChainPart, x: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
    let d = x.len();
    out.fill(0.0);
    if d == 0 {
        return;
    }
    out[0] = -part.head_weight() * psi(1.0) * phi_prime(x[0]);
    for j in 1..d {
        let c = part.link_weight(j);
        if c == 0.0 {
            continue;
        }
        let (a, b) = (x[j - 1], x[j]);
        out[j - 1] += c * (-psi_prime(-a) * phi(-b) - psi_prime(a) * phi(b));
        out[j] += c * (-psi(-a) * phi_prime(-b) - psi(a) * phi_prime(b));
    }
}

pub fn h(x: ArrayView1<f64>) -> f64 {
    chain_value(ChainPart::Full, x)
}

pub fn h1(x: ArrayView1<f64>) -> f64 {
    chain_value(ChainPart::Even, x)
}

pub fn h2(x: ArrayView1<f64>) -> f64 {
    chain_value(ChainPart::Odd, x)
}

pub fn grad_h(x: ArrayView1<f64>) -> Array1<f64> {
    let mut g = Array1::zeros(x.len());
    chain_grad(ChainPart::Full, x, g.view_mut());
    g
}

pub fn grad_h1(x: ArrayView1<f64>) -> Array1<f64> {
    let mut g = Array1::zeros(x.len());
    chain_grad(ChainPart::Even, x, g.view_mut());
    g
}

pub fn grad_h2(x: ArrayView1<f64>) -> Array1<f64> {
    let mut g = Array1::zeros(x.len());
    chain_grad(ChainPart::Odd, x, g.view_mut());
    g
}

/// Role of a node in the hard instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cluster {
    /// Holds the scaled `h1`.
    First,
    /// Holds the scaled `h2`.
    Second,
    /// Holds the zero function.
    Neutral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroChainInstance {
    pub d: usize,
    pub lambda: f64,
    /// Target smoothness of every local function.
    pub l: f64,
    /// Target initial gap.
    pub delta: f64,
    pub assignment: Vec<Cluster>,
}

impl ZeroChainInstance {
    /// First third of the nodes holds `h1`, last third `h2`, the middle
    /// third nothing.
    pub fn new(n: usize, d: usize, l: f64, delta: f64, lambda: f64) -> Result<Self> {
        if n == 0 || n % 3 != 0 {
            return Err(Error::InvalidParameter(format!(
                "node count {n} must be a positive multiple of 3"
            )));
        }
        if d < 2 {
            return Err(Error::InvalidParameter(format!("dimension {d} must be at least 2")));
        }
        if !(l > 0.0 && delta > 0.0 && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "L = {l}, Delta = {delta}, lambda = {lambda} must be positive"
            )));
        }
        let cap = lambda_cap(d, l, delta);
        if lambda > cap * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "lambda = {lambda} exceeds the gap-preserving cap {cap}"
            )));
        }
        let third = n / 3;
        let assignment = (0..n)
            .map(|i| match i {
                i if i < third => Cluster::First,
                i if i >= 2 * third => Cluster::Second,
                _ => Cluster::Neutral,
            })
            .collect();
        Ok(Self {
            d,
            lambda,
            l,
            delta,
            assignment,
        })
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    /// `L lambda / (3 L0)`: no point with `[x]_d = 0` has a smaller
    /// average-gradient norm.
    pub fn gradient_floor(&self) -> f64 {
        self.l * self.lambda / (3.0 * L0)
    }

    fn part(&self, node: usize) -> Option<ChainPart> {
        match self.assignment[node] {
            Cluster::First => Some(ChainPart::Even),
            Cluster::Second => Some(ChainPart::Odd),
            Cluster::Neutral => None,
        }
    }

    /// `f(x) = 2 L lambda^2 h(x / lambda) / (3 L0)`.
    pub fn global_value(&self, x: ArrayView1<f64>) -> f64 {
        let z = &x / self.lambda;
        2.0 * self.l * self.lambda * self.lambda * h(z.view()) / (3.0 * L0)
    }

    pub fn global_grad(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let z = &x / self.lambda;
        grad_h(z.view()) * (2.0 * self.l * self.lambda / (3.0 * L0))
    }
}

/// `sqrt(L0 Delta / (L Delta0 d))`.
pub fn lambda_cap(d: usize, l: f64, delta: f64) -> f64 {
    (L0 * delta / (l * DELTA0 * d as f64)).sqrt()
}

/// Noiseless local functions of a [`ZeroChainInstance`].
#[derive(Debug, Clone, PartialEq)]
pub struct HardInstance {
    pub instance: ZeroChainInstance,
}

impl StochasticProblem for HardInstance {
    fn nodes(&self) -> usize {
        self.instance.n()
    }

    fn dim(&self) -> usize {
        self.instance.d
    }

    fn local_value(&self, node: usize, x: ArrayView1<f64>) -> f64 {
        let inst = &self.instance;
        match inst.part(node) {
            Some(part) => {
                let z = &x / inst.lambda;
                inst.l * inst.lambda * inst.lambda * chain_value(part, z.view()) / L0
            }
            None => 0.0,
        }
    }

    fn local_grad(&self, node: usize, x: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        let inst = &self.instance;
        match inst.part(node) {
            Some(part) => {
                let z = &x / inst.lambda;
                chain_grad(part, z.view(), out.view_mut());
                out *= inst.l * inst.lambda / L0;
            }
            None => out.fill(0.0),
        }
    }

    fn noise_std(&self) -> f64 {
        0.0
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.instance.l)
    }

    fn value(&self, x: ArrayView1<f64>) -> f64 {
        self.instance.global_value(x)
    }

    fn grad(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.instance.global_grad(x)
    }

    /// `f(0) - inf f <= Delta` under the scaling cap.
    fn initial_gap(&self, x0: ArrayView1<f64>) -> Option<f64> {
        let origin = Array1::zeros(x0.len());
        Some((self.value(x0) - self.value(origin.view()) + self.instance.delta).max(0.0))
    }
}

/// Instance of dimension `d` with the largest admissible scaling.
pub fn build_hard_instance(
    n: usize,
    d: usize,
    l: f64,
    delta: f64,
) -> Result<(ZeroChainInstance, HardInstance)> {
    let inst = ZeroChainInstance::new(n, d, l, delta, lambda_cap(d.max(1), l, delta))?;
    Ok((inst.clone(), HardInstance { instance: inst }))
}

/// Instance sized for a budget of `k` communications:
/// `d = 2 floor(3k / 2n) + 2`, `lambda = sqrt(n L0 Delta / (5 L Delta0 k))`.
pub fn build_hard_instance_for_budget(
    n: usize,
    k: usize,
    l: f64,
    delta: f64,
) -> Result<(ZeroChainInstance, HardInstance)> {
    if n == 0 || k < n {
        return Err(Error::InvalidParameter(format!(
            "budget {k} must be at least the node count {n}"
        )));
    }
    let d = 2 * ((3 * k) / (2 * n)) + 2;
    let lambda = (n as f64 * L0 * delta / (5.0 * l * DELTA0 * k as f64)).sqrt();
    let inst = ZeroChainInstance::new(n, d, l, delta, lambda)?;
    Ok((inst.clone(), HardInstance { instance: inst }))
}

/// `3k/n + 1`, the progress any method can reach after `k` communications
/// on the skewed network.
pub fn progress_ceiling(k: usize, n: usize) -> f64 {
    3.0 * k as f64 / n as f64 + 1.0
}
