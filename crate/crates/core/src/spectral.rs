//! Equilibrium vector, pi-weighted norms and the two network metrics:
//! the generalized spectral gap `1 - beta_pi` and the equilibrium skewness
//! `kappa_pi`.
//!
//! The pi-norms are `|v|_pi^2 = sum_i v_i^2 / pi_i` and
//! `|A|_pi = |diag(pi)^{-1/2} A diag(pi)^{1/2}|_2`.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::MixingMatrix;

pub const DEFAULT_PI_TOL: f64 = 1e-12;
pub const DEFAULT_PI_MAX_ITERS: usize = 1_000_000;
/// Relative tolerance on successive singular-value estimates.
pub const DEFAULT_SIGMA_TOL: f64 = 1e-13;
const SIGMA_MAX_ITERS: usize = 200_000;
const SIGMA_SEED: u64 = 0x5eed_0f_5161;

/// Perron vector plus the derived network metrics of one mixing matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumProfile {
    pub pi: Array1<f64>,
    pub beta_pi: f64,
    pub kappa_pi: f64,
    pub ln_kappa_pi: f64,
    pub two_norm_dev: f64,
}

impl EquilibriumProfile {
    pub fn compute(w: &MixingMatrix) -> Result<Self> {
        let pi = equilibrium_vector(w, DEFAULT_PI_TOL, DEFAULT_PI_MAX_ITERS)?;
        let beta_pi = spectral_gap_beta(w, &pi)?;
        let kappa_pi = skewness_kappa(&pi)?;
        let ln_kappa_pi = ln_skewness_kappa(&pi)?;
        let two_norm_dev = two_norm_deviation(w, &pi)?;
        Ok(Self {
            pi,
            beta_pi,
            kappa_pi,
            ln_kappa_pi,
            two_norm_dev,
        })
    }

    pub fn n(&self) -> usize {
        self.pi.len()
    }

    /// `1 / (1 - beta_pi)`.
    pub fn inverse_gap(&self) -> f64 {
        1.0 / (1.0 - self.beta_pi)
    }
}

/// Power iteration `z <- W z` from the uniform vector with sum
/// renormalization. Stops once `|W z - z|_2 <= tol` and the entries have
/// settled to machine precision relative to their own size, so tiny
/// Perron entries (skewed families) are also accurate.
pub fn equilibrium_vector(w: &MixingMatrix, tol: f64, max_iters: usize) -> Result<Array1<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol={tol} must be positive")));
    }
    if !w.digraph().is_strongly_connected() {
        return Err(Error::NotStronglyConnected);
    }
    let n = w.n();
    let mut z = Array1::from_elem(n, 1.0 / n as f64);
    let mut residual = f64::INFINITY;
    let mut settled_after = None;
    for it in 0..max_iters {
        let mut next = w.mix_vec(&z);
        let s = next.sum();
        next /= s;
        residual = (&next - &z).mapv(|d| d * d).sum().sqrt();
        let rel_change = next
            .iter()
            .zip(z.iter())
            .map(|(a, b)| if *a == *b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) })
            .fold(0.0, f64::max);
        z = next;
        if residual <= tol {
            // Keep polishing until relative entries stop moving, bounded by
            // a multiple of the iterations it took to pass `tol`.
            let start = *settled_after.get_or_insert(it);
            if rel_change <= 4.0 * f64::EPSILON || it >= start + 10 * (start + 10) {
                break;
            }
        }
    }
    if residual > tol {
        return Err(Error::NoConvergence {
            what: "equilibrium vector",
            iters: max_iters,
            residual,
        });
    }
    if let Some((i, &v)) = z.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositiveEntry { index: i, value: v });
    }
    Ok(z)
}

/// `sqrt(sum_i v_i^2 / pi_i)`.
pub fn pi_vector_norm(v: &Array1<f64>, pi: &Array1<f64>) -> Result<f64> {
    if v.len() != pi.len() {
        return Err(Error::DimensionMismatch {
            expected: pi.len(),
            got: v.len(),
        });
    }
    check_positive(pi)?;
    Ok(v.iter().zip(pi.iter()).map(|(x, p)| x * x / p).sum::<f64>().sqrt())
}

/// `W - pi 1^T`.
pub fn deviation_matrix(w: &MixingMatrix, pi: &Array1<f64>) -> Result<Array2<f64>> {
    if pi.len() != w.n() {
        return Err(Error::DimensionMismatch {
            expected: w.n(),
            got: pi.len(),
        });
    }
    let n = w.n();
    let mut m = w.weights().clone();
    for i in 0..n {
        for j in 0..n {
            m[[i, j]] -= pi[i];
        }
    }
    Ok(m)
}

/// `D^{-1/2} A D^{1/2}` with `D = diag(pi)`.
pub fn pi_similarity(a: &Array2<f64>, pi: &Array1<f64>) -> Result<Array2<f64>> {
    check_positive(pi)?;
    let sq = pi.mapv(f64::sqrt);
    let mut m = a.clone();
    for ((i, j), x) in m.indexed_iter_mut() {
        *x *= sq[j] / sq[i];
    }
    Ok(m)
}

/// Induced matrix pi-norm.
pub fn pi_matrix_norm(a: &Array2<f64>, pi: &Array1<f64>) -> Result<f64> {
    sigma_max(&pi_similarity(a, pi)?, DEFAULT_SIGMA_TOL)
}

/// `beta_pi = |W - pi 1^T|_pi`.
pub fn spectral_gap_beta(w: &MixingMatrix, pi: &Array1<f64>) -> Result<f64> {
    pi_matrix_norm(&deviation_matrix(w, pi)?, pi)
}

/// `|W - pi 1^T|_2`, the plain-norm counterpart that can exceed one.
pub fn two_norm_deviation(w: &MixingMatrix, pi: &Array1<f64>) -> Result<f64> {
    sigma_max(&deviation_matrix(w, pi)?, DEFAULT_SIGMA_TOL)
}

/// `max_i pi_i / min_i pi_i`. Saturates to `inf` once the ratio leaves
/// the double range; [`ln_skewness_kappa`] stays finite.
pub fn skewness_kappa(pi: &Array1<f64>) -> Result<f64> {
    let (lo, hi) = extremes(pi)?;
    Ok(hi / lo)
}

pub fn ln_skewness_kappa(pi: &Array1<f64>) -> Result<f64> {
    let (lo, hi) = extremes(pi)?;
    Ok(hi.ln() - lo.ln())
}

fn extremes(pi: &Array1<f64>) -> Result<(f64, f64)> {
    if pi.is_empty() {
        return Err(Error::InvalidParameter("empty vector".into()));
    }
    check_positive(pi)?;
    let lo = pi.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = pi.iter().copied().fold(0.0, f64::max);
    Ok((lo, hi))
}

fn check_positive(pi: &Array1<f64>) -> Result<()> {
    match pi.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        Some((index, &value)) => Err(Error::NonPositiveEntry { index, value }),
        None => Ok(()),
    }
}

/// Largest singular value by power iteration on `A^T A`.
///
/// Starts from a seeded random unit vector; if the iterate collapses
/// (start orthogonal to the dominant subspace) it restarts from the next
/// draw of the same stream.
pub fn sigma_max(a: &Array2<f64>, rel_tol: f64) -> Result<f64> {
    let n = a.ncols();
    if n == 0 {
        return Ok(0.0);
    }
    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if frob == 0.0 {
        return Ok(0.0);
    }
    let ata = a.t().dot(a);
    let mut rng = ChaCha8Rng::seed_from_u64(SIGMA_SEED);
    let mut last_residual = f64::INFINITY;
    for _restart in 0..4 {
        let mut x = Array1::from_iter((0..n).map(|_| rng.random_range(-1.0..1.0)));
        let nx = norm2(&x);
        x /= nx;
        let mut lambda = 0.0;
        let mut collapsed = false;
        for it in 0..SIGMA_MAX_ITERS {
            let y = ata.dot(&x);
            let ny = norm2(&y);
            if ny <= f64::MIN_POSITIVE * frob {
                collapsed = true;
                break;
            }
            // Rayleigh quotient of the unit iterate.
            let next = x.dot(&y);
            x = y / ny;
            let change = (next - lambda).abs();
            lambda = next;
            last_residual = change / lambda.abs().max(f64::MIN_POSITIVE);
            if it >= 8 && (last_residual <= rel_tol || change == 0.0) {
                return Ok(rayleigh_sigma(&ata, &x));
            }
        }
        if !collapsed {
            break;
        }
    }
    Err(Error::NoConvergence {
        what: "singular value iteration",
        iters: SIGMA_MAX_ITERS,
        residual: last_residual,
    })
}

fn rayleigh_sigma(ata: &Array2<f64>, x: &Array1<f64>) -> f64 {
    let y = ata.dot(x);
    (x.dot(&y) / x.dot(x)).max(0.0).sqrt()
}

fn norm2(v: &Array1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Column means of a node-stacked block (`1^T z / n`).
pub fn column_mean(block: &Array2<f64>) -> Array1<f64> {
    block
        .mean_axis(Axis(0))
        .expect("blocks always have at least one row")
}
