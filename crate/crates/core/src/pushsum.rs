//! Push-Sum averaging over a column-stochastic mixing matrix.
//!
//! Each node keeps a value row `z_i` and a scalar weight `v_i`; both are
//! pushed through `W` every round and the debiased estimate is `z_i / v_i`.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::graph::MixingMatrix;
use crate::linalg::distance_to_row;
use crate::spectral::{column_mean, equilibrium_vector, DEFAULT_PI_MAX_ITERS, DEFAULT_PI_TOL};

/// Weights at or below this are treated as zero when debiasing.
pub const WEIGHT_GUARD: f64 = 1e-300;
const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PushSumState {
    pub z: Array2<f64>,
    pub v: Array1<f64>,
    /// `diag(v)^{-1} z`; rows of nodes whose weight is still zero hold 0
    /// and are flagged in `ready`.
    pub w: Array2<f64>,
    pub ready: Vec<bool>,
    pub k: usize,
}

impl PushSumState {
    /// Initial state. `v0` defaults to all ones and must sum to `n`.
    pub fn new(z0: Array2<f64>, v0: Option<Array1<f64>>) -> Result<Self> {
        let n = z0.nrows();
        let v = v0.unwrap_or_else(|| Array1::ones(n));
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
        if let Some((index, &value)) = v.iter().enumerate().find(|(_, &x)| !(x >= 0.0)) {
            return Err(Error::NonPositiveEntry { index, value });
        }
        let total = v.sum();
        if (total - n as f64).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeightSum {
                expected: n as f64,
                got: total,
            });
        }
        let (w, ready) = debias(&z0, &v);
        Ok(Self {
            z: z0,
            v,
            w,
            ready,
            k: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn all_ready(&self) -> bool {
        self.ready.iter().all(|&r| r)
    }

    /// One Push-Sum round. Fails with `ZeroWeight` if some node still has
    /// no weight after the round; use [`PushSumState::advance`] to keep
    /// going without debiasing in that case.
    pub fn step(&self, w: &MixingMatrix) -> Result<Self> {
        let next = self.advance(w)?;
        if let Some(node) = next.ready.iter().position(|&r| !r) {
            return Err(Error::ZeroWeight { node, iter: next.k });
        }
        Ok(next)
    }

    /// One round of `z <- W z`, `v <- W v`; rows with zero weight are left
    /// un-debiased.
    pub fn advance(&self, w: &MixingMatrix) -> Result<Self> {
        if w.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: w.n(),
            });
        }
        let z = w.mix(&self.z);
        let v = w.mix_vec(&self.v);
        let (wd, ready) = debias(&z, &v);
        Ok(Self {
            z,
            v,
            w: wd,
            ready,
            k: self.k + 1,
        })
    }
}

fn debias(z: &Array2<f64>, v: &Array1<f64>) -> (Array2<f64>, Vec<bool>) {
    let mut w = z.clone();
    let mut ready = vec![true; v.len()];
    for (i, mut row) in w.rows_mut().into_iter().enumerate() {
        if v[i] > WEIGHT_GUARD {
            row /= v[i];
        } else {
            row.fill(0.0);
            ready[i] = false;
        }
    }
    (w, ready)
}

/// One trajectory sample of a Push-Sum run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushSumRecord {
    pub k: usize,
    /// `|w^(k) - 1 zbar^(0)^T|_F`.
    pub consensus_error: f64,
    /// `min_i v_i / pi_i`.
    pub min_ratio: f64,
    /// `max_i v_i / pi_i`.
    pub max_ratio: f64,
    /// `|V^(k)^{-1}|_2 = 1 / min_i v_i`.
    pub vinv_norm: f64,
    /// `|1^T z^(k) - 1^T z^(0)|_inf`, the worst per-column mass drift.
    pub mass_drift: f64,
    /// `|1^T v^(k) - n|`.
    pub weight_drift: f64,
}

/// Runs `k_max` Push-Sum rounds and records one [`PushSumRecord`] per
/// iteration, `k = 0..=k_max`. The equilibrium vector is computed from `w`.
pub fn run_push_sum(
    w: &MixingMatrix,
    z0: &Array2<f64>,
    v0: Option<Array1<f64>>,
    k_max: usize,
) -> Result<Vec<PushSumRecord>> {
    let pi = equilibrium_vector(w, DEFAULT_PI_TOL, DEFAULT_PI_MAX_ITERS)?;
    run_push_sum_with_pi(w, &pi, z0, v0, k_max)
}

/// As [`run_push_sum`] with a precomputed equilibrium vector.
pub fn run_push_sum_with_pi(
    w: &MixingMatrix,
    pi: &Array1<f64>,
    z0: &Array2<f64>,
    v0: Option<Array1<f64>>,
    k_max: usize,
) -> Result<Vec<PushSumRecord>> {
    if pi.len() != w.n() || z0.nrows() != w.n() {
        return Err(Error::DimensionMismatch {
            expected: w.n(),
            got: z0.nrows(),
        });
    }
    let target = column_mean(z0);
    let mass0 = z0.sum_axis(ndarray::Axis(0));
    let n = w.n() as f64;
    let mut state = PushSumState::new(z0.clone(), v0)?;
    let mut out = Vec::with_capacity(k_max + 1);
    let record = |s: &PushSumState| {
        let ratios = s.v.iter().zip(pi.iter()).map(|(v, p)| v / p);
        let (lo, hi) = ratios.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r), hi.max(r))
        });
        let vmin = s.v.iter().copied().fold(f64::INFINITY, f64::min);
        let mass = s.z.sum_axis(ndarray::Axis(0));
        let mass_drift = mass
            .iter()
            .zip(mass0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        PushSumRecord {
            k: s.k,
            consensus_error: distance_to_row(&s.w, &target),
            min_ratio: lo,
            max_ratio: hi,
            vinv_norm: 1.0 / vmin,
            mass_drift,
            weight_drift: (s.v.sum() - n).abs(),
        }
    };
    out.push(record(&state));
    for _ in 0..k_max {
        state = state.step(w)?;
        out.push(record(&state));
    }
    Ok(out)
}
