//! Push-DIGing with multi-round gossip, written node by node: every outer
//! iteration runs `R` neighbour exchanges on the model block, the weights
//! and the tracker block, and each node averages `R` fresh gradients.

use ndarray::{Array1, Array2};

use super::{debias_strict, drive, meta_for, DigingState, GradientOracle, RunOptions};
use crate::error::{Error, Result};
use crate::graph::MixingMatrix;
use crate::harness::RunTrace;
use crate::problems::StochasticProblem;

/// In-neighbour lists `(j, w_ij)` for every receiving node `i`.
fn in_neighbours(w: &MixingMatrix) -> Vec<Vec<(usize, f64)>> {
    w.weights()
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(j, &x)| (j, x))
                .collect()
        })
        .collect()
}

fn gossip_rows(nbrs: &[Vec<(usize, f64)>], src: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(src.raw_dim());
    for (i, list) in nbrs.iter().enumerate() {
        let mut row = out.row_mut(i);
        for &(j, wij) in list {
            row.scaled_add(wij, &src.row(j));
        }
    }
    out
}

fn gossip_scalars(nbrs: &[Vec<(usize, f64)>], src: &Array1<f64>) -> Array1<f64> {
    Array1::from_iter(nbrs.iter().map(|list| list.iter().map(|&(j, wij)| wij * src[j]).sum()))
}

/// One outer iteration with `rounds` gossip rounds per block.
pub fn mg_push_diging_step<P: StochasticProblem + ?Sized>(
    s: &DigingState,
    w: &MixingMatrix,
    rounds: usize,
    gamma: f64,
    problem: &P,
    seed: u64,
) -> Result<DigingState> {
    mg_step_with(&in_neighbours(w), s, rounds, gamma, problem, seed)
}

fn mg_step_with<P: StochasticProblem + ?Sized>(
    nbrs: &[Vec<(usize, f64)>],
    s: &DigingState,
    rounds: usize,
    gamma: f64,
    problem: &P,
    seed: u64,
) -> Result<DigingState> {
    if rounds == 0 {
        return Err(Error::InvalidParameter("R must be at least 1".into()));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma}")));
    }
    if nbrs.len() != s.n() {
        return Err(Error::DimensionMismatch {
            expected: s.n(),
            got: nbrs.len(),
        });
    }
    let k = s.k + 1;
    let mut phi = &s.x - &(gamma * &s.y);
    let mut v = s.v.clone();
    for _ in 0..rounds {
        phi = gossip_rows(nbrs, &phi);
        v = gossip_scalars(nbrs, &v);
    }
    let wd = debias_strict(&phi, &v, k)?;
    let g = GradientOracle::new(seed, rounds).sample(problem, &wd, k);
    let mut psi = &s.y + &g - &s.g_prev;
    for _ in 0..rounds {
        psi = gossip_rows(nbrs, &psi);
    }
    Ok(DigingState {
        x: phi,
        y: psi,
        v,
        w: wd,
        g_prev: g,
        k,
    })
}

/// Recorded multi-round run of `opts.k_max` outer iterations. The initial
/// trackers average `rounds` draws, like every later query. `opts.batch`
/// is ignored.
pub fn mg_push_diging_run<P: StochasticProblem + ?Sized>(
    problem: &P,
    w: &MixingMatrix,
    rounds: usize,
    gamma: f64,
    opts: &RunOptions,
) -> Result<RunTrace> {
    mg_push_diging_run_observed(problem, w, rounds, gamma, opts, |_| {})
}

/// As [`mg_push_diging_run`], calling `observe` on every outer iterate.
pub fn mg_push_diging_run_observed<P, O>(
    problem: &P,
    w: &MixingMatrix,
    rounds: usize,
    gamma: f64,
    opts: &RunOptions,
    observe: O,
) -> Result<RunTrace>
where
    P: StochasticProblem + ?Sized,
    O: FnMut(&DigingState),
{
    if rounds == 0 {
        return Err(Error::InvalidParameter("R must be at least 1".into()));
    }
    let nbrs = in_neighbours(w);
    let oracle = GradientOracle::new(opts.seed, rounds);
    let state = DigingState::init(problem, opts.x0_for(problem), &oracle)?;
    let meta = meta_for("mgdiging", w, gamma, rounds);
    drive(
        problem,
        state,
        opts,
        meta,
        |s| mg_step_with(&nbrs, s, rounds, gamma, problem, opts.seed),
        observe,
    )
}
