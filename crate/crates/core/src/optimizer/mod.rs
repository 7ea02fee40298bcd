//! Push-DIGing: gradient tracking on top of Push-Sum debiasing, plus the
//! multi-round gossip variant and the theoretical schedules.
//!
//! One iteration reads
//!
//! ```text
//! x <- W (x - gamma y)
//! v <- W v
//! w <- diag(v)^{-1} x
//! g <- stochastic gradients at w
//! y <- W (y + g - g_prev)
//! ```

mod mg;
mod schedule;

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::graph::MixingMatrix;
use crate::harness::{RunTrace, TraceMeta, TraceRow};
use crate::linalg::frobenius;
use crate::problems::{batched_oracle, StochasticProblem};
use crate::pushsum::WEIGHT_GUARD;
use crate::spectral::{column_mean, EquilibriumProfile};

pub use mg::{mg_push_diging_run, mg_push_diging_run_observed, mg_push_diging_step};
pub use schedule::{
    mg_r_schedule, mg_r_value, mg_theoretical_gamma, theoretical_gamma, transient_times,
    StepSizeParams,
};

/// Runs abort once `|x|_F` exceeds this.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// Counter-based stochastic gradient oracle: node `i` at iteration `k`
/// averages `batch` draws keyed `(seed, i, k, 0..batch)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradientOracle {
    pub seed: u64,
    pub batch: usize,
}

impl GradientOracle {
    pub fn new(seed: u64, batch: usize) -> Self {
        Self { seed, batch }
    }

    /// Stacked per-node gradients at the rows of `at`.
    pub fn sample<P: StochasticProblem + ?Sized>(
        &self,
        problem: &P,
        at: &Array2<f64>,
        iter: usize,
    ) -> Array2<f64> {
        let mut g = Array2::zeros(at.raw_dim());
        for (i, (row, out)) in at.rows().into_iter().zip(g.rows_mut()).enumerate() {
            batched_oracle(problem, i, row, self.seed, iter, self.batch, out);
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigingState {
    /// Un-debiased models, one row per node.
    pub x: Array2<f64>,
    /// Gradient trackers.
    pub y: Array2<f64>,
    /// Push-Sum weights.
    pub v: Array1<f64>,
    /// Debiased models `diag(v)^{-1} x`.
    pub w: Array2<f64>,
    /// Gradients sampled at the current `w`.
    pub g_prev: Array2<f64>,
    pub k: usize,
}

impl DigingState {
    /// `w = x0`, `v = 1`, `y = g = oracle(x0)`.
    pub fn init<P: StochasticProblem + ?Sized>(
        problem: &P,
        x0: Array2<f64>,
        oracle: &GradientOracle,
    ) -> Result<Self> {
        check_dims(problem, &x0)?;
        let g = oracle.sample(problem, &x0, 0);
        Ok(Self {
            v: Array1::ones(x0.nrows()),
            w: x0.clone(),
            y: g.clone(),
            g_prev: g,
            x: x0,
            k: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn xbar(&self) -> Array1<f64> {
        column_mean(&self.x)
    }

    /// `|w - 1 xbar^T|_F`.
    pub fn consensus_x(&self) -> f64 {
        let xbar = self.xbar();
        crate::linalg::distance_to_row(&self.w, &xbar)
    }

    /// `|y - v ybar^T|_F`.
    pub fn consensus_y(&self) -> f64 {
        let ybar = column_mean(&self.y);
        let mut acc = 0.0;
        for (row, &vi) in self.y.rows().into_iter().zip(self.v.iter()) {
            for (a, b) in row.iter().zip(ybar.iter()) {
                let e = a - vi * b;
                acc += e * e;
            }
        }
        acc.sqrt()
    }

    /// `max_j |sum_i y_ij - sum_i g_ij|`.
    pub fn tracker_drift(&self) -> f64 {
        let sy = self.y.sum_axis(Axis(0));
        let sg = self.g_prev.sum_axis(Axis(0));
        sy.iter().zip(sg.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    fn blown_up(&self) -> Option<f64> {
        let norm = frobenius(&self.x);
        if !norm.is_finite() || norm > DIVERGENCE_NORM || self.y.iter().any(|t| !t.is_finite()) {
            Some(norm)
        } else {
            None
        }
    }
}

fn check_dims<P: StochasticProblem + ?Sized>(problem: &P, x: &Array2<f64>) -> Result<()> {
    if x.nrows() != problem.nodes() {
        return Err(Error::DimensionMismatch {
            expected: problem.nodes(),
            got: x.nrows(),
        });
    }
    if x.ncols() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: x.ncols(),
        });
    }
    Ok(())
}

pub(crate) fn debias_strict(x: &Array2<f64>, v: &Array1<f64>, iter: usize) -> Result<Array2<f64>> {
    let mut w = x.clone();
    for (i, mut row) in w.rows_mut().into_iter().enumerate() {
        if !(v[i] > WEIGHT_GUARD) {
            return Err(Error::ZeroWeight { node: i, iter });
        }
        row /= v[i];
    }
    Ok(w)
}

/// One Push-DIGing iteration.
pub fn push_diging_step<P: StochasticProblem + ?Sized>(
    s: &DigingState,
    w: &MixingMatrix,
    gamma: f64,
    problem: &P,
    oracle: &GradientOracle,
) -> Result<DigingState> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma}")));
    }
    if w.n() != s.n() {
        return Err(Error::DimensionMismatch {
            expected: s.n(),
            got: w.n(),
        });
    }
    let k = s.k + 1;
    let x = w.mix(&(&s.x - &(gamma * &s.y)));
    let v = w.mix_vec(&s.v);
    let wd = debias_strict(&x, &v, k)?;
    let g = oracle.sample(problem, &wd, k);
    let y = w.mix(&(&s.y + &g - &s.g_prev));
    Ok(DigingState {
        x,
        y,
        v,
        w: wd,
        g_prev: g,
        k,
    })
}

/// Controls for a recorded optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub k_max: usize,
    pub seed: u64,
    /// Draws averaged per gradient query in the vanilla loop.
    pub batch: usize,
    /// Record every this many iterations; the last iteration is always kept.
    pub record_every: usize,
    /// Stop once the recorded gradient norm is at most this.
    pub stop_below: Option<f64>,
    /// Starting models; zeros when absent.
    pub x0: Option<Array2<f64>>,
    pub label: String,
}

impl RunOptions {
    pub fn new(k_max: usize, seed: u64) -> Self {
        Self {
            k_max,
            seed,
            batch: 1,
            record_every: 1,
            stop_below: None,
            x0: None,
            label: String::new(),
        }
    }

    pub fn with_batch(mut self, batch: usize) -> Self {
        self.batch = batch;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn with_stop_below(mut self, threshold: f64) -> Self {
        self.stop_below = Some(threshold);
        self
    }

    pub fn with_x0(mut self, x0: Array2<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn x0_for<P: StochasticProblem + ?Sized>(&self, problem: &P) -> Array2<f64> {
        self.x0
            .clone()
            .unwrap_or_else(|| Array2::zeros((problem.nodes(), problem.dim())))
    }
}

pub(crate) fn trace_row<P: StochasticProblem + ?Sized>(
    s: &DigingState,
    problem: &P,
    rounds_per_iter: usize,
) -> TraceRow {
    let xbar = s.xbar();
    let grad = problem.grad(xbar.view());
    TraceRow {
        k: s.k,
        rounds: s.k * rounds_per_iter,
        grad_norm: crate::linalg::norm2(&grad),
        fval: problem.value(xbar.view()),
        cons_x: s.consensus_x(),
        cons_y: s.consensus_y(),
    }
}

/// Shared recording loop: `step` advances the state by one (outer)
/// iteration and `observe` sees every state including the initial one.
pub(crate) fn drive<P, S, O>(
    problem: &P,
    mut state: DigingState,
    opts: &RunOptions,
    mut meta: TraceMeta,
    mut step: S,
    mut observe: O,
) -> Result<RunTrace>
where
    P: StochasticProblem + ?Sized,
    S: FnMut(&DigingState) -> Result<DigingState>,
    O: FnMut(&DigingState),
{
    meta.k_max = opts.k_max;
    meta.seed = opts.seed;
    meta.label = opts.label.clone();
    let r = meta.rounds_per_iter;
    let every = opts.record_every.max(1);
    let mut trace = RunTrace {
        meta,
        rows: Vec::new(),
        diverged_at: None,
    };
    observe(&state);
    trace.rows.push(trace_row(&state, problem, r));
    let reached = |t: &RunTrace| match (opts.stop_below, t.rows.last()) {
        (Some(th), Some(row)) => row.grad_norm <= th,
        _ => false,
    };
    if reached(&trace) {
        return Ok(trace);
    }
    for k in 1..=opts.k_max {
        state = step(&state)?;
        observe(&state);
        if state.blown_up().is_some() {
            trace.diverged_at = Some(k);
            return Ok(trace);
        }
        if k % every == 0 || k == opts.k_max {
            trace.rows.push(trace_row(&state, problem, r));
            if reached(&trace) {
                break;
            }
        }
    }
    Ok(trace)
}

fn meta_for(algorithm: &str, w: &MixingMatrix, gamma: f64, rounds: usize) -> TraceMeta {
    let profile = EquilibriumProfile::compute(w).ok();
    TraceMeta {
        algorithm: algorithm.to_string(),
        n: w.n(),
        beta_pi: profile.as_ref().map(|p| p.beta_pi),
        kappa_pi: profile.as_ref().map(|p| p.kappa_pi),
        gamma,
        rounds_per_iter: rounds,
        ..Default::default()
    }
}

/// Recorded Push-DIGing run of `opts.k_max` iterations.
pub fn run_push_diging<P: StochasticProblem + ?Sized>(
    problem: &P,
    w: &MixingMatrix,
    gamma: f64,
    opts: &RunOptions,
) -> Result<RunTrace> {
    run_push_diging_observed(problem, w, gamma, opts, |_| {})
}

/// As [`run_push_diging`], calling `observe` on every iterate.
pub fn run_push_diging_observed<P, O>(
    problem: &P,
    w: &MixingMatrix,
    gamma: f64,
    opts: &RunOptions,
    observe: O,
) -> Result<RunTrace>
where
    P: StochasticProblem + ?Sized,
    O: FnMut(&DigingState),
{
    if opts.batch == 0 {
        return Err(Error::InvalidParameter("batch must be at least 1".into()));
    }
    let oracle = GradientOracle::new(opts.seed, opts.batch);
    let state = DigingState::init(problem, opts.x0_for(problem), &oracle)?;
    let meta = meta_for("diging", w, gamma, 1);
    drive(
        problem,
        state,
        opts,
        meta,
        |s| push_diging_step(s, w, gamma, problem, &oracle),
        observe,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_complete, build_ring, build_skewed_family};
    use crate::problems::{gen_quadratic, Quadratic};
    use approx::assert_abs_diff_eq;

    fn quad(n: usize, sigma: f64) -> Quadratic {
        gen_quadratic(n, 3, 5.0, 1.0, 11).unwrap().with_noise(sigma)
    }

    #[test]
    fn init_matches_definition() {
        let p = quad(3, 0.0);
        let x0 = Array2::from_elem((3, 3), 0.5);
        let s = DigingState::init(&p, x0.clone(), &GradientOracle::new(0, 1)).unwrap();
        assert_eq!(s.w, x0);
        assert_eq!(s.y, s.g_prev);
        assert_eq!(s.v, Array1::ones(3));
    }

    #[test]
    fn zero_step_is_push_sum() {
        let p = quad(4, 0.3);
        let w = build_skewed_family(4, 0.2).unwrap();
        let x0 = Array2::from_shape_fn((4, 3), |(i, j)| (i * 3 + j) as f64);
        let oracle = GradientOracle::new(5, 1);
        let mut s = DigingState::init(&p, x0.clone(), &oracle).unwrap();
        let mut xk = x0;
        for _ in 0..6 {
            s = push_diging_step(&s, &w, 0.0, &p, &oracle).unwrap();
            xk = w.mix(&xk);
            assert_eq!(s.x, xk);
        }
    }

    #[test]
    fn single_node_is_gradient_descent() {
        let p = quad(1, 0.0);
        let w = build_skewed_family(1, 0.0).unwrap();
        let oracle = GradientOracle::new(0, 1);
        let mut s = DigingState::init(&p, Array2::zeros((1, 3)), &oracle).unwrap();
        let mut x = Array1::<f64>::zeros(3);
        for _ in 0..20 {
            s = push_diging_step(&s, &w, 0.05, &p, &oracle).unwrap();
            x = &x - &(0.05 * &p.grad(x.view()));
            for j in 0..3 {
                assert_abs_diff_eq!(s.w[[0, j]], x[j], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn tracker_and_mean_laws_hold() {
        let p = quad(5, 0.5);
        let w = build_skewed_family(5, 0.0).unwrap();
        let oracle = GradientOracle::new(9, 1);
        let gamma = 0.02;
        let mut s = DigingState::init(&p, Array2::zeros((5, 3)), &oracle).unwrap();
        for _ in 0..100 {
            let next = push_diging_step(&s, &w, gamma, &p, &oracle).unwrap();
            assert!(next.tracker_drift() <= 1e-9 * 5.0);
            assert_abs_diff_eq!(next.v.sum(), 5.0, epsilon = 1e-10);
            let expect = &s.xbar() - &(gamma * &column_mean(&s.g_prev));
            for (a, b) in next.xbar().iter().zip(expect.iter()) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
            }
            s = next;
        }
    }

    #[test]
    fn complete_graph_converges() {
        let p = quad(4, 0.0);
        let w = build_complete(4).unwrap();
        let t = run_push_diging(&p, &w, 0.05, &RunOptions::new(400, 0)).unwrap();
        assert!(t.last().unwrap().grad_norm < 1e-8);
        assert_eq!(t.rows.len(), 401);
    }

    #[test]
    fn divergence_is_flagged() {
        let p = quad(4, 0.0);
        let w = build_ring(4).unwrap();
        let t = run_push_diging(&p, &w, 10.0, &RunOptions::new(500, 0)).unwrap();
        assert!(t.diverged());
        assert!(t.rows.iter().all(|r| r.grad_norm.is_finite()));
    }

    #[test]
    fn stop_and_stride() {
        let p = quad(4, 0.0);
        let w = build_complete(4).unwrap();
        let opts = RunOptions::new(400, 0).with_record_every(10).with_stop_below(1e-3);
        let t = run_push_diging(&p, &w, 0.05, &opts).unwrap();
        let last = t.last().unwrap();
        assert!(last.grad_norm <= 1e-3 && last.k % 10 == 0 && last.k < 400);
        assert!(t.rows.windows(2).all(|p| p[0].k < p[1].k));
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = quad(4, 0.0);
        let w = build_complete(3).unwrap();
        assert!(run_push_diging(&p, &w, 0.1, &RunOptions::new(5, 0)).is_err());
        let w = build_complete(4).unwrap();
        assert!(run_push_diging(&p, &w, -0.1, &RunOptions::new(5, 0)).is_err());
        assert!(run_push_diging(&p, &w, 0.1, &RunOptions::new(5, 0).with_batch(0)).is_err());
    }

    #[test]
    fn same_seed_same_trace() {
        let p = quad(4, 0.2);
        let w = build_skewed_family(4, 0.0).unwrap();
        let a = run_push_diging(&p, &w, 0.05, &RunOptions::new(50, 3)).unwrap();
        let b = run_push_diging(&p, &w, 0.05, &RunOptions::new(50, 3)).unwrap();
        let c = run_push_diging(&p, &w, 0.05, &RunOptions::new(50, 4)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_ne!(a.to_csv(), c.to_csv());
    }
}
