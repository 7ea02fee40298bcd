//! Experiment plumbing: configs, seeded sweeps over a worker pool, CSV
//! traces and the figure presets.

mod config;
pub mod presets;
mod trace;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::MixingMatrix;
use crate::optimizer::{
    mg_push_diging_run, mg_r_schedule, mg_theoretical_gamma, run_push_diging, theoretical_gamma,
    transient_times, RunOptions, StepSizeParams,
};
use crate::problems::StochasticProblem;
use crate::pushsum::{run_push_sum_with_pi, PushSumRecord};
use crate::rng::NoiseKey;
use crate::spectral::EquilibriumProfile;

pub use config::{
    parse_seeds, Algorithm, Auto, ExperimentConfig, GammaSpec, MatrixSpec, ProblemSpec, RoundsSpec,
};
pub use presets::{
    eps_for_kappa, laziness_for_inverse_gap, matrix_for_targets, metrics_table, preset,
    skewed_metrics_table, Preset, PRESET_NAMES,
};
pub use trace::{RunTrace, TraceMeta, TraceRow, TRACE_HEADER};

/// CSV header of a Push-Sum trajectory.
pub const PUSHSUM_HEADER: &str = "k,consensus_error,min_ratio,max_ratio,vinv_norm";

#[derive(Debug, Clone, PartialEq)]
pub struct PushSumTrace {
    pub meta: TraceMeta,
    pub records: Vec<PushSumRecord>,
}

impl PushSumTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(80 * (self.records.len() + 1));
        out.push_str(PUSHSUM_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?},{:?}",
                r.k, r.consensus_error, r.min_ratio, r.max_ratio, r.vinv_norm
            );
        }
        out
    }
}

/// Output of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutput {
    Optimizer(RunTrace),
    PushSum(PushSumTrace),
}

impl RunOutput {
    pub fn meta(&self) -> &TraceMeta {
        match self {
            RunOutput::Optimizer(t) => &t.meta,
            RunOutput::PushSum(t) => &t.meta,
        }
    }

    pub fn to_csv(&self) -> String {
        match self {
            RunOutput::Optimizer(t) => t.to_csv(),
            RunOutput::PushSum(t) => t.to_csv(),
        }
    }

    pub fn meta_text(&self) -> String {
        match self {
            RunOutput::Optimizer(t) => t.meta_text(),
            RunOutput::PushSum(t) => t.meta.to_text(),
        }
    }

    pub fn diverged(&self) -> bool {
        matches!(self, RunOutput::Optimizer(t) if t.diverged())
    }

    pub fn trace(&self) -> Option<&RunTrace> {
        match self {
            RunOutput::Optimizer(t) => Some(t),
            RunOutput::PushSum(_) => None,
        }
    }

    pub fn pushsum(&self) -> Option<&PushSumTrace> {
        match self {
            RunOutput::PushSum(t) => Some(t),
            RunOutput::Optimizer(_) => None,
        }
    }
}

/// A config with its matrix, metrics, problem and schedules resolved.
pub struct PreparedExperiment {
    pub config: ExperimentConfig,
    pub matrix: MixingMatrix,
    pub profile: EquilibriumProfile,
    pub problem: Box<dyn StochasticProblem>,
    pub gamma: f64,
    pub rounds: usize,
}

/// Step-size constants for `problem` started from `x0`. The initial tracker
/// norm is taken in expectation, `sum_i |grad f_i(x0)|^2 + n d sigma^2`.
pub fn step_size_params<P: StochasticProblem + ?Sized>(
    problem: &P,
    profile: &EquilibriumProfile,
    k: usize,
    x0: &Array2<f64>,
) -> Result<StepSizeParams> {
    let l = problem
        .smoothness()
        .ok_or_else(|| Error::Config("gamma = auto needs a known smoothness constant".into()))?;
    let xbar = crate::spectral::column_mean(x0);
    let delta = problem
        .initial_gap(xbar.view())
        .ok_or_else(|| Error::Config("gamma = auto needs a bound on the initial gap".into()))?;
    let n = problem.nodes();
    let d = problem.dim() as f64;
    let s2 = problem.noise_std().powi(2);
    let mut y0 = n as f64 * d * s2;
    let mut buf = ndarray::Array1::zeros(problem.dim());
    for (i, row) in x0.rows().into_iter().enumerate() {
        problem.local_grad(i, row, buf.view_mut());
        y0 += buf.iter().map(|g| g * g).sum::<f64>();
    }
    Ok(StepSizeParams {
        l,
        // A zero gap means x0 is already optimal; keep the formula finite.
        delta: delta.max(f64::MIN_POSITIVE),
        sigma2: d * s2,
        n,
        k,
        beta_pi: profile.beta_pi,
        kappa_pi: profile.kappa_pi,
        y0_norm2: y0,
    })
}

impl PreparedExperiment {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let matrix = config.build_matrix()?;
        let profile = EquilibriumProfile::compute(&matrix)?;
        let problem = config.problem.preset(matrix.n()).build()?;
        let rounds = match (config.algorithm, config.rounds) {
            (Algorithm::MgDiging, Auto::Auto) => {
                mg_r_schedule(profile.kappa_pi, matrix.n(), profile.beta_pi)?
            }
            (Algorithm::MgDiging, Auto::Fixed(r)) => r,
            _ => 1,
        };
        let gamma = match config.gamma {
            Auto::Fixed(g) => g,
            Auto::Auto if config.algorithm == Algorithm::PushSum => 0.0,
            Auto::Auto => {
                let x0 = config.initial_point(problem.nodes(), problem.dim());
                let p = step_size_params(problem.as_ref(), &profile, config.k, &x0)?;
                match config.algorithm {
                    Algorithm::MgDiging => mg_theoretical_gamma(&p, rounds)?,
                    _ => theoretical_gamma(&p)?,
                }
            }
        };
        Ok(Self {
            config: config.clone(),
            matrix,
            profile,
            problem,
            gamma,
            rounds,
        })
    }

    fn meta(&self, seed: u64) -> TraceMeta {
        TraceMeta {
            algorithm: self.config.algorithm.to_string(),
            label: self.config.label.clone(),
            n: self.matrix.n(),
            beta_pi: Some(self.profile.beta_pi),
            kappa_pi: Some(self.profile.kappa_pi),
            gamma: self.gamma,
            rounds_per_iter: self.rounds,
            seed,
            k_max: self.config.k,
        }
    }

    /// One seeded run. Divergence is reported in the trace, not as an error.
    pub fn run(&self, seed: u64) -> Result<RunOutput> {
        let cfg = &self.config;
        if cfg.algorithm == Algorithm::PushSum {
            let n = self.matrix.n();
            let mut z0 = Array2::zeros((n, cfg.dim));
            for (i, mut row) in z0.rows_mut().into_iter().enumerate() {
                let mut buf = vec![0.0; cfg.dim];
                NoiseKey::new(seed, i, 0, 0).fill_normal(&mut buf);
                row.assign(&ndarray::Array1::from(buf));
            }
            let records = run_push_sum_with_pi(&self.matrix, &self.profile.pi, &z0, None, cfg.k)?;
            return Ok(RunOutput::PushSum(PushSumTrace {
                meta: self.meta(seed),
                records,
            }));
        }
        let mut opts = RunOptions::new(cfg.k, seed)
            .with_batch(cfg.batch)
            .with_record_every(cfg.record_every)
            .with_label(cfg.label.clone())
            .with_x0(cfg.initial_point(self.problem.nodes(), self.problem.dim()));
        opts.stop_below = cfg.stop_below;
        let mut trace = match cfg.algorithm {
            Algorithm::MgDiging => {
                mg_push_diging_run(self.problem.as_ref(), &self.matrix, self.rounds, self.gamma, &opts)?
            }
            _ => run_push_diging(self.problem.as_ref(), &self.matrix, self.gamma, &opts)?,
        };
        trace.meta = self.meta(seed);
        Ok(RunOutput::Optimizer(trace))
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// One output per seed, in seed order. `threads = 0` uses every core.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<RunOutput>> {
    Ok(run_many(std::slice::from_ref(cfg), threads)?.remove(0))
}

/// Runs every `(config, seed)` pair on a shared pool and returns the
/// outputs grouped by config, each group in seed order.
pub fn run_many(cfgs: &[ExperimentConfig], threads: usize) -> Result<Vec<Vec<RunOutput>>> {
    let pool = pool(threads)?;
    pool.install(|| {
        let prepared = cfgs
            .par_iter()
            .map(PreparedExperiment::new)
            .collect::<Result<Vec<_>>>()?;
        let jobs: Vec<(usize, u64)> = prepared
            .iter()
            .enumerate()
            .flat_map(|(c, p)| p.config.seeds.iter().map(move |&s| (c, s)))
            .collect();
        let outputs = jobs
            .par_iter()
            .map(|&(c, s)| prepared[c].run(s))
            .collect::<Result<Vec<_>>>()?;
        let mut grouped: Vec<Vec<RunOutput>> = cfgs.iter().map(|_| Vec::new()).collect();
        for ((c, _), out) in jobs.into_iter().zip(outputs) {
            grouped[c].push(out);
        }
        Ok(grouped)
    })
}

/// Writes `<label>-seed<seed>.csv` and a matching `.meta` file per output.
pub fn write_outputs(dir: &Path, outputs: &[RunOutput]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for out in outputs {
        let m = out.meta();
        let stem = format!("{}-seed{}", m.label, m.seed);
        let csv = dir.join(format!("{stem}.csv"));
        std::fs::write(&csv, out.to_csv())?;
        std::fs::write(dir.join(format!("{stem}.meta")), out.meta_text())?;
        written.push(csv);
    }
    Ok(written)
}

/// Mean over seeds of the first iteration and first round count at which
/// the gradient norm reaches `threshold`; `None` if any seed never does.
pub fn mean_hitting_time(traces: &[&RunTrace], threshold: f64) -> Option<(f64, f64)> {
    let mut k = 0.0;
    let mut rounds = 0.0;
    for t in traces {
        let row = t.first_below(threshold)?;
        k += row.k as f64;
        rounds += row.rounds as f64;
    }
    let m = traces.len() as f64;
    Some((k / m, rounds / m))
}

/// Transient times of Push-DIGing, MG-Push-DIGing and the lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientReport {
    pub push_diging: f64,
    pub mg_push_diging: f64,
    pub lower_bound: f64,
}

pub fn transient_report(beta_pi: f64, kappa_pi: f64, n: usize) -> Result<TransientReport> {
    let (pd, mg, lb) = transient_times(beta_pi, kappa_pi, n)?;
    Ok(TransientReport {
        push_diging: pd,
        mg_push_diging: mg,
        lower_bound: lb,
    })
}
