//! `skewnet`: network metrics, Push-Sum, Push-DIGing, MG-Push-DIGing,
//! lower-bound runs and figure sweeps from the command line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use skewnet_core::harness::{
    mean_hitting_time, parse_seeds, preset, run_many, transient_report, write_outputs, Algorithm,
    ExperimentConfig, GammaSpec, MatrixSpec, ProblemSpec, RoundsSpec, RunOutput,
};
use skewnet_core::lowerbound::{build_hard_instance_for_budget, prog, progress_ceiling};
use skewnet_core::optimizer::{mg_push_diging_run_observed, run_push_diging_observed, RunOptions};
use skewnet_core::problems::{gen_logreg, LogRegParams};
use skewnet_core::{EquilibriumProfile, Error};

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "skewnet",
    version,
    about = "Decentralized optimization over skewed directed networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral gap, skewness and transient times of a mixing matrix.
    Metrics(MatrixArgs),
    /// Push-Sum averaging of a seeded random payload.
    Pushsum(PushSumArgs),
    /// Push-DIGing on a problem preset.
    Diging(OptArgs),
    /// MG-Push-DIGing (R gossip rounds per iteration) on a problem preset.
    Mgdiging(MgArgs),
    /// Push-DIGing on the zero-chain hard instance with progress tracking.
    Lowerbound(LowerBoundArgs),
    /// Runs a named figure preset.
    Sweep(SweepArgs),
    /// Runs an experiment config file.
    Run(RunArgs),
    /// Writes the logistic-regression data set as CSV.
    Dump(DumpArgs),
}

#[derive(Args)]
struct MatrixArgs {
    /// `skewed:n[:eps]`, `lazy-skewed:n:eps:laziness`, `ring:n`, `grid:RxC`,
    /// `complete:n`, `exponential:n`, or a path (`.csv` dense matrix,
    /// otherwise an edge list).
    #[arg(long, short = 'm')]
    matrix: String,
    /// Random jitter strength applied to the weights.
    #[arg(long)]
    perturb: Option<f64>,
    #[arg(long, default_value_t = 0)]
    perturb_seed: u64,
}

#[derive(Args)]
struct RunControl {
    /// Iterations.
    #[arg(long, short = 'k', default_value_t = 1000)]
    k: usize,
    /// Comma-separated seeds.
    #[arg(long, default_value = "0")]
    seeds: String,
    /// Output directory; CSV goes to stdout when omitted (single seed only).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value = "run")]
    label: String,
}

#[derive(Args)]
struct PushSumArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    #[command(flatten)]
    run: RunControl,
    /// Payload columns.
    #[arg(long, short = 'd', default_value_t = 1)]
    dim: usize,
}

#[derive(Args)]
struct OptArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    #[command(flatten)]
    run: RunControl,
    /// `logreg-sec5`, `quadratic` or `hard`.
    #[arg(long, short = 'p', default_value = "logreg-sec5")]
    problem: String,
    /// Problem dimension (logreg and quadratic).
    #[arg(long, short = 'd')]
    dim: Option<usize>,
    /// Gradient noise level (logreg and quadratic).
    #[arg(long)]
    sigma: Option<f64>,
    /// Data seed of the problem instance.
    #[arg(long)]
    data_seed: Option<u64>,
    /// Step size or `auto`.
    #[arg(long, short = 'g', default_value = "0.01")]
    gamma: String,
    /// Oracle mini-batch per iteration.
    #[arg(long, default_value_t = 1)]
    batch: usize,
    /// Stop once the gradient norm at the average is at most this.
    #[arg(long)]
    stop_below: Option<f64>,
    #[arg(long, default_value_t = 1)]
    record_every: usize,
    /// Start rows at `scale * N(0, I)`.
    #[arg(long)]
    init_scale: Option<f64>,
    #[arg(long, default_value_t = 0)]
    init_seed: u64,
}

#[derive(Args)]
struct MgArgs {
    #[command(flatten)]
    opt: OptArgs,
    /// Gossip rounds per iteration or `auto`.
    #[arg(long, short = 'r', default_value = "auto")]
    r: String,
}

#[derive(Args)]
struct LowerBoundArgs {
    /// Node count, a multiple of 3.
    #[arg(long, short = 'n', default_value_t = 9)]
    n: usize,
    /// Communication budget.
    #[arg(long, short = 'k', default_value_t = 300)]
    k: usize,
    /// Smoothness.
    #[arg(long = "L", default_value_t = 1.0)]
    l: f64,
    /// Initial gap.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Skewed-family parameter of the network.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    eps: f64,
    /// `diging` or `mgdiging`.
    #[arg(long, default_value = "diging")]
    algorithm: String,
    #[arg(long, short = 'g', default_value_t = 1.0)]
    gamma: f64,
    /// Gossip rounds per iteration for `mgdiging`.
    #[arg(long, short = 'r', default_value_t = 1)]
    r: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// fig2, fig3, fig4-left, fig4-right, fig5-left, fig5-right or fig6.
    #[arg(long)]
    preset: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "0,1,2")]
    seeds: String,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct RunArgs {
    /// Config file.
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct DumpArgs {
    /// Node count.
    #[arg(long, short = 'n')]
    n: usize,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    #[arg(long, default_value = "data")]
    out: PathBuf,
}

/// Failure carrying its process exit code.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        let code = match err.downcast_ref::<Error>() {
            Some(
                Error::Config(_)
                | Error::Parse { .. }
                | Error::InvalidParameter(_)
                | Error::NotStronglyConnected
                | Error::NotColumnStochastic(_)
                | Error::DimensionMismatch { .. },
            ) => EXIT_CONFIG,
            _ => 1,
        };
        Failure { code, err }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        anyhow::Error::new(err).into()
    }
}

fn config_error(msg: impl Into<String>) -> Failure {
    Error::Config(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Metrics(a) => metrics(&a),
        Command::Pushsum(a) => pushsum(a),
        Command::Diging(a) => optimize(Algorithm::Diging, a, "1"),
        Command::Mgdiging(a) => optimize(Algorithm::MgDiging, a.opt, &a.r),
        Command::Lowerbound(a) => lowerbound(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Run(a) => run_config(&a),
        Command::Dump(a) => dump(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn matrix_spec(a: &MatrixArgs) -> Result<(MatrixSpec, Option<(u64, f64)>), Failure> {
    let spec: MatrixSpec = a.matrix.parse()?;
    Ok((spec, a.perturb.map(|s| (a.perturb_seed, s))))
}

fn metrics(a: &MatrixArgs) -> Result<u8, Failure> {
    let (spec, perturb) = matrix_spec(a)?;
    let mut cfg = ExperimentConfig::new(Algorithm::PushSum, spec, ProblemSpec::quadratic());
    cfg.perturb = perturb;
    cfg.validate()?;
    let w = cfg.build_matrix()?;
    let p = EquilibriumProfile::compute(&w)?;
    let t = transient_report(p.beta_pi, p.kappa_pi, w.n())?;
    println!("n,beta_pi,kappa_pi,ln_kappa_pi,two_norm_dev,transient_pd,transient_mg");
    println!(
        "{},{:?},{:?},{:?},{:?},{:?},{:?}",
        w.n(),
        p.beta_pi,
        p.kappa_pi,
        p.kappa_pi.ln(),
        p.two_norm_dev,
        t.push_diging,
        t.mg_push_diging
    );
    Ok(0)
}

fn base_config(
    alg: Algorithm,
    m: &MatrixArgs,
    run: &RunControl,
    problem: ProblemSpec,
) -> Result<ExperimentConfig, Failure> {
    let (spec, perturb) = matrix_spec(m)?;
    let mut cfg = ExperimentConfig::new(alg, spec, problem);
    cfg.perturb = perturb;
    cfg.k = run.k;
    cfg.seeds = parse_seeds(&run.seeds)?;
    cfg.label = run.label.clone();
    cfg.output = run.out.clone();
    Ok(cfg)
}

fn pushsum(a: PushSumArgs) -> Result<u8, Failure> {
    let mut cfg = base_config(
        Algorithm::PushSum,
        &a.matrix,
        &a.run,
        ProblemSpec::quadratic(),
    )?;
    cfg.dim = a.dim;
    execute(&cfg, a.run.threads)
}

fn problem_spec(a: &OptArgs) -> Result<ProblemSpec, Failure> {
    let mut p = match a.problem.as_str() {
        "logreg" | "logreg-sec5" => ProblemSpec::logreg(),
        "quadratic" => ProblemSpec::quadratic(),
        "hard" => ProblemSpec::hard(),
        other => return Err(config_error(format!("unknown problem preset `{other}`"))),
    };
    match &mut p {
        ProblemSpec::LogReg {
            d,
            sigma_n,
            data_seed,
            ..
        } => {
            *d = a.dim.unwrap_or(*d);
            *sigma_n = a.sigma.unwrap_or(*sigma_n);
            *data_seed = a.data_seed.unwrap_or(*data_seed);
        }
        ProblemSpec::Quadratic {
            d,
            sigma,
            data_seed,
            ..
        } => {
            *d = a.dim.unwrap_or(*d);
            *sigma = a.sigma.unwrap_or(*sigma);
            *data_seed = a.data_seed.unwrap_or(*data_seed);
        }
        ProblemSpec::Hard { budget, .. } => {
            if a.dim.is_some() || a.sigma.is_some() || a.data_seed.is_some() {
                return Err(config_error(
                    "the hard instance takes no --dim, --sigma or --data-seed",
                ));
            }
            *budget = a.run.k;
        }
    }
    Ok(p)
}

fn optimize(alg: Algorithm, a: OptArgs, rounds: &str) -> Result<u8, Failure> {
    let mut cfg = base_config(alg, &a.matrix, &a.run, problem_spec(&a)?)?;
    cfg.gamma = a.gamma.parse::<GammaSpec>()?;
    cfg.rounds = rounds.parse::<RoundsSpec>()?;
    cfg.batch = a.batch;
    cfg.stop_below = a.stop_below;
    cfg.record_every = a.record_every;
    cfg.init = a.init_scale.map(|s| (a.init_seed, s));
    execute(&cfg, a.run.threads)
}

/// Runs every seed; writes files when the config has an output directory,
/// otherwise prints the single trace to stdout. Metadata goes to stderr.
fn execute(cfg: &ExperimentConfig, threads: usize) -> Result<u8, Failure> {
    cfg.validate()?;
    if cfg.output.is_none() && cfg.seeds.len() > 1 {
        return Err(config_error("several seeds need --out <dir>"));
    }
    let outputs = run_many(std::slice::from_ref(cfg), threads)?.remove(0);
    match &cfg.output {
        Some(dir) => {
            for path in write_outputs(dir, &outputs)? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => print!("{}", outputs[0].to_csv()),
    }
    for out in &outputs {
        eprint!("{}", out.meta_text());
        if let Some(t) = out.trace() {
            if let Some(k) = t.diverged_at {
                eprintln!("diverged_at={k}");
            }
        }
    }
    Ok(divergence_code(&outputs))
}

fn divergence_code(outputs: &[RunOutput]) -> u8 {
    if !outputs.is_empty() && outputs.iter().all(RunOutput::diverged) {
        EXIT_DIVERGED
    } else {
        0
    }
}

fn lowerbound(a: &LowerBoundArgs) -> Result<u8, Failure> {
    let alg: Algorithm = a.algorithm.parse()?;
    if alg == Algorithm::PushSum {
        return Err(config_error("lowerbound runs `diging` or `mgdiging`"));
    }
    let rounds = if alg == Algorithm::MgDiging { a.r } else { 1 };
    if rounds == 0 {
        return Err(config_error("R must be at least 1"));
    }
    let (inst, problem) = build_hard_instance_for_budget(a.n, a.k, a.l, a.delta)?;
    let w = MatrixSpec::Skewed { n: a.n, eps: a.eps }.build()?;
    let iters = a.k.div_ceil(rounds);
    let floor = inst.gradient_floor();
    let mut csv = String::from("k,rounds,prog,ceiling,grad_norm,floor\n");
    let mut held = true;
    let mut record = |k: usize, xbar: ndarray::Array1<f64>| {
        let comms = k * rounds;
        let p = prog(xbar.view());
        let ceiling = progress_ceiling(comms, a.n);
        held &= p as f64 <= ceiling;
        let g = inst.global_grad(xbar.view());
        let gn = g.dot(&g).sqrt();
        let _ = writeln!(csv, "{k},{comms},{p},{ceiling:?},{gn:?},{floor:?}");
    };
    let opts = RunOptions::new(iters, 0);
    let trace = if alg == Algorithm::MgDiging {
        mg_push_diging_run_observed(&problem, &w, rounds, a.gamma, &opts, |s| {
            record(s.k, s.xbar())
        })?
    } else {
        run_push_diging_observed(&problem, &w, a.gamma, &opts, |s| record(s.k, s.xbar()))?
    };
    match &a.out {
        Some(path) => {
            write_file(path, &csv)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    let last = trace.last().map_or(f64::NAN, |r| r.grad_norm);
    eprintln!(
        "d={}\nlambda={:?}\nfinal_grad_norm={last:?}\nfloor={floor:?}",
        inst.d, inst.lambda
    );
    eprintln!("ceiling_held={held}");
    Ok(if trace.diverged() { EXIT_DIVERGED } else { 0 })
}

fn sweep(a: &SweepArgs) -> Result<u8, Failure> {
    let seeds = parse_seeds(&a.seeds)?;
    let p = preset(&a.preset, &seeds)?;
    let dir = a.out.join(&p.name);
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    eprintln!("{}: {}", p.name, p.description);
    if let Some(table) = &p.table {
        let path = dir.join("metrics.csv");
        write_file(&path, table)?;
        print!("{table}");
        eprintln!("wrote {}", path.display());
    }
    if p.configs.is_empty() {
        return Ok(0);
    }
    let groups = run_many(&p.configs, a.threads)?;
    let mut all_diverged = true;
    println!("label,n,beta_pi,kappa_pi,gamma,R,mean_k_hit,mean_rounds_hit,diverged_seeds");
    for (cfg, outs) in p.configs.iter().zip(&groups) {
        write_outputs(&dir, outs)?;
        all_diverged &= divergence_code(outs) == EXIT_DIVERGED;
        let m = outs[0].meta();
        let hit = cfg.stop_below.and_then(|thr| {
            let traces: Vec<_> = outs.iter().filter_map(RunOutput::trace).collect();
            mean_hitting_time(&traces, thr)
        });
        let (hk, hr) = hit.map_or(("na".to_string(), "na".to_string()), |(k, r)| {
            (format!("{k:?}"), format!("{r:?}"))
        });
        let opt = |v: Option<f64>| v.map_or_else(|| "na".to_string(), |x| format!("{x:?}"));
        println!(
            "{},{},{},{},{:?},{},{hk},{hr},{}",
            cfg.label,
            m.n,
            opt(m.beta_pi),
            opt(m.kappa_pi),
            m.gamma,
            m.rounds_per_iter,
            outs.iter().filter(|o| o.diverged()).count()
        );
    }
    eprintln!(
        "wrote {} runs to {}",
        groups.iter().map(Vec::len).sum::<usize>(),
        dir.display()
    );
    Ok(if all_diverged { EXIT_DIVERGED } else { 0 })
}

fn run_config(a: &RunArgs) -> Result<u8, Failure> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = &a.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if a.out.is_some() {
        cfg.output = a.out.clone();
    }
    execute(&cfg, a.threads)
}

fn dump(a: &DumpArgs) -> Result<u8, Failure> {
    let params = LogRegParams {
        n: a.n,
        seed: a.data_seed,
        ..LogRegParams::default()
    };
    let problem = gen_logreg(&params)?;
    std::fs::create_dir_all(&a.out)
        .with_context(|| format!("cannot create {}", a.out.display()))?;
    for (name, text) in [
        ("samples.csv", problem.data().samples_csv()),
        ("solutions.csv", problem.data().solutions_csv()),
    ] {
        let path = a.out.join(name);
        write_file(&path, &text)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(0)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| anyhow!("cannot write {}: {e}", path.display()).into())
}
