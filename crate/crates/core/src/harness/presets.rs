//! Figure presets. Every matrix lives on the 7-node skewed topology: the
//! mixing weight `eps` fixes the equilibrium vector (hence `kappa_pi`) and
//! a self-loop weight `laziness` then tunes `beta_pi` without moving it.

use std::fmt::Write as _;

use super::config::{Algorithm, Auto, ExperimentConfig, MatrixSpec, ProblemSpec};
use crate::error::{Error, Result};
use crate::graph::{build_lazy_skewed, build_skewed_family, MixingMatrix};
use crate::spectral::EquilibriumProfile;

pub const PRESET_NAMES: [&str; 7] = [
    "fig2",
    "fig3",
    "fig4-left",
    "fig4-right",
    "fig5-left",
    "fig5-right",
    "fig6",
];

const NODES: usize = 7;
const BISECTION_STEPS: usize = 80;

/// A named bundle of experiments, or a metrics table for the presets that
/// only describe networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: String,
    pub description: String,
    pub configs: Vec<ExperimentConfig>,
    pub table: Option<String>,
}

/// `eps` whose skewed matrix on `n` nodes has skewness `kappa`:
/// `(2 / (1 + eps))^(n-1) = kappa`.
pub fn eps_for_kappa(n: usize, kappa: f64) -> Result<f64> {
    if n < 2 || !(kappa > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need n >= 2 and kappa > 1, got n={n}, kappa={kappa}"
        )));
    }
    let eps = 2.0 * kappa.powf(-1.0 / (n - 1) as f64) - 1.0;
    if !(eps.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("kappa={kappa} is out of reach on {n} nodes")));
    }
    Ok(eps)
}

/// Self-loop weight at which the lazy skewed matrix reaches
/// `1 / (1 - beta_pi) = inverse_gap`, found by bisection.
pub fn laziness_for_inverse_gap(n: usize, eps: f64, inverse_gap: f64) -> Result<f64> {
    let gap_at = |lazy: f64| -> Result<f64> {
        Ok(EquilibriumProfile::compute(&build_lazy_skewed(n, eps, lazy)?)?.inverse_gap())
    };
    let base = gap_at(0.0)?;
    if inverse_gap < base {
        return Err(Error::InvalidParameter(format!(
            "inverse gap {inverse_gap} is below the non-lazy value {base} for eps={eps}"
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0 - 1e-9);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if gap_at(mid)? < inverse_gap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Lazy skewed matrix on `n` nodes with the requested skewness and
/// inverse spectral gap.
pub fn matrix_for_targets(n: usize, kappa: f64, inverse_gap: f64) -> Result<(MatrixSpec, EquilibriumProfile)> {
    let eps = eps_for_kappa(n, kappa)?;
    let laziness = laziness_for_inverse_gap(n, eps, inverse_gap)?;
    let spec = MatrixSpec::LazySkewed { n, eps, laziness };
    let profile = EquilibriumProfile::compute(&spec.build()?)?;
    Ok((spec, profile))
}

/// `n,beta_pi,kappa_pi,ln_kappa_pi,inverse_gap,two_norm_dev` for each matrix.
pub fn metrics_table(rows: &[(usize, MixingMatrix)]) -> Result<String> {
    let mut out = String::from("n,beta_pi,kappa_pi,ln_kappa_pi,inverse_gap,two_norm_dev\n");
    for (n, w) in rows {
        let p = EquilibriumProfile::compute(w)?;
        let _ = writeln!(
            out,
            "{n},{:?},{:?},{:?},{:?},{:?}",
            p.beta_pi,
            p.kappa_pi,
            p.ln_kappa_pi,
            p.inverse_gap(),
            p.two_norm_dev
        );
    }
    Ok(out)
}

/// Metrics of the `eps = 0` skewed family for `n = 2..=20`.
pub fn skewed_metrics_table() -> Result<String> {
    let rows = (2..=20)
        .map(|n| Ok((n, build_skewed_family(n, 0.0)?)))
        .collect::<Result<Vec<_>>>()?;
    metrics_table(&rows)
}

fn config(
    label: String,
    algorithm: Algorithm,
    matrix: MatrixSpec,
    problem: ProblemSpec,
    k: usize,
    seeds: &[u64],
) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(algorithm, matrix, problem);
    cfg.label = label;
    cfg.k = k;
    cfg.seeds = seeds.to_vec();
    cfg
}

/// Push-Sum sweep over `(kappa, inverse_gap)` targets.
fn pushsum_sweep(name: &str, targets: &[(f64, f64)], seeds: &[u64]) -> Result<Vec<ExperimentConfig>> {
    targets
        .iter()
        .enumerate()
        .map(|(i, &(kappa, gap))| {
            let (spec, _) = matrix_for_targets(NODES, kappa, gap)?;
            let mut cfg = config(
                format!("{name}-{i}"),
                Algorithm::PushSum,
                spec,
                ProblemSpec::quadratic(),
                FIG4_ROUNDS,
                seeds,
            );
            cfg.dim = 4;
            Ok(cfg)
        })
        .collect()
}

/// Push-DIGing sweep on the logistic-regression problem.
fn diging_sweep(
    name: &str,
    targets: &[(f64, f64)],
    gamma: f64,
    seeds: &[u64],
) -> Result<Vec<ExperimentConfig>> {
    targets
        .iter()
        .enumerate()
        .map(|(i, &(kappa, gap))| {
            let (spec, _) = matrix_for_targets(NODES, kappa, gap)?;
            let mut cfg = config(
                format!("{name}-{i}"),
                Algorithm::Diging,
                spec,
                ProblemSpec::logreg(),
                FIG5_BUDGET,
                seeds,
            );
            cfg.gamma = Auto::Fixed(gamma);
            cfg.stop_below = Some(FIG5_THRESHOLD);
            cfg.init = Some(SPREAD_INIT);
            Ok(cfg)
        })
        .collect()
}

const FIG4_ROUNDS: usize = 300;
/// Matrices of the `fig4-left` preset: `kappa_pi = 64`, growing inverse gap.
pub const FIG4_LEFT_TARGETS: [(f64, f64); 4] = [(64.0, 4.0), (64.0, 8.0), (64.0, 16.0), (64.0, 32.0)];
/// Matrices of the `fig4-right` preset: inverse gap 10, growing `kappa_pi`.
pub const FIG4_RIGHT_TARGETS: [(f64, f64); 4] = [(4.0, 10.0), (16.0, 10.0), (64.0, 10.0), (256.0, 10.0)];

/// `(seed, scale)` of the spread-out starting point used by the optimizer
/// presets.
pub const SPREAD_INIT: (u64, f64) = (12345, 1.5);
pub const FIG5_LEFT_GAMMA: f64 = 0.2;
pub const FIG5_RIGHT_GAMMA: f64 = 0.12;
pub const FIG5_THRESHOLD: f64 = 0.05;
pub const FIG5_BUDGET: usize = 20_000;
/// `kappa_pi` in (162, 164), inverse gap from 5 to 695.5.
pub const FIG5_LEFT_TARGETS: [(f64, f64); 5] =
    [(163.0, 5.0), (163.0, 20.0), (163.0, 80.0), (163.0, 250.0), (163.0, 695.5)];
/// Inverse gap in (10, 10.1), `kappa_pi` from 500 to 3250.9.
pub const FIG5_RIGHT_TARGETS: [(f64, f64); 5] =
    [(500.0, 10.05), (1000.0, 10.05), (1500.0, 10.05), (2200.0, 10.05), (3250.9, 10.05)];

/// `W1` (high skewness) and `W2` (small gap) of the multi-round comparison.
pub const FIG6_TARGETS: [(f64, f64); 2] = [(4804.49, 2.34), (6.33, 51.24)];
pub const FIG6_VANILLA_GAMMA: f64 = 0.01;
pub const FIG6_ROUNDS: [usize; 2] = [40, 40];
pub const FIG6_BUDGET: usize = 20_000;
pub const FIG6_THRESHOLD: f64 = 0.05;

/// Builds the named preset for the given seeds.
pub fn preset(name: &str, seeds: &[u64]) -> Result<Preset> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let (description, configs, table) = match name {
        "fig2" => (
            "skewness 2^(n-1) against a constant gap on the eps = 0 skewed family",
            Vec::new(),
            Some(skewed_metrics_table()?),
        ),
        "fig3" => (
            "plain 2-norm deviation against the pi-weighted beta on the skewed family",
            Vec::new(),
            Some(skewed_metrics_table()?),
        ),
        "fig4-left" => (
            "Push-Sum, kappa_pi = 64, growing inverse spectral gap",
            pushsum_sweep(name, &FIG4_LEFT_TARGETS, seeds)?,
            None,
        ),
        "fig4-right" => (
            "Push-Sum, inverse spectral gap 10, growing kappa_pi",
            pushsum_sweep(name, &FIG4_RIGHT_TARGETS, seeds)?,
            None,
        ),
        "fig5-left" => (
            "Push-DIGing on logistic regression, kappa_pi ~ 163, inverse gap 5 to 695.5",
            diging_sweep(name, &FIG5_LEFT_TARGETS, FIG5_LEFT_GAMMA, seeds)?,
            None,
        ),
        "fig5-right" => (
            "Push-DIGing on logistic regression, inverse gap ~ 10.05, kappa_pi 500 to 3250.9",
            diging_sweep(name, &FIG5_RIGHT_TARGETS, FIG5_RIGHT_GAMMA, seeds)?,
            None,
        ),
        "fig6" => {
            let mut configs = Vec::new();
            for (i, (&(kappa, gap), &r)) in FIG6_TARGETS.iter().zip(&FIG6_ROUNDS).enumerate() {
                let (spec, _) = matrix_for_targets(NODES, kappa, gap)?;
                for (alg, rounds) in [(Algorithm::Diging, 1), (Algorithm::MgDiging, r)] {
                    let mut cfg = config(
                        format!("fig6-w{}-{alg}", i + 1),
                        alg,
                        spec.clone(),
                        ProblemSpec::logreg(),
                        FIG6_BUDGET.div_ceil(rounds),
                        seeds,
                    );
                    cfg.gamma = Auto::Fixed(FIG6_VANILLA_GAMMA * rounds as f64);
                    cfg.rounds = Auto::Fixed(rounds);
                    cfg.stop_below = Some(FIG6_THRESHOLD);
                    cfg.init = Some(SPREAD_INIT);
                    configs.push(cfg);
                }
            }
            (
                "MG-Push-DIGing (rate 0.01 R) against Push-DIGing (rate 0.01) on W1 and W2",
                configs,
                None,
            )
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}`; expected one of {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(Preset {
        name: name.to_string(),
        description: description.to_string(),
        configs,
        table,
    })
}
