//! Acceptance suite: ten criteria at their stated tolerances and runtime
//! budgets, one `PASS`/`FAIL` line each. Runs without the libtest harness so
//! the report is printed by a plain `cargo test`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::Rng;

use skewnet_core::graph::{build_out_degree_matrix, build_skewed_family, perturb_weights, Digraph, MixingMatrix};
use skewnet_core::harness::{mean_hitting_time, preset, run_many, transient_report, RunOutput};
use skewnet_core::lowerbound::{
    build_hard_instance_for_budget, grad_h, grad_h1, grad_h2, h, h1, h2, prog, progress_ceiling, GINF,
};
use skewnet_core::optimizer::{
    mg_push_diging_run_observed, mg_r_schedule, mg_r_value, run_push_diging, run_push_diging_observed,
    theoretical_gamma, DigingState, RunOptions,
};
use skewnet_core::problems::{gen_quadratic, ProblemPreset};
use skewnet_core::pushsum::run_push_sum_with_pi;
use skewnet_core::rng::NoiseKey;
use skewnet_core::spectral::EquilibriumProfile;
use skewnet_core::StepSizeParams;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn max_abs(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b).iter().fold(0.0f64, |m, e| m.max(e.abs()))
}

fn seeded_block(seed: u64, n: usize, d: usize) -> Array2<f64> {
    let mut out = Array2::zeros((n, d));
    let mut buf = vec![0.0; d];
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        NoiseKey::new(seed, i, 0, 0).fill_normal(&mut buf);
        row.assign(&Array1::from(buf.clone()));
    }
    out
}

/// Seeded strongly connected matrix: ring, random chords, jittered weights.
fn random_matrix(seed: u64, max_n: usize) -> MixingMatrix {
    let mut rng = NoiseKey::new(seed, 0, 0, 1).rng();
    let n = rng.random_range(2..=max_n);
    let mut edges: Vec<(usize, usize)> = (0..n).map(|j| (j, (j + 1) % n)).collect();
    for _ in 0..rng.random_range(0..=2 * n) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b && !edges.contains(&(a, b)) {
            edges.push((a, b));
        }
    }
    let g = Digraph::new(n, edges).unwrap();
    perturb_weights(&build_out_degree_matrix(&g).unwrap(), seed, rng.random_range(0.0..0.8)).unwrap()
}

fn skewed_closed_forms() -> Outcome {
    let (mut worst_k, mut worst_b) = (0.0f64, 0.0f64);
    let mut off = Vec::new();
    for n in 2..=20 {
        let p = EquilibriumProfile::compute(&build_skewed_family(n, 0.0).unwrap()).map_err(|e| e.to_string())?;
        let err_b = (p.beta_pi - 0.70710678118).abs();
        worst_k = worst_k.max(rel(p.kappa_pi, 2f64.powi(n as i32 - 1)));
        worst_b = worst_b.max(err_b);
        if err_b > 1e-9 {
            off.push(format!("n={n} beta={:.12}", p.beta_pi));
        }
    }
    check(worst_k <= 1e-9 && worst_b <= 1e-9, || {
        format!("kappa rel err {worst_k:.2e}; beta off target at {}", off.join(", "))
    })?;
    Ok(format!("max kappa rel err {worst_k:.1e}, max |beta - 0.70710678118| {worst_b:.1e}"))
}

fn general_eps() -> Outcome {
    let mut worst = 0.0f64;
    for eps in [-0.5, 0.0, 0.5, 0.9] {
        for n in [3, 7, 15] {
            let p = EquilibriumProfile::compute(&build_skewed_family(n, eps).unwrap()).map_err(|e| e.to_string())?;
            worst = worst.max((p.beta_pi - ((1.0 + eps) / 2.0f64).sqrt()).abs());
        }
    }
    check(worst <= 1e-8, || format!("max beta err {worst:.2e}"))?;
    Ok(format!("max |beta - sqrt((1+eps)/2)| {worst:.1e} over 12 matrices"))
}

fn pushsum_suite() -> Outcome {
    let mut worst_mass = 0.0f64;
    let mut worst_env = f64::NEG_INFINITY;
    for trial in 0..100u64 {
        let w = random_matrix(1000 + trial, 20);
        let p = EquilibriumProfile::compute(&w).map_err(|e| e.to_string())?;
        let z0 = seeded_block(trial, w.n(), 3);
        let z_norm = z0.iter().map(|x| x * x).sum::<f64>().sqrt();
        let recs = run_push_sum_with_pi(&w, &p.pi, &z0, None, 200).map_err(|e| e.to_string())?;
        for pair in recs.windows(2) {
            check(pair[1].min_ratio >= pair[0].min_ratio - 1e-12, || format!("trial {trial}: min ratio fell at k={}", pair[1].k))?;
            check(pair[1].max_ratio <= pair[0].max_ratio + 1e-12, || format!("trial {trial}: max ratio rose at k={}", pair[1].k))?;
        }
        for r in &recs {
            worst_mass = worst_mass.max(r.mass_drift).max(r.weight_drift);
            check(r.vinv_norm <= p.kappa_pi + 1e-9, || format!("trial {trial}: |V^-1| {} > kappa {}", r.vinv_norm, p.kappa_pi))?;
            let envelope = p.kappa_pi.powf(1.5) * p.beta_pi.powi(r.k as i32) * z_norm;
            check(r.consensus_error <= envelope + 1e-9, || format!("trial {trial} k={}: error above envelope", r.k))?;
            worst_env = worst_env.max(r.consensus_error - envelope);
        }
    }
    check(worst_mass <= 1e-9, || format!("mass drift {worst_mass:.2e}"))?;
    Ok(format!("100 trials, max mass drift {worst_mass:.1e}, max error - envelope {worst_env:.1e}"))
}

fn tracker_conservation() -> Outcome {
    let mut worst = 0.0f64;
    for trial in 0..20u64 {
        let n = 3 + (trial as usize % 8);
        let w = build_skewed_family(n, -0.4 + 0.05 * trial as f64).map_err(|e| e.to_string())?;
        let p = gen_quadratic(n, 4, 5.0, 1.0, trial).map_err(|e| e.to_string())?.with_noise(0.1);
        let trace = run_push_diging_observed(&p, &w, 0.01, &RunOptions::new(500, trial), |s| {
            worst = worst.max(s.tracker_drift());
        })
        .map_err(|e| e.to_string())?;
        check(!trace.diverged(), || format!("trial {trial} diverged"))?;
    }
    check(worst <= 1e-9, || format!("max |1'y - 1'g| {worst:.2e}"))?;
    Ok(format!("20 trials x 500 iterations, max |1'y - 1'g| {worst:.1e}"))
}

fn mg_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for c in 0..20u64 {
        let w = random_matrix(2000 + c, 10);
        let n = w.n();
        let rounds = 1 + (c as usize % 5);
        let k = 10 + (c as usize * 7) % 41;
        let p = gen_quadratic(n, 3, 4.0, 1.0, c).map_err(|e| e.to_string())?.with_noise(0.3);
        let opts = RunOptions::new(k, c);
        let mut mg: Vec<DigingState> = Vec::new();
        mg_push_diging_run_observed(&p, &w, rounds, 0.02, &opts, |s| mg.push(s.clone())).map_err(|e| e.to_string())?;
        let mut vanilla: Vec<DigingState> = Vec::new();
        run_push_diging_observed(&p, &w.power(rounds), 0.02, &opts.clone().with_batch(rounds), |s| {
            vanilla.push(s.clone())
        })
        .map_err(|e| e.to_string())?;
        check(mg.len() == vanilla.len() && mg.len() == k + 1, || format!("config {c}: length mismatch"))?;
        for (a, b) in mg.iter().zip(&vanilla) {
            let err = max_abs(&a.x, &b.x).max(max_abs(&a.y, &b.y)).max(max_abs(&a.w, &b.w));
            worst = worst.max(err);
        }
    }
    check(worst <= 1e-10, || format!("max entrywise gap {worst:.2e}"))?;
    Ok(format!("20 configs (n <= 10, R <= 5, K <= 50), max entrywise gap {worst:.1e}"))
}

/// Iteration budget from the pilot golden run (gamma = 0.005 first reaches
/// the threshold at k = 961).
const DETERMINISTIC_BUDGET: usize = 961;
const DETERMINISTIC_GAMMA: f64 = 0.005;

fn deterministic_convergence() -> Outcome {
    let p = ProblemPreset::quadratic_default(9, 0).build().map_err(|e| e.to_string())?;
    check(p.dim() == 5 && p.noise_std() == 0.0, || "preset is not the d=5 noiseless quadratic".into())?;
    let w = build_skewed_family(9, 0.0).map_err(|e| e.to_string())?;
    let t = run_push_diging(p.as_ref(), &w, DETERMINISTIC_GAMMA, &RunOptions::new(DETERMINISTIC_BUDGET, 0))
        .map_err(|e| e.to_string())?;
    let last = t.last().ok_or("empty trace")?;
    check(!t.diverged() && last.grad_norm <= 1e-8 && last.cons_x <= 1e-6, || {
        format!("after {} iterations: grad {:.2e}, disagreement {:.2e}", last.k, last.grad_norm, last.cons_x)
    })?;
    Ok(format!(
        "K={DETERMINISTIC_BUDGET}: |grad f(xbar)| {:.2e}, disagreement {:.2e}",
        last.grad_norm, last.cons_x
    ))
}

fn hitting(group: &[RunOutput], threshold: f64) -> Option<(f64, f64)> {
    let traces: Vec<_> = group.iter().filter_map(RunOutput::trace).collect();
    mean_hitting_time(&traces, threshold)
}

fn strictly_increasing(name: &str, groups: &[Vec<RunOutput>], threshold: f64) -> Result<String, String> {
    let mut times = Vec::new();
    for g in groups {
        let (k, _) = hitting(g, threshold).ok_or_else(|| format!("{name}: a run never reached {threshold}"))?;
        times.push(k);
    }
    let text = times.iter().map(|t| format!("{t:.0}")).collect::<Vec<_>>().join("<");
    check(times.windows(2).all(|p| p[1] > p[0]), || format!("{name} not increasing: {times:?}"))?;
    Ok(text)
}

fn figure_trends() -> Outcome {
    let seeds = [0, 1, 2];
    let threshold = skewnet_core::harness::presets::FIG5_THRESHOLD;
    let left = run_many(&preset("fig5-left", &seeds).map_err(|e| e.to_string())?.configs, 0).map_err(|e| e.to_string())?;
    let left = strictly_increasing("fig5-left", &left, threshold)?;
    let right = run_many(&preset("fig5-right", &seeds).map_err(|e| e.to_string())?.configs, 0).map_err(|e| e.to_string())?;
    let right = strictly_increasing("fig5-right", &right, threshold)?;
    let fig6 = preset("fig6", &seeds).map_err(|e| e.to_string())?;
    let groups = run_many(&fig6.configs, 0).map_err(|e| e.to_string())?;
    let threshold = skewnet_core::harness::presets::FIG6_THRESHOLD;
    let mut mg_text = Vec::new();
    for (cfgs, outs) in fig6.configs.chunks(2).zip(groups.chunks(2)) {
        let (_, vanilla) = hitting(&outs[0], threshold).ok_or_else(|| format!("{} never converged", cfgs[0].label))?;
        let (_, mg) = hitting(&outs[1], threshold).ok_or_else(|| format!("{} never converged", cfgs[1].label))?;
        check(mg < vanilla, || format!("{}: MG {mg:.0} rounds vs vanilla {vanilla:.0}", cfgs[1].label))?;
        mg_text.push(format!("{mg:.0}<{vanilla:.0}"));
    }
    Ok(format!(
        "iterations by beta {left}; by kappa {right}; MG vs vanilla rounds W1 {}, W2 {}",
        mg_text[0], mg_text[1]
    ))
}

fn zero_chain_suite() -> Outcome {
    let mut checked = 0usize;
    let mut worst_avg = 0.0f64;
    for d in [4usize, 10, 40] {
        let mut rng = NoiseKey::new(d as u64, 0, 0, 0).rng();
        for t in 0..1000 {
            let mut buf = vec![0.0; d];
            NoiseKey::new(d as u64, t, 1, 0).fill_normal(&mut buf);
            let len = rng.random_range(0..=d);
            let scale = [0.3, 1.0, 3.0][t % 3];
            let x = Array1::from_iter(buf.iter().enumerate().map(|(j, v)| if j < len { v * scale } else { 0.0 }));
            let px = prog(x.view());
            let g = grad_h(x.view());
            check(prog(g.view()) <= px + 1, || format!("d={d}: prog(grad h) > prog + 1"))?;
            if px % 2 == 1 {
                check(prog(grad_h1(x.view()).view()) <= px, || format!("d={d}: odd parity law broken"))?;
            } else {
                check(prog(grad_h2(x.view()).view()) <= px, || format!("d={d}: even parity law broken"))?;
            }
            let avg = (0.5 * (h1(x.view()) + h2(x.view())) - h(x.view())).abs();
            worst_avg = worst_avg.max(avg);
            let ginf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            check(ginf <= GINF, || format!("d={d}: |grad h|_inf = {ginf}"))?;
            if x[d - 1] == 0.0 {
                check(ginf >= 1.0, || format!("d={d}: |grad h|_inf = {ginf} < 1 with [x]_d = 0"))?;
            }
            checked += 1;
        }
    }
    check(worst_avg <= 1e-12, || format!("|(h1+h2)/2 - h| = {worst_avg:.2e}"))?;
    Ok(format!("{checked} points, max |(h1+h2)/2 - h| {worst_avg:.1e}"))
}

fn progress_ceiling_check() -> Outcome {
    let (n, k) = (9, 300);
    let (inst, problem) = build_hard_instance_for_budget(n, k, 1.0, 1.0).map_err(|e| e.to_string())?;
    let w = build_skewed_family(n, 0.0).map_err(|e| e.to_string())?;
    let mut peak = 0usize;
    for gamma in [0.1, 0.3, 1.0, 3.0, 10.0] {
        let mut violation = None;
        run_push_diging_observed(&problem, &w, gamma, &RunOptions::new(k, 0), |s| {
            let p = prog(s.xbar().view());
            peak = peak.max(p);
            if violation.is_none() && p as f64 > progress_ceiling(s.k, n) {
                violation = Some((s.k, p));
            }
        })
        .map_err(|e| e.to_string())?;
        if let Some((step, p)) = violation {
            return Err(format!("gamma={gamma}: prog {p} > 3k/n+1 at k={step}"));
        }
    }
    Ok(format!("d={}, 5 step sizes, peak prog {peak} <= 3K/n+1 = {}", inst.d, progress_ceiling(k, n)))
}

fn schedule_formulas() -> Outcome {
    let base = StepSizeParams {
        l: 1.0,
        delta: 1.0,
        sigma2: 1.0,
        n: 4,
        k: 1000,
        beta_pi: 0.5,
        kappa_pi: 2.0,
        y0_norm2: 4.0,
    };
    let gamma = theoretical_gamma(&base).map_err(|e| e.to_string())?;
    check(rel(gamma, 0.000_096_822_536_432_062_991_413_889_94) <= 1e-12, || format!("gamma {gamma:e}"))?;
    let noiseless = theoretical_gamma(&StepSizeParams { sigma2: 0.0, ..base }).map_err(|e| e.to_string())?;
    check(rel(noiseless, 0.000_097_197_193_227_199_229_718_379_86) <= 1e-12, || format!("noiseless gamma {noiseless:e}"))?;
    let r = mg_r_value(64.0, 7.0, FRAC_1_SQRT_2).map_err(|e| e.to_string())?;
    check(rel(r, 169.825_312_419_267_613_753_412_7) <= 1e-12, || format!("R value {r}"))?;
    let e = std::f64::consts::E;
    let r2 = mg_r_value(e, e * e, 0.5).map_err(|e| e.to_string())?;
    check(rel(r2, 44.583_005_244_258_362_362_006_46) <= 1e-12, || format!("R value {r2}"))?;
    check(mg_r_schedule(64.0, 7, FRAC_1_SQRT_2).ok() == Some(170), || "R schedule".into())?;
    let t = transient_report(FRAC_1_SQRT_2, 64.0, 7).map_err(|e| e.to_string())?;
    check(rel(t.push_diging, 1.050_891_440_762_911_045_031_539e31) <= 1e-9, || format!("pd {:e}", t.push_diging))?;
    check(rel(t.mg_push_diging, 2_171.654_725_711_490_560_744_623) <= 1e-9, || format!("mg {}", t.mg_push_diging))?;
    let t = transient_report(0.9, 163.0, 7).map_err(|e| e.to_string())?;
    check(rel(t.push_diging, 3.205_683_055_983_517_460_350_471e39) <= 1e-9, || format!("pd {:e}", t.push_diging))?;
    check(rel(t.lower_bound, 25_993.654_056_882_719_388_840_51) <= 1e-9, || format!("lb {}", t.lower_bound))?;
    Ok(format!("gamma {gamma:.6e}, R 170, transient goldens matched"))
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "skewed-family closed forms", budget: Duration::from_secs(1), run: skewed_closed_forms },
        Criterion { id: 2, name: "general-eps spectral gap", budget: Duration::from_secs(1), run: general_eps },
        Criterion { id: 3, name: "Push-Sum invariant suite", budget: Duration::from_secs(30), run: pushsum_suite },
        Criterion { id: 4, name: "tracker conservation", budget: Duration::from_secs(30), run: tracker_conservation },
        Criterion { id: 5, name: "MG equivalence", budget: Duration::from_secs(60), run: mg_equivalence },
        Criterion { id: 6, name: "deterministic convergence", budget: Duration::from_secs(10), run: deterministic_convergence },
        Criterion { id: 7, name: "figure trends", budget: Duration::from_secs(300), run: figure_trends },
        Criterion { id: 8, name: "zero-chain suite", budget: Duration::from_secs(30), run: zero_chain_suite },
        Criterion { id: 9, name: "progress ceiling", budget: Duration::from_secs(60), run: progress_ceiling_check },
        Criterion { id: 10, name: "schedule formulas", budget: Duration::from_secs(1), run: schedule_formulas },
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (status, detail) = match outcome {
            Ok(d) if elapsed <= c.budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over the {:?} budget", c.budget)),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {:>2} {status} [{:>7.2}s] {}: {detail}", c.id, elapsed.as_secs_f64(), c.name);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
