use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::Rng;

use skewnet_core::graph::{
    build_lazy_skewed, build_out_degree_matrix, build_skewed_family, perturb_weights, Digraph,
    MixingMatrix,
};
use skewnet_core::harness::{preset, run_many};
use skewnet_core::lowerbound::{grad_h, grad_h1, grad_h2, prog, L0};
use skewnet_core::optimizer::{
    mg_push_diging_run_observed, run_push_diging_observed, DigingState, RunOptions,
};
use skewnet_core::problems::gen_quadratic;
use skewnet_core::pushsum::{run_push_sum_with_pi, PushSumState};
use skewnet_core::rng::NoiseKey;
use skewnet_core::spectral::{
    column_mean, deviation_matrix, pi_matrix_norm, spectral_gap_beta, two_norm_deviation,
    EquilibriumProfile,
};

/// Ring plus extra edges, out-degree weights, optional jitter.
fn random_matrix(n: usize, extra: &[(usize, usize)], seed: u64, strength: f64) -> MixingMatrix {
    let mut edges: Vec<(usize, usize)> = (0..n).map(|j| (j, (j + 1) % n)).collect();
    edges.extend(extra.iter().map(|&(a, b)| (a % n, b % n)).filter(|(a, b)| a != b));
    edges.sort_unstable();
    edges.dedup();
    let g = Digraph::new(n, edges).unwrap();
    perturb_weights(&build_out_degree_matrix(&g).unwrap(), seed, strength).unwrap()
}

fn matrix_strategy() -> impl Strategy<Value = MixingMatrix> {
    (
        2usize..=12,
        prop::collection::vec((0usize..12, 0usize..12), 0..20),
        any::<u64>(),
        0.0f64..0.9,
    )
        .prop_map(|(n, extra, seed, strength)| random_matrix(n, &extra, seed, strength))
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn builders_are_column_stochastic(m in matrix_strategy()) {
        let w = m.weights();
        for col in w.columns() {
            prop_assert!((col.sum() - 1.0).abs() <= 1e-12);
            prop_assert!(col.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
        prop_assert!(m.is_primitive());
    }

    #[test]
    fn lazy_family_is_column_stochastic(n in 2usize..20, eps in -0.95f64..0.95, lazy in 0.0f64..0.99) {
        let m = build_lazy_skewed(n, eps, lazy).unwrap();
        for col in m.weights().columns() {
            prop_assert!((col.sum() - 1.0).abs() <= 1e-12);
        }
        prop_assert!(m.is_primitive());
    }

    #[test]
    fn profile_invariants(m in matrix_strategy()) {
        let p = EquilibriumProfile::compute(&m).unwrap();
        prop_assert!((p.pi.sum() - 1.0).abs() <= 1e-10);
        prop_assert!(p.pi.iter().all(|&x| x > 0.0));
        let residual = m.mix_vec(&p.pi) - &p.pi;
        prop_assert!(residual.dot(&residual).sqrt() <= 1e-10);
        let (lo, hi) = p.pi.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        prop_assert_eq!(p.kappa_pi, hi / lo);
        prop_assert!(p.beta_pi < 1.0);
    }

    #[test]
    fn deviation_powers_are_submultiplicative(m in matrix_strategy()) {
        let p = EquilibriumProfile::compute(&m).unwrap();
        let dev = deviation_matrix(&m, &p.pi).unwrap();
        let mut acc = dev.clone();
        for k in 1..=10 {
            let norm = pi_matrix_norm(&acc, &p.pi).unwrap();
            prop_assert!(norm <= p.beta_pi.powi(k as i32) + 1e-9, "k={k}: {norm} > {}", p.beta_pi.powi(k as i32));
            acc = acc.dot(&dev);
        }
    }

    #[test]
    fn pushsum_ratio_and_envelope_bounds(m in matrix_strategy(), seed in any::<u64>(), d in 1usize..4) {
        let p = EquilibriumProfile::compute(&m).unwrap();
        let z0 = seeded_block(seed, m.n(), d);
        let recs = run_push_sum_with_pi(&m, &p.pi, &z0, None, 120).unwrap();
        let scale = z0.iter().map(|x| x * x).sum::<f64>().sqrt();
        for pair in recs.windows(2) {
            prop_assert!(pair[1].min_ratio >= pair[0].min_ratio - 1e-12);
            prop_assert!(pair[1].max_ratio <= pair[0].max_ratio + 1e-12);
        }
        for r in &recs {
            prop_assert!(r.mass_drift <= 1e-9 * scale.max(1.0));
            prop_assert!(r.weight_drift <= 1e-10);
            prop_assert!(r.vinv_norm <= p.kappa_pi + 1e-9);
            let envelope = p.kappa_pi.powf(1.5) * p.beta_pi.powi(r.k as i32) * scale;
            prop_assert!(r.consensus_error <= envelope + 1e-9);
        }
    }

    #[test]
    fn pushsum_from_equilibrium_weights_is_exact(m in matrix_strategy(), seed in any::<u64>()) {
        let p = EquilibriumProfile::compute(&m).unwrap();
        let n = m.n();
        let v0 = &p.pi * n as f64;
        let z0 = seeded_block(seed, n, 2);
        let mut s = PushSumState::new(z0.clone(), Some(v0.clone())).unwrap();
        let mut zk = z0;
        for _ in 0..15 {
            s = s.step(&m).unwrap();
            zk = m.mix(&zk);
            for i in 0..n {
                for j in 0..2 {
                    let expect = zk[[i, j]] / v0[i];
                    prop_assert!((s.w[[i, j]] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
                }
            }
        }
    }

    #[test]
    fn diging_tracks_and_averages(m in matrix_strategy(), seed in any::<u64>(), sigma in 0.0f64..0.5) {
        let n = m.n();
        let p = gen_quadratic(n, 3, 5.0, 1.0, seed).unwrap().with_noise(sigma);
        let gamma = 0.005;
        let mut prev: Option<DigingState> = None;
        let (mut worst_drift, mut worst_law, mut scale) = (0.0f64, 0.0f64, 1.0f64);
        run_push_diging_observed(&p, &m, gamma, &RunOptions::new(60, seed), |s| {
            scale = s.g_prev.iter().chain(s.x.iter()).fold(scale, |a, x| a.max(x.abs()));
            worst_drift = worst_drift.max(s.tracker_drift());
            if let Some(before) = &prev {
                let expect = before.xbar() - &(column_mean(&before.g_prev) * gamma);
                let err = (&s.xbar() - &expect).iter().fold(0.0f64, |a, x| a.max(x.abs()));
                worst_law = worst_law.max(err);
            }
            prev = Some(s.clone());
        }).unwrap();
        prop_assert!(worst_drift <= 1e-9 * scale, "drift {worst_drift}, scale {scale}");
        prop_assert!(worst_law <= 1e-10 * scale, "law {worst_law}, scale {scale}");
    }

    #[test]
    fn mg_matches_vanilla_on_matrix_power(
        m in matrix_strategy(),
        rounds in 1usize..=5,
        seed in any::<u64>(),
        k in 1usize..=50,
    ) {
        let n = m.n();
        let p = gen_quadratic(n, 2, 3.0, 1.0, seed).unwrap().with_noise(0.2);
        let opts = RunOptions::new(k, seed);
        let mut mg = Vec::new();
        mg_push_diging_run_observed(&p, &m, rounds, 0.03, &opts, |s| mg.push(s.clone())).unwrap();
        let mut vanilla = Vec::new();
        let wr = m.power(rounds);
        run_push_diging_observed(&p, &wr, 0.03, &opts.clone().with_batch(rounds), |s| vanilla.push(s.clone())).unwrap();
        prop_assert_eq!(mg.len(), vanilla.len());
        for (a, b) in mg.iter().zip(&vanilla) {
            for (x, y) in [(&a.x, &b.x), (&a.y, &b.y), (&a.w, &b.w)] {
                let err = (x - y).iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
                prop_assert!(err <= 1e-10, "k={} err={err}", a.k);
            }
        }
    }

    #[test]
    fn zero_chain_laws(d in 2usize..40, seed in any::<u64>(), prefix in 0usize..40) {
        // Points with exactly `prefix` leading nonzeros so prog is structural.
        let mut buf = vec![0.0; d];
        NoiseKey::new(seed, 0, 0, 0).fill_normal(&mut buf);
        let p = prefix.min(d);
        let x = Array1::from_iter(buf.iter().enumerate().map(|(j, &v)| if j < p { v * 2.0 } else { 0.0 }));
        let px = prog(x.view());
        prop_assert!(prog(grad_h(x.view()).view()) <= px + 1);
        if px % 2 == 1 {
            prop_assert!(prog(grad_h1(x.view()).view()) <= px);
        } else {
            prop_assert!(prog(grad_h2(x.view()).view()) <= px);
        }
    }

    #[test]
    fn zero_chain_smoothness(d in 2usize..20, seed in any::<u64>()) {
        let mut a = vec![0.0; d];
        let mut b = vec![0.0; d];
        NoiseKey::new(seed, 0, 0, 0).fill_normal(&mut a);
        NoiseKey::new(seed, 1, 0, 0).fill_normal(&mut b);
        let x = Array1::from(a);
        let dir = Array1::from(b);
        let step = NoiseKey::new(seed, 2, 0, 0).rng().random_range(1e-3..1.0) / dir.dot(&dir).sqrt();
        let y = &x + &(dir * step);
        let dg = grad_h(x.view()) - grad_h(y.view());
        let dx = &x - &y;
        prop_assert!(dg.dot(&dg).sqrt() <= L0 * dx.dot(&dx).sqrt() * (1.0 + 1e-12));
    }
}

#[test]
fn skewed_family_matches_closed_form() {
    for n in 2..=20 {
        let w = build_skewed_family(n, 0.0).unwrap();
        for i in 0..n {
            for j in 0..n {
                let expect = if j == n - 1 && i == 0 {
                    1.0
                } else if i == 0 || i == j + 1 {
                    0.5
                } else {
                    0.0
                };
                assert_eq!(w.get(i, j), expect, "n={n} ({i},{j})");
            }
        }
    }
}

#[test]
fn skewness_is_power_of_two_up_to_thirty() {
    for n in 2..=30 {
        let p = EquilibriumProfile::compute(&build_skewed_family(n, 0.0).unwrap()).unwrap();
        let expect = 2f64.powi(n as i32 - 1);
        assert!((p.kappa_pi / expect - 1.0).abs() <= 1e-9, "n={n}: {}", p.kappa_pi);
    }
}

#[test]
fn doubly_stochastic_metrics_agree() {
    for n in 2..=12 {
        let w = skewnet_core::graph::build_ring(n).unwrap();
        let p = EquilibriumProfile::compute(&w).unwrap();
        assert!((p.kappa_pi - 1.0).abs() <= 1e-9);
        let a = spectral_gap_beta(&w, &p.pi).unwrap();
        let b = two_norm_deviation(&w, &p.pi).unwrap();
        assert!((a - b).abs() <= 1e-9, "n={n}: {a} vs {b}");
    }
}

#[test]
fn spectral_gap_below_one_on_hundred_matrices() {
    let mut rng = NoiseKey::new(77, 0, 0, 0).rng();
    for t in 0..100 {
        let n = rng.random_range(2..=20);
        let extra: Vec<(usize, usize)> = (0..rng.random_range(0..2 * n))
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
            .collect();
        let w = random_matrix(n, &extra, t, rng.random_range(0.0..0.9));
        let p = EquilibriumProfile::compute(&w).unwrap();
        assert!(p.beta_pi < 1.0, "trial {t}: beta={}", p.beta_pi);
    }
}

#[test]
fn diging_runs_are_deterministic() {
    let w = build_skewed_family(6, 0.2).unwrap();
    let p = gen_quadratic(6, 3, 4.0, 1.0, 3).unwrap().with_noise(0.1);
    let opts = RunOptions::new(80, 11);
    let a = skewnet_core::optimizer::run_push_diging(&p, &w, 0.02, &opts).unwrap();
    let b = skewnet_core::optimizer::run_push_diging(&p, &w, 0.02, &opts).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn preset_reruns_are_byte_identical_and_metadata_matches() {
    let mut cfgs = preset("fig4-right", &[0, 1]).unwrap().configs;
    cfgs.truncate(2);
    for c in &mut cfgs {
        c.k = 40;
    }
    let first = run_many(&cfgs, 1).unwrap();
    let second = run_many(&cfgs, 2).unwrap();
    for (ga, gb) in first.iter().zip(&second) {
        for (a, b) in ga.iter().zip(gb) {
            assert_eq!(a.to_csv(), b.to_csv());
        }
    }
    for (cfg, group) in cfgs.iter().zip(&first) {
        let fresh = EquilibriumProfile::compute(&cfg.build_matrix().unwrap()).unwrap();
        for out in group {
            let meta = out.meta();
            assert!((meta.beta_pi.unwrap() - fresh.beta_pi).abs() <= 1e-9);
            assert!((meta.kappa_pi.unwrap() - fresh.kappa_pi).abs() <= 1e-9 * fresh.kappa_pi);
        }
    }
}
