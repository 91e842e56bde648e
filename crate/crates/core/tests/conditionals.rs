mod common;

use catclust_core::conditionals::{
    cluster_counts, d_log_fc_gamma, dirichlet_moments, gamma_marginal_diag, gamma_marginal_positivity_search,
    log_dm_kernel, log_dm_marginal, log_fc_gamma, marginalized_z_weights, phi_marginal_beta, sample_phi, WeightVector,
};
use catclust_core::ledger::KeyedRng;
use catclust_core::model::{loglik_series, CategoricalPanel, ChainState, CountMatrix, PriorConfig, Square, TransitionMatrix};
use catclust_core::special::second_difference_violations;
use common::mean_and_se;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Gamma};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

fn draw_row(params: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    let g: Vec<f64> = params.iter().map(|&a| Gamma::new(a, 1.0).unwrap().sample(rng)).collect();
    let t: f64 = g.iter().sum();
    g.iter().map(|x| x / t).collect()
}

proptest! {
    #[test]
    fn heterogeneity_identity(params in prop::collection::vec(0.1f64..30.0, 2..6), t in 0usize..6) {
        let t = t % params.len();
        let m = dirichlet_moments(&params, t);
        let lhs = m.variance / (m.zeta * (1.0 - m.zeta));
        prop_assert!((lhs - 1.0 / (1.0 + m.heterogeneity)).abs() < 1e-12);
    }

    #[test]
    fn weights_ignore_constant_shift(w in prop::collection::vec(-50.0f64..50.0, 1..8), c in -500.0f64..500.0) {
        let a = WeightVector::from_log(w.clone()).unwrap();
        let b = WeightVector::from_log(w.iter().map(|x| x + c).collect()).unwrap();
        prop_assert!((a.normalized.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        for (x, y) in a.normalized.iter().zip(&b.normalized) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn marginalized_z_weight_matches_monte_carlo() {
    // Series 0 against two clusters built from the other series.
    let panel = CategoricalPanel::new(vec![vec![1, 2, 2, 1], vec![1, 1, 1, 2], vec![2, 2, 1, 2]], 2).unwrap();
    let gamma = Square::filled(2, 1.5);
    let z = vec![1, 1, 2];
    let s = vec![1, 2];
    let exact = marginalized_z_weights(0, &z, &s, &gamma, &panel).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    let n = 100_000;
    let mut per_slot = Vec::new();
    for slot in 1..=2 {
        let mut others = CountMatrix::zeros(2);
        for i in 1..3 {
            if z[i] == slot {
                others.add_assign(panel.counts(i));
            }
        }
        let vals: Vec<f64> = (0..n)
            .map(|_| {
                let rows: Vec<Vec<f64>> =
                    (0..2).map(|r| draw_row(&[others.get(r, 0) as f64 + 1.5, others.get(r, 1) as f64 + 1.5], &mut rng)).collect();
                loglik_series(panel.counts(0), &TransitionMatrix::from_rows(&rows).unwrap()).exp()
            })
            .collect();
        let (m, se) = mean_and_se(&vals);
        let mut with = others.clone();
        with.add_assign(panel.counts(0));
        let closed = (log_dm_kernel(&with, &gamma) - log_dm_kernel(&others, &gamma)).exp();
        assert!((m - closed).abs() < 3.0 * se, "slot {slot}: {m} vs {closed} (se {se})");
        per_slot.push(m);
    }
    let p1 = per_slot[0] / (per_slot[0] + per_slot[1]);
    assert!((p1 - exact.normalized[0]).abs() < 0.01);
}

#[test]
fn single_series_marginal_is_dirichlet_multinomial() {
    let panel = CategoricalPanel::new(vec![vec![1, 2, 2, 1, 1, 1, 2]], 2).unwrap();
    let n = panel.counts(0);
    let (g1, g2) = (1.3, 2.1);
    let gamma = Square::from_rows(&[vec![g1, g2], vec![g1, g2]]).unwrap();
    let oracle: f64 = (0..2)
        .map(|r| ln_beta(n.get(r, 0) as f64 + g1, n.get(r, 1) as f64 + g2) - ln_beta(g1, g2))
        .sum();
    assert!((log_dm_marginal(n, &gamma) - oracle).abs() < 1e-10);
    let z = vec![1];
    assert!((log_dm_marginal(&cluster_counts(&panel, &z, &[1], 1), &gamma) - oracle).abs() < 1e-10);
}

#[test]
fn sample_phi_moments() {
    let panel = CategoricalPanel::new(vec![vec![1, 1, 2, 1, 2, 2, 2], vec![2, 1, 1, 1]], 2).unwrap();
    let state = ChainState {
        z: vec![1, 1],
        c: vec![1],
        s: vec![1],
        phi: vec![TransitionMatrix::uniform(2)],
        gamma: Square::filled(2, 1.7),
    };
    let mut rng = KeyedRng::new(5);
    let draws: Vec<f64> = (0..100_000).map(|_| sample_phi(1, &state, &panel, &mut rng).unwrap().get(0, 1)).collect();
    let (m, se) = mean_and_se(&draws);
    let (a, b) = phi_marginal_beta(1, 0, 1, &state, &panel);
    assert!((m - a / (a + b)).abs() < 3.0 * se, "{m} vs {}", a / (a + b));

    let empty = ChainState { z: vec![2, 2], c: vec![1, 2], s: vec![1, 2], phi: vec![TransitionMatrix::uniform(3); 2], gamma: Square::filled(3, 0.8) };
    let p3 = CategoricalPanel::new(vec![vec![1, 2], vec![3, 1]], 3).unwrap();
    let rows: Vec<f64> = (0..10_000).map(|_| sample_phi(1, &empty, &p3, &mut rng).unwrap().get(2, 0)).collect();
    assert!((mean_and_se(&rows).0 - 1.0 / 3.0).abs() < 0.01);

    let long = CategoricalPanel::new(vec![vec![1; 5000]], 2).unwrap();
    let st = ChainState { z: vec![1], c: vec![1], s: vec![1], phi: vec![TransitionMatrix::uniform(2)], gamma: Square::filled(2, 1.0) };
    assert!(sample_phi(1, &st, &long, &mut rng).unwrap().get(0, 0) > 0.99);
}

#[test]
fn gamma_conditional_matches_term_by_term_evaluation() {
    let prior = PriorConfig::broadcast(2, 2, 1.0, 2.5, 0.7, (0.5, 9.0));
    let phi = vec![
        TransitionMatrix::from_rows(&[vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap(),
        TransitionMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap(),
    ];
    let gamma = Square::from_rows(&[vec![1.1, 2.2], vec![3.3, 0.9]]).unwrap();
    let x = 1.7;
    let got = log_fc_gamma(x, 0, 1, &phi, &gamma, &prior).unwrap();
    let oracle = (x - 1.0) * (0.7f64.ln() + 0.1f64.ln()) + 2.0 * (ln_gamma(x + 1.1) - ln_gamma(x)) + 1.5 * x.ln() - 0.7 * x;
    assert!((got - oracle).abs() < 1e-10);
    let h = 1e-6;
    let num = (log_fc_gamma(x + h, 0, 1, &phi, &gamma, &prior).unwrap() - log_fc_gamma(x - h, 0, 1, &phi, &gamma, &prior).unwrap()) / (2.0 * h);
    assert!((num - d_log_fc_gamma(x, 0, 1, &phi, &gamma, &prior)).abs() < 1e-6);
    assert!(log_fc_gamma(10.0, 0, 1, &phi, &gamma, &prior).is_err());
}

#[test]
fn prior_only_gamma_limit() {
    let prior = PriorConfig::broadcast(2, 1, 1.0, 2.0, 1.0, (0.1, 20.0));
    let gamma = Square::filled(2, 1.0);
    let f = |x: f64| log_fc_gamma(x, 1, 0, &[], &gamma, &prior).unwrap();
    for &x in &[0.5, 2.0, 7.0] {
        assert!(((f(x) - f(1.0)) - ((x.ln() - x) - (0.0 - 1.0))).abs() < 1e-12);
    }
}

#[test]
fn log_concavity_scans() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(21);
    for _ in 0..100 {
        let a: f64 = rng.random_range(1.0..20.0) + rng.random_range(0.01..5.0);
        let b: f64 = rng.random_range(1.01..30.0);
        let beta = |x: f64| (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln();
        assert!(second_difference_violations(beta, 0.0, 1.0, 100, 1e-8).is_empty());
        let prior = PriorConfig::broadcast(2, 3, 1.0, rng.random_range(1.01..6.0), rng.random_range(0.1..3.0), (0.05, 30.0));
        let phi: Vec<TransitionMatrix> = (0..rng.random_range(1..4))
            .map(|_| {
                let p: f64 = rng.random_range(0.01..0.99);
                let q: f64 = rng.random_range(0.01..0.99);
                TransitionMatrix::from_rows(&[vec![p, 1.0 - p], vec![q, 1.0 - q]]).unwrap()
            })
            .collect();
        let gamma = Square::from_rows(&[vec![rng.random_range(0.1..5.0), rng.random_range(0.1..5.0)], vec![1.0, 1.0]]).unwrap();
        let f = |x: f64| log_fc_gamma(x, 0, 0, &phi, &gamma, &prior).unwrap();
        assert!(second_difference_violations(f, 0.05, 30.0, 100, 1e-8).is_empty());
    }
}

#[test]
fn marginalized_gamma_is_not_log_concave() {
    let xs: Vec<f64> = (1..200).map(|i| i as f64 * 0.05).collect();
    let w = gamma_marginal_positivity_search(&xs, &[0.5, 1.0, 2.0, 5.0], 6, 1e-10).expect("a witness");
    assert!(w.b > 0 && w.d2_log_h > 0.0);
    for y in 0..6 {
        for &x in &xs {
            assert!(gamma_marginal_diag(x, 1.5, y, 0).d2_log_h <= 1e-12);
        }
    }
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    for _ in 0..100 {
        let d = gamma_marginal_diag(rng.random_range(0.1..10.0), rng.random_range(0.1..10.0), rng.random_range(0..8), rng.random_range(0..8));
        assert!((d.h - d.h_ratio).abs() <= 1e-10 * d.h_ratio.abs());
    }
}
