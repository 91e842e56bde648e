mod common;

use std::collections::BTreeMap;

use catclust_core::cftp::{run_cftp, BoundingState, CftpConfig, Sweep};
use catclust_core::enumerate::{empirical, enumerate_posterior, enumerate_posterior_urn, total_variation};
use catclust_core::exec::{Executor, Sequential};
use catclust_core::ledger::{EpochPlan, RandomLedger};
use catclust_core::model::{CategoricalPanel, PriorConfig, Square};
use catclust_core::partition::{all_partitions, arbitrary_theta, canonical, relabel, relabel_recursive};
use common::chi_square;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Reversed;

impl Executor for Reversed {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let mut out: Vec<T> = (0..n).rev().map(f).collect();
        out.reverse();
        out
    }
}

fn small_panel() -> CategoricalPanel {
    CategoricalPanel::new(vec![vec![1, 1, 1, 2], vec![2, 2, 1, 2], vec![1, 2, 1, 1]], 2).unwrap()
}

fn random_state(rng: &mut StdRng, n: usize, m: usize) -> (Vec<usize>, Vec<usize>) {
    let z = (0..n).map(|_| rng.random_range(1..=m)).collect();
    let parts = all_partitions(m);
    (z, parts[rng.random_range(0..parts.len())].clone())
}

#[test]
fn exact_chains_stay_inside_the_bounds() {
    let panel = small_panel();
    let mut rng = StdRng::seed_from_u64(8);
    for (case, prior) in [PriorConfig::fixed_gamma(2, 3, 1.0, 1.5), PriorConfig::broadcast(2, 3, 1.0, 2.0, 1.0, (0.8, 2.5))]
        .into_iter()
        .enumerate()
    {
        let config = CftpConfig::default();
        let sweep = Sweep { panel: &panel, prior: &prior, ledger: RandomLedger::new(31 + case as u64), config: &config, exec: &Sequential };
        let (lo, hi) = prior.gamma_support.get(0, 0);
        let mut chains: Vec<_> = (0..20)
            .map(|_| {
                let (z, s) = random_state(&mut rng, panel.n(), prior.m);
                (z, s, Square::filled(2, rng.random_range(lo..=hi)))
            })
            .collect();
        let mut state = BoundingState::full(panel.n(), prior.m, config.partition_set_limit);
        for t in -7..=0 {
            sweep.bounding_step(t, &mut state).unwrap();
            for (z, s, g) in chains.iter_mut() {
                sweep.exact_step(t, z, s, g).unwrap();
                assert!(state.contains(z, s), "case {case}, t {t}: {z:?} {s:?} outside {state:?}");
            }
        }
    }
}

#[test]
fn every_chain_from_the_winning_epoch_lands_on_the_output() {
    let panel = small_panel();
    let prior = PriorConfig::fixed_gamma(2, 3, 2.0, 1.0);
    let config = CftpConfig::default();
    let mut rng = StdRng::seed_from_u64(2);
    for seed in 0..5 {
        let ledger = RandomLedger::new(seed);
        let out = run_cftp(&panel, &prior, &config, &ledger, &Sequential).unwrap();
        let sweep = Sweep { panel: &panel, prior: &prior, ledger, config: &config, exec: &Sequential };
        let start = EpochPlan::new(out.epochs).start();
        assert!(out.coalescence_time > start && out.coalescence_time <= 0);
        for _ in 0..10 {
            let (mut z, mut s) = random_state(&mut rng, panel.n(), prior.m);
            for t in start + 1..=0 {
                sweep.exact_step(t, &mut z, &mut s, &prior.gamma_center()).unwrap();
            }
            assert_eq!((z, s), (out.z.clone(), out.s.clone()), "seed {seed}");
        }
    }
}

#[test]
fn executor_order_does_not_matter() {
    let panel = small_panel();
    let prior = PriorConfig::fixed_gamma(2, 3, 1.0, 1.0);
    let config = CftpConfig::default();
    for seed in 0..4 {
        let ledger = RandomLedger::new(100 + seed);
        let a = run_cftp(&panel, &prior, &config, &ledger, &Sequential).unwrap();
        let b = run_cftp(&panel, &prior, &config, &ledger, &Reversed).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn relabeling_rules_agree() {
    let mut rng = StdRng::seed_from_u64(4);
    for _ in 0..1000 {
        let m = rng.random_range(1..8);
        let c: Vec<usize> = (0..m).map(|_| rng.random_range(1..=m)).collect();
        let s = relabel(&c, &arbitrary_theta(&c, 2)).unwrap();
        assert_eq!(s, relabel_recursive(&c));
        assert_eq!(s, canonical(&c));
        // a relabeled copy of C gives the same S
        let shift: Vec<usize> = c.iter().map(|&x| (x * 7 + 3) % 11 + 1).collect();
        assert_eq!(relabel_recursive(&shift), s);
    }
}

#[test]
fn single_series_matches_enumeration() {
    let panel = CategoricalPanel::new(vec![vec![1, 2, 2, 1, 2]], 2).unwrap();
    let prior = PriorConfig::fixed_gamma(2, 3, 1.5, 1.0);
    let exact = enumerate_posterior(&panel, &prior).unwrap();
    let base = RandomLedger::new(6);
    let n = 3000;
    let draws: Vec<usize> =
        (0..n).map(|r| run_cftp(&panel, &prior, &CftpConfig::default(), &base.fork(r), &Sequential).unwrap().k).collect();
    let mut counts = vec![0.0; 3];
    for k in draws {
        counts[k - 1] += 1.0;
    }
    let expected: Vec<f64> = exact.k.iter().map(|p| p * n as f64).collect();
    let (stat, p) = chi_square(&counts, &expected);
    assert!(p > 0.001, "chi2 {stat}, p {p}: {counts:?} vs {expected:?}");
}

#[test]
fn two_oracles_agree() {
    let mut rng = StdRng::seed_from_u64(12);
    for _ in 0..20 {
        let n = rng.random_range(1..4);
        let y = (0..n).map(|_| (0..rng.random_range(1..6)).map(|_| rng.random_range(1..=2)).collect()).collect();
        let panel = CategoricalPanel::new(y, 2).unwrap();
        let prior = PriorConfig::fixed_gamma(2, rng.random_range(1..4), rng.random_range(0.3..5.0), rng.random_range(0.5..3.0));
        let a = enumerate_posterior(&panel, &prior).unwrap();
        let b = enumerate_posterior_urn(&panel, &prior).unwrap();
        assert!(total_variation(&a.zs, &b.zs) < 1e-10);
        for (x, y) in a.k.iter().zip(&b.k) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn joint_draws_match_enumeration() {
    let panel = CategoricalPanel::new(vec![vec![1, 1, 1, 2, 1], vec![2, 1, 2, 2]], 2).unwrap();
    let prior = PriorConfig::fixed_gamma(2, 2, 1.0, 1.0);
    let exact = enumerate_posterior(&panel, &prior).unwrap();
    let base = RandomLedger::new(77);
    let n = 3000;
    let draws: Vec<(Vec<usize>, Vec<usize>)> = (0..n)
        .map(|r| {
            let o = run_cftp(&panel, &prior, &CftpConfig::default(), &base.fork(r), &Sequential).unwrap();
            (o.z, o.s)
        })
        .collect();
    let emp = empirical(&draws);
    let keys: Vec<_> = exact.zs.keys().cloned().collect();
    let observed: Vec<f64> = keys.iter().map(|k| emp.get(k).copied().unwrap_or(0.0) * n as f64).collect();
    let expected: Vec<f64> = keys.iter().map(|k| exact.zs[k] * n as f64).collect();
    assert!(emp.keys().all(|k| exact.zs.contains_key(k)));
    let (stat, p) = chi_square(&observed, &expected);
    assert!(p > 0.001, "chi2 {stat}, p {p}");
    let by_k: BTreeMap<usize, f64> = (1..=2).map(|k| (k, exact.k[k - 1])).collect();
    let emp_k = empirical(&draws.iter().map(|(_, s)| *s.iter().max().unwrap()).collect::<Vec<_>>());
    assert!(total_variation(&by_k, &emp_k) < 0.05);
}

#[test]
fn free_gamma_run_completes() {
    let panel = CategoricalPanel::new(vec![vec![1, 1, 2, 1], vec![2, 2, 1, 2]], 2).unwrap();
    let mut prior = PriorConfig::broadcast(2, 2, 1.0, 2.0, 1.0, (1.8, 2.2));
    prior.stick_support = (0.2, 0.8);
    let out = run_cftp(&panel, &prior, &CftpConfig::default(), &RandomLedger::new(5), &Sequential).unwrap();
    for s in 0..2 {
        for t in 0..2 {
            let g = out.gamma.get(s, t);
            assert!((1.8..=2.2).contains(&g), "{g}");
        }
    }
    assert_eq!(out.phi.len(), out.k);
    assert!(out.log_epsilon < 0.0 && out.log_epsilon.is_finite());
}

#[test]
fn free_gamma_needs_an_interior_stick_support() {
    let panel = CategoricalPanel::new(vec![vec![1, 1, 2, 1], vec![2, 2, 1, 2]], 2).unwrap();
    let prior = PriorConfig::broadcast(2, 2, 1.0, 2.0, 1.0, (1.0, 4.0));
    // sticks pinned to the full interval are rejected when gamma is free
    let err = run_cftp(&panel, &prior, &CftpConfig::default(), &RandomLedger::new(5), &Sequential).unwrap_err();
    assert!(err.to_string().contains("stick_support"), "{err}");
}
