//! Exact posterior over allocations and configurations by brute force, for
//! small instances with pinned gamma.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::conditionals::{cluster_counts, log_dm_marginal};
use crate::error::{Error, Result};
use crate::math::{exp, ln_gamma, log};
use crate::model::{CategoricalPanel, PriorConfig, Square};
use crate::partition::{all_partitions, bell, distinct_count};
use crate::special::log_sum_exp;

/// Largest `M^n * Bell(M)` the oracle accepts.
pub const ORACLE_LIMIT: f64 = 1e6;

/// Exact posterior masses.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub z: BTreeMap<Vec<usize>, f64>,
    pub zs: BTreeMap<(Vec<usize>, Vec<usize>), f64>,
    /// Entry `k - 1` is the mass of `k` distinct clusters among the `M` slots.
    pub k: Vec<f64>,
}

fn pinned_gamma(prior: &PriorConfig) -> Result<Square<f64>> {
    if !prior.all_gamma_fixed() {
        return Err(Error::Config("the enumeration oracle needs every gamma pinned".into()));
    }
    Ok(prior.gamma_center())
}

fn guard(n: usize, m: usize) -> Result<()> {
    let terms = libm::pow(m as f64, n as f64) * bell(m);
    if terms > ORACLE_LIMIT {
        return Err(Error::OracleTooLarge { terms, limit: ORACLE_LIMIT });
    }
    Ok(())
}

/// `ln` of the Chinese-restaurant probability of a configuration of `M` slots.
pub fn log_crp(s: &[usize], alpha: f64) -> f64 {
    let k = distinct_count(s);
    let mut sizes = vec![0usize; k + 1];
    for &l in s {
        sizes[l] += 1;
    }
    let mut acc = k as f64 * log(alpha);
    for &m in &sizes[1..] {
        acc += ln_gamma(m as f64);
    }
    for i in 0..s.len() {
        acc -= log(alpha + i as f64);
    }
    acc
}

/// Every allocation vector in `{1..m}^n`, last coordinate fastest.
fn all_allocations(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![1usize; n];
    loop {
        out.push(cur.clone());
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < m {
                cur[i] += 1;
                break;
            }
            cur[i] = 1;
        }
    }
}

fn finish(entries: Vec<((Vec<usize>, Vec<usize>), f64)>, m: usize) -> Posterior {
    let logs: Vec<f64> = entries.iter().map(|e| e.1).collect();
    let total = log_sum_exp(&logs);
    let mut z = BTreeMap::new();
    let mut zs = BTreeMap::new();
    let mut k = vec![0.0; m];
    for ((zz, s), lw) in entries {
        let p = exp(lw - total);
        *z.entry(zz.clone()).or_insert(0.0) += p;
        k[distinct_count(&s) - 1] += p;
        zs.insert((zz, s), p);
    }
    Posterior { z, zs, k }
}

/// Exact posterior with the transition matrices integrated out in closed form.
pub fn enumerate_posterior(panel: &CategoricalPanel, prior: &PriorConfig) -> Result<Posterior> {
    let gamma = pinned_gamma(prior)?;
    let (n, m) = (panel.n(), prior.m);
    guard(n, m)?;
    let parts = all_partitions(m);
    let mut entries = Vec::with_capacity(parts.len() * libm::pow(m as f64, n as f64) as usize);
    for z in all_allocations(n, m) {
        for s in &parts {
            let mut lw = log_crp(s, prior.alpha);
            for l in 1..=distinct_count(s) {
                lw += log_dm_marginal(&cluster_counts(panel, &z, s, l), &gamma);
            }
            entries.push(((z.clone(), s.clone()), lw));
        }
    }
    Ok(finish(entries, m))
}

/// Same posterior computed another way: configurations are generated by the
/// sequential urn over slots and each cluster's likelihood is accumulated
/// transition by transition from Polya-urn predictive probabilities.
pub fn enumerate_posterior_urn(panel: &CategoricalPanel, prior: &PriorConfig) -> Result<Posterior> {
    let gamma = pinned_gamma(prior)?;
    let (n, m, kk) = (panel.n(), prior.m, panel.k());
    guard(n, m)?;
    let mut configs: Vec<(Vec<usize>, f64)> = vec![(vec![1], 0.0)];
    for j in 1..m {
        let mut next = Vec::new();
        for (c, lp) in configs {
            let top = c.iter().copied().max().unwrap_or(0);
            for l in 1..=top + 1 {
                let w = if l <= top { c.iter().filter(|&&x| x == l).count() as f64 } else { prior.alpha };
                let mut c2 = c.clone();
                c2.push(l);
                next.push((c2, lp + log(w / (prior.alpha + j as f64))));
            }
        }
        configs = next;
    }
    let mut entries = Vec::new();
    for (s, lp) in &configs {
        for z in all_allocations(n, m) {
            let mut lw = *lp;
            for l in 1..=distinct_count(s) {
                let mut seen = vec![0.0f64; kk * kk];
                for (i, &zi) in z.iter().enumerate() {
                    if s[zi - 1] != l {
                        continue;
                    }
                    for w in panel.series(i).windows(2) {
                        let (a, b) = (w[0] as usize - 1, w[1] as usize - 1);
                        let row: f64 = (0..kk).map(|t| seen[a * kk + t] + gamma.get(a, t)).sum();
                        lw += log((seen[a * kk + b] + gamma.get(a, b)) / row);
                        seen[a * kk + b] += 1.0;
                    }
                }
            }
            entries.push(((z, s.clone()), lw));
        }
    }
    Ok(finish(entries, m))
}

/// Total variation distance between two finite distributions.
pub fn total_variation<K: Ord>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> f64 {
    let mut acc = 0.0;
    for (key, &a) in p {
        acc += (a - q.get(key).copied().unwrap_or(0.0)).abs();
    }
    for (key, &b) in q {
        if !p.contains_key(key) {
            acc += b.abs();
        }
    }
    0.5 * acc
}

/// Empirical distribution of a list of outcomes.
pub fn empirical<K: Ord + Clone>(draws: &[K]) -> BTreeMap<K, f64> {
    let mut out = BTreeMap::new();
    let w = 1.0 / draws.len().max(1) as f64;
    for d in draws {
        *out.entry(d.clone()).or_insert(0.0) += w;
    }
    out
}
