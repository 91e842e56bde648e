//! Checks of the log-concavity conditions, the kernel envelopes and the
//! bounding CDFs on random or user-chosen configurations.

use catclust_core::anneal::AnnealConfig;
use catclust_core::bounds::{
    bound_c_cdf, bound_z_cdf, collapsed_c_cdf, collapsed_z_cdf, BoundKeys, PartitionBound, ZBox,
};
use catclust_core::conditionals::{
    gamma_marginal_positivity_search, log_fc_gamma, log_fc_phi_elem, phi_marginal_beta, ConvexityWitness,
};
use catclust_core::exec::Executor;
use catclust_core::ledger::{KeyedRng, RandomLedger};
use catclust_core::model::{CategoricalPanel, ChainState, PriorConfig, Square, TransitionMatrix};
use catclust_core::partition::{all_partitions, bell, canonical, distinct_count};
use catclust_core::perfect::{build_kernel, log_kernel_density, KernelConfig, LogConcaveSystem, MixtureKernel};
use catclust_core::phigamma::PhiGammaSystem;
use catclust_core::special::second_difference_violations;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

const SCAN_POINTS: usize = 100;
const SCAN_TOL: f64 = 1e-8;

/// Random panel with `n` series of length 2..=12 over `k` states.
pub fn random_panel(k: usize, n: usize, rng: &mut KeyedRng) -> CategoricalPanel {
    let series = (0..n)
        .map(|_| (0..rng.random_range(2..=12)).map(|_| rng.random_range(1..=k as u32)).collect())
        .collect();
    CategoricalPanel::new(series, k).expect("states drawn in range")
}

fn random_row(k: usize, rng: &mut KeyedRng) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn random_matrix(k: usize, rng: &mut KeyedRng) -> TransitionMatrix {
    let rows: Vec<Vec<f64>> = (0..k).map(|_| random_row(k, rng)).collect();
    TransitionMatrix::from_rows(&rows).expect("rows are stochastic")
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub x: f64,
    pub a: f64,
    pub y: u32,
    pub b: u32,
    pub d2_log_h: f64,
}

impl From<ConvexityWitness> for Witness {
    fn from(w: ConvexityWitness) -> Self {
        Self { x: w.x, a: w.a, y: w.y, b: w.b, d2_log_h: w.d2_log_h }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LogConcavityReport {
    pub configurations: usize,
    /// Scans of the elementwise transition-probability conditionals.
    pub phi_scans: usize,
    pub phi_violations: usize,
    /// Scans of the Beta marginals of single transition probabilities.
    pub marginal_scans: usize,
    pub marginal_violations: usize,
    /// Scans of the gamma conditionals.
    pub gamma_scans: usize,
    pub gamma_violations: usize,
    /// Where the gamma conditional with the matrices integrated out is log-convex.
    pub witness: Option<Witness>,
}

impl LogConcavityReport {
    pub fn violations(&self) -> usize {
        self.phi_violations + self.marginal_violations + self.gamma_violations
    }
}

/// Second-difference scans on `configurations` random states with
/// `counts + gamma > 1`, plus the positivity search. The gamma scans use the
/// hyperparameters of `prior` over `(0.05, 30)`.
pub fn logconcavity(prior: &PriorConfig, configurations: usize, seed: u64) -> Result<LogConcavityReport> {
    let (k, m) = (prior.k(), prior.m);
    let scan_prior = PriorConfig { gamma_support: Square::filled(k, (0.05, 30.0)), ..prior.clone() };
    if k < 2 {
        return Err(Error::Config("log-concavity scans need k >= 2".into()));
    }
    let mut rng = KeyedRng::new(seed);
    let mut r = LogConcavityReport {
        configurations,
        phi_scans: 0,
        phi_violations: 0,
        marginal_scans: 0,
        marginal_violations: 0,
        gamma_scans: 0,
        gamma_violations: 0,
        witness: None,
    };
    for _ in 0..configurations {
        let panel = random_panel(k, rng.random_range(1..=6), &mut rng);
        let z: Vec<usize> = (0..panel.n()).map(|_| rng.random_range(1..=m)).collect();
        let s = canonical(&(0..m).map(|_| rng.random_range(1..=m)).collect::<Vec<_>>());
        let clusters = distinct_count(&s);
        let mut gamma = Square::filled(k, 1.0);
        for a in 0..k {
            for b in 0..k {
                gamma.set(a, b, rng.random_range(1.01..5.0));
            }
        }
        let phi: Vec<TransitionMatrix> = (0..clusters).map(|_| random_matrix(k, &mut rng)).collect();
        let state = ChainState { z, c: s.clone(), s, phi, gamma };
        for l in 1..=clusters {
            for row in 0..k {
                for t in 0..k - 1 {
                    let others: f64 = (0..k - 1).filter(|&u| u != t).map(|u| state.phi[l - 1].get(row, u)).sum();
                    let f = |x: f64| log_fc_phi_elem(x, l, row, t, &state, &panel).unwrap_or(f64::NEG_INFINITY);
                    r.phi_scans += 1;
                    r.phi_violations += second_difference_violations(f, 0.0, 1.0 - others, SCAN_POINTS, SCAN_TOL).len();
                    let (a, b) = phi_marginal_beta(l, row, t, &state, &panel);
                    let g = |x: f64| (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln();
                    r.marginal_scans += 1;
                    r.marginal_violations += second_difference_violations(g, 0.0, 1.0, SCAN_POINTS, SCAN_TOL).len();
                }
            }
        }
        for a in 0..k {
            for b in 0..k {
                let f = |x: f64| log_fc_gamma(x, a, b, &state.phi, &state.gamma, &scan_prior).unwrap_or(f64::NEG_INFINITY);
                r.gamma_scans += 1;
                r.gamma_violations += second_difference_violations(f, 0.05, 30.0, SCAN_POINTS, SCAN_TOL).len();
            }
        }
    }
    let xs: Vec<f64> = (1..=200).map(|i| i as f64 * 0.05).collect();
    r.witness = gamma_marginal_positivity_search(&xs, &[0.5, 1.0, 2.0, 5.0], 6, 1e-10).map(Witness::from);
    Ok(r)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoordinateEnvelope {
    pub coordinate: String,
    pub epsilon: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinorizationReport {
    pub pairs: usize,
    pub violations: usize,
    /// Largest `ln(eps g(xi)) - ln P(xi | xi')` seen.
    pub max_log_excess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    pub epsilon: f64,
    pub log_epsilon: f64,
    pub eta: f64,
    pub coordinates: Vec<CoordinateEnvelope>,
    pub minorization: MinorizationReport,
}

fn random_point<S: LogConcaveSystem + ?Sized>(system: &S, rng: &mut KeyedRng) -> Vec<f64> {
    (0..system.dim())
        .map(|i| {
            let (lo, hi) = system.support(i);
            if hi > lo { rng.random_range(lo..hi) } else { lo }
        })
        .collect()
}

/// Checks `eps g(xi) <= P(xi | xi')` at `pairs` random pairs of the support,
/// with `slack` on the log scale.
pub fn minorization<S: LogConcaveSystem + ?Sized>(
    system: &S,
    kernel: &MixtureKernel,
    pairs: usize,
    slack: f64,
    rng: &mut KeyedRng,
) -> MinorizationReport {
    let mut report = MinorizationReport { pairs, violations: 0, max_log_excess: f64::NEG_INFINITY };
    for _ in 0..pairs {
        let from = random_point(system, rng);
        let to = random_point(system, rng);
        let excess = kernel.log_eps_g(&to) - log_kernel_density(system, &to, &from);
        report.max_log_excess = report.max_log_excess.max(excess);
        if excess > slack {
            report.violations += 1;
        }
    }
    report
}

/// Builds the transition-matrix/gamma kernel for a given (Z, S) and reports
/// its constants and a minorization probe.
pub fn envelopes<E: Executor>(
    panel: &CategoricalPanel,
    prior: &PriorConfig,
    z: &[usize],
    s: &[usize],
    kernel: &KernelConfig,
    pairs: usize,
    seed: u64,
    exec: &E,
) -> Result<EnvelopeReport> {
    if z.len() != panel.n() || z.iter().any(|&v| v == 0 || v > prior.m) {
        return Err(Error::Input(format!("z must hold {} labels in 1..={}", panel.n(), prior.m)));
    }
    if s.len() != prior.m || canonical(s) != s {
        return Err(Error::Input(format!("s must be a first-appearance vector of length {}", prior.m)));
    }
    let system = PhiGammaSystem::new(z, s, prior, panel)?;
    let ledger = RandomLedger::new(seed);
    let k = build_kernel(&system, kernel, &ledger, 0, exec)?;
    let coordinates = k
        .coords
        .iter()
        .enumerate()
        .map(|(i, c)| CoordinateEnvelope {
            coordinate: system.coordinate_name(i),
            epsilon: c.log_eps.exp(),
            eta: c.log_eta.exp(),
        })
        .collect();
    let mut rng = KeyedRng::new(seed ^ 0x6d69_6e6f);
    let minorization = minorization(&system, &k, pairs, 1e-12, &mut rng);
    Ok(EnvelopeReport { epsilon: k.epsilon(), log_epsilon: k.log_eps, eta: k.eta(), coordinates, minorization })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub configurations: usize,
    pub bounds: usize,
    /// Bounds failing a structural property.
    pub property_failures: usize,
    pub probes: usize,
    /// Probes whose exact CDF left the bounds.
    pub sandwich_failures: usize,
    /// Values widened by the optimizer's own probes.
    pub repairs: usize,
    pub repair_rate: f64,
}

fn random_zbox(n: usize, m: usize, rng: &mut KeyedRng) -> ZBox {
    let mut zb = ZBox::full(n, m);
    for i in 0..n {
        if rng.random_bool(0.5) {
            let v = rng.random_range(1..=m);
            zb.lo[i] = v;
            zb.hi[i] = v;
        } else {
            zb.lo[i] = rng.random_range(1..=m);
            zb.hi[i] = rng.random_range(zb.lo[i]..=m);
        }
    }
    zb
}

fn random_gamma(prior: &PriorConfig, rng: &mut KeyedRng) -> Square<f64> {
    let k = prior.k();
    let mut g = Square::filled(k, 0.0);
    for s in 0..k {
        for t in 0..k {
            let (lo, hi) = prior.gamma_support.get(s, t);
            g.set(s, t, if hi > lo { rng.random_range(lo..=hi) } else { lo });
        }
    }
    g
}

/// Property suite for the z and c bounds on random partially coalesced
/// bounding states, with exact CDFs probed at random feasible points.
pub fn bounds_suite<E: Executor>(
    panel: &CategoricalPanel,
    prior: &PriorConfig,
    anneal: &AnnealConfig,
    configurations: usize,
    probes: usize,
    seed: u64,
    exec: &E,
) -> Result<BoundsReport> {
    let m = prior.m;
    if bell(m) > 4140.0 {
        return Err(Error::Config(format!("the bounds suite enumerates partitions and needs m <= 8, got {m}")));
    }
    let n = panel.n();
    let parts = all_partitions(m);
    let mut rng = KeyedRng::new(seed);
    let ledger = RandomLedger::new(seed);
    let per = probes.div_ceil(configurations.max(1));
    let mut r = BoundsReport {
        configurations,
        bounds: 0,
        property_failures: 0,
        probes: 0,
        sandwich_failures: 0,
        repairs: 0,
        repair_rate: 0.0,
    };
    let mut optimizer_probes = 0usize;
    for case in 0..configurations {
        let zb = random_zbox(n, m, &mut rng);
        let mut members = parts.clone();
        let keep = rng.random_range(1..=members.len());
        while members.len() > keep {
            members.remove(rng.random_range(0..members.len()));
        }
        let sb = PartitionBound::Set(members.clone());
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..m);
        let s_fixed = members[rng.random_range(0..members.len())].clone();
        let keys = |coord: u64| BoundKeys { ledger, time: -(case as i64) - 1, coord };
        let zpair = bound_z_cdf(i, &zb, &sb, prior, panel, keys(0), anneal, exec)?;
        let cpair = bound_c_cdf(j, &zb, &s_fixed, prior, panel, keys(1), anneal, exec)?;
        for pair in [&zpair, &cpair] {
            r.bounds += 1;
            r.repairs += pair.repairs;
            optimizer_probes += anneal.probes;
            if pair.check().is_err() {
                r.property_failures += 1;
            }
        }
        for _ in 0..per {
            if r.probes >= probes {
                break;
            }
            let z: Vec<usize> = (0..n).map(|v| rng.random_range(zb.lo[v]..=zb.hi[v])).collect();
            let s = &members[rng.random_range(0..members.len())];
            let g = random_gamma(prior, &mut rng);
            let zc = collapsed_z_cdf(i, &z, s, &g, panel)?;
            let cc = collapsed_c_cdf(j, &z, &s_fixed, &g, panel, prior.alpha)?;
            r.probes += 1;
            if !zpair.covers(&zc) || !cpair.covers(&cc) {
                r.sandwich_failures += 1;
            }
        }
    }
    if r.repairs > 0 {
        log::warn!("{} bound values were widened by optimizer probes", r.repairs);
    }
    r.repair_rate = if optimizer_probes > 0 { r.repairs as f64 / optimizer_probes as f64 } else { 0.0 };
    Ok(r)
}
