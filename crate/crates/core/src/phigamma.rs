//! Joint perfect draw of the transition matrices and their Dirichlet
//! parameters given the allocations and the configuration.
//!
//! Each row of a cluster's matrix is written in stick-breaking form:
//! `phi_t = V_t prod_{u<t} (1 - V_u)` for `t < K-1`, the last entry taking
//! the remaining mass. Given gamma the fractions are independent Beta
//! variables; gamma given the matrices follows its usual full conditional.

use alloc::format;
use alloc::vec::Vec;

use rand_distr::{Beta, Distribution};

use crate::conditionals::{cluster_counts, gamma_fc_derivative, gamma_fc_terms};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::ledger::{KeyedRng, RandomLedger, Stream};
use crate::math::{log, log1p};
use crate::model::{CategoricalPanel, CountMatrix, PriorConfig, Square, TransitionMatrix};
use crate::partition::distinct_count;
use crate::perfect::{build_kernel, perfect_sample, KernelConfig, LogConcaveSystem, PerfectStreams};
use crate::special::{log_beta, LogQuadrature};

/// `c ln x` with `0 ln 0 = 0`.
fn xlogy(c: f64, x: f64) -> f64 {
    if c == 0.0 { 0.0 } else { c * log(x) }
}

fn xlog1my(c: f64, x: f64) -> f64 {
    if c == 0.0 { 0.0 } else { c * log1p(-x) }
}

/// Row-stochastic matrix from `K (K-1)` stick fractions, row-major.
pub fn phi_from_sticks(k: usize, sticks: &[f64]) -> Result<TransitionMatrix> {
    let mut m = Square::filled(k, 0.0);
    for s in 0..k {
        let mut left = 1.0;
        for t in 0..k - 1 {
            let v = sticks[s * (k - 1) + t];
            m.set(s, t, left * v);
            left *= 1.0 - v;
        }
        m.set(s, k - 1, left);
        let drift = 1.0 - m.row(s).iter().sum::<f64>();
        let big = (0..k).max_by(|&a, &b| m.get(s, a).total_cmp(&m.get(s, b))).unwrap_or(0);
        m.set(s, big, (m.get(s, big) + drift).max(0.0));
    }
    TransitionMatrix::new(m)
}

/// Inverse of [`phi_from_sticks`]; a stick after an exhausted row is 0.
pub fn sticks_from_phi(phi: &TransitionMatrix) -> Vec<f64> {
    let k = phi.k();
    let mut out = Vec::with_capacity(k * (k - 1));
    for s in 0..k {
        let mut left = 1.0;
        for t in 0..k - 1 {
            let p = phi.get(s, t);
            let v = if left > 0.0 { (p / left).clamp(0.0, 1.0) } else { 0.0 };
            out.push(v);
            left -= p;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coord {
    Stick { l: usize, s: usize, t: usize },
    Gamma { s: usize, t: usize },
}

/// The (Phi, gamma) conditional law given (Z, S) as a coordinate system.
#[derive(Debug, Clone)]
pub struct PhiGammaSystem<'a> {
    prior: &'a PriorConfig,
    states: usize,
    clusters: Vec<CountMatrix>,
    coords: Vec<Coord>,
    /// Index of each free gamma coordinate, `None` when pinned.
    gamma_index: Square<Option<usize>>,
    quadrature: LogQuadrature,
}

impl<'a> PhiGammaSystem<'a> {
    /// Checks the log-concavity conditions and lays out the coordinates.
    pub fn new(z: &[usize], s: &[usize], prior: &'a PriorConfig, panel: &CategoricalPanel) -> Result<Self> {
        let kk = panel.k();
        if prior.k() != kk {
            return Err(Error::Config(format!("prior has K = {}, data has K = {kk}", prior.k())));
        }
        let k = distinct_count(s);
        let clusters: Vec<CountMatrix> = (1..=k).map(|l| cluster_counts(panel, z, s, l)).collect();
        let (vlo, vhi) = prior.stick_support;
        let any_free = !prior.all_gamma_fixed();
        if any_free && (vlo <= 0.0 || vhi >= 1.0) {
            return Err(Error::Config(format!(
                "stick_support [{vlo}, {vhi}] must lie strictly inside (0, 1) when gamma is not pinned"
            )));
        }
        for (l, d) in clusters.iter().enumerate() {
            for r in 0..kk {
                for t in 0..kk.saturating_sub(1) {
                    let a = d.get(r, t) as f64 + prior.gamma_support.get(r, t).0;
                    let b: f64 = (t + 1..kk).map(|u| d.get(r, u) as f64 + prior.gamma_support.get(r, u).0).sum();
                    if a < 1.0 || b < 1.0 {
                        return Err(Error::LogConcavity(format!(
                            "cluster {} row {}: stick {} has Beta({a}, {b}) at the lower gamma bound; \
                             raise the lower end of gamma_support",
                            l + 1,
                            r + 1,
                            t + 1
                        )));
                    }
                }
            }
        }
        let mut coords = Vec::new();
        for l in 0..k {
            for r in 0..kk {
                for t in 0..kk.saturating_sub(1) {
                    coords.push(Coord::Stick { l, s: r, t });
                }
            }
        }
        let mut gamma_index = Square::filled(kk, None);
        for r in 0..kk {
            for t in 0..kk {
                if !prior.gamma_is_fixed(r, t) {
                    if prior.a.get(r, t) < 1.0 {
                        return Err(Error::LogConcavity(format!(
                            "gamma({}, {}) is free with prior shape {} < 1",
                            r + 1,
                            t + 1,
                            prior.a.get(r, t)
                        )));
                    }
                    gamma_index.set(r, t, Some(coords.len()));
                    coords.push(Coord::Gamma { s: r, t });
                }
            }
        }
        Ok(Self { prior, states: kk, clusters, coords, gamma_index, quadrature: LogQuadrature::default() })
    }

    pub fn clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Readable 1-based name of coordinate `i`: `V[l,s,t]` for a stick,
    /// `gamma[s,t]` for a free hyperparameter.
    pub fn coordinate_name(&self, i: usize) -> alloc::string::String {
        match self.coords[i] {
            Coord::Stick { l, s, t } => format!("V[{},{},{}]", l + 1, s + 1, t + 1),
            Coord::Gamma { s, t } => format!("gamma[{},{}]", s + 1, t + 1),
        }
    }

    fn stick_index(&self, l: usize, s: usize, t: usize) -> usize {
        (l * self.states + s) * (self.states - 1) + t
    }

    fn gamma(&self, xi: &[f64], s: usize, t: usize) -> f64 {
        match self.gamma_index.get(s, t) {
            Some(i) => xi[i],
            None => self.prior.gamma_support.get(s, t).0,
        }
    }

    fn beta_params(&self, xi: &[f64], l: usize, s: usize, t: usize) -> (f64, f64) {
        let d = &self.clusters[l];
        let a = d.get(s, t) as f64 + self.gamma(xi, s, t);
        let b = (t + 1..self.states).map(|u| d.get(s, u) as f64 + self.gamma(xi, s, u)).sum();
        (a, b)
    }

    /// `ln phi_{l,st}` from the sticks in `xi`.
    fn log_phi(&self, xi: &[f64], l: usize, s: usize, t: usize) -> f64 {
        let mut acc = 0.0;
        for u in 0..t.min(self.states - 1) {
            acc += log1p(-xi[self.stick_index(l, s, u)]);
        }
        if t < self.states - 1 {
            acc += log(xi[self.stick_index(l, s, t)]);
        }
        acc
    }

    fn gamma_parts(&self, xi: &[f64], s: usize, t: usize) -> (f64, usize, f64, f64, f64) {
        let sum_log_phi = (0..self.clusters()).map(|l| self.log_phi(xi, l, s, t)).sum();
        let rest = (0..self.states).filter(|&u| u != t).map(|u| self.gamma(xi, s, u)).sum();
        (sum_log_phi, self.clusters(), rest, self.prior.a.get(s, t), self.prior.b.get(s, t))
    }

    /// Transition matrices and gamma encoded by a state vector.
    pub fn decode(&self, xi: &[f64]) -> Result<(Vec<TransitionMatrix>, Square<f64>)> {
        let kk = self.states;
        let per = kk * (kk - 1);
        let phis = (0..self.clusters())
            .map(|l| phi_from_sticks(kk, &xi[l * per..(l + 1) * per]))
            .collect::<Result<Vec<_>>>()?;
        let mut gamma = Square::filled(kk, 0.0);
        for s in 0..kk {
            for t in 0..kk {
                gamma.set(s, t, self.gamma(xi, s, t));
            }
        }
        Ok((phis, gamma))
    }

    fn full_unit_sticks(&self) -> bool {
        self.prior.stick_support == (0.0, 1.0)
    }
}

impl LogConcaveSystem for PhiGammaSystem<'_> {
    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn support(&self, i: usize) -> (f64, f64) {
        match self.coords[i] {
            Coord::Stick { .. } => self.prior.stick_support,
            Coord::Gamma { s, t } => self.prior.gamma_support.get(s, t),
        }
    }

    fn dependencies(&self, i: usize) -> Vec<usize> {
        match self.coords[i] {
            Coord::Stick { s, t, .. } => (t..self.states).filter_map(|u| self.gamma_index.get(s, u)).collect(),
            Coord::Gamma { s, t } => {
                let mut d: Vec<usize> = (0..self.clusters())
                    .flat_map(|l| (0..self.states - 1).map(move |u| (l, u)))
                    .filter(|&(_, u)| u <= t)
                    .map(|(l, u)| self.stick_index(l, s, u))
                    .collect();
                d.extend((0..self.states).filter(|&u| u != t).filter_map(|u| self.gamma_index.get(s, u)));
                d
            }
        }
    }

    fn log_conditional(&self, i: usize, x: f64, xi: &[f64]) -> f64 {
        match self.coords[i] {
            Coord::Stick { l, s, t } => {
                let (a, b) = self.beta_params(xi, l, s, t);
                xlogy(a - 1.0, x) + xlog1my(b - 1.0, x)
            }
            Coord::Gamma { s, t } => {
                let (lp, k, rest, a, b) = self.gamma_parts(xi, s, t);
                gamma_fc_terms(x, lp, k, rest, a, b)
            }
        }
    }

    fn d_log_conditional(&self, i: usize, x: f64, xi: &[f64]) -> f64 {
        match self.coords[i] {
            Coord::Stick { l, s, t } => {
                let (a, b) = self.beta_params(xi, l, s, t);
                let left = if a == 1.0 { 0.0 } else { (a - 1.0) / x };
                let right = if b == 1.0 { 0.0 } else { (b - 1.0) / (1.0 - x) };
                left - right
            }
            Coord::Gamma { s, t } => {
                let (lp, k, rest, a, b) = self.gamma_parts(xi, s, t);
                gamma_fc_derivative(x, lp, k, rest, a, b)
            }
        }
    }

    fn log_normalizer(&self, i: usize, xi: &[f64]) -> f64 {
        match self.coords[i] {
            Coord::Stick { l, s, t } if self.full_unit_sticks() => {
                let (a, b) = self.beta_params(xi, l, s, t);
                log_beta(a, b)
            }
            _ => {
                let (lo, hi) = self.support(i);
                self.quadrature.log_integral(|x| self.log_conditional(i, x, xi), lo, hi)
            }
        }
    }

    fn sample_conditional(&self, i: usize, xi: &[f64], rng: &mut KeyedRng) -> Result<f64> {
        match self.coords[i] {
            Coord::Stick { l, s, t } if self.full_unit_sticks() => {
                let (a, b) = self.beta_params(xi, l, s, t);
                let d = Beta::new(a, b).map_err(|_| Error::Config(format!("Beta({a}, {b}) is invalid")))?;
                Ok(d.sample(rng))
            }
            _ => {
                let mut ars = crate::ars::Ars::new(
                    |x| self.log_conditional(i, x, xi),
                    |x| self.d_log_conditional(i, x, xi),
                    self.support(i),
                    true,
                )?;
                ars.sample(rng)
            }
        }
    }
}

/// A perfect draw of (Phi, gamma).
#[derive(Debug, Clone, PartialEq)]
pub struct PhiGammaDraw {
    pub phi: Vec<TransitionMatrix>,
    pub gamma: Square<f64>,
    /// `ln eps` of the sweep-kernel decomposition.
    pub log_epsilon: f64,
    /// Regeneration time of the draw.
    pub regeneration: u64,
}

/// Draws (Phi, gamma) given `(z, s)` at chain time `time`, using only the
/// ledger entries of that time.
pub fn perfect_phi_gamma<E: Executor>(
    z: &[usize],
    s: &[usize],
    prior: &PriorConfig,
    panel: &CategoricalPanel,
    ledger: &RandomLedger,
    time: i64,
    config: &KernelConfig,
    exec: &E,
) -> Result<PhiGammaDraw> {
    let system = PhiGammaSystem::new(z, s, prior, panel)?;
    if system.dim() == 0 {
        // K = 1 with pinned gamma: every matrix is [[1]].
        let (phi, gamma) = system.decode(&[])?;
        return Ok(PhiGammaDraw { phi, gamma, log_epsilon: 0.0, regeneration: 0 });
    }
    let kernel = build_kernel(&system, config, ledger, time, exec)?;
    let streams = PerfectStreams::new(*ledger, Stream::Theta, time);
    let draw = perfect_sample(&kernel, &system, &streams, config.method)?;
    let (phi, gamma) = system.decode(&draw.xi)?;
    Ok(PhiGammaDraw { phi, gamma, log_epsilon: kernel.log_eps, regeneration: draw.regeneration })
}
