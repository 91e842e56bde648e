//! Data, parameters and priors of the mixture of Markov chains.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, log, NEG_INF};

/// Dense `k x k` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Square<T> {
    k: usize,
    data: Vec<T>,
}

impl<T: Copy> Square<T> {
    pub fn filled(k: usize, value: T) -> Self {
        Self { k, data: vec![value; k * k] }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Input(format!("expected a {k}x{k} matrix")));
        }
        Ok(Self { k, data: rows.iter().flatten().copied().collect() })
    }

    pub fn from_vec(k: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != k * k {
            return Err(Error::Input(format!(
                "expected {} entries for a {k}x{k} matrix, got {}",
                k * k,
                data.len()
            )));
        }
        Ok(Self { k, data })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Zero-based access.
    #[inline]
    pub fn get(&self, s: usize, t: usize) -> T {
        self.data[s * self.k + t]
    }

    #[inline]
    pub fn set(&mut self, s: usize, t: usize, v: T) {
        self.data[s * self.k + t] = v;
    }

    pub fn row(&self, s: usize) -> &[T] {
        &self.data[s * self.k..(s + 1) * self.k]
    }

    pub fn row_mut(&mut self, s: usize) -> &mut [T] {
        &mut self.data[s * self.k..(s + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.k).map(|s| self.row(s).to_vec()).collect()
    }
}

/// Transition counts `N_{st}`.
pub type CountMatrix = Square<u32>;

impl CountMatrix {
    pub fn zeros(k: usize) -> Self {
        Self::filled(k, 0)
    }

    pub fn add_assign(&mut self, other: &CountMatrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sub_assign(&mut self, other: &CountMatrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
    }

    pub fn row_total(&self, s: usize) -> u32 {
        self.row(s).iter().sum()
    }

    pub fn total(&self) -> u32 {
        self.data.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&c| c == 0)
    }
}

/// Row-stochastic transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix(Square<f64>);

impl TransitionMatrix {
    pub fn new(m: Square<f64>) -> Result<Self> {
        for s in 0..m.k() {
            let row = m.row(s);
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::Input(format!("row {} has an entry outside [0,1]", s + 1)));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Input(format!("row {} sums to {total}", s + 1)));
            }
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Square::from_rows(rows)?)
    }

    pub fn uniform(k: usize) -> Self {
        Self(Square::filled(k, 1.0 / k as f64))
    }

    pub fn k(&self) -> usize {
        self.0.k()
    }

    #[inline]
    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.0.get(s, t)
    }

    pub fn row(&self, s: usize) -> &[f64] {
        self.0.row(s)
    }

    pub fn matrix(&self) -> &Square<f64> {
        &self.0
    }
}

/// Transition counts of one sequence of 1-based states.
pub fn transition_counts(sequence: &[u32], k: usize) -> Result<CountMatrix> {
    if sequence.is_empty() {
        return Err(Error::Input("empty sequence".into()));
    }
    if let Some(pos) = sequence.iter().position(|&x| x == 0 || x as usize > k) {
        return Err(Error::Input(format!(
            "state {} at position {} is outside 1..={k}",
            sequence[pos],
            pos + 1
        )));
    }
    let mut n = CountMatrix::zeros(k);
    for w in sequence.windows(2) {
        let (s, t) = (w[0] as usize - 1, w[1] as usize - 1);
        n.set(s, t, n.get(s, t) + 1);
    }
    Ok(n)
}

/// `sum N_st log theta_st`, `-inf` when an observed transition has probability 0.
pub fn loglik_series(counts: &CountMatrix, theta: &TransitionMatrix) -> f64 {
    let mut acc = 0.0;
    for (&n, &p) in counts.as_slice().iter().zip(theta.matrix().as_slice()) {
        if n > 0 {
            if p <= 0.0 {
                return NEG_INF;
            }
            acc += n as f64 * log(p);
        }
    }
    acc
}

/// Observed panel of categorical series with their transition counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalPanel {
    k: usize,
    series: Vec<Vec<u32>>,
    counts: Vec<CountMatrix>,
}

impl CategoricalPanel {
    pub fn new(series: Vec<Vec<u32>>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Input("K must be at least 1".into()));
        }
        if series.is_empty() {
            return Err(Error::Input("panel has no series".into()));
        }
        let counts = series
            .iter()
            .enumerate()
            .map(|(i, s)| {
                transition_counts(s, k).map_err(|e| match e {
                    Error::Input(msg) => Error::Input(format!("series {}: {msg}", i + 1)),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { k, series, counts })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.series.len()
    }

    /// 1-based states of series `i` (0-based index).
    pub fn series(&self, i: usize) -> &[u32] {
        &self.series[i]
    }

    pub fn all_series(&self) -> &[Vec<u32>] {
        &self.series
    }

    pub fn counts(&self, i: usize) -> &CountMatrix {
        &self.counts[i]
    }

    pub fn all_counts(&self) -> &[CountMatrix] {
        &self.counts
    }
}

/// Weights and occupancies of the distinct components of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSummary {
    pub pi: Vec<f64>,
    pub occupancy: Vec<usize>,
}

impl MixtureSummary {
    /// From a configuration vector with 1-based labels `1..=p`.
    pub fn from_configuration(s: &[usize]) -> Self {
        let p = s.iter().copied().max().unwrap_or(0);
        let mut occupancy = vec![0usize; p];
        for &l in s {
            occupancy[l - 1] += 1;
        }
        let m = s.len() as f64;
        let pi = occupancy.iter().map(|&c| c as f64 / m).collect();
        Self { pi, occupancy }
    }

    pub fn p(&self) -> usize {
        self.pi.len()
    }
}

/// `sum_l pi_l prod theta_l^N`.
pub fn mixture_density(counts: &CountMatrix, summary: &MixtureSummary, phi: &[TransitionMatrix]) -> f64 {
    summary
        .pi
        .iter()
        .zip(phi)
        .map(|(&w, th)| w * exp(loglik_series(counts, th)))
        .sum()
}

/// Raised by [`PriorConfig::validate`] for settings that are legal but void
/// the log-concavity guarantee of the hyperparameter conditionals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorWarning {
    ShapeAtMostOne { s: usize, t: usize, a: f64 },
}

/// Hyperparameters. Matrix entries are indexed `(s, t)`, zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorConfig {
    pub m: usize,
    pub alpha: f64,
    pub a: Square<f64>,
    pub b: Square<f64>,
    /// Per-(s,t) support of gamma; `lo == hi` pins the value.
    pub gamma_support: Square<(f64, f64)>,
    /// Support of every stick-breaking fraction of the transition rows
    /// inside the (Phi, gamma) perfect sampler.
    pub stick_support: (f64, f64),
}

pub const DEFAULT_GAMMA_SUPPORT: (f64, f64) = (0.1, 50.0);

impl PriorConfig {
    /// Scalar hyperparameters broadcast over all (s, t).
    pub fn broadcast(k: usize, m: usize, alpha: f64, a: f64, b: f64, gamma_support: (f64, f64)) -> Self {
        Self {
            m,
            alpha,
            a: Square::filled(k, a),
            b: Square::filled(k, b),
            gamma_support: Square::filled(k, gamma_support),
            stick_support: (0.0, 1.0),
        }
    }

    /// Prior with every gamma pinned to `gamma`.
    pub fn fixed_gamma(k: usize, m: usize, alpha: f64, gamma: f64) -> Self {
        Self::broadcast(k, m, alpha, 2.0, 1.0, (gamma, gamma))
    }

    pub fn k(&self) -> usize {
        self.a.k()
    }

    pub fn validate(&self) -> Result<Vec<PriorWarning>> {
        let k = self.k();
        if self.m == 0 {
            return Err(Error::Config("M must be at least 1".into()));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.b.k() != k || self.gamma_support.k() != k {
            return Err(Error::Config("a, b and gamma_support must share the same K".into()));
        }
        let (vlo, vhi) = self.stick_support;
        if !(0.0 <= vlo && vlo < vhi && vhi <= 1.0) {
            return Err(Error::Config(format!("stick_support [{vlo}, {vhi}] must satisfy 0 <= lo < hi <= 1")));
        }
        let mut warnings = Vec::new();
        for s in 0..k {
            for t in 0..k {
                let (a, b) = (self.a.get(s, t), self.b.get(s, t));
                if !(a > 0.0) || !(b > 0.0) {
                    return Err(Error::Config(format!(
                        "a and b must be positive at ({}, {})",
                        s + 1,
                        t + 1
                    )));
                }
                let (lo, hi) = self.gamma_support.get(s, t);
                if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
                    return Err(Error::Config(format!(
                        "gamma support [{lo}, {hi}] at ({}, {}) must satisfy 0 < lo <= hi",
                        s + 1,
                        t + 1
                    )));
                }
                if a <= 1.0 && hi > lo {
                    warnings.push(PriorWarning::ShapeAtMostOne { s, t, a });
                }
            }
        }
        Ok(warnings)
    }

    pub fn gamma_is_fixed(&self, s: usize, t: usize) -> bool {
        let (lo, hi) = self.gamma_support.get(s, t);
        lo == hi
    }

    pub fn all_gamma_fixed(&self) -> bool {
        self.gamma_support.as_slice().iter().all(|&(lo, hi)| lo == hi)
    }

    /// Midpoint of each gamma support.
    pub fn gamma_center(&self) -> Square<f64> {
        let k = self.k();
        let data = self.gamma_support.as_slice().iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
        Square::from_vec(k, data).expect("square")
    }
}

/// Full Gibbs state. Labels are 1-based, as in the external formats.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub z: Vec<usize>,
    pub c: Vec<usize>,
    pub s: Vec<usize>,
    pub phi: Vec<TransitionMatrix>,
    pub gamma: Square<f64>,
}

impl ChainState {
    pub fn k(&self) -> usize {
        self.phi.len()
    }

    /// Transition matrix carried by slot `r` (0-based).
    pub fn theta(&self, r: usize) -> &TransitionMatrix {
        &self.phi[self.s[r] - 1]
    }

    pub fn validate(&self, prior: &PriorConfig, n: usize) -> Result<()> {
        let m = prior.m;
        let kk = prior.k();
        if self.z.len() != n || self.z.iter().any(|&z| z == 0 || z > m) {
            return Err(Error::Input("Z must hold n labels in 1..=M".into()));
        }
        if self.c.len() != m || self.s.len() != m {
            return Err(Error::Input("C and S must have length M".into()));
        }
        if !crate::partition::is_canonical(&self.s) {
            return Err(Error::Input("S is not in first-appearance form".into()));
        }
        let k = crate::partition::distinct_count(&self.s);
        if k != self.phi.len() || crate::partition::distinct_count(&self.c) != k {
            return Err(Error::Input("k disagrees with the distinct values of C and S".into()));
        }
        if crate::partition::canonical(&self.c) != self.s {
            return Err(Error::Input("C and S describe different partitions".into()));
        }
        for (l, phi) in self.phi.iter().enumerate() {
            if phi.k() != kk {
                return Err(Error::Input(format!("phi {} has the wrong size", l + 1)));
            }
            TransitionMatrix::new(phi.matrix().clone())?;
        }
        for s in 0..kk {
            for t in 0..kk {
                let (lo, hi) = prior.gamma_support.get(s, t);
                let g = self.gamma.get(s, t);
                if !(lo..=hi).contains(&g) {
                    return Err(Error::Domain { what: "gamma", value: g, lo, hi });
                }
            }
        }
        Ok(())
    }
}
