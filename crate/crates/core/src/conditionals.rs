//! Full conditionals of the mixture model, their Phi-marginalized versions,
//! and the log-concavity diagnostics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::math::{exp, ln_gamma, log, NEG_INF};
use crate::model::{loglik_series, CategoricalPanel, ChainState, CountMatrix, PriorConfig, Square, TransitionMatrix};
use crate::partition::clusters_without;
use crate::special::{digamma, log_sum_exp, trigamma};

/// Log weights and their normalized probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub log_weights: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl WeightVector {
    pub fn from_log(log_weights: Vec<f64>) -> Result<Self> {
        let total = log_sum_exp(&log_weights);
        if total == NEG_INF || total.is_nan() {
            return Err(Error::DegenerateConditional("every option has zero weight".into()));
        }
        let normalized = log_weights.iter().map(|&w| exp(w - total)).collect();
        Ok(Self { log_weights, normalized })
    }

    pub fn len(&self) -> usize {
        self.normalized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normalized.is_empty()
    }

    /// Cumulative distribution at the 1-based values `1..=len`.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out: Vec<f64> = self
            .normalized
            .iter()
            .map(|p| {
                acc += p;
                acc.min(1.0)
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    }

    /// Smallest 1-based value whose cumulative probability reaches `u`.
    pub fn invert(&self, u: f64) -> usize {
        inverse_cdf(&self.cdf(), u)
    }
}

/// Smallest 1-based `v` with `cdf[v-1] >= u`.
pub fn inverse_cdf(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| c >= u).unwrap_or(cdf.len() - 1) + 1
}

/// `K(N) = sum_s [sum_t lnG(N_st + g_st) - lnG(N_s + sum_t g_st)]`, the
/// gamma-dependent part of the Dirichlet-multinomial integral.
pub fn log_dm_kernel(counts: &CountMatrix, gamma: &Square<f64>) -> f64 {
    let k = counts.k();
    let mut acc = 0.0;
    for s in 0..k {
        let mut row_n = 0.0;
        let mut row_g = 0.0;
        for t in 0..k {
            let n = counts.get(s, t) as f64;
            let g = gamma.get(s, t);
            acc += ln_gamma(n + g);
            row_n += n;
            row_g += g;
        }
        acc -= ln_gamma(row_n + row_g);
    }
    acc
}

/// `ln int prod phi^N dDirichlet(phi | gamma)` over all rows.
pub fn log_dm_marginal(counts: &CountMatrix, gamma: &Square<f64>) -> f64 {
    log_dm_kernel(counts, gamma) - log_dm_kernel(&CountMatrix::zeros(counts.k()), gamma)
}

/// Pooled counts of the series allocated to slots carrying `label`.
pub fn cluster_counts(panel: &CategoricalPanel, z: &[usize], s: &[usize], label: usize) -> CountMatrix {
    let mut acc = CountMatrix::zeros(panel.k());
    for (i, &zi) in z.iter().enumerate() {
        if s[zi - 1] == label {
            acc.add_assign(panel.counts(i));
        }
    }
    acc
}

/// Pooled counts of the series allocated to slot `slot` (1-based).
pub fn slot_counts(panel: &CategoricalPanel, z: &[usize], slot: usize) -> CountMatrix {
    let mut acc = CountMatrix::zeros(panel.k());
    for (i, &zi) in z.iter().enumerate() {
        if zi == slot {
            acc.add_assign(panel.counts(i));
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Conditionals given Phi

/// Weights over slots `r = 1..=M` for `z_i`, proportional to the likelihood of
/// series `i` under the slot's transition matrix.
pub fn fc_z_weights(i: usize, state: &ChainState, panel: &CategoricalPanel) -> Result<WeightVector> {
    let counts = panel.counts(i);
    let lw = (0..state.s.len()).map(|r| loglik_series(counts, state.theta(r))).collect();
    WeightVector::from_log(lw).map_err(|_| {
        Error::DegenerateConditional(format!("every slot gives series {} zero likelihood", i + 1))
    })
}

/// Weights for `c_r` (0-based slot `r`): entries `1..=k_r` join the distinct
/// clusters of `S_{-r}` in first-appearance order, the last entry opens a
/// new cluster. Also returns the labels of those clusters.
pub fn fc_c_weights(
    r: usize,
    state: &ChainState,
    panel: &CategoricalPanel,
    prior: &PriorConfig,
) -> Result<(WeightVector, Vec<usize>)> {
    let n_r = slot_counts(panel, &state.z, r + 1);
    let clusters = clusters_without(&state.s, r);
    let mut lw = Vec::with_capacity(clusters.len() + 1);
    for &(label, size) in &clusters {
        lw.push(log(size as f64) + loglik_series(&n_r, &state.phi[label - 1]));
    }
    lw.push(log(prior.alpha) + log_dm_marginal(&n_r, &state.gamma));
    let labels = clusters.iter().map(|c| c.0).collect();
    Ok((WeightVector::from_log(lw)?, labels))
}

/// Draw `phi_l` (1-based cluster label) from its Dirichlet full conditional.
pub fn sample_phi(
    l: usize,
    state: &ChainState,
    panel: &CategoricalPanel,
    rng: &mut impl RngCore,
) -> Result<TransitionMatrix> {
    let k = panel.k();
    let d = cluster_counts(panel, &state.z, &state.s, l);
    let mut m = Square::filled(k, 0.0);
    for s in 0..k {
        let mut total = 0.0;
        for t in 0..k {
            let shape = d.get(s, t) as f64 + state.gamma.get(s, t);
            let g = Gamma::new(shape, 1.0)
                .map_err(|_| Error::Config(format!("Dirichlet parameter {shape} is not positive")))?;
            let x = g.sample(rng);
            m.set(s, t, x);
            total += x;
        }
        if !(total > 0.0) {
            // Every Gamma variate underflowed; fall back to the row mean.
            let row_total: f64 = (0..k).map(|t| d.get(s, t) as f64 + state.gamma.get(s, t)).sum();
            for t in 0..k {
                m.set(s, t, (d.get(s, t) as f64 + state.gamma.get(s, t)) / row_total);
            }
            continue;
        }
        for t in 0..k {
            m.set(s, t, m.get(s, t) / total);
        }
        let drift: f64 = 1.0 - m.row(s).iter().sum::<f64>();
        let big = (0..k).max_by(|&a, &b| m.get(s, a).total_cmp(&m.get(s, b))).unwrap();
        m.set(s, big, m.get(s, big) + drift);
    }
    TransitionMatrix::new(m)
}

/// Conditional mean, variance and heterogeneity of one transition probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiMoments {
    pub zeta: f64,
    pub variance: f64,
    pub heterogeneity: f64,
}

/// Moments from the Dirichlet parameters of one row.
pub fn dirichlet_moments(params: &[f64], t: usize) -> PhiMoments {
    let sigma: f64 = params.iter().sum();
    let a = params[t];
    PhiMoments {
        zeta: a / sigma,
        variance: a * (sigma - a) / (sigma * sigma * (1.0 + sigma)),
        heterogeneity: sigma,
    }
}

/// Moments of `phi_{l,st}` under its Dirichlet full conditional (0-based s, t).
pub fn phi_moments(l: usize, s: usize, t: usize, state: &ChainState, panel: &CategoricalPanel) -> PhiMoments {
    let d = cluster_counts(panel, &state.z, &state.s, l);
    let params: Vec<f64> = (0..panel.k()).map(|u| d.get(s, u) as f64 + state.gamma.get(s, u)).collect();
    dirichlet_moments(&params, t)
}

/// Beta parameters of the marginal conditional of `phi_{l,st}`.
pub fn phi_marginal_beta(l: usize, s: usize, t: usize, state: &ChainState, panel: &CategoricalPanel) -> (f64, f64) {
    let d = cluster_counts(panel, &state.z, &state.s, l);
    let a = d.get(s, t) as f64 + state.gamma.get(s, t);
    let b = (0..panel.k())
        .filter(|&u| u != t)
        .map(|u| d.get(s, u) as f64 + state.gamma.get(s, u))
        .sum();
    (a, b)
}

/// Unnormalized Beta log density.
pub fn log_beta_kernel(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain { what: "phi", value: x, lo: 0.0, hi: 1.0 });
    }
    Ok((a - 1.0) * log(x) + (b - 1.0) * log(1.0 - x))
}

/// Unnormalized log full conditional of `phi_{l,st}` given the rest of its
/// row; `t` must not be the last state, which carries the simplex remainder.
pub fn log_fc_phi_elem(
    x: f64,
    l: usize,
    s: usize,
    t: usize,
    state: &ChainState,
    panel: &CategoricalPanel,
) -> Result<f64> {
    let k = panel.k();
    if t + 1 >= k {
        return Err(Error::Input("the last state of a row is the simplex remainder".into()));
    }
    let row = state.phi[l - 1].row(s);
    let rest: f64 = (0..k - 1).filter(|&u| u != t).map(|u| row[u]).sum();
    let r = 1.0 - rest;
    if !(x > 0.0 && x < r) {
        return Err(Error::Domain { what: "phi", value: x, lo: 0.0, hi: r });
    }
    let d = cluster_counts(panel, &state.z, &state.s, l);
    let a = d.get(s, t) as f64 + state.gamma.get(s, t);
    let last = d.get(s, k - 1) as f64 + state.gamma.get(s, k - 1);
    Ok((a - 1.0) * log(x) + (last - 1.0) * log(r - x))
}

/// Sum over clusters of `ln phi_{l,st}`.
fn sum_log_phi(phi: &[TransitionMatrix], s: usize, t: usize) -> f64 {
    phi.iter().map(|p| log(p.get(s, t))).sum()
}

/// Unnormalized log full conditional of `gamma_st` at `x`.
pub fn log_fc_gamma(
    x: f64,
    s: usize,
    t: usize,
    phi: &[TransitionMatrix],
    gamma: &Square<f64>,
    prior: &PriorConfig,
) -> Result<f64> {
    let (lo, hi) = prior.gamma_support.get(s, t);
    if !(lo..=hi).contains(&x) {
        return Err(Error::Domain { what: "gamma", value: x, lo, hi });
    }
    Ok(gamma_fc_terms(x, sum_log_phi(phi, s, t), phi.len(), row_rest(gamma, s, t), prior.a.get(s, t), prior.b.get(s, t)))
}

/// Derivative in `x` of [`log_fc_gamma`].
pub fn d_log_fc_gamma(
    x: f64,
    s: usize,
    t: usize,
    phi: &[TransitionMatrix],
    gamma: &Square<f64>,
    prior: &PriorConfig,
) -> f64 {
    gamma_fc_derivative(x, sum_log_phi(phi, s, t), phi.len(), row_rest(gamma, s, t), prior.a.get(s, t), prior.b.get(s, t))
}

fn row_rest(gamma: &Square<f64>, s: usize, t: usize) -> f64 {
    (0..gamma.k()).filter(|&u| u != t).map(|u| gamma.get(s, u)).sum()
}

/// `(x-1) L + k [lnG(x + rest) - lnG(x)] + (a-1) ln x - b x`.
pub fn gamma_fc_terms(x: f64, sum_log_phi: f64, k: usize, rest: f64, a: f64, b: f64) -> f64 {
    (x - 1.0) * sum_log_phi + k as f64 * (ln_gamma(x + rest) - ln_gamma(x)) + (a - 1.0) * log(x) - b * x
}

pub fn gamma_fc_derivative(x: f64, sum_log_phi: f64, k: usize, rest: f64, a: f64, b: f64) -> f64 {
    sum_log_phi + k as f64 * (digamma(x + rest) - digamma(x)) + (a - 1.0) / x - b
}

// ---------------------------------------------------------------------------
// Phi-marginalized conditionals

/// Log of the joint collapsed likelihood `sum_l K(D_l)` with `z_i = r`; the
/// terms that do not depend on `r` cancel after normalization.
pub fn log_marginalized_fc_z(
    i: usize,
    r: usize,
    z: &[usize],
    s: &[usize],
    gamma: &Square<f64>,
    panel: &CategoricalPanel,
) -> f64 {
    let mut z = z.to_vec();
    z[i] = r;
    let mut labels: Vec<usize> = z.iter().map(|&zi| s[zi - 1]).collect();
    labels.sort_unstable();
    labels.dedup();
    labels
        .iter()
        .map(|&l| log_dm_kernel(&cluster_counts(panel, &z, s, l), gamma) - log_dm_kernel(&CountMatrix::zeros(panel.k()), gamma))
        .sum()
}

/// Normalized collapsed weights for `z_i` over slots `1..=M`.
pub fn marginalized_z_weights(
    i: usize,
    z: &[usize],
    s: &[usize],
    gamma: &Square<f64>,
    panel: &CategoricalPanel,
) -> Result<WeightVector> {
    let k = panel.k();
    let n_i = panel.counts(i);
    let max_label = s.iter().copied().max().unwrap_or(0);
    let mut pooled = vec![CountMatrix::zeros(k); max_label + 1];
    for (j, &zj) in z.iter().enumerate() {
        if j != i {
            pooled[s[zj - 1]].add_assign(panel.counts(j));
        }
    }
    let mut by_label: Vec<Option<f64>> = vec![None; max_label + 1];
    let lw = s
        .iter()
        .map(|&l| {
            *by_label[l].get_or_insert_with(|| {
                let mut with = pooled[l].clone();
                with.add_assign(n_i);
                log_dm_kernel(&with, gamma) - log_dm_kernel(&pooled[l], gamma)
            })
        })
        .collect();
    WeightVector::from_log(lw)
}

/// Log weight of `c_j = l` (1-based, `l = k_j + 1` opens a new cluster) with
/// Phi integrated out.
pub fn log_marginalized_fc_c(
    j: usize,
    l: usize,
    z: &[usize],
    s: &[usize],
    gamma: &Square<f64>,
    panel: &CategoricalPanel,
    alpha: f64,
) -> f64 {
    let w = marginalized_c_log_weights(j, z, s, gamma, panel, alpha);
    w.get(l - 1).copied().unwrap_or(NEG_INF)
}

pub fn marginalized_c_log_weights(
    j: usize,
    z: &[usize],
    s: &[usize],
    gamma: &Square<f64>,
    panel: &CategoricalPanel,
    alpha: f64,
) -> Vec<f64> {
    let k = panel.k();
    let n_j = slot_counts(panel, z, j + 1);
    let clusters = clusters_without(s, j);
    let mut lw = Vec::with_capacity(clusters.len() + 1);
    for &(label, size) in &clusters {
        let mut pooled = CountMatrix::zeros(k);
        for (i, &zi) in z.iter().enumerate() {
            if zi - 1 != j && s[zi - 1] == label {
                pooled.add_assign(panel.counts(i));
            }
        }
        let mut with = pooled.clone();
        with.add_assign(&n_j);
        lw.push(log(size as f64) + log_dm_kernel(&with, gamma) - log_dm_kernel(&pooled, gamma));
    }
    lw.push(log(alpha) + log_dm_marginal(&n_j, gamma));
    lw
}

pub fn marginalized_c_weights(
    j: usize,
    z: &[usize],
    s: &[usize],
    gamma: &Square<f64>,
    panel: &CategoricalPanel,
    alpha: f64,
) -> Result<WeightVector> {
    WeightVector::from_log(marginalized_c_log_weights(j, z, s, gamma, panel, alpha))
}

// ---------------------------------------------------------------------------
// Diagnostics

/// One factor of the Phi-marginalized gamma conditional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaMarginalDiag {
    /// Product form, valid for integer counts.
    pub h: f64,
    /// Gamma-ratio form, for cross-checking `h`.
    pub h_ratio: f64,
    /// Second derivative of `ln h`.
    pub d2_log_h: f64,
}

/// `h(x) = G(x+a)/G(x) * G(x+y)/G(x+y+a+b)` with `a` the sum of the other
/// gamma entries of the row, `y` the count of the free cell and `b` the
/// counts of the other cells.
pub fn gamma_marginal_diag(x: f64, a: f64, y: u32, b: u32) -> GammaMarginalDiag {
    let yf = y as f64;
    let bf = b as f64;
    let mut log_h = 0.0;
    for i in 1..=y {
        log_h += log(x + yf - i as f64);
    }
    for i in 1..=(y + b) {
        log_h -= log(x + a + yf + bf - i as f64);
    }
    let log_ratio = ln_gamma(x + a) - ln_gamma(x) + ln_gamma(x + yf) - ln_gamma(x + yf + a + bf);
    let mut d2 = 0.0;
    for i in 1..=y {
        let v = x + yf - i as f64;
        d2 -= 1.0 / (v * v);
    }
    for i in 1..=(y + b) {
        let v = x + a + yf + bf - i as f64;
        d2 += 1.0 / (v * v);
    }
    GammaMarginalDiag { h: exp(log_h), h_ratio: exp(log_ratio), d2_log_h: d2 }
}

/// A point where a factor of the marginalized gamma conditional is log-convex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityWitness {
    pub x: f64,
    pub a: f64,
    pub y: u32,
    pub b: u32,
    pub d2_log_h: f64,
}

/// Grid search for `d2 ln h > tol` over small integer counts.
pub fn gamma_marginal_positivity_search(xs: &[f64], others: &[f64], max_count: u32, tol: f64) -> Option<ConvexityWitness> {
    for y in 0..=max_count {
        for b in 1..=max_count {
            for &a in others {
                for &x in xs {
                    let d = gamma_marginal_diag(x, a, y, b);
                    if d.d2_log_h > tol {
                        return Some(ConvexityWitness { x, a, y, b, d2_log_h: d.d2_log_h });
                    }
                }
            }
        }
    }
    None
}

/// `trigamma(x) >= 1/x + 1/(2x^2)`.
pub fn trigamma_lower_check(x: f64) -> bool {
    trigamma(x) >= 1.0 / x + 1.0 / (2.0 * x * x)
}
