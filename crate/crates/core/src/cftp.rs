//! Coupling from the past with bounding chains over the discrete
//! coordinates and an embedded perfect draw of (Phi, gamma).
//!
//! One sweep at time `t` updates every `z_i` and then every `c_j` with the
//! transition matrices integrated out, using the gamma of the previous
//! step, and ends with a perfect draw of (Phi, gamma) given (Z, S). The
//! bounding chains track an interval per `z_i` and the set of
//! configurations S the chains may occupy, with gamma free in its box.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::anneal::AnnealConfig;
use crate::bounds::{
    bound_c_cdf, bound_c_cdf_box, bound_s_cdf, bound_z_cdf, collapsed_c_cdf, collapsed_z_cdf, invert_bounds, BoundKeys,
    PartitionBound, ZBox,
};
use crate::conditionals::inverse_cdf;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::ledger::{EpochPlan, RandomLedger, Stream};
use crate::model::{CategoricalPanel, PriorConfig, Square, TransitionMatrix};
use crate::partition::{apply_c, distinct_count};
use crate::perfect::KernelConfig;
use crate::phigamma::{perfect_phi_gamma, PhiGammaDraw};

#[derive(Debug, Clone, PartialEq)]
pub struct CftpConfig {
    pub anneal: AnnealConfig,
    pub kernel: KernelConfig,
    /// Epochs tried before giving up; epoch `j` starts at `-2^j`.
    pub epoch_cap: u32,
    /// Configurations are tracked as an explicit set while `Bell(M)` is at
    /// most this, otherwise as a box of slot labels.
    pub partition_set_limit: usize,
}

impl Default for CftpConfig {
    fn default() -> Self {
        Self { anneal: AnnealConfig::default(), kernel: KernelConfig::default(), epoch_cap: 20, partition_set_limit: 4140 }
    }
}

/// A perfect posterior draw and how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct CftpOutput {
    /// Time at which the bounding chains met.
    pub coalescence_time: i64,
    pub epochs: u32,
    pub z: Vec<usize>,
    pub c: Vec<usize>,
    pub s: Vec<usize>,
    pub k: usize,
    pub phi: Vec<TransitionMatrix>,
    pub gamma: Square<f64>,
    /// `ln eps` of the (Phi, gamma) kernel built at time 0.
    pub log_epsilon: f64,
}

/// Bounding chains at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingState {
    pub z: ZBox,
    pub s: PartitionBound,
}

impl BoundingState {
    pub fn full(n: usize, m: usize, partition_set_limit: usize) -> Self {
        Self { z: ZBox::full(n, m), s: PartitionBound::full(m, partition_set_limit) }
    }

    pub fn coalesced(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        if !self.z.is_coalesced() {
            return None;
        }
        self.s.coalesced().map(|s| (self.z.lo.clone(), s))
    }

    pub fn contains(&self, z: &[usize], s: &[usize]) -> bool {
        self.z.contains(z) && self.s.contains(s)
    }
}

/// Everything a sweep needs besides the state.
pub struct Sweep<'a, E: Executor> {
    pub panel: &'a CategoricalPanel,
    pub prior: &'a PriorConfig,
    pub ledger: RandomLedger,
    pub config: &'a CftpConfig,
    pub exec: &'a E,
}

const C_KEY: u64 = 1 << 40;

impl<E: Executor> Sweep<'_, E> {
    fn z_uniform(&self, t: i64, i: usize) -> Result<f64> {
        self.ledger.uniform(Stream::Z, t, i as u64, 0)
    }

    fn c_uniform(&self, t: i64, j: usize) -> Result<f64> {
        self.ledger.uniform(Stream::C, t, j as u64, 0)
    }

    /// Exact transition of (Z, S) at time `t` given the previous gamma.
    pub fn exact_step(&self, t: i64, z: &mut [usize], s: &mut Vec<usize>, gamma: &Square<f64>) -> Result<()> {
        for i in 0..z.len() {
            let cdf = collapsed_z_cdf(i, z, s, gamma, self.panel)?;
            z[i] = inverse_cdf(&cdf, self.z_uniform(t, i)?);
        }
        for j in 0..s.len() {
            let cdf = collapsed_c_cdf(j, z, s, gamma, self.panel, self.prior.alpha)?;
            let c = inverse_cdf(&cdf, self.c_uniform(t, j)?);
            *s = apply_c(s, j, c);
        }
        Ok(())
    }

    /// The (Phi, gamma) draw that closes the sweep at time `t`.
    pub fn phi_gamma(&self, t: i64, z: &[usize], s: &[usize]) -> Result<PhiGammaDraw> {
        perfect_phi_gamma(z, s, self.prior, self.panel, &self.ledger, t, &self.config.kernel, self.exec)
    }

    /// Bounding transition at time `t`.
    pub fn bounding_step(&self, t: i64, state: &mut BoundingState) -> Result<()> {
        let anneal = &self.config.anneal;
        for i in 0..state.z.len() {
            let keys = BoundKeys { ledger: self.ledger, time: t, coord: i as u64 };
            let pair = bound_z_cdf(i, &state.z, &state.s, self.prior, self.panel, keys, anneal, self.exec)?;
            let (lo, hi) = invert_bounds(&pair, self.z_uniform(t, i)?);
            state.z.lo[i] = lo;
            state.z.hi[i] = hi;
        }
        let m = state.s.slots();
        for j in 0..m {
            let u = self.c_uniform(t, j)?;
            let next = match &state.s {
                PartitionBound::Set(members) => {
                    let results = self.exec.map(members.len(), |r| -> Result<Vec<Vec<usize>>> {
                        let keys = BoundKeys { ledger: self.ledger, time: t, coord: C_KEY | ((j as u64) << 20) | r as u64 };
                        let s = &members[r];
                        let pair = bound_c_cdf(j, &state.z, s, self.prior, self.panel, keys, anneal, self.exec)?;
                        let (cl, cu) = invert_bounds(&pair, u);
                        Ok((cl..=cu).map(|c| apply_c(s, j, c)).collect())
                    });
                    let mut set = BTreeSet::new();
                    for r in results {
                        set.extend(r?);
                    }
                    PartitionBound::Set(set.into_iter().collect())
                }
                PartitionBound::Box { lo, hi } => {
                    let keys = BoundKeys { ledger: self.ledger, time: t, coord: C_KEY | ((j as u64) << 20) };
                    let cb = bound_c_cdf_box(j, &state.z, lo, hi, self.prior, self.panel, keys, anneal, self.exec)?;
                    let c_range = invert_bounds(&cb.pair, u);
                    let prefix = if j == 0 {
                        (0, 0)
                    } else {
                        (lo[..j].iter().copied().max().unwrap_or(0), hi[..j].iter().copied().max().unwrap_or(0))
                    };
                    let (sl, su) = invert_bounds(&bound_s_cdf(c_range, prefix, m), u);
                    let mut lo = lo.clone();
                    let mut hi = hi.clone();
                    lo[j] = sl;
                    hi[j] = su;
                    for r in j + 1..m {
                        lo[r] = 1;
                        hi[r] = r + 1;
                    }
                    PartitionBound::Box { lo, hi }
                }
            };
            state.s = next;
        }
        Ok(())
    }
}

/// Runs coupling from the past until the bounding chains meet, then carries
/// the exact chain forward to time 0.
pub fn run_cftp<E: Executor>(
    panel: &CategoricalPanel,
    prior: &PriorConfig,
    config: &CftpConfig,
    ledger: &RandomLedger,
    exec: &E,
) -> Result<CftpOutput> {
    prior.validate()?;
    config.anneal.validate()?;
    if prior.k() != panel.k() {
        return Err(Error::Config(alloc::format!("prior has K = {}, data has K = {}", prior.k(), panel.k())));
    }
    let sweep = Sweep { panel, prior, ledger: *ledger, config, exec };
    let (n, m) = (panel.n(), prior.m);
    let mut last = BoundingState::full(n, m, config.partition_set_limit);
    for epoch in 1..=config.epoch_cap {
        let plan = EpochPlan::new(epoch);
        let mut state = BoundingState::full(n, m, config.partition_set_limit);
        let mut met = None;
        for t in plan.start() + 1..=0 {
            sweep.bounding_step(t, &mut state)?;
            if let Some(zs) = state.coalesced() {
                met = Some((t, zs));
                break;
            }
        }
        let Some((t_star, (mut z, mut s))) = met else {
            last = state;
            continue;
        };
        let gamma_free = !prior.all_gamma_fixed();
        let mut draw = if gamma_free || t_star == 0 { Some(sweep.phi_gamma(t_star, &z, &s)?) } else { None };
        let mut gamma = draw.as_ref().map_or_else(|| prior.gamma_center(), |d| d.gamma.clone());
        for t in t_star + 1..=0 {
            sweep.exact_step(t, &mut z, &mut s, &gamma)?;
            if gamma_free || t == 0 {
                let d = sweep.phi_gamma(t, &z, &s)?;
                gamma = d.gamma.clone();
                draw = Some(d);
            }
        }
        let draw = draw.expect("drawn at time 0");
        return Ok(CftpOutput {
            coalescence_time: t_star,
            epochs: epoch,
            k: distinct_count(&s),
            c: s.clone(),
            z,
            s,
            phi: draw.phi,
            gamma: draw.gamma,
            log_epsilon: draw.log_epsilon,
        });
    }
    Err(Error::NonCoalescence { epochs: config.epoch_cap, z_gaps: last.z.gaps(), s_gaps: last.s.gaps() })
}
