//! Stochastic lower and upper distribution functions for the discrete
//! coordinates, obtained by optimizing the exact conditional CDF over every
//! state the coupled chains may still occupy.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::anneal::{anneal_optimize, AnnealConfig, Point, SearchSpace, Sense};
use crate::conditionals::{fc_c_weights, marginalized_c_weights, marginalized_z_weights, WeightVector};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::ledger::{KeyedRng, RandomLedger, Stream};
use crate::model::{loglik_series, CategoricalPanel, ChainState, PriorConfig, Square, TransitionMatrix};
use crate::partition::{all_partitions, bell, canonical, clusters_without, distinct_count};
use crate::phigamma::{phi_from_sticks, sticks_from_phi};

/// Lower and upper CDFs on the support `1..=len`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPair {
    pub fl: Vec<f64>,
    pub fu: Vec<f64>,
    /// Values widened because a random probe fell outside the optimized bounds.
    pub repairs: usize,
}

impl BoundPair {
    /// Clamps to `[0, 1]`, sets the top to 1 and restores monotonicity:
    /// running maximum for `fl`, running minimum from the right for `fu`.
    pub fn from_raw(mut fl: Vec<f64>, mut fu: Vec<f64>) -> Self {
        let n = fl.len();
        for v in fl.iter_mut().chain(fu.iter_mut()) {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        if n > 0 {
            fl[n - 1] = 1.0;
            fu[n - 1] = 1.0;
        }
        for v in 1..n {
            fl[v] = fl[v].max(fl[v - 1]);
        }
        for v in (0..n.saturating_sub(1)).rev() {
            fu[v] = fu[v].min(fu[v + 1]);
        }
        // fu is only lowered by the repair above, never below a valid fl
        for v in 0..n {
            fu[v] = fu[v].max(fl[v]);
        }
        Self { fl, fu, repairs: 0 }
    }

    pub fn exact(cdf: Vec<f64>) -> Self {
        Self::from_raw(cdf.clone(), cdf)
    }

    pub fn len(&self) -> usize {
        self.fl.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fl.is_empty()
    }

    /// Step-function value of `fl` and `fu` at a real argument.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        if x < 1.0 || self.is_empty() {
            return (0.0, 0.0);
        }
        let v = (libm::floor(x) as usize).min(self.len());
        (self.fl[v - 1], self.fu[v - 1])
    }

    /// True when `fl <= cdf <= fu` everywhere (shorter `cdf` is padded with 1).
    pub fn covers(&self, cdf: &[f64]) -> bool {
        (0..self.len()).all(|v| {
            let f = cdf.get(v).copied().unwrap_or(1.0);
            self.fl[v] <= f && f <= self.fu[v]
        })
    }

    /// Widens the pair so that it covers `cdf`; returns whether anything moved.
    pub fn repair_with(&mut self, cdf: &[f64]) -> bool {
        let mut moved = false;
        for v in 0..self.len() {
            let f = cdf.get(v).copied().unwrap_or(1.0);
            if f < self.fl[v] {
                self.fl[v] = f;
                moved = true;
            }
            if f > self.fu[v] {
                self.fu[v] = f;
                moved = true;
            }
        }
        moved
    }

    /// Distribution-function checks: values in `[0, 1]`, `fl <= fu`, both
    /// nondecreasing, both equal to 1 at the top. Zero below the support and
    /// right-continuity hold by construction of [`BoundPair::eval`].
    pub fn check(&self) -> core::result::Result<(), alloc::string::String> {
        let n = self.len();
        if n == 0 || self.fu.len() != n {
            return Err("empty or ragged pair".into());
        }
        for v in 0..n {
            let (l, u) = (self.fl[v], self.fu[v]);
            if !(0.0..=1.0).contains(&l) || !(0.0..=1.0).contains(&u) {
                return Err(format!("value outside [0, 1] at {}", v + 1));
            }
            if l > u {
                return Err(format!("FL > FU at {}", v + 1));
            }
            if v > 0 && (l < self.fl[v - 1] || u < self.fu[v - 1]) {
                return Err(format!("decrease at {}", v + 1));
            }
        }
        if self.fl[n - 1] != 1.0 || self.fu[n - 1] != 1.0 {
            return Err("top value is not 1".into());
        }
        Ok(())
    }

    /// Pointwise union of two pairs on the longer support.
    pub fn union(&self, other: &BoundPair) -> BoundPair {
        let n = self.len().max(other.len());
        let at = |f: &[f64], v: usize| f.get(v).copied().unwrap_or(1.0);
        let fl = (0..n).map(|v| at(&self.fl, v).min(at(&other.fl, v))).collect();
        let fu = (0..n).map(|v| at(&self.fu, v).max(at(&other.fu, v))).collect();
        let mut p = BoundPair::from_raw(fl, fu);
        p.repairs = self.repairs + other.repairs;
        p
    }
}

/// `(min{v : FU(v) >= u}, min{v : FL(v) >= u})`, 1-based.
pub fn invert_bounds(pair: &BoundPair, u: f64) -> (usize, usize) {
    let first = |f: &[f64]| f.iter().position(|&x| x >= u).unwrap_or(f.len() - 1) + 1;
    (first(&pair.fu), first(&pair.fl))
}

/// Interval of allocations each series may still hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZBox {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

impl ZBox {
    pub fn point(z: &[usize]) -> Self {
        Self { lo: z.to_vec(), hi: z.to_vec() }
    }

    pub fn full(n: usize, m: usize) -> Self {
        Self { lo: vec![1; n], hi: vec![m; n] }
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn is_coalesced(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, z: &[usize]) -> bool {
        z.len() == self.len() && z.iter().enumerate().all(|(i, &v)| self.lo[i] <= v && v <= self.hi[i])
    }

    /// `(i, lo, hi)` for every open coordinate, 1-based `i`.
    pub fn gaps(&self) -> Vec<(usize, usize, usize)> {
        (0..self.len()).filter(|&i| self.lo[i] != self.hi[i]).map(|i| (i + 1, self.lo[i], self.hi[i])).collect()
    }
}

/// The configurations the coupled chains may still occupy: an explicit set
/// of partitions while that is affordable, otherwise a box of slot labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionBound {
    Set(Vec<Vec<usize>>),
    Box { lo: Vec<usize>, hi: Vec<usize> },
}

impl PartitionBound {
    pub fn point(s: &[usize]) -> Self {
        PartitionBound::Set(vec![s.to_vec()])
    }

    /// Every partition of `m` slots; a box when there are more than `limit`.
    pub fn full(m: usize, limit: usize) -> Self {
        if bell(m) <= limit as f64 {
            PartitionBound::Set(all_partitions(m))
        } else {
            PartitionBound::Box { lo: vec![1; m], hi: (1..=m).collect() }
        }
    }

    pub fn slots(&self) -> usize {
        match self {
            PartitionBound::Set(v) => v[0].len(),
            PartitionBound::Box { lo, .. } => lo.len(),
        }
    }

    /// The single remaining configuration, if any.
    pub fn coalesced(&self) -> Option<Vec<usize>> {
        match self {
            PartitionBound::Set(v) if v.len() == 1 => Some(v[0].clone()),
            PartitionBound::Box { lo, hi } if lo == hi => Some(canonical(lo)),
            _ => None,
        }
    }

    pub fn contains(&self, s: &[usize]) -> bool {
        match self {
            PartitionBound::Set(v) => v.iter().any(|m| m.as_slice() == s),
            PartitionBound::Box { lo, hi } => {
                s.len() == lo.len() && s.iter().enumerate().all(|(j, &x)| lo[j] <= x && x <= hi[j])
            }
        }
    }

    /// Range of the label of slot `j` (0-based).
    pub fn slot_range(&self, j: usize) -> (usize, usize) {
        match self {
            PartitionBound::Set(v) => {
                let lo = v.iter().map(|s| s[j]).min().unwrap_or(1);
                let hi = v.iter().map(|s| s[j]).max().unwrap_or(1);
                (lo, hi)
            }
            PartitionBound::Box { lo, hi } => (lo[j], hi[j]),
        }
    }

    /// `(j, lo, hi)` for every slot whose label is not yet determined.
    pub fn gaps(&self) -> Vec<(usize, usize, usize)> {
        (0..self.slots())
            .filter_map(|j| {
                let (a, b) = self.slot_range(j);
                (a != b).then_some((j + 1, a, b))
            })
            .collect()
    }
}

/// Keys for the optimizer and probe randomness of one bound.
#[derive(Debug, Clone, Copy)]
pub struct BoundKeys {
    pub ledger: RandomLedger,
    pub time: i64,
    pub coord: u64,
}

impl BoundKeys {
    fn rng(&self, stream: Stream, retry: u64) -> KeyedRng {
        self.ledger.rng(stream, self.time, self.coord, retry)
    }
}

/// Box of transition matrices in stick-breaking coordinates, one list of
/// `K (K-1)` intervals per cluster label. Zero-width intervals pin a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiBox {
    pub states: usize,
    pub sticks: Vec<Vec<(f64, f64)>>,
}

impl PhiBox {
    pub fn pinned(phi: &[TransitionMatrix]) -> Self {
        let states = phi.first().map_or(1, TransitionMatrix::k);
        let sticks = phi.iter().map(|p| sticks_from_phi(p).into_iter().map(|v| (v, v)).collect()).collect();
        Self { states, sticks }
    }

    pub fn full(states: usize, clusters: usize, support: (f64, f64)) -> Self {
        Self { states, sticks: vec![vec![support; states * (states - 1)]; clusters] }
    }
}

enum SLayout<'a> {
    Fixed(Vec<usize>),
    Members(&'a [Vec<usize>]),
    Slots { base: Vec<usize>, free: Vec<(usize, Vec<usize>)> },
}

/// A concrete configuration of the free variables.
struct Decoded {
    z: Vec<usize>,
    s: Vec<usize>,
    gamma: Square<f64>,
    phi: Vec<TransitionMatrix>,
}

/// Maps annealing points to configurations.
struct Layout<'a> {
    base_z: Vec<usize>,
    z_free: Vec<(usize, Vec<usize>)>,
    s: SLayout<'a>,
    gamma: Square<f64>,
    gamma_free: Vec<(usize, usize, (f64, f64))>,
    phi: Option<(usize, Vec<Vec<f64>>, Vec<(usize, usize, (f64, f64))>)>,
}

impl<'a> Layout<'a> {
    fn new(zb: &ZBox, skip_z: Option<usize>, s: SLayout<'a>, prior: &PriorConfig) -> Self {
        let z_free = (0..zb.len())
            .filter(|&i| Some(i) != skip_z && zb.lo[i] < zb.hi[i])
            .map(|i| (i, (zb.lo[i]..=zb.hi[i]).collect()))
            .collect();
        let k = prior.k();
        let mut gamma = Square::filled(k, 0.0);
        let mut gamma_free = Vec::new();
        for a in 0..k {
            for b in 0..k {
                let (lo, hi) = prior.gamma_support.get(a, b);
                gamma.set(a, b, lo);
                if hi > lo {
                    gamma_free.push((a, b, (lo, hi)));
                }
            }
        }
        Self { base_z: zb.lo.clone(), z_free, s, gamma, gamma_free, phi: None }
    }

    fn with_phi(mut self, phi: &PhiBox) -> Self {
        let base = phi.sticks.iter().map(|c| c.iter().map(|&(lo, _)| lo).collect()).collect();
        let mut free = Vec::new();
        for (l, c) in phi.sticks.iter().enumerate() {
            for (x, &(lo, hi)) in c.iter().enumerate() {
                if hi > lo {
                    free.push((l, x, (lo, hi)));
                }
            }
        }
        self.phi = Some((phi.states, base, free));
        self
    }

    fn space(&self) -> SearchSpace {
        let mut discrete: Vec<Vec<usize>> = self.z_free.iter().map(|(_, v)| v.clone()).collect();
        match &self.s {
            SLayout::Fixed(_) => {}
            SLayout::Members(m) => discrete.push((0..m.len()).collect()),
            SLayout::Slots { free, .. } => discrete.extend(free.iter().map(|(_, v)| v.clone())),
        }
        let mut continuous: Vec<(f64, f64)> = self.gamma_free.iter().map(|g| g.2).collect();
        if let Some((_, _, free)) = &self.phi {
            continuous.extend(free.iter().map(|f| f.2));
        }
        SearchSpace { discrete, continuous }
    }

    fn decode(&self, p: &Point) -> Result<Decoded> {
        let mut d = p.discrete.iter().copied();
        let mut z = self.base_z.clone();
        for (i, _) in &self.z_free {
            z[*i] = d.next().expect("layout");
        }
        let s = match &self.s {
            SLayout::Fixed(s) => s.clone(),
            SLayout::Members(m) => m[d.next().expect("layout")].clone(),
            SLayout::Slots { base, free } => {
                let mut s = base.clone();
                for (j, _) in free {
                    s[*j] = d.next().expect("layout");
                }
                canonical(&s)
            }
        };
        let mut c = p.continuous.iter().copied();
        let mut gamma = self.gamma.clone();
        for &(a, b, _) in &self.gamma_free {
            gamma.set(a, b, c.next().expect("layout"));
        }
        let phi = match &self.phi {
            None => Vec::new(),
            Some((states, base, free)) => {
                let mut sticks = base.clone();
                for &(l, x, _) in free {
                    sticks[l][x] = c.next().expect("layout");
                }
                sticks.iter().map(|v| phi_from_sticks(*states, v)).collect::<Result<Vec<_>>>()?
            }
        };
        Ok(Decoded { z, s, gamma, phi })
    }
}

type CdfFn<'f> = dyn Fn(&Decoded) -> Result<Vec<f64>> + Sync + 'f;

fn padded(cdf: &[f64], v: usize) -> f64 {
    cdf.get(v).copied().unwrap_or(1.0)
}

/// Per-value optimization, monotonization and probe repair.
fn optimize_bounds<E: Executor>(
    layout: &Layout<'_>,
    len: usize,
    cdf: &CdfFn<'_>,
    keys: BoundKeys,
    config: &AnnealConfig,
    exec: &E,
) -> Result<BoundPair> {
    let space = layout.space();
    if space.is_empty() {
        return Err(Error::EmptyFeasibleSet);
    }
    let eval = |p: &Point| layout.decode(p).and_then(|d| cdf(&d)).ok();
    if !space.has_free_continuous() && space.discrete_size() <= config.exhaustive_limit as f64 {
        let mut fl: Vec<f64> = vec![1.0; len];
        let mut fu: Vec<f64> = vec![0.0; len];
        for p in space.enumerate() {
            match eval(&p) {
                Some(f) => {
                    for v in 0..len {
                        fl[v] = fl[v].min(padded(&f, v));
                        fu[v] = fu[v].max(padded(&f, v));
                    }
                }
                None => {
                    fl.iter_mut().for_each(|x| *x = 0.0);
                    fu.iter_mut().for_each(|x| *x = 1.0);
                }
            }
        }
        return Ok(BoundPair::from_raw(fl, fu));
    }

    let jobs = 2 * len.saturating_sub(1);
    let values = exec.map(jobs, |job| -> Result<f64> {
        let v = job / 2;
        let sense = if job % 2 == 0 { Sense::Min } else { Sense::Max };
        let fallback = if sense == Sense::Min { 0.0 } else { 1.0 };
        let mut rng = keys.rng(Stream::Anneal, job as u64);
        let opt = anneal_optimize(
            |p| eval(p).map_or(fallback, |f| padded(&f, v)),
            &space,
            sense,
            config,
            &[],
            &mut rng,
        )?;
        Ok(opt.value)
    });
    let mut fl = vec![1.0; len];
    let mut fu = vec![1.0; len];
    for (job, r) in values.into_iter().enumerate() {
        let v = job / 2;
        if job % 2 == 0 {
            fl[v] = r?;
        } else {
            fu[v] = r?;
        }
    }
    let mut pair = BoundPair::from_raw(fl, fu);
    let mut rng = keys.rng(Stream::Probe, 0);
    for _ in 0..config.probes {
        let p = space.random_point(&mut rng);
        let moved = match eval(&p) {
            Some(f) => pair.repair_with(&f),
            None => pair.repair_with(&vec![0.0; len.saturating_sub(1)]) | pair.repair_with(&vec![1.0; len]),
        };
        if moved {
            pair.repairs += 1;
        }
    }
    if pair.repairs > 0 {
        log::warn!(
            "bound at time {} coordinate {} widened by {} of {} probes",
            keys.time,
            keys.coord,
            pair.repairs,
            config.probes
        );
    }
    Ok(pair)
}

fn s_layout(sb: &PartitionBound) -> SLayout<'_> {
    match sb {
        PartitionBound::Set(m) if m.len() == 1 => SLayout::Fixed(m[0].clone()),
        PartitionBound::Set(m) => SLayout::Members(m),
        PartitionBound::Box { lo, hi } => SLayout::Slots {
            base: lo.clone(),
            free: (0..lo.len()).filter(|&j| lo[j] < hi[j]).map(|j| (j, (lo[j]..=hi[j]).collect())).collect(),
        },
    }
}

/// Exact CDF of `z_i` over slots `1..=M` with the transition matrices
/// integrated out.
pub fn collapsed_z_cdf(i: usize, z: &[usize], s: &[usize], gamma: &Square<f64>, panel: &CategoricalPanel) -> Result<Vec<f64>> {
    Ok(marginalized_z_weights(i, z, s, gamma, panel)?.cdf())
}

/// Exact CDF of `c_j` over `1..=k_j + 1` with the transition matrices
/// integrated out.
pub fn collapsed_c_cdf(
    j: usize,
    z: &[usize],
    s: &[usize],
    gamma: &Square<f64>,
    panel: &CategoricalPanel,
    alpha: f64,
) -> Result<Vec<f64>> {
    Ok(marginalized_c_weights(j, z, s, gamma, panel, alpha)?.cdf())
}

/// Bounds on the CDF of `z_i` (0-based `i`) over the other allocations in
/// `zb`, the configurations in `sb` and the gamma box.
pub fn bound_z_cdf<E: Executor>(
    i: usize,
    zb: &ZBox,
    sb: &PartitionBound,
    prior: &PriorConfig,
    panel: &CategoricalPanel,
    keys: BoundKeys,
    config: &AnnealConfig,
    exec: &E,
) -> Result<BoundPair> {
    let layout = Layout::new(zb, Some(i), s_layout(sb), prior);
    let cdf = |d: &Decoded| collapsed_z_cdf(i, &d.z, &d.s, &d.gamma, panel);
    optimize_bounds(&layout, prior.m, &cdf, keys, config, exec)
}

/// Bounds on the CDF of `c_j` (0-based slot `j`) for one configuration `s`,
/// over the allocations in `zb` and the gamma box. Support `1..=k_j + 1`.
pub fn bound_c_cdf<E: Executor>(
    j: usize,
    zb: &ZBox,
    s: &[usize],
    prior: &PriorConfig,
    panel: &CategoricalPanel,
    keys: BoundKeys,
    config: &AnnealConfig,
    exec: &E,
) -> Result<BoundPair> {
    let len = clusters_without(s, j).len() + 1;
    let layout = Layout::new(zb, None, SLayout::Fixed(s.to_vec()), prior);
    let cdf = |d: &Decoded| collapsed_c_cdf(j, &d.z, &d.s, &d.gamma, panel, prior.alpha);
    optimize_bounds(&layout, len, &cdf, keys, config, exec)
}

/// Bounds for `c_j` when the configurations are only known up to a box.
#[derive(Debug, Clone, PartialEq)]
pub struct CBound {
    /// Support `1..=M`.
    pub pair: BoundPair,
    /// Number of other clusters in the configuration used for the upper branch.
    pub k_sup: usize,
    /// Same, for the lower branch.
    pub k_inf: usize,
}

/// Box version of [`bound_c_cdf`]: the box optimum is combined with the two
/// hand-set extremes, all other slots in one cluster for the upper branch and
/// all distinct for the lower branch.
pub fn bound_c_cdf_box<E: Executor>(
    j: usize,
    zb: &ZBox,
    lo: &[usize],
    hi: &[usize],
    prior: &PriorConfig,
    panel: &CategoricalPanel,
    keys: BoundKeys,
    config: &AnnealConfig,
    exec: &E,
) -> Result<CBound> {
    let m = prior.m;
    let sb = PartitionBound::Box { lo: lo.to_vec(), hi: hi.to_vec() };
    let layout = Layout::new(zb, None, s_layout(&sb), prior);
    let cdf = |d: &Decoded| collapsed_c_cdf(j, &d.z, &d.s, &d.gamma, panel, prior.alpha);
    let boxed = optimize_bounds(&layout, m, &cdf, keys, config, exec)?;
    let same = vec![1; m];
    let distinct: Vec<usize> = (1..=m).collect();
    let sup = bound_c_cdf(j, zb, &same, prior, panel, keys, config, exec)?;
    let inf = bound_c_cdf(j, zb, &distinct, prior, panel, keys, config, exec)?;
    let at = |f: &[f64], v: usize| padded(f, v);
    let fl = (0..m).map(|v| at(&boxed.fl, v).min(at(&inf.fl, v))).collect();
    let fu = (0..m).map(|v| at(&boxed.fu, v).max(at(&sup.fu, v))).collect();
    let mut pair = BoundPair::from_raw(fl, fu);
    pair.repairs = boxed.repairs + sup.repairs + inf.repairs;
    Ok(CBound { pair, k_sup: clusters_without(&same, j).len(), k_inf: clusters_without(&distinct, j).len() })
}

/// Point-mass bounds for `s_j` given the range of the drawn `c_j` and the
/// range of the largest label among slots before `j`: `s_j = min(c_j, m + 1)`.
pub fn bound_s_cdf(c_range: (usize, usize), prefix_max: (usize, usize), m: usize) -> BoundPair {
    let s_lo = c_range.0.min(prefix_max.0 + 1);
    let s_hi = c_range.1.min(prefix_max.1 + 1);
    let fu = (1..=m).map(|v| if v >= s_lo { 1.0 } else { 0.0 }).collect();
    let fl = (1..=m).map(|v| if v >= s_hi { 1.0 } else { 0.0 }).collect();
    BoundPair::from_raw(fl, fu)
}

/// Exact CDF of `z_i` given explicit transition matrices, one per cluster label.
pub fn explicit_z_cdf(i: usize, s: &[usize], phi: &[TransitionMatrix], panel: &CategoricalPanel) -> Result<Vec<f64>> {
    let counts = panel.counts(i);
    let lw = s.iter().map(|&l| loglik_series(counts, &phi[l - 1])).collect();
    Ok(WeightVector::from_log(lw)?.cdf())
}

/// Bounds on the CDF of `z_i` with the transition matrices ranging over a
/// stick box instead of being integrated out.
pub fn bound_z_cdf_phi<E: Executor>(
    i: usize,
    sb: &PartitionBound,
    phi: &PhiBox,
    prior: &PriorConfig,
    panel: &CategoricalPanel,
    keys: BoundKeys,
    config: &AnnealConfig,
    exec: &E,
) -> Result<BoundPair> {
    check_phi_box(sb, phi)?;
    let zb = ZBox::point(&vec![1; panel.n()]);
    let layout = Layout::new(&zb, None, s_layout(sb), prior).with_phi(phi);
    let cdf = |d: &Decoded| explicit_z_cdf(i, &d.s, &d.phi, panel);
    optimize_bounds(&layout, prior.m, &cdf, keys, config, exec)
}

/// Bounds on the CDF of `c_j` for configuration `s` with explicit matrices
/// in a stick box, allocations in `zb` and gamma in its box.
pub fn bound_c_cdf_phi<E: Executor>(
    j: usize,
    zb: &ZBox,
    s: &[usize],
    phi: &PhiBox,
    prior: &PriorConfig,
    panel: &CategoricalPanel,
    keys: BoundKeys,
    config: &AnnealConfig,
    exec: &E,
) -> Result<BoundPair> {
    check_phi_box(&PartitionBound::point(s), phi)?;
    let len = clusters_without(s, j).len() + 1;
    let layout = Layout::new(zb, None, SLayout::Fixed(s.to_vec()), prior).with_phi(phi);
    let cdf = |d: &Decoded| {
        let state =
            ChainState { z: d.z.clone(), c: d.s.clone(), s: d.s.clone(), phi: d.phi.clone(), gamma: d.gamma.clone() };
        Ok(fc_c_weights(j, &state, panel, prior)?.0.cdf())
    };
    optimize_bounds(&layout, len, &cdf, keys, config, exec)
}

fn check_phi_box(sb: &PartitionBound, phi: &PhiBox) -> Result<()> {
    let need = match sb {
        PartitionBound::Set(v) => v.iter().map(|s| distinct_count(s)).max().unwrap_or(0),
        PartitionBound::Box { hi, .. } => hi.iter().copied().max().unwrap_or(0),
    };
    if phi.sticks.len() < need {
        return Err(Error::Input(format!("stick box covers {} clusters, {need} needed", phi.sticks.len())));
    }
    Ok(())
}
