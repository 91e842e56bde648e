//! Perfect sampling from a joint law whose full conditionals are log-concave
//! on compact intervals.
//!
//! The Gibbs sweep kernel is split as `P = eps * g + (1 - eps) * R`, where
//! `eps * g` is a product of per-coordinate lower envelopes that do not depend
//! on the current state. A regeneration time `T` is geometric with parameter
//! `eps`; the chain starts from `g` at `-T` and moves forward with `R`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::anneal::{anneal_optimize, AnnealConfig, Point, SearchSpace, Sense};
use crate::ars::{interior_grid, Ars};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::ledger::{splitmix, KeyedRng, RandomLedger, Stream, RETRY_CAP};
use crate::math::{exp, floor, log, log1p, NEG_INF};
use crate::piecewise::{ExpPiece, PiecewiseExp};
use crate::special::LogQuadrature;

/// A joint law given through its full conditionals. `xi` is always the full
/// state vector; the entry of the coordinate being evaluated is ignored.
pub trait LogConcaveSystem: Sync {
    fn dim(&self) -> usize;

    fn support(&self, i: usize) -> (f64, f64);

    /// Coordinates the conditional of `i` depends on.
    fn dependencies(&self, i: usize) -> Vec<usize>;

    /// Unnormalized log conditional density of coordinate `i` at `x`.
    fn log_conditional(&self, i: usize, x: f64, xi: &[f64]) -> f64;

    fn d_log_conditional(&self, i: usize, x: f64, xi: &[f64]) -> f64;

    /// `ln` of the conditional's integral over the support.
    fn log_normalizer(&self, i: usize, xi: &[f64]) -> f64 {
        let (lo, hi) = self.support(i);
        LogQuadrature::default().log_integral(|x| self.log_conditional(i, x, xi), lo, hi)
    }

    /// Exact draw from the conditional; adaptive rejection sampling by default.
    fn sample_conditional(&self, i: usize, xi: &[f64], rng: &mut KeyedRng) -> Result<f64> {
        let mut ars = Ars::new(
            |x| self.log_conditional(i, x, xi),
            |x| self.d_log_conditional(i, x, xi),
            self.support(i),
            true,
        )?;
        ars.sample(rng)
    }

    /// Normalized log conditional.
    fn log_density(&self, i: usize, x: f64, xi: &[f64]) -> f64 {
        self.log_conditional(i, x, xi) - self.log_normalizer(i, xi)
    }
}

/// How one Gibbs sweep is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMethod {
    /// Coordinatewise draws from the full conditionals.
    Direct,
    /// Rejection from the product of upper envelopes, with the squeeze.
    Rejection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    /// Interior abscissae per coordinate.
    pub abscissae: usize,
    pub anneal: AnnealConfig,
    pub method: KernelMethod,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            abscissae: 8,
            anneal: AnnealConfig { iterations: 100, restarts: 1, ..AnnealConfig::default() },
            method: KernelMethod::Direct,
        }
    }
}

/// Envelopes of one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateKernel {
    /// `exp(l_{m,i})`, with total mass `eps_i`.
    pub lower: PiecewiseExp,
    pub log_eps: f64,
    /// `exp(u_{m,i})`, with total mass `eta_i`.
    pub upper: PiecewiseExp,
    pub log_eta: f64,
}

/// The decomposition of the sweep kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureKernel {
    pub coords: Vec<CoordinateKernel>,
    pub log_eps: f64,
    pub log_eta: f64,
}

impl MixtureKernel {
    pub fn epsilon(&self) -> f64 {
        exp(self.log_eps)
    }

    pub fn eta(&self) -> f64 {
        exp(self.log_eta)
    }

    /// `ln(eps * g_m(xi))`.
    pub fn log_eps_g(&self, xi: &[f64]) -> f64 {
        self.coords.iter().zip(xi).map(|(c, &x)| c.lower.log_eval(x)).sum()
    }

    /// `ln(eta * f_m(xi))`.
    pub fn log_eta_f(&self, xi: &[f64]) -> f64 {
        self.coords.iter().zip(xi).map(|(c, &x)| c.upper.log_eval(x)).sum()
    }
}

fn dependency_space<S: LogConcaveSystem + ?Sized>(system: &S, deps: &[usize]) -> SearchSpace {
    SearchSpace { discrete: vec![], continuous: deps.iter().map(|&d| system.support(d)).collect() }
}

fn embed(base: &[f64], deps: &[usize], p: &Point) -> Vec<f64> {
    let mut xi = base.to_vec();
    for (&d, &v) in deps.iter().zip(&p.continuous) {
        xi[d] = v;
    }
    xi
}

fn center_of<S: LogConcaveSystem + ?Sized>(system: &S) -> Vec<f64> {
    (0..system.dim())
        .map(|i| {
            let (lo, hi) = system.support(i);
            0.5 * (lo + hi)
        })
        .collect()
}

/// Extreme of `f(xi_{-i})` over the dependency box of coordinate `i`.
fn extremum<S: LogConcaveSystem + ?Sized>(
    system: &S,
    i: usize,
    sense: Sense,
    config: &AnnealConfig,
    rng: &mut KeyedRng,
    f: impl Fn(&[f64]) -> f64,
) -> Result<f64> {
    let deps = system.dependencies(i);
    let base = center_of(system);
    if deps.is_empty() {
        return Ok(f(&base));
    }
    let space = dependency_space(system, &deps);
    let opt = anneal_optimize(|p| f(&embed(&base, &deps, p)), &space, sense, config, &[], rng)?;
    Ok(opt.value)
}

/// Abscissae used for coordinate `i`: the support ends plus `m` interior points.
fn kernel_abscissae(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    let mut xs = vec![lo];
    xs.extend(interior_grid(lo, hi, m));
    xs.push(hi);
    xs
}

/// Lower envelope of coordinate `i`: the chord through the infima of the
/// normalized log conditional at fixed abscissae (points where the infimum is
/// `-inf` are dropped).
pub fn build_lower_envelope<S: LogConcaveSystem + ?Sized>(
    system: &S,
    i: usize,
    abscissae: usize,
    config: &AnnealConfig,
    rng: &mut KeyedRng,
) -> Result<(PiecewiseExp, f64)> {
    let (lo, hi) = system.support(i);
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for x in kernel_abscissae(lo, hi, abscissae) {
        let v = extremum(system, i, Sense::Min, config, rng, |xi| system.log_density(i, x, xi))?;
        if v.is_finite() {
            pts.push((x, v));
        }
    }
    if pts.len() < 2 {
        return Err(Error::EnvelopeDegenerate { coord: i });
    }
    let pieces = pts
        .windows(2)
        .map(|w| ExpPiece { lo: w[0].0, hi: w[1].0, log_at_lo: w[0].1, slope: (w[1].1 - w[0].1) / (w[1].0 - w[0].0) })
        .collect();
    let env = PiecewiseExp::new(pieces);
    let log_eps = env.log_total().min(0.0);
    if !(exp(log_eps) > 0.0) {
        return Err(Error::EnvelopeDegenerate { coord: i });
    }
    Ok((env, log_eps))
}

/// Upper envelope of coordinate `i`: `min_j [H_j + (x - x_j) D_j(x)]` with
/// `H_j` the supremum of the normalized log conditional at `x_j` and `D_j`
/// the supremum (right of `x_j`) or infimum (left of `x_j`) of its slope.
pub fn build_upper_envelope<S: LogConcaveSystem + ?Sized>(
    system: &S,
    i: usize,
    abscissae: usize,
    config: &AnnealConfig,
    rng: &mut KeyedRng,
) -> Result<(PiecewiseExp, f64)> {
    let (lo, hi) = system.support(i);
    let mut lines: Vec<(f64, f64, f64, bool)> = Vec::new(); // (x_j, H_j, slope, right side)
    for x in interior_grid(lo, hi, abscissae) {
        let h = extremum(system, i, Sense::Max, config, rng, |xi| system.log_density(i, x, xi))?;
        let dp = extremum(system, i, Sense::Max, config, rng, |xi| system.d_log_conditional(i, x, xi))?;
        let dm = extremum(system, i, Sense::Min, config, rng, |xi| system.d_log_conditional(i, x, xi))?;
        if !h.is_finite() || !dp.is_finite() || !dm.is_finite() {
            return Err(Error::DegenerateConditional(alloc::format!(
                "coordinate {i}: non-finite envelope ingredient at {x}"
            )));
        }
        lines.push((x, h, dp, true));
        lines.push((x, h, dm, false));
    }
    let env = min_of_kinked_lines(&lines, lo, hi);
    let log_eta = env.log_total();
    Ok((env, log_eta))
}

fn eval_kinked(lines: &[(f64, f64, f64, bool)], x: f64) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (k, pair) in lines.chunks(2).enumerate() {
        let (xj, h, dp, _) = pair[0];
        let dm = pair[1].2;
        let v = h + (x - xj) * if x >= xj { dp } else { dm };
        if v < best.0 {
            best = (v, k);
        }
    }
    best
}

fn min_of_kinked_lines(lines: &[(f64, f64, f64, bool)], lo: f64, hi: f64) -> PiecewiseExp {
    let mut cuts = vec![lo, hi];
    for &(x, ..) in lines {
        cuts.push(x);
    }
    for a in 0..lines.len() {
        for b in a + 1..lines.len() {
            let (xa, ha, da, _) = lines[a];
            let (xb, hb, db, _) = lines[b];
            if da != db {
                // ha + (x - xa) da = hb + (x - xb) db
                let x = (hb - ha + xa * da - xb * db) / (da - db);
                if x > lo && x < hi {
                    cuts.push(x);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut pieces = Vec::with_capacity(cuts.len());
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        let (_, k) = eval_kinked(lines, mid);
        let (xj, h, dp, _) = lines[2 * k];
        let slope = if mid >= xj { dp } else { lines[2 * k + 1].2 };
        pieces.push(ExpPiece { lo: a, hi: b, log_at_lo: h + (a - xj) * slope, slope });
    }
    PiecewiseExp::new(pieces)
}

/// Builds every coordinate's envelopes; coordinates are independent work items.
pub fn build_kernel<S: LogConcaveSystem + ?Sized, E: Executor>(
    system: &S,
    config: &KernelConfig,
    ledger: &RandomLedger,
    time: i64,
    exec: &E,
) -> Result<MixtureKernel> {
    config.anneal.validate()?;
    if config.abscissae == 0 {
        return Err(Error::Input("kernel needs at least one interior abscissa".into()));
    }
    let coords = exec.map(system.dim(), |i| -> Result<CoordinateKernel> {
        let mut rng = ledger.rng(Stream::Anneal, time, i as u64, 0);
        let (lower, log_eps) = build_lower_envelope(system, i, config.abscissae, &config.anneal, &mut rng)?;
        let mut rng = ledger.rng(Stream::Anneal, time, i as u64, 1);
        let (upper, log_eta) = build_upper_envelope(system, i, config.abscissae, &config.anneal, &mut rng)?;
        Ok(CoordinateKernel { lower, log_eps, upper, log_eta: log_eta.max(log_eps) })
    });
    let coords = coords.into_iter().collect::<Result<Vec<_>>>()?;
    let log_eps = coords.iter().map(|c| c.log_eps).sum::<f64>().min(0.0);
    let log_eta = coords.iter().map(|c| c.log_eta).sum::<f64>().max(log_eps);
    if !(exp(log_eps) > 0.0) {
        return Err(Error::EnvelopeDegenerate { coord: usize::MAX });
    }
    Ok(MixtureKernel { coords, log_eps, log_eta })
}

/// `ln P(xi | from)` for one systematic-scan sweep in coordinate order.
pub fn log_kernel_density<S: LogConcaveSystem + ?Sized>(system: &S, xi: &[f64], from: &[f64]) -> f64 {
    let mut cur = from.to_vec();
    let mut acc = 0.0;
    for i in 0..system.dim() {
        acc += system.log_density(i, xi[i], &cur);
        cur[i] = xi[i];
    }
    acc
}

/// Keys of the perfect sampler: one outer time of a ledger stream, with an
/// inner time for the sampler's own clock.
#[derive(Debug, Clone, Copy)]
pub struct PerfectStreams {
    pub ledger: RandomLedger,
    pub stream: Stream,
    pub time: i64,
}

impl PerfectStreams {
    pub fn new(ledger: RandomLedger, stream: Stream, time: i64) -> Self {
        Self { ledger, stream, time }
    }

    fn key(inner: i64, coord: u64) -> u64 {
        splitmix(inner as u64 ^ 0x696e_6e65_72) ^ coord
    }

    pub fn rng(&self, inner: i64, coord: u64, retry: u64) -> KeyedRng {
        self.ledger.rng(self.stream, self.time, Self::key(inner, coord), retry)
    }

    pub fn uniform(&self, inner: i64, coord: u64, retry: u64) -> Result<f64> {
        self.ledger.uniform(self.stream, self.time, Self::key(inner, coord), retry)
    }
}

const COORD_ACCEPT: u64 = u64::MAX;
const COORD_REGEN: u64 = u64::MAX - 1;

/// Draw from `g_m`: independent inverse-CDF draws per coordinate.
pub fn sample_gm(kernel: &MixtureKernel, streams: &PerfectStreams, inner: i64) -> Vec<f64> {
    kernel
        .coords
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut rng = streams.rng(inner, i as u64, 0);
            c.lower.sample(rng.uniform(), rng.uniform())
        })
        .collect()
}

/// Counters from kernel draws.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DrawStats {
    pub proposals: u64,
    pub squeezed: u64,
}

/// One draw from `P(. | from)`, attempt `retry` of inner time `inner`.
pub fn sample_kernel_p<S: LogConcaveSystem + ?Sized>(
    kernel: &MixtureKernel,
    system: &S,
    from: &[f64],
    streams: &PerfectStreams,
    inner: i64,
    retry: u64,
    method: KernelMethod,
    stats: &mut DrawStats,
) -> Result<Vec<f64>> {
    match method {
        KernelMethod::Direct => {
            let mut cur = from.to_vec();
            for i in 0..system.dim() {
                let mut rng = streams.rng(inner, (retry << 16) ^ i as u64, 1);
                cur[i] = system.sample_conditional(i, &cur, &mut rng)?;
            }
            stats.proposals += 1;
            Ok(cur)
        }
        KernelMethod::Rejection => {
            let mut rng = streams.rng(inner, retry, 2);
            for _ in 0..RETRY_CAP {
                stats.proposals += 1;
                let xi: Vec<f64> = kernel.coords.iter().map(|c| c.upper.sample(rng.uniform(), rng.uniform())).collect();
                let w = rng.uniform();
                let log_ef = kernel.log_eta_f(&xi);
                if log(w) <= kernel.log_eps_g(&xi) - log_ef {
                    stats.squeezed += 1;
                    return Ok(xi);
                }
                let log_p = log_kernel_density(system, &xi, from);
                if log_p - log_ef > 1e-9 {
                    return Err(Error::KernelInconsistency { residual: exp(log_ef) - exp(log_p) });
                }
                if log(w) <= log_p - log_ef {
                    return Ok(xi);
                }
            }
            Err(Error::PathologicalTarget { proposals: RETRY_CAP })
        }
    }
}

/// One draw from the residual kernel `R_m(. | from)` (Algorithm 1).
pub fn sample_residual<S: LogConcaveSystem + ?Sized>(
    kernel: &MixtureKernel,
    system: &S,
    from: &[f64],
    streams: &PerfectStreams,
    inner: i64,
    method: KernelMethod,
    stats: &mut DrawStats,
) -> Result<Vec<f64>> {
    for retry in 0..RETRY_CAP {
        let xi = sample_kernel_p(kernel, system, from, streams, inner, retry, method, stats)?;
        let ratio = exp(kernel.log_eps_g(&xi) - log_kernel_density(system, &xi, from));
        if ratio > 1.0 + 1e-12 {
            return Err(Error::KernelInconsistency { residual: 1.0 - ratio });
        }
        let w = streams.uniform(inner, COORD_ACCEPT, retry)?;
        if w < 1.0 - ratio {
            return Ok(xi);
        }
    }
    Err(Error::PathologicalTarget { proposals: RETRY_CAP })
}

/// Output of Algorithm 3.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfectDraw {
    pub xi: Vec<f64>,
    /// Steps since the last regeneration.
    pub regeneration: u64,
    pub stats: DrawStats,
}

/// `T = floor(ln U / ln(1 - eps))`, geometric on `{0, 1, ...}`.
pub fn regeneration_time(log_eps: f64, u: f64) -> u64 {
    if log_eps >= 0.0 {
        return 0;
    }
    // ln(1 - eps) computed without cancellation for small eps
    let l1m = log1p(-exp(log_eps));
    if l1m == NEG_INF {
        return 0;
    }
    let t = floor(log(u) / l1m);
    if t >= 1e18 { u64::MAX } else { t as u64 }
}

/// Algorithm 3: regeneration time, a start from `g_m`, then residual steps.
pub fn perfect_sample<S: LogConcaveSystem + ?Sized>(
    kernel: &MixtureKernel,
    system: &S,
    streams: &PerfectStreams,
    method: KernelMethod,
) -> Result<PerfectDraw> {
    let u = streams.uniform(0, COORD_REGEN, 0)?;
    let t = regeneration_time(kernel.log_eps, u);
    if t > RETRY_CAP {
        return Err(Error::RegenerationTooLong { t, epsilon: exp(kernel.log_eps) });
    }
    let start = -(t as i64);
    let mut xi = sample_gm(kernel, streams, start);
    let mut stats = DrawStats::default();
    for inner in start + 1..=0 {
        xi = sample_residual(kernel, system, &xi, streams, inner, method, &mut stats)?;
    }
    Ok(PerfectDraw { xi, regeneration: t, stats })
}

type LogPdf = Box<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
type Sampler = Box<dyn Fn(&[f64], &mut KeyedRng) -> Result<f64> + Send + Sync>;
type Normalizer = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One coordinate of a [`FnSystem`].
pub struct FnCoordinate {
    pub support: (f64, f64),
    pub dependencies: Vec<usize>,
    pub log_pdf: LogPdf,
    pub d_log_pdf: LogPdf,
    pub log_normalizer: Option<Normalizer>,
    pub sampler: Option<Sampler>,
}

impl FnCoordinate {
    pub fn new(
        support: (f64, f64),
        dependencies: Vec<usize>,
        log_pdf: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        d_log_pdf: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            support,
            dependencies,
            log_pdf: Box::new(log_pdf),
            d_log_pdf: Box::new(d_log_pdf),
            log_normalizer: None,
            sampler: None,
        }
    }

    pub fn with_normalizer(mut self, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.log_normalizer = Some(Box::new(f));
        self
    }

    pub fn with_sampler(mut self, f: impl Fn(&[f64], &mut KeyedRng) -> Result<f64> + Send + Sync + 'static) -> Self {
        self.sampler = Some(Box::new(f));
        self
    }
}

/// A system assembled from closures.
pub struct FnSystem {
    pub coords: Vec<FnCoordinate>,
}

impl LogConcaveSystem for FnSystem {
    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn support(&self, i: usize) -> (f64, f64) {
        self.coords[i].support
    }

    fn dependencies(&self, i: usize) -> Vec<usize> {
        self.coords[i].dependencies.clone()
    }

    fn log_conditional(&self, i: usize, x: f64, xi: &[f64]) -> f64 {
        (self.coords[i].log_pdf)(x, xi)
    }

    fn d_log_conditional(&self, i: usize, x: f64, xi: &[f64]) -> f64 {
        (self.coords[i].d_log_pdf)(x, xi)
    }

    fn log_normalizer(&self, i: usize, xi: &[f64]) -> f64 {
        match &self.coords[i].log_normalizer {
            Some(f) => f(xi),
            None => {
                let (lo, hi) = self.support(i);
                LogQuadrature::default().log_integral(|x| self.log_conditional(i, x, xi), lo, hi)
            }
        }
    }

    fn sample_conditional(&self, i: usize, xi: &[f64], rng: &mut KeyedRng) -> Result<f64> {
        match &self.coords[i].sampler {
            Some(f) => f(xi, rng),
            None => {
                let mut ars = Ars::new(
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
