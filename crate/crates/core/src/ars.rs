//! Adaptive rejection sampling on a compact interval.

use alloc::vec::Vec;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::ledger::to_unit;
use crate::math::{exp, NEG_INF};
use crate::piecewise::{ExpPiece, PiecewiseExp};

pub const DEFAULT_PROPOSAL_CAP: u64 = 1_000_000;
const MAX_ABSCISSAE: usize = 64;

/// `m` equally spaced interior points of `[lo, hi]`.
pub fn interior_grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (1..=m).map(|j| lo + (hi - lo) * j as f64 / (m + 1) as f64).collect()
}

/// Central-difference derivative, for diagnostics only.
pub fn numeric_derivative(h: impl Fn(f64) -> f64, x: f64) -> f64 {
    let step = 1e-6 * x.abs().max(1.0);
    (h(x + step) - h(x - step)) / (2.0 * step)
}

/// Tangent (upper) and chord (lower) hulls of a concave `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    lo: f64,
    hi: f64,
    xs: Vec<f64>,
    hs: Vec<f64>,
    dhs: Vec<f64>,
    knots: Vec<f64>,
    upper: PiecewiseExp,
}

impl Envelope {
    pub fn build(
        h: impl Fn(f64) -> f64,
        dh: impl Fn(f64) -> f64,
        abscissae: &[f64],
        interval: (f64, f64),
    ) -> Result<Self> {
        let points = abscissae.iter().map(|&x| (x, h(x), dh(x))).collect();
        Self::from_points(points, interval)
    }

    /// From `(x, h(x), h'(x))` triples.
    pub fn from_points(mut points: Vec<(f64, f64, f64)>, interval: (f64, f64)) -> Result<Self> {
        let (lo, hi) = interval;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(alloc::format!("interval [{lo}, {hi}] is not a compact interval")));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        points.dedup_by(|a, b| a.0 == b.0);
        if points.len() < 2 {
            return Err(Error::Config("an envelope needs at least two abscissae".into()));
        }
        for &(x, hx, dx) in &points {
            if !(lo..=hi).contains(&x) {
                return Err(Error::Domain { what: "abscissa", value: x, lo, hi });
            }
            if !hx.is_finite() || !dx.is_finite() {
                return Err(Error::DegenerateConditional(alloc::format!(
                    "log density or derivative not finite at {x}"
                )));
            }
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let hs: Vec<f64> = points.iter().map(|p| p.1).collect();
        let dhs: Vec<f64> = points.iter().map(|p| p.2).collect();
        let m = xs.len();
        let mut knots = Vec::with_capacity(m + 1);
        knots.push(lo);
        for j in 0..m - 1 {
            let (d0, d1) = (dhs[j], dhs[j + 1]);
            let scale = d0.abs().max(d1.abs()).max(1.0);
            if d1 - d0 > 1e-10 * scale {
                return Err(Error::ConcavityViolation {
                    left: xs[j],
                    right: xs[j + 1],
                    d_left: d0,
                    d_right: d1,
                });
            }
            let v = if d0 - d1 <= 1e-12 * scale {
                0.5 * (xs[j] + xs[j + 1])
            } else {
                (hs[j + 1] - hs[j] - xs[j + 1] * d1 + xs[j] * d0) / (d0 - d1)
            };
            knots.push(v.clamp(xs[j], xs[j + 1]));
        }
        knots.push(hi);
        let pieces = (0..m)
            .map(|j| ExpPiece {
                lo: knots[j],
                hi: knots[j + 1],
                log_at_lo: hs[j] + (knots[j] - xs[j]) * dhs[j],
                slope: dhs[j],
            })
            .collect();
        let upper = PiecewiseExp::new(pieces);
        Ok(Self { lo, hi, xs, hs, dhs, knots, upper })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.hs
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.dhs
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// `u_m(x)`: the tangent at the abscissa owning the knot cell of `x`.
    pub fn upper(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return NEG_INF;
        }
        let j = self.knots[1..self.knots.len() - 1].partition_point(|&v| v < x);
        self.hs[j] + (x - self.xs[j]) * self.dhs[j]
    }

    /// `l_m(x)`: chord between neighbouring abscissae, `-inf` outside them.
    pub fn lower(&self, x: f64) -> f64 {
        let m = self.xs.len();
        if x < self.xs[0] || x > self.xs[m - 1] {
            return NEG_INF;
        }
        let j = self.xs.partition_point(|&a| a <= x).clamp(1, m - 1) - 1;
        let (x0, x1) = (self.xs[j], self.xs[j + 1]);
        ((x1 - x) * self.hs[j] + (x - x0) * self.hs[j + 1]) / (x1 - x0)
    }

    /// `exp(u_m)` as a piecewise-exponential density.
    pub fn upper_density(&self) -> &PiecewiseExp {
        &self.upper
    }

    /// `exp(l_m)` as a piecewise-exponential density.
    pub fn lower_density(&self) -> PiecewiseExp {
        let pieces = self
            .xs
            .windows(2)
            .zip(self.hs.windows(2))
            .map(|(x, h)| ExpPiece {
                lo: x[0],
                hi: x[1],
                log_at_lo: h[0],
                slope: (h[1] - h[0]) / (x[1] - x[0]),
            })
            .collect();
        PiecewiseExp::new(pieces)
    }

    /// `ln int exp(u_m)`.
    pub fn log_normalizer(&self) -> f64 {
        self.upper.log_total()
    }

    /// Exact draw from the normalized `exp(u_m)`.
    pub fn sample(&self, u_piece: f64, u_within: f64) -> f64 {
        self.upper.sample(u_piece, u_within)
    }
}

/// Adaptive rejection sampler that owns its envelope.
pub struct Ars<H, D> {
    h: H,
    dh: D,
    env: Envelope,
    adapt: bool,
    cap: u64,
    proposals: u64,
    accepted: u64,
    squeezed: u64,
}

impl<H: Fn(f64) -> f64, D: Fn(f64) -> f64> Ars<H, D> {
    /// Starts from five interior points of the interval.
    pub fn new(h: H, dh: D, interval: (f64, f64), adapt: bool) -> Result<Self> {
        let xs = interior_grid(interval.0, interval.1, 5);
        Self::with_abscissae(h, dh, interval, &xs, adapt)
    }

    pub fn with_abscissae(h: H, dh: D, interval: (f64, f64), xs: &[f64], adapt: bool) -> Result<Self> {
        let env = Envelope::build(&h, &dh, xs, interval)?;
        Ok(Self {
            h,
            dh,
            env,
            adapt,
            cap: DEFAULT_PROPOSAL_CAP,
            proposals: 0,
            accepted: 0,
            squeezed: 0,
        })
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn envelope(&self) -> &Envelope {
        &self.env
    }

    /// (proposals, acceptances, acceptances decided by the squeeze alone).
    pub fn counters(&self) -> (u64, u64, u64) {
        (self.proposals, self.accepted, self.squeezed)
    }

    pub fn sample(&mut self, rng: &mut impl RngCore) -> Result<f64> {
        for _ in 0..self.cap {
            self.proposals += 1;
            let x = self.env.sample(to_unit(rng.next_u64()), to_unit(rng.next_u64()));
            let w = to_unit(rng.next_u64());
            let u = self.env.upper(x);
            if w <= exp(self.env.lower(x) - u) {
                self.accepted += 1;
                self.squeezed += 1;
                return Ok(x);
            }
            let hx = (self.h)(x);
            if w <= exp(hx - u) {
                self.accepted += 1;
                if self.adapt && self.env.xs.len() < MAX_ABSCISSAE {
                    self.insert(x, hx)?;
                }
                return Ok(x);
            }
        }
        Err(Error::PathologicalTarget { proposals: self.cap })
    }

    fn insert(&mut self, x: f64, hx: f64) -> Result<()> {
        if self.env.xs.contains(&x) {
            return Ok(());
        }
        let mut points: Vec<(f64, f64, f64)> = self
            .env
            .xs
            .iter()
            .zip(&self.env.hs)
            .zip(&self.env.dhs)
            .map(|((&a, &b), &c)| (a, b, c))
            .collect();
        points.push((x, hx, (self.dh)(x)));
        self.env = Envelope::from_points(points, self.env.interval())?;
        Ok(())
    }
}

/// One draw from the density proportional to `exp(h)` on `interval`.
pub fn ars_sample(
    h: impl Fn(f64) -> f64,
    dh: impl Fn(f64) -> f64,
    interval: (f64, f64),
    rng: &mut impl RngCore,
    adapt: bool,
) -> Result<f64> {
    Ars::new(h, dh, interval, adapt)?.sample(rng)
}
