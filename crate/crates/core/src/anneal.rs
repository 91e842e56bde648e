//! Simulated annealing over a product of finite label sets and boxes.

use alloc::vec::Vec;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ledger::splitmix;
use crate::math::exp;

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealConfig {
    pub iterations: usize,
    pub initial_temperature: f64,
    /// Geometric cooling factor applied every `cool_every` iterations.
    pub cooling: f64,
    pub cool_every: usize,
    /// Standard deviation of continuous proposals as a fraction of the box width.
    pub proposal_scale: f64,
    pub restarts: usize,
    /// Purely discrete spaces up to this size are enumerated instead.
    pub exhaustive_limit: usize,
    /// Random feasible probes per bound, used to widen bounds the optimizer missed.
    pub probes: usize,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            initial_temperature: 1.0,
            cooling: 0.9,
            cool_every: 25,
            proposal_scale: 0.1,
            restarts: 4,
            exhaustive_limit: 4096,
            probes: 16,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("annealing needs at least one iteration".into()));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::Config(alloc::format!("cooling factor {} must lie in (0, 1)", self.cooling)));
        }
        if !(self.initial_temperature > 0.0) {
            return Err(Error::Config("initial temperature must be positive".into()));
        }
        if self.cool_every == 0 {
            return Err(Error::Config("cool_every must be at least 1".into()));
        }
        if !(self.proposal_scale > 0.0) {
            return Err(Error::Config("proposal scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

/// Feasible set: each discrete coordinate takes one of its listed values,
/// each continuous coordinate lies in its closed interval.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchSpace {
    pub discrete: Vec<Vec<usize>>,
    pub continuous: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub discrete: Vec<usize>,
    pub continuous: Vec<f64>,
}

impl SearchSpace {
    pub fn is_empty(&self) -> bool {
        self.discrete.iter().any(Vec::is_empty) || self.continuous.iter().any(|&(lo, hi)| !(lo <= hi))
    }

    /// Number of discrete combinations, as a float to avoid overflow.
    pub fn discrete_size(&self) -> f64 {
        self.discrete.iter().map(|d| d.len() as f64).product()
    }

    pub fn has_free_continuous(&self) -> bool {
        self.continuous.iter().any(|&(lo, hi)| hi > lo)
    }

    fn free_coordinates(&self) -> usize {
        self.discrete.iter().filter(|d| d.len() > 1).count()
            + self.continuous.iter().filter(|&&(lo, hi)| hi > lo).count()
    }

    pub fn center(&self) -> Point {
        Point {
            discrete: self.discrete.iter().map(|d| d[d.len() / 2]).collect(),
            continuous: self.continuous.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect(),
        }
    }

    /// Center plus `2^min(d, 6)` corners, `d` the number of free coordinates.
    pub fn default_starts(&self) -> Vec<Point> {
        let mut starts = Vec::new();
        starts.push(self.center());
        let d = self.free_coordinates();
        if d == 0 {
            return starts;
        }
        let corners = 1usize << d.min(6);
        for pattern in 0..corners {
            let bit = |c: usize| -> bool {
                if c < 6 {
                    (pattern >> c) & 1 == 1
                } else {
                    splitmix((pattern as u64) << 20 ^ c as u64) & 1 == 1
                }
            };
            let mut c = 0;
            let discrete = self
                .discrete
                .iter()
                .map(|vals| {
                    let v = if vals.len() > 1 {
                        let hi = bit(c);
                        c += 1;
                        if hi { vals[vals.len() - 1] } else { vals[0] }
                    } else {
                        vals[0]
                    };
                    v
                })
                .collect();
            let continuous = self
                .continuous
                .iter()
                .map(|&(lo, hi)| {
                    if hi > lo {
                        let up = bit(c);
                        c += 1;
                        if up { hi } else { lo }
                    } else {
                        lo
                    }
                })
                .collect();
            starts.push(Point { discrete, continuous });
        }
        starts
    }

    /// Uniform random feasible point.
    pub fn random_point(&self, rng: &mut impl RngCore) -> Point {
        Point {
            discrete: self.discrete.iter().map(|d| d[rng.random_range(0..d.len())]).collect(),
            continuous: self
                .continuous
                .iter()
                .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
                .collect(),
        }
    }

    /// Every discrete combination (continuous coordinates at their lower ends).
    pub fn enumerate(&self) -> Vec<Point> {
        let mut out = Vec::new();
        let mut idx = alloc::vec![0usize; self.discrete.len()];
        let cont: Vec<f64> = self.continuous.iter().map(|c| c.0).collect();
        loop {
            out.push(Point {
                discrete: idx.iter().zip(&self.discrete).map(|(&i, d)| d[i]).collect(),
                continuous: cont.clone(),
            });
            let mut c = 0;
            loop {
                if c == idx.len() {
                    return out;
                }
                idx[c] += 1;
                if idx[c] < self.discrete[c].len() {
                    break;
                }
                idx[c] = 0;
                c += 1;
            }
        }
    }

    fn propose(&self, p: &Point, scale: f64, rng: &mut impl RngCore) -> Point {
        let mut q = p.clone();
        let free_d: Vec<usize> = (0..self.discrete.len()).filter(|&c| self.discrete[c].len() > 1).collect();
        let free_c: Vec<usize> = (0..self.continuous.len())
            .filter(|&c| self.continuous[c].1 > self.continuous[c].0)
            .collect();
        let total = free_d.len() + free_c.len();
        if total == 0 {
            return q;
        }
        let pick = rng.random_range(0..total);
        if pick < free_d.len() {
            let c = free_d[pick];
            let vals = &self.discrete[c];
            let cur = vals.iter().position(|&v| v == p.discrete[c]).unwrap_or(0);
            let mut j = rng.random_range(0..vals.len() - 1);
            if j >= cur {
                j += 1;
            }
            q.discrete[c] = vals[j];
        } else {
            let c = free_c[pick - free_d.len()];
            let (lo, hi) = self.continuous[c];
            let z: f64 = StandardNormal.sample(rng);
            let mut x = p.continuous[c] + z * scale * (hi - lo);
            // reflect into the box
            for _ in 0..8 {
                if x < lo {
                    x = 2.0 * lo - x;
                } else if x > hi {
                    x = 2.0 * hi - x;
                } else {
                    break;
                }
            }
            q.continuous[c] = x.clamp(lo, hi);
        }
        q
    }
}

/// Best point found and its objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub point: Point,
    pub value: f64,
}

/// Optimizes `objective` over `space`. Small purely discrete spaces are
/// enumerated; otherwise the start points (the defaults plus `extra_starts`)
/// are scored and `restarts` annealing chains run from the best of them.
pub fn anneal_optimize(
    mut objective: impl FnMut(&Point) -> f64,
    space: &SearchSpace,
    sense: Sense,
    config: &AnnealConfig,
    extra_starts: &[Point],
    rng: &mut impl RngCore,
) -> Result<Optimum> {
    if space.is_empty() {
        return Err(Error::EmptyFeasibleSet);
    }
    let sign = match sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let mut g = |p: &Point| {
        let v = sign * objective(p);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    if !space.has_free_continuous() && space.discrete_size() <= config.exhaustive_limit as f64 {
        let mut best: Option<(Point, f64)> = None;
        for p in space.enumerate() {
            let v = g(&p);
            if best.as_ref().map_or(true, |b| v < b.1) {
                best = Some((p, v));
            }
        }
        let (point, v) = best.expect("nonempty space");
        return Ok(Optimum { point, value: sign * v });
    }

    let mut scored: Vec<(Point, f64)> = space
        .default_starts()
        .into_iter()
        .chain(extra_starts.iter().cloned())
        .map(|p| {
            let v = g(&p);
            (p, v)
        })
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (mut best, mut best_v) = scored[0].clone();

    for r in 0..config.restarts.max(1) {
        let (mut cur, mut cur_v) = if r < scored.len() {
            scored[r].clone()
        } else {
            let p = space.random_point(rng);
            let v = g(&p);
            (p, v)
        };
        let mut temp = config.initial_temperature;
        for it in 0..config.iterations {
            let cand = space.propose(&cur, config.proposal_scale, rng);
            let v = g(&cand);
            let accept = v <= cur_v || {
                let u: f64 = rng.random();
                u < exp(-(v - cur_v) / temp)
            };
            if accept {
                cur = cand;
                cur_v = v;
                if cur_v < best_v {
                    best = cur.clone();
                    best_v = cur_v;
                }
            }
            if (it + 1) % config.cool_every == 0 {
                temp *= config.cooling;
            }
        }
    }
    let (best, best_v) = polish(&mut g, space, best, best_v);
    Ok(Optimum { point: best, value: sign * best_v })
}

const POLISH_GRID: usize = 8;
const POLISH_PASSES: usize = 10;

/// Coordinate-wise descent from the annealed optimum: every value of each
/// discrete coordinate, and a grid including both ends for each continuous one.
fn polish(g: &mut impl FnMut(&Point) -> f64, space: &SearchSpace, mut best: Point, mut best_v: f64) -> (Point, f64) {
    for _ in 0..POLISH_PASSES {
        let mut improved = false;
        for c in 0..space.discrete.len() {
            for &val in &space.discrete[c] {
                let mut cand = best.clone();
                cand.discrete[c] = val;
                let v = g(&cand);
                if v < best_v {
                    best = cand;
                    best_v = v;
                    improved = true;
                }
            }
        }
        for c in 0..space.continuous.len() {
            let (lo, hi) = space.continuous[c];
            if hi <= lo {
                continue;
            }
            for k in 0..=POLISH_GRID {
                let mut cand = best.clone();
                cand.continuous[c] = lo + (hi - lo) * k as f64 / POLISH_GRID as f64;
                let v = g(&cand);
                if v < best_v {
                    best = cand;
                    best_v = v;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    (best, best_v)
}
