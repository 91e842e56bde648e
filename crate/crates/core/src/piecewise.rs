//! Densities whose logarithm is piecewise linear.

use alloc::vec::Vec;

use crate::math::{exp, expm1, log, log1p, NEG_INF};
use crate::special::log_sum_exp;

/// Below this |slope * width| a piece is integrated as if flat.
pub const FLAT_THRESHOLD: f64 = 1e-8;

/// `ln int_0^w exp(d y) dy`.
pub fn log_int_exp(d: f64, w: f64) -> f64 {
    let dw = d * w;
    if dw.abs() < FLAT_THRESHOLD {
        log(w)
    } else if d > 0.0 {
        dw + log(-expm1(-dw)) - log(d)
    } else {
        log(-expm1(dw)) - log(-d)
    }
}

/// `log f(x) = log_at_lo + slope * (x - lo)` on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpPiece {
    pub lo: f64,
    pub hi: f64,
    pub log_at_lo: f64,
    pub slope: f64,
}

impl ExpPiece {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn log_at(&self, x: f64) -> f64 {
        self.log_at_lo + self.slope * (x - self.lo)
    }

    pub fn log_mass(&self) -> f64 {
        if self.log_at_lo == NEG_INF || self.width() <= 0.0 {
            return NEG_INF;
        }
        self.log_at_lo + log_int_exp(self.slope, self.width())
    }

    /// Point below which a fraction `u` of the piece's mass lies.
    pub fn quantile(&self, u: f64) -> f64 {
        let w = self.width();
        let d = self.slope;
        let y = if (d * w).abs() < FLAT_THRESHOLD {
            u * w
        } else if d < 0.0 {
            log1p(u * expm1(d * w)) / d
        } else {
            w + log1p((1.0 - u) * expm1(-d * w)) / d
        };
        self.lo + y.clamp(0.0, w)
    }

    /// Fraction of the piece's mass below `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let w = self.width();
        let y = (x - self.lo).clamp(0.0, w);
        let d = self.slope;
        if (d * w).abs() < FLAT_THRESHOLD {
            y / w
        } else if d < 0.0 {
            expm1(d * y) / expm1(d * w)
        } else {
            exp(d * (y - w)) * expm1(-d * y) / expm1(-d * w)
        }
    }
}

/// Unnormalized density made of exponential pieces on disjoint, sorted
/// intervals. Gaps between pieces carry zero density.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseExp {
    pieces: Vec<ExpPiece>,
    log_masses: Vec<f64>,
    cumulative: Vec<f64>,
    log_total: f64,
}

impl PiecewiseExp {
    pub fn new(pieces: Vec<ExpPiece>) -> Self {
        let pieces: Vec<ExpPiece> = pieces
            .into_iter()
            .filter(|p| p.width() > 0.0 && p.log_at_lo > NEG_INF)
            .collect();
        let log_masses: Vec<f64> = pieces.iter().map(ExpPiece::log_mass).collect();
        let log_total = log_sum_exp(&log_masses);
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = log_masses
            .iter()
            .map(|&lm| {
                acc += exp(lm - log_total);
                acc
            })
            .collect();
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self { pieces, log_masses, cumulative, log_total }
    }

    pub fn pieces(&self) -> &[ExpPiece] {
        &self.pieces
    }

    pub fn piece_log_masses(&self) -> &[f64] {
        &self.log_masses
    }

    /// `ln` of the total mass.
    pub fn log_total(&self) -> f64 {
        self.log_total
    }

    /// Unnormalized log density; `-inf` off the pieces.
    pub fn log_eval(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(i) => self.pieces[i].log_at(x),
            None => NEG_INF,
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        self.log_eval(x) - self.log_total
    }

    fn locate(&self, x: f64) -> Option<usize> {
        let i = self.pieces.partition_point(|p| p.hi < x);
        match self.pieces.get(i) {
            Some(p) if p.lo <= x => Some(i),
            _ => None,
        }
    }

    /// Draw: `u_piece` picks the piece by mass, `u_within` inverts its CDF.
    pub fn sample(&self, u_piece: f64, u_within: f64) -> f64 {
        let i = self
            .cumulative
            .partition_point(|&c| c < u_piece)
            .min(self.pieces.len() - 1);
        self.pieces[i].quantile(u_within)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (p, &lm) in self.pieces.iter().zip(&self.log_masses) {
            let w = exp(lm - self.log_total);
            if x >= p.hi {
                acc += w;
            } else if x > p.lo {
                acc += w * p.cdf(x);
            }
        }
        acc.min(1.0)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.pieces[0].lo, self.pieces[self.pieces.len() - 1].hi)
    }
}
