//! Special functions and log-scale helpers.

use alloc::vec::Vec;

use crate::math::{exp, ln_gamma, log, NEG_INF};

/// Natural log of the Gamma function for `x > 0`.
pub fn lgamma(x: f64) -> f64 {
    ln_gamma(x)
}

/// `ln B(a, b)`.
pub fn log_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Digamma function for `x > 0`, by upward recurrence then the asymptotic series.
pub fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    let series = r
        * (1.0 / 12.0
            - r * (1.0 / 120.0
                - r * (1.0 / 252.0 - r * (1.0 / 240.0 - r * (1.0 / 132.0 - r * 691.0 / 32760.0)))));
    acc + log(x) - 0.5 / x - series
}

/// Trigamma function for `x > 0`.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    // 1/x + 1/(2x^2) + sum B_{2k} / x^{2k+1}
    let tail = (1.0 / x)
        * (1.0
            + 1.0 / (2.0 * x)
            + r * (1.0 / 6.0
                - r * (1.0 / 30.0 - r * (1.0 / 42.0 - r * (1.0 / 30.0 - r * 5.0 / 66.0)))));
    acc + tail
}

/// `ln sum exp(v)`; `-inf` for an empty slice or all `-inf` entries.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(NEG_INF, f64::max);
    if m == NEG_INF {
        return NEG_INF;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + log(v.iter().map(|&x| exp(x - m)).sum::<f64>())
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss-Legendre rule for `ln int_lo^hi exp(f)`.
#[derive(Debug, Clone)]
pub struct LogQuadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Default for LogQuadrature {
    fn default() -> Self {
        Self::new(16)
    }
}

impl LogQuadrature {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Self { nodes, weights }
    }

    fn panels(&self, f: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
        let w = (hi - lo) / panels as f64;
        let mut terms = Vec::with_capacity(panels * self.nodes.len());
        for p in 0..panels {
            let a = lo + p as f64 * w;
            for (x, wt) in self.nodes.iter().zip(&self.weights) {
                let t = a + 0.5 * w * (x + 1.0);
                terms.push(f(t) + log(0.5 * w * wt));
            }
        }
        log_sum_exp(&terms)
    }

    /// Panels are doubled until two successive estimates agree to `1e-12`.
    pub fn log_integral(&self, mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return NEG_INF;
        }
        let mut panels = 1;
        let mut prev = self.panels(&mut f, lo, hi, panels);
        while panels < 1024 {
            panels *= 2;
            let next = self.panels(&mut f, lo, hi, panels);
            if (next - prev).abs() <= 1e-12 * (1.0 + next.abs()) {
                return next;
            }
            prev = next;
        }
        prev
    }
}

/// Log-concavity scan: returns the abscissae where the raw central second
/// difference of `f` exceeds `tol * max(1, |f(x)|)`.
pub fn second_difference_violations(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    points: usize,
    tol: f64,
) -> Vec<f64> {
    let mut bad = Vec::new();
    for j in 1..=points {
        let x = lo + (hi - lo) * j as f64 / (points + 1) as f64;
        let mut h = 1e-4 * x.abs().max(1.0);
        h = h.min(0.5 * (x - lo)).min(0.5 * (hi - x));
        let fx = f(x);
        let d2 = f(x + h) - 2.0 * fx + f(x - h);
        if d2 > tol * fx.abs().max(1.0) {
            bad.push(x);
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digamma_known_values() {
        let euler = 0.577_215_664_901_532_9;
        assert!((digamma(1.0) + euler).abs() < 1e-14);
        assert!((digamma(0.5) + euler + 2.0 * core::f64::consts::LN_2).abs() < 1e-13);
        for &x in &[0.1, 0.7, 3.3, 12.0, 150.0] {
            let rhs = digamma(x) + 1.0 / x;
            assert!((digamma(x + 1.0) - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn trigamma_known_values() {
        let pi2 = core::f64::consts::PI * core::f64::consts::PI;
        assert!((trigamma(1.0) - pi2 / 6.0).abs() < 1e-13);
        assert!((trigamma(0.5) - pi2 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn digamma_is_derivative_of_lgamma() {
        for &x in &[0.3, 1.7, 8.0, 41.5] {
            let h = 1e-5;
            let num = (lgamma(x + h) - lgamma(x - h)) / (2.0 * h);
            assert!((num - digamma(x)).abs() < 1e-7, "{x}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m4 - 0.4).abs() < 1e-14);
    }

    #[test]
    fn log_quadrature_beta_normalizer() {
        let q = LogQuadrature::default();
        let (a, b) = (3.5, 2.25);
        let got = q.log_integral(|x| (a - 1.0) * log(x) + (b - 1.0) * log(1.0 - x), 0.0, 1.0);
        assert!((got - log_beta(a, b)).abs() < 1e-9, "{got} vs {}", log_beta(a, b));
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), NEG_INF);
        assert_eq!(log_sum_exp(&[NEG_INF, NEG_INF]), NEG_INF);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + core::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn second_difference_scan_flags_convexity() {
        assert!(second_difference_violations(|x| -x * x, -1.0, 1.0, 100, 1e-8).is_empty());
        assert!(!second_difference_violations(|x| x * x, -1.0, 1.0, 100, 1e-8).is_empty());
        assert!(second_difference_violations(|x| 3.0 * x, 0.0, 5.0, 100, 1e-8).is_empty());
    }
}
