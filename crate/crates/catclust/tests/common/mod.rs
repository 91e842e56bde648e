#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Kolmogorov-Smirnov statistic of `xs` against `cdf`.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at level 0.01.
pub fn ks_critical_01(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

fn p_value(stat: f64, df: f64) -> f64 {
    1.0 - ChiSquared::new(df.max(1.0)).unwrap().cdf(stat)
}

/// Pearson goodness of fit: statistic and p-value. Cells with expectation
/// below 5 are pooled with their neighbours.
pub fn chi_square(observed: &[f64], expected: &[f64]) -> (f64, f64) {
    let mut cells = Vec::new();
    let (mut po, mut pe) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        po += o;
        pe += e;
        if pe >= 5.0 {
            cells.push((po, pe));
            po = 0.0;
            pe = 0.0;
        }
    }
    if pe > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += po;
                last.1 += pe;
            }
            None => cells.push((po, pe)),
        }
    }
    let stat: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    (stat, p_value(stat, cells.len() as f64 - 1.0))
}

/// Two-sample chi-square homogeneity test for equal sample sizes.
pub fn chi_square_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut stat = 0.0;
    let mut cells = 0;
    for (&x, &y) in a.iter().zip(b) {
        if x + y > 0.0 {
            stat += (x - y) * (x - y) / (x + y);
            cells += 1;
        }
    }
    (stat, p_value(stat, cells as f64 - 1.0))
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
