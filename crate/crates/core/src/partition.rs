//! Configuration vectors, first-appearance relabeling and set partitions.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{Square, TransitionMatrix};

/// Number of distinct labels.
pub fn distinct_count(labels: &[usize]) -> usize {
    let mut seen: Vec<usize> = Vec::new();
    for &l in labels {
        if !seen.contains(&l) {
            seen.push(l);
        }
    }
    seen.len()
}

/// First-appearance relabeling of arbitrary labels: the first label becomes
/// 1, the next unseen label 2, and so on.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = Vec::new();
    labels
        .iter()
        .map(|&l| match order.iter().position(|&o| o == l) {
            Some(p) => p + 1,
            None => {
                order.push(l);
                order.len()
            }
        })
        .collect()
}

/// `s_1 = 1` and `1 <= s_j <= max(s_1..s_{j-1}) + 1`.
pub fn is_canonical(s: &[usize]) -> bool {
    let mut max = 0;
    for &x in s {
        if x == 0 || x > max + 1 {
            return false;
        }
        max = max.max(x);
    }
    true
}

/// Relabel a configuration `C` given the slot parameters `theta`: slot `j`
/// gets the index of `theta[j]` among the distinct matrices of `theta` in
/// order of first appearance.
pub fn relabel(c: &[usize], theta: &[TransitionMatrix]) -> Result<Vec<usize>> {
    if c.len() != theta.len() {
        return Err(Error::Input("C and Theta have different lengths".into()));
    }
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            if (c[i] == c[j]) != (theta[i] == theta[j]) {
                return Err(Error::Input(alloc::format!(
                    "slots {} and {} disagree between C and Theta",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    let mut distinct: Vec<&TransitionMatrix> = Vec::new();
    Ok(theta
        .iter()
        .map(|th| match distinct.iter().position(|d| *d == th) {
            Some(p) => p + 1,
            None => {
                distinct.push(th);
                distinct.len()
            }
        })
        .collect())
}

/// Slot-by-slot form of the relabeling: a configuration value larger than
/// every earlier one opens the next label; otherwise the slot copies the
/// label of the first earlier slot with the same value.
pub fn relabel_recursive(c: &[usize]) -> Vec<usize> {
    let mut s: Vec<usize> = Vec::with_capacity(c.len());
    let mut running_max = 0;
    for j in 0..c.len() {
        let label = match (0..j).find(|&i| c[i] == c[j]) {
            Some(i) => s[i],
            None => running_max + 1,
        };
        running_max = running_max.max(label);
        s.push(label);
    }
    s
}

/// Deterministic slot parameters compatible with `C`: value `h` gets the
/// uniform matrix with `h * 1e-6` moved onto the diagonal.
pub fn arbitrary_theta(c: &[usize], k: usize) -> Vec<TransitionMatrix> {
    c.iter()
        .map(|&h| {
            if k == 1 {
                return TransitionMatrix::uniform(1);
            }
            let base = 1.0 / k as f64;
            let bump = h as f64 * 1e-6;
            let mut m = Square::filled(k, base);
            for s in 0..k {
                for t in 0..k {
                    let v = if s == t { base + bump } else { base - bump / (k - 1) as f64 };
                    m.set(s, t, v);
                }
                let total: f64 = m.row(s).iter().sum();
                let d = m.get(s, s) + (1.0 - total);
                m.set(s, s, d);
            }
            TransitionMatrix::new(m).expect("perturbation keeps rows stochastic")
        })
        .collect()
}

/// Distinct clusters of `s` with slot `j` removed, in first-appearance order:
/// `(label, size)` pairs.
pub fn clusters_without(s: &[usize], j: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (i, &l) in s.iter().enumerate() {
        if i == j {
            continue;
        }
        match out.iter_mut().find(|(x, _)| *x == l) {
            Some(e) => e.1 += 1,
            None => out.push((l, 1)),
        }
    }
    out
}

/// Apply a configuration draw for slot `j`: `c <= k_j` joins the `c`-th
/// cluster of `s` without `j`, `c = k_j + 1` opens a new one. The result is
/// in first-appearance form.
pub fn apply_c(s: &[usize], j: usize, c: usize) -> Vec<usize> {
    let clusters = clusters_without(s, j);
    let fresh = s.iter().copied().max().unwrap_or(0) + 1;
    let mut out = s.to_vec();
    out[j] = if c <= clusters.len() { clusters[c - 1].0 } else { fresh };
    canonical(&out)
}

/// All first-appearance vectors of length `m` (one per set partition).
pub fn all_partitions(m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if m == 0 {
        return out;
    }
    let mut cur = vec![1usize; m];
    fn rec(j: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if j == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 1..=max + 1 {
            cur[j] = v;
            rec(j + 1, max.max(v), cur, out);
        }
    }
    rec(1, 1, &mut cur, &mut out);
    out
}

/// Bell number `B_m` as a float (for size guards).
pub fn bell(m: usize) -> f64 {
    let mut row = vec![1.0f64];
    for _ in 0..m {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for x in &row {
            let v = next.last().unwrap() + x;
            next.push(v);
        }
        row = next;
    }
    row[0]
}
