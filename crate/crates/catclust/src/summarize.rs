//! Posterior summaries computed from sample records alone.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use catclust_core::conditionals::dirichlet_moments;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::records::SampleRecord;

/// Conditional moments of one cluster's rows given its counts and gamma.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterMoments {
    /// Number of series allocated to the cluster.
    pub size: usize,
    /// Conditional means of the transition probabilities, row-major.
    pub zeta: Vec<f64>,
    /// Dirichlet precision of each row.
    pub heterogeneity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub seed_offset: u64,
    pub k: usize,
    pub clusters: Vec<ClusterMoments>,
}

/// Averages over the samples with `k` clusters of the cluster carrying
/// first-appearance label `cluster`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PooledCluster {
    pub k: usize,
    pub cluster: usize,
    pub samples: usize,
    pub mean_size: f64,
    pub zeta: Vec<f64>,
    pub heterogeneity: Vec<f64>,
    /// Mean of the sampled transition matrices, row-major.
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub samples: usize,
    pub series: usize,
    pub states: usize,
    /// Number of samples with each number of clusters.
    pub k_histogram: BTreeMap<usize, usize>,
    /// Fraction of samples in which series `i` and `j` share a cluster.
    pub co_clustering: Vec<Vec<f64>>,
    pub pooled: Vec<PooledCluster>,
    pub per_sample: Vec<SampleSummary>,
}

fn moments(rec: &SampleRecord, l: usize) -> ClusterMoments {
    let kk = rec.states;
    let mut zeta = Vec::with_capacity(kk * kk);
    let mut heterogeneity = Vec::with_capacity(kk);
    for s in 0..kk {
        let params: Vec<f64> =
            (0..kk).map(|t| rec.counts[l][s * kk + t] as f64 + rec.gamma[s * kk + t]).collect();
        for t in 0..kk {
            zeta.push(dirichlet_moments(&params, t).zeta);
        }
        heterogeneity.push(params.iter().sum());
    }
    let size = (0..rec.z.len()).filter(|&i| rec.cluster_of(i) == l + 1).count();
    ClusterMoments { size, zeta, heterogeneity }
}

fn add(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

pub fn summarize(records: &[SampleRecord]) -> Result<Summary> {
    let first = records.first().ok_or_else(|| Error::Input("no samples to summarize".into()))?;
    let (n, kk) = (first.z.len(), first.states);
    if records.iter().any(|r| r.z.len() != n || r.states != kk) {
        return Err(Error::Input("samples disagree on the number of series or states".into()));
    }
    let mut k_histogram = BTreeMap::new();
    let mut co = vec![vec![0.0; n]; n];
    let mut pooled: BTreeMap<(usize, usize), PooledCluster> = BTreeMap::new();
    let mut per_sample = Vec::with_capacity(records.len());
    for rec in records {
        *k_histogram.entry(rec.k).or_insert(0) += 1;
        for i in 0..n {
            for j in 0..n {
                if rec.cluster_of(i) == rec.cluster_of(j) {
                    co[i][j] += 1.0;
                }
            }
        }
        let clusters: Vec<ClusterMoments> = (0..rec.k).map(|l| moments(rec, l)).collect();
        for (l, cm) in clusters.iter().enumerate() {
            let p = pooled.entry((rec.k, l + 1)).or_insert_with(|| PooledCluster {
                k: rec.k,
                cluster: l + 1,
                samples: 0,
                mean_size: 0.0,
                zeta: vec![0.0; kk * kk],
                heterogeneity: vec![0.0; kk],
                phi: vec![0.0; kk * kk],
            });
            p.samples += 1;
            p.mean_size += cm.size as f64;
            add(&mut p.zeta, &cm.zeta);
            add(&mut p.heterogeneity, &cm.heterogeneity);
            add(&mut p.phi, &rec.phi[l]);
        }
        per_sample.push(SampleSummary { seed_offset: rec.seed_offset, k: rec.k, clusters });
    }
    let total = records.len() as f64;
    co.iter_mut().flatten().for_each(|x| *x /= total);
    let pooled = pooled
        .into_values()
        .map(|mut p| {
            let c = p.samples as f64;
            p.mean_size /= c;
            p.zeta.iter_mut().chain(p.heterogeneity.iter_mut()).chain(p.phi.iter_mut()).for_each(|x| *x /= c);
            p
        })
        .collect();
    Ok(Summary { samples: records.len(), series: n, states: kk, k_histogram, co_clustering: co, pooled, per_sample })
}

/// Writes `k_histogram.csv`, `co_clustering.csv` and `clusters.csv` into `dir`.
pub fn write_plot_data(summary: &Summary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(body.as_bytes()).map_err(|e| Error::io(&path, e))
    };
    let mut hist = String::from("k,count,fraction\n");
    for (k, c) in &summary.k_histogram {
        hist += &format!("{k},{c},{}\n", *c as f64 / summary.samples as f64);
    }
    write("k_histogram.csv", hist)?;
    let mut co = String::from("i,j,frequency\n");
    for (i, row) in summary.co_clustering.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            co += &format!("{},{},{v}\n", i + 1, j + 1);
        }
    }
    write("co_clustering.csv", co)?;
    let kk = summary.states;
    let mut cl = String::from("k,cluster,samples,s,t,zeta,phi,heterogeneity\n");
    for p in &summary.pooled {
        for s in 0..kk {
            for t in 0..kk {
                cl += &format!(
                    "{},{},{},{},{},{},{},{}\n",
                    p.k,
                    p.cluster,
                    p.samples,
                    s + 1,
                    t + 1,
                    p.zeta[s * kk + t],
                    p.phi[s * kk + t],
                    p.heterogeneity[s]
                );
            }
        }
    }
    write("clusters.csv", cl)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(offset: u64, z: Vec<usize>, s: Vec<usize>) -> SampleRecord {
        let k = *s.iter().max().unwrap();
        SampleRecord {
            seed_offset: offset,
            coalescence_time: -1,
            epochs: 1,
            c: s.clone(),
            k,
            states: 2,
            phi: vec![vec![0.5, 0.5, 0.25, 0.75]; k],
            gamma: vec![1.0; 4],
            epsilon: 0.5,
            log_epsilon: 0.5f64.ln(),
            counts: vec![vec![1, 2, 0, 3]; k],
            z,
            s,
        }
    }

    #[test]
    fn identical_samples_give_zero_one_co_clustering() {
        let recs = vec![record(0, vec![1, 2, 1], vec![1, 1, 2]); 4];
        let sum = summarize(&recs).unwrap();
        assert_eq!(sum.co_clustering, vec![vec![1.0, 1.0, 1.0]; 3]);
        let recs = vec![record(0, vec![1, 2, 1], vec![1, 2, 3]); 4];
        let sum = summarize(&recs).unwrap();
        assert_eq!(sum.co_clustering[0], vec![1.0, 0.0, 1.0]);
        assert_eq!(sum.k_histogram.values().sum::<usize>(), 4);
    }

    #[test]
    fn moments_from_counts_and_gamma() {
        let recs = vec![record(0, vec![1, 1, 1], vec![1, 1, 1])];
        let sum = summarize(&recs).unwrap();
        let c = &sum.per_sample[0].clusters[0];
        assert_eq!(c.size, 3);
        assert_eq!(c.zeta, vec![2.0 / 5.0, 3.0 / 5.0, 1.0 / 5.0, 4.0 / 5.0]);
        assert_eq!(c.heterogeneity, vec![5.0, 5.0]);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(summarize(&[]).is_err());
    }
}
