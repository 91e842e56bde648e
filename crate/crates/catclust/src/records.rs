//! JSON-lines sample records and the metadata sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use catclust_core::cftp::CftpOutput;
use catclust_core::conditionals::cluster_counts;
use catclust_core::model::{CategoricalPanel, ChainState, Square, TransitionMatrix};
use catclust_core::partition::{canonical, distinct_count, is_canonical};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};

/// One perfect sample. Matrices are stored row-major; labels are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub seed_offset: u64,
    pub coalescence_time: i64,
    pub epochs: u32,
    pub z: Vec<usize>,
    pub c: Vec<usize>,
    pub s: Vec<usize>,
    pub k: usize,
    /// Number of states K.
    pub states: usize,
    /// One K x K transition matrix per cluster.
    pub phi: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    /// Minorization constant of the kernel used for the final transition-matrix draw.
    pub epsilon: f64,
    pub log_epsilon: f64,
    /// Transition counts pooled over the series of each cluster.
    pub counts: Vec<Vec<u32>>,
}

impl SampleRecord {
    pub fn new(seed_offset: u64, out: &CftpOutput, panel: &CategoricalPanel) -> Self {
        let counts = (1..=out.k)
            .map(|l| cluster_counts(panel, &out.z, &out.s, l).as_slice().to_vec())
            .collect();
        Self {
            seed_offset,
            coalescence_time: out.coalescence_time,
            epochs: out.epochs,
            z: out.z.clone(),
            c: out.c.clone(),
            s: out.s.clone(),
            k: out.k,
            states: panel.k(),
            phi: out.phi.iter().map(|p| p.matrix().as_slice().to_vec()).collect(),
            gamma: out.gamma.as_slice().to_vec(),
            epsilon: out.log_epsilon.exp(),
            log_epsilon: out.log_epsilon,
            counts,
        }
    }

    /// Cluster label of series `i` (0-based).
    pub fn cluster_of(&self, i: usize) -> usize {
        self.s[self.z[i] - 1]
    }

    /// Structural checks that need no configuration.
    pub fn validate(&self) -> Result<()> {
        let kk = self.states;
        let m = self.s.len();
        let bad = |msg: &str| Err(Error::Input(format!("record {}: {msg}", self.seed_offset)));
        if kk == 0 || m == 0 {
            return bad("empty state space or no slots");
        }
        if self.c.len() != m || !is_canonical(&self.s) || canonical(&self.c) != self.s {
            return bad("C and S do not describe the same first-appearance partition");
        }
        if self.z.iter().any(|&z| z == 0 || z > m) {
            return bad("Z holds a label outside 1..=M");
        }
        if distinct_count(&self.s) != self.k || self.phi.len() != self.k || self.counts.len() != self.k {
            return bad("k disagrees with S, Phi or the counts");
        }
        if self.gamma.len() != kk * kk || self.phi.iter().chain(std::iter::once(&self.gamma)).any(|v| v.len() != kk * kk) {
            return bad("matrix of the wrong size");
        }
        if self.counts.iter().any(|c| c.len() != kk * kk) {
            return bad("count matrix of the wrong size");
        }
        if !(self.log_epsilon <= 0.0) {
            return bad("log_epsilon must be at most 0");
        }
        self.to_state()?;
        Ok(())
    }

    pub fn to_state(&self) -> Result<ChainState> {
        let kk = self.states;
        let phi = self
            .phi
            .iter()
            .map(|p| Ok(TransitionMatrix::new(Square::from_vec(kk, p.clone())?)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChainState {
            z: self.z.clone(),
            c: self.c.clone(),
            s: self.s.clone(),
            phi,
            gamma: Square::from_vec(kk, self.gamma.clone())?,
        })
    }
}

/// Sidecar written next to every sample file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub software: String,
    pub version: String,
    pub config: RunConfig,
    pub series: usize,
    pub lengths: Vec<usize>,
}

impl Meta {
    pub fn new(config: &RunConfig, panel: &CategoricalPanel) -> Self {
        Self {
            software: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            series: panel.n(),
            lengths: panel.all_series().iter().map(Vec::len).collect(),
        }
    }
}

/// `samples.jsonl` -> `samples.jsonl.meta.json`.
pub fn meta_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Parses and validates every record of a JSON-lines text.
pub fn parse_records(text: &str, name: &str) -> Result<Vec<SampleRecord>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { path: name.into(), line: idx + 1, msg };
        let rec: SampleRecord = serde_json::from_str(raw).map_err(|e| parse_err(e.to_string()))?;
        rec.validate().map_err(|e| parse_err(e.to_string()))?;
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::Input(format!("{name}: no samples")));
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<SampleRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text, &path.display().to_string())
}
