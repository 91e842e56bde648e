//! Run configuration, loadable from TOML or JSON.

use std::fs;
use std::path::{Path, PathBuf};

use catclust_core::anneal::AnnealConfig;
use catclust_core::cftp::CftpConfig;
use catclust_core::model::{PriorConfig, PriorWarning, Square};
use catclust_core::perfect::{KernelConfig, KernelMethod};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Format;

/// A hyperparameter given as one number for every (s, t) or as a K x K matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Hyper {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

/// Support of gamma: one `[lo, hi]` pair for every (s, t) or a K x K matrix of pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSupport {
    Pair([f64; 2]),
    Matrix(Vec<Vec<[f64; 2]>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealSection {
    pub iterations: usize,
    pub initial_temperature: f64,
    pub cooling: f64,
    pub cool_every: usize,
    pub proposal_scale: f64,
    pub restarts: usize,
    pub exhaustive_limit: usize,
    pub probes: usize,
}

impl Default for AnnealSection {
    fn default() -> Self {
        AnnealConfig::default().into()
    }
}

impl From<AnnealConfig> for AnnealSection {
    fn from(c: AnnealConfig) -> Self {
        Self {
            iterations: c.iterations,
            initial_temperature: c.initial_temperature,
            cooling: c.cooling,
            cool_every: c.cool_every,
            proposal_scale: c.proposal_scale,
            restarts: c.restarts,
            exhaustive_limit: c.exhaustive_limit,
            probes: c.probes,
        }
    }
}

impl From<&AnnealSection> for AnnealConfig {
    fn from(c: &AnnealSection) -> Self {
        AnnealConfig {
            iterations: c.iterations,
            initial_temperature: c.initial_temperature,
            cooling: c.cooling,
            cool_every: c.cool_every,
            proposal_scale: c.proposal_scale,
            restarts: c.restarts,
            exhaustive_limit: c.exhaustive_limit,
            probes: c.probes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Rejection,
}

/// Settings of the perfect sampler for the transition matrices and gamma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub abscissae: usize,
    pub method: Method,
    pub anneal: AnnealSection,
}

impl Default for KernelSection {
    fn default() -> Self {
        let k = KernelConfig::default();
        Self {
            abscissae: k.abscissae,
            method: match k.method {
                KernelMethod::Direct => Method::Direct,
                KernelMethod::Rejection => Method::Rejection,
            },
            anneal: k.anneal.into(),
        }
    }
}

/// Settings used by the `diagnose` subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSection {
    /// Random configurations per scan or property suite.
    pub configurations: usize,
    /// Sandwich probes (bounds) or kernel pairs (envelopes) in total.
    pub probes: usize,
    /// Allocations for `envelopes`; all series in slot 1 when absent.
    pub z: Option<Vec<usize>>,
    /// Configuration for `envelopes`; all slots in one cluster when absent.
    pub s: Option<Vec<usize>>,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        Self { configurations: 100, probes: 1000, z: None, s: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    /// Inferred from the data file extension when absent.
    pub format: Option<Format>,
    pub k: usize,
    pub m: usize,
    pub alpha: f64,
    pub a: Hyper,
    pub b: Hyper,
    pub gamma_support: GammaSupport,
    pub stick_support: [f64; 2],
    pub seed: u64,
    pub samples: usize,
    /// Seed offset of the first sample; sample `r` uses `first_offset + r`.
    pub first_offset: u64,
    pub output: Option<PathBuf>,
    /// Worker threads for concurrent samples; 0 uses every core.
    pub threads: usize,
    /// Also spread the coordinates of each bound and kernel over threads.
    pub parallel_coordinates: bool,
    pub epoch_cap: u32,
    pub partition_set_limit: usize,
    pub anneal: AnnealSection,
    pub kernel: KernelSection,
    pub diagnose: DiagnoseSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let cftp = CftpConfig::default();
        Self {
            data: None,
            format: None,
            k: 2,
            m: 3,
            alpha: 1.0,
            a: Hyper::Scalar(2.0),
            b: Hyper::Scalar(1.0),
            gamma_support: GammaSupport::Pair([1.0, 1.0]),
            stick_support: [0.0, 1.0],
            seed: 0,
            samples: 1,
            first_offset: 0,
            output: None,
            threads: 0,
            parallel_coordinates: false,
            epoch_cap: cftp.epoch_cap,
            partition_set_limit: cftp.partition_set_limit,
            anneal: AnnealSection::default(),
            kernel: KernelSection::default(),
            diagnose: DiagnoseSection::default(),
        }
    }
}

fn square<T: Copy>(name: &str, k: usize, rows: &[Vec<T>]) -> Result<Square<T>> {
    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
        return Err(Error::Config(format!("`{name}` must be a scalar or a {k} x {k} matrix")));
    }
    Ok(Square::from_rows(rows)?)
}

impl Hyper {
    fn to_square(&self, name: &str, k: usize) -> Result<Square<f64>> {
        match self {
            Hyper::Scalar(v) => Ok(Square::filled(k, *v)),
            Hyper::Matrix(rows) => square(name, k, rows),
        }
    }
}

impl RunConfig {
    /// Reads a `.toml` file, or JSON for any other extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |msg: String| Error::Config(format!("{}: {msg}", path.display()));
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| bad(e.to_string())),
            _ => serde_json::from_str(&text).map_err(|e| bad(e.to_string())),
        }
    }

    pub fn prior(&self) -> Result<PriorConfig> {
        let k = self.k;
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        let gamma_support = match &self.gamma_support {
            GammaSupport::Pair([lo, hi]) => Square::filled(k, (*lo, *hi)),
            GammaSupport::Matrix(rows) => {
                let pairs: Vec<Vec<(f64, f64)>> = rows.iter().map(|r| r.iter().map(|p| (p[0], p[1])).collect()).collect();
                square("gamma_support", k, &pairs)?
            }
        };
        let prior = PriorConfig {
            m: self.m,
            alpha: self.alpha,
            a: self.a.to_square("a", k)?,
            b: self.b.to_square("b", k)?,
            gamma_support,
            stick_support: (self.stick_support[0], self.stick_support[1]),
        };
        for w in prior.validate()? {
            let PriorWarning::ShapeAtMostOne { s, t, a } = w;
            log::warn!("a({},{}) = {a} is at most 1, so the gamma conditional may not be log-concave", s + 1, t + 1);
        }
        Ok(prior)
    }

    pub fn anneal_config(&self) -> AnnealConfig {
        (&self.anneal).into()
    }

    pub fn kernel_config(&self) -> KernelConfig {
        KernelConfig {
            abscissae: self.kernel.abscissae,
            anneal: (&self.kernel.anneal).into(),
            method: match self.kernel.method {
                Method::Direct => KernelMethod::Direct,
                Method::Rejection => KernelMethod::Rejection,
            },
        }
    }

    pub fn cftp_config(&self) -> CftpConfig {
        CftpConfig {
            anneal: self.anneal_config(),
            kernel: self.kernel_config(),
            epoch_cap: self.epoch_cap,
            partition_set_limit: self.partition_set_limit,
        }
    }

    /// Checks everything that can be checked without the data.
    pub fn validate(&self) -> Result<()> {
        self.prior()?;
        self.anneal_config().validate()?;
        self.kernel_config().anneal.validate()?;
        if self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        if self.kernel.abscissae == 0 {
            return Err(Error::Config("kernel.abscissae must be at least 1".into()));
        }
        if !(1..=62).contains(&self.epoch_cap) {
            return Err(Error::Config("epoch_cap must lie in 1..=62".into()));
        }
        Ok(())
    }

    pub fn data_format(&self) -> Option<Format> {
        self.format.or_else(|| self.data.as_deref().map(Format::from_path))
    }
}
