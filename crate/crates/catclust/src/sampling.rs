//! Many perfect samples in parallel, written in seed-offset order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;

use catclust_core::cftp::{run_cftp, CftpConfig};
use catclust_core::exec::Sequential;
use catclust_core::ledger::RandomLedger;
use catclust_core::model::{CategoricalPanel, PriorConfig};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::exec::RayonExecutor;
use crate::records::{meta_path, Meta, SampleRecord};

/// One perfect sample for seed offset `offset` of the master `seed`.
pub fn sample_one(
    panel: &CategoricalPanel,
    prior: &PriorConfig,
    config: &CftpConfig,
    seed: u64,
    offset: u64,
    parallel_coordinates: bool,
) -> Result<SampleRecord> {
    let ledger = RandomLedger::new(seed).fork(offset);
    let out = if parallel_coordinates {
        run_cftp(panel, prior, config, &ledger, &RayonExecutor)?
    } else {
        run_cftp(panel, prior, config, &ledger, &Sequential)?
    };
    Ok(SampleRecord::new(offset, &out, panel))
}

/// Draws `config.samples` records and writes one JSON line each to `out`.
/// Samples run concurrently; lines appear in seed-offset order, each flushed
/// as soon as every earlier one is written. Stops at the first failure.
pub fn run_sampling(config: &RunConfig, panel: &CategoricalPanel, out: impl Write) -> Result<usize> {
    config.validate()?;
    let prior = config.prior()?;
    let cftp = config.cftp_config();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let n = config.samples;
    let cancel = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, Result<SampleRecord>)>();
    let mut out = out;
    std::thread::scope(|scope| {
        let (prior, cftp, cancel) = (&prior, &cftp, &cancel);
        scope.spawn(move || {
            pool.install(|| {
                (0..n).into_par_iter().for_each_with(tx, |tx, r| {
                    if cancel.load(Ordering::Relaxed) {
                        return;
                    }
                    let offset = config.first_offset + r as u64;
                    let rec = sample_one(panel, prior, cftp, config.seed, offset, config.parallel_coordinates);
                    let _ = tx.send((r, rec));
                })
            })
        });
        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (r, rec) in rx {
            pending.insert(r, rec);
            while let Some(rec) = pending.remove(&next) {
                let written = rec.and_then(|rec| {
                    let line = serde_json::to_string(&rec).map_err(|e| Error::Input(e.to_string()))?;
                    writeln!(out, "{line}").and_then(|_| out.flush()).map_err(|e| Error::io("<samples>", e))
                });
                if let Err(e) = written {
                    cancel.store(true, Ordering::Relaxed);
                    return Err(e);
                }
                next += 1;
            }
        }
        Ok(next)
    })
}

/// Runs [`run_sampling`] into `output` and writes the metadata sidecar.
pub fn run_to_file(config: &RunConfig, panel: &CategoricalPanel, output: &Path) -> Result<usize> {
    let meta = Meta::new(config, panel);
    let meta_file = meta_path(output);
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Input(e.to_string()))?;
    std::fs::write(&meta_file, text + "\n").map_err(|e| Error::io(&meta_file, e))?;
    let file = File::create(output).map_err(|e| Error::io(output, e))?;
    run_sampling(config, panel, BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{parse, Format};
    use crate::records::parse_records;

    fn tiny() -> (RunConfig, CategoricalPanel) {
        let panel = parse("1,1,1,1\n1,2,1,2\n2,2,1,2\n", Format::Csv, 2, "t").unwrap();
        (RunConfig { samples: 3, seed: 11, m: 3, ..RunConfig::default() }, panel)
    }

    #[test]
    fn records_are_reproducible_and_valid() {
        let (config, panel) = tiny();
        let mut a = Vec::new();
        let mut b = Vec::new();
        assert_eq!(run_sampling(&config, &panel, &mut a).unwrap(), 3);
        let threaded = RunConfig { threads: 3, parallel_coordinates: true, ..config.clone() };
        run_sampling(&threaded, &panel, &mut b).unwrap();
        assert_eq!(a, b);
        let recs = parse_records(std::str::from_utf8(&a).unwrap(), "a").unwrap();
        assert_eq!(recs.iter().map(|r| r.seed_offset).collect::<Vec<_>>(), vec![0, 1, 2]);
        let prior = config.prior().unwrap();
        for r in &recs {
            r.to_state().unwrap().validate(&prior, panel.n()).unwrap();
        }
    }

    #[test]
    fn failure_stops_the_run() {
        let (mut config, panel) = tiny();
        config.gamma_support = crate::config::GammaSupport::Pair([0.5, 2.0]);
        let mut buf = Vec::new();
        let err = run_sampling(&config, &panel, &mut buf).unwrap_err();
        assert_eq!(err.exit_code(), 1, "{err}");
        assert!(buf.is_empty());
    }
}
