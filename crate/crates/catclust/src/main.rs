use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use catclust::config::{GammaSupport, Hyper, Method, RunConfig};
use catclust::diagnose;
use catclust::error::{Error, Result};
use catclust::exec::RayonExecutor;
use catclust::io::{ingest, Format};
use catclust::records::read_records;
use catclust::sampling::{run_sampling, run_to_file};
use catclust::summarize::{summarize, write_plot_data};
use catclust_core::exec::Sequential;
use catclust_core::ledger::KeyedRng;
use catclust_core::model::CategoricalPanel;

#[derive(Parser)]
#[command(name = "catclust", version, about = "Perfect sampling for Dirichlet-process mixtures of Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw perfect posterior samples as JSON lines.
    Sample(RunArgs),
    /// Summarize a sample file.
    Summarize {
        samples: PathBuf,
        /// Directory for the k histogram, co-clustering and cluster CSVs.
        #[arg(long)]
        plot_dir: Option<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a diagnostic and print a JSON report.
    Diagnose {
        #[arg(value_enum)]
        which: Diagnostic,
        #[command(flatten)]
        run: RunArgs,
        /// Number of random configurations.
        #[arg(long)]
        configurations: Option<usize>,
        /// Number of random probes or pairs.
        #[arg(long)]
        probes: Option<usize>,
        /// Allocation for `envelopes`, e.g. `1,1,2`.
        #[arg(long, value_delimiter = ',')]
        z: Option<Vec<usize>>,
        /// Configuration for `envelopes`, e.g. `1,2,1`.
        #[arg(long, value_delimiter = ',')]
        s: Option<Vec<usize>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Diagnostic {
    Logconcavity,
    Envelopes,
    Bounds,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Direct,
    Rejection,
}

/// Flags override values from `--config`.
#[derive(Args)]
struct RunArgs {
    /// TOML (`.toml`) or JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    gamma_lo: Option<f64>,
    #[arg(long)]
    gamma_hi: Option<f64>,
    #[arg(long)]
    stick_lo: Option<f64>,
    #[arg(long)]
    stick_hi: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    first_offset: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<usize>,
    /// Parallelize within a sample as well as across samples.
    #[arg(long)]
    parallel_coordinates: bool,
    #[arg(long)]
    epoch_cap: Option<u32>,
    #[arg(long)]
    partition_set_limit: Option<usize>,
    #[arg(long)]
    anneal_iterations: Option<usize>,
    #[arg(long)]
    anneal_restarts: Option<usize>,
    #[arg(long)]
    anneal_probes: Option<usize>,
    #[arg(long)]
    kernel_abscissae: Option<usize>,
    #[arg(long, value_enum)]
    kernel_method: Option<MethodArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

fn pair(current: [f64; 2], lo: Option<f64>, hi: Option<f64>) -> [f64; 2] {
    [lo.unwrap_or(current[0]), hi.unwrap_or(current[1])]
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone().into();
                }
            )*};
        }
        set!(k, m, alpha, seed, samples, first_offset, threads, epoch_cap, partition_set_limit);
        if let Some(p) = &self.data {
            c.data = Some(p.clone());
        }
        if let Some(p) = &self.output {
            c.output = Some(p.clone());
        }
        if let Some(f) = self.format {
            c.format = Some(match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Jsonl => Format::Jsonl,
            });
        }
        if let Some(a) = self.a {
            c.a = Hyper::Scalar(a);
        }
        if let Some(b) = self.b {
            c.b = Hyper::Scalar(b);
        }
        if self.gamma_lo.is_some() || self.gamma_hi.is_some() {
            let current = match c.gamma_support {
                GammaSupport::Pair(p) => p,
                GammaSupport::Matrix(_) => {
                    return Err(Error::Config("--gamma-lo/--gamma-hi cannot adjust a per-entry gamma_support".into()))
                }
            };
            c.gamma_support = GammaSupport::Pair(pair(current, self.gamma_lo, self.gamma_hi));
        }
        c.stick_support = pair(c.stick_support, self.stick_lo, self.stick_hi);
        c.parallel_coordinates |= self.parallel_coordinates;
        if let Some(v) = self.anneal_iterations {
            c.anneal.iterations = v;
        }
        if let Some(v) = self.anneal_restarts {
            c.anneal.restarts = v;
        }
        if let Some(v) = self.anneal_probes {
            c.anneal.probes = v;
        }
        if let Some(v) = self.kernel_abscissae {
            c.kernel.abscissae = v;
        }
        if let Some(m) = self.kernel_method {
            c.kernel.method = match m {
                MethodArg::Direct => Method::Direct,
                MethodArg::Rejection => Method::Rejection,
            };
        }
        c.validate()?;
        Ok(c)
    }
}

fn load_panel(config: &RunConfig) -> Result<CategoricalPanel> {
    let path = config.data.as_deref().ok_or_else(|| Error::Input("no data file given (--data)".into()))?;
    let format = config.data_format().unwrap_or(Format::Csv);
    ingest(path, format, config.k)
}

fn write_json<T: Serialize>(value: &T, output: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    match output {
        Some(path) => fs::write(path, text + "\n").map_err(|e| Error::io(path, e)),
        None => {
            let mut out = io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn sample(config: &RunConfig) -> Result<()> {
    let panel = load_panel(config)?;
    let written = match &config.output {
        Some(path) => run_to_file(config, &panel, path)?,
        None => run_sampling(config, &panel, io::stdout().lock())?,
    };
    log::info!("wrote {written} samples");
    Ok(())
}

fn diagnose_cmd(
    which: Diagnostic,
    config: &RunConfig,
    configurations: Option<usize>,
    probes: Option<usize>,
    z: Option<Vec<usize>>,
    s: Option<Vec<usize>>,
) -> Result<()> {
    let prior = config.prior()?;
    let configurations = configurations.unwrap_or(config.diagnose.configurations);
    let probes = probes.unwrap_or(config.diagnose.probes);
    let exec = RayonExecutor;
    let output = config.output.as_deref();
    match which {
        Diagnostic::Logconcavity => {
            let report = diagnose::logconcavity(&prior, configurations, config.seed)?;
            match &report.witness {
                Some(w) => log::info!("log-convex point of the integrated gamma conditional at gamma = {}", w.x),
                None => log::info!("no log-convex point found for the integrated gamma conditional"),
            }
            write_json(&report, output)
        }
        Diagnostic::Envelopes => {
            let panel = load_panel(config)?;
            let z = z.or_else(|| config.diagnose.z.clone()).unwrap_or_else(|| vec![1; panel.n()]);
            let s = s.or_else(|| config.diagnose.s.clone()).unwrap_or_else(|| vec![1; prior.m]);
            let report =
                diagnose::envelopes(&panel, &prior, &z, &s, &config.kernel_config(), probes, config.seed, &exec)?;
            write_json(&report, output)
        }
        Diagnostic::Bounds => {
            let panel = match &config.data {
                Some(_) => load_panel(config)?,
                None => diagnose::random_panel(config.k, 4, &mut KeyedRng::new(config.seed)),
            };
            let report = if config.parallel_coordinates {
                diagnose::bounds_suite(&panel, &prior, &config.anneal_config(), configurations, probes, config.seed, &exec)?
            } else {
                diagnose::bounds_suite(
                    &panel,
                    &prior,
                    &config.anneal_config(),
                    configurations,
                    probes,
                    config.seed,
                    &Sequential,
                )?
            };
            write_json(&report, output)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample(args) => sample(&args.resolve()?),
        Command::Summarize { samples, plot_dir, output } => {
            let records = read_records(&samples)?;
            let summary = summarize(&records)?;
            if let Some(dir) = &plot_dir {
                write_plot_data(&summary, dir)?;
            }
            write_json(&summary, output.as_deref())
        }
        Command::Diagnose { which, run, configurations, probes, z, s } => {
            let config = run.resolve()?;
            diagnose_cmd(which, &config, configurations, probes, z, s)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
