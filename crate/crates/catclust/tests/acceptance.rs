//! One pass/fail line per acceptance criterion. Exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use catclust::config::{GammaSupport, Hyper, RunConfig};
use catclust::diagnose::{bounds_suite, envelopes, logconcavity, random_panel};
use catclust::exec::RayonExecutor;
use catclust::sampling::run_sampling;
use catclust_core::anneal::AnnealConfig;
use catclust_core::ars::Ars;
use catclust_core::cftp::{run_cftp, CftpConfig};
use catclust_core::enumerate::{empirical, enumerate_posterior, total_variation};
use catclust_core::exec::Sequential;
use catclust_core::ledger::{KeyedRng, RandomLedger, Stream};
use catclust_core::model::{CategoricalPanel, PriorConfig, TransitionMatrix};
use catclust_core::partition::{all_partitions, canonical, relabel, relabel_recursive};
use catclust_core::perfect::{
    build_kernel, perfect_sample, sample_gm, sample_kernel_p, sample_residual, DrawStats, FnCoordinate, FnSystem,
    KernelConfig, KernelMethod, LogConcaveSystem, PerfectStreams,
};
use common::{chi_square_two_sample, ks_critical_01, ks_statistic, mean_and_se};
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF, Gamma};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn tiny_panel() -> CategoricalPanel {
    CategoricalPanel::new(vec![vec![1, 1, 1, 1], vec![1, 2, 1, 2], vec![1, 2, 1, 2]], 2).unwrap()
}

fn tiny_prior() -> PriorConfig {
    PriorConfig::broadcast(2, 3, 20.0, 2.0, 1.0, (1.0, 1.0))
}

fn free_prior() -> PriorConfig {
    let mut p = PriorConfig::broadcast(2, 3, 1.0, 2.0, 1.0, (1.8, 2.2));
    p.stick_support = (0.2, 0.8);
    p
}

fn exactness() -> Outcome {
    let panel = tiny_panel();
    let prior = tiny_prior();
    let exact = enumerate_posterior(&panel, &prior).unwrap();
    let base = RandomLedger::new(2024);
    let runs = 2000u64;
    let start = Instant::now();
    let draws: Vec<Vec<usize>> = (0..runs)
        .into_par_iter()
        .map(|r| run_cftp(&panel, &prior, &CftpConfig::default(), &base.fork(r), &Sequential).unwrap().z)
        .collect();
    let tv = total_variation(&empirical(&draws), &exact.z);
    let secs = start.elapsed().as_secs_f64();
    outcome(tv < 0.05, format!("TV(Z) = {tv:.4} over {runs} runs (< 0.05), {secs:.1} s"))
}

fn beta_coordinate() -> FnCoordinate {
    FnCoordinate::new((0.01, 0.99), vec![], |x, _| 2.0 * x.ln() + (1.0 - x).ln(), |x, _| 2.0 / x - 1.0 / (1.0 - x))
}

fn perfect_lc() -> Outcome {
    let sys = FnSystem { coords: vec![beta_coordinate(), beta_coordinate(), beta_coordinate()] };
    let cfg = KernelConfig { abscissae: 3, ..KernelConfig::default() };
    let k = build_kernel(&sys, &cfg, &RandomLedger::new(1), 0, &Sequential).unwrap();
    let eps = k.epsilon();
    let ledger = RandomLedger::new(300);
    let n = 10_000u64;
    let draws: Vec<_> = (0..n)
        .into_par_iter()
        .map(|r| {
            perfect_sample(&k, &sys, &PerfectStreams::new(ledger.fork(r), Stream::Theta, 0), KernelMethod::Direct).unwrap()
        })
        .collect();
    let law = Beta::new(3.0, 2.0).unwrap();
    let (a, b) = (law.cdf(0.01), law.cdf(0.99));
    let crit = ks_critical_01(n as usize);
    let ds: Vec<f64> = (0..3)
        .map(|i| {
            let xs: Vec<f64> = draws.iter().map(|d| d.xi[i]).collect();
            ks_statistic(&xs, |x| (law.cdf(x) - a) / (b - a))
        })
        .collect();
    let ts: Vec<f64> = draws.iter().map(|d| d.regeneration as f64).collect();
    let (mean_t, se) = mean_and_se(&ts);
    let target = (1.0 - eps) / eps;
    let pass = (0.3..=0.7).contains(&eps) && ds.iter().all(|&d| d < crit) && (mean_t - target).abs() < 3.0 * se;
    outcome(
        pass,
        format!(
            "eps = {eps:.3}, KS D = [{:.4}, {:.4}, {:.4}] (< {crit:.4}), mean T = {mean_t:.3} vs {target:.3} (3 se = {:.3})",
            ds[0],
            ds[1],
            ds[2],
            3.0 * se
        ),
    )
}

const LO: f64 = 0.05;
const HI: f64 = 0.95;

fn coupled_system() -> FnSystem {
    FnSystem {
        coords: vec![
            FnCoordinate::new(
                (LO, HI),
                vec![1],
                |x, xi| 2.0 * x.ln() + (1.0 - x).ln() + 1.5 * x * xi[1],
                |x, xi| 2.0 / x - 1.0 / (1.0 - x) + 1.5 * xi[1],
            ),
            FnCoordinate::new(
                (LO, HI),
                vec![0],
                |y, xi| y.ln() + 2.0 * (1.0 - y).ln() + 1.5 * xi[0] * y,
                |y, xi| 1.0 / y - 2.0 / (1.0 - y) + 1.5 * xi[0],
            ),
        ],
    }
}

/// Grid cell of `xi` with `bins` cells per coordinate.
fn cell(sys: &FnSystem, xi: &[f64], bins: usize) -> usize {
    xi.iter().enumerate().fold(0, |acc, (i, &x)| {
        let (lo, hi) = sys.support(i);
        acc * bins + (((x - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
    })
}

/// Two-sample chi-square between mixture-representation draws and direct
/// sweeps from the same start.
fn mixture_identity_for(sys: &FnSystem, abscissae: usize, from: &[f64], bins: usize, n: i64) -> (f64, f64, f64) {
    let cfg = KernelConfig { abscissae, ..KernelConfig::default() };
    let k = build_kernel(sys, &cfg, &RandomLedger::new(5), 0, &Sequential).unwrap();
    let cells = bins.pow(sys.dim() as u32);
    let mix = PerfectStreams::new(RandomLedger::new(51), Stream::Theta, 0);
    let direct = PerfectStreams::new(RandomLedger::new(52), Stream::Theta, 0);
    let pick = RandomLedger::new(53);
    let tally = |draw: &(dyn Fn(i64) -> Vec<f64> + Sync)| {
        let hits: Vec<usize> = (0..n).into_par_iter().map(|r| cell(sys, &draw(r), bins)).collect();
        let mut counts = vec![0.0; cells];
        for h in hits {
            counts[h] += 1.0;
        }
        counts
    };
    let a = tally(&|r| {
        let mut stats = DrawStats::default();
        if pick.uniform(Stream::Probe, r, 0, 0).unwrap() < k.epsilon() {
            sample_gm(&k, &mix, r)
        } else {
            sample_residual(&k, sys, from, &mix, r, KernelMethod::Direct, &mut stats).unwrap()
        }
    });
    let b = tally(&|r| {
        let mut stats = DrawStats::default();
        sample_kernel_p(&k, sys, from, &direct, r, 0, KernelMethod::Direct, &mut stats).unwrap()
    });
    let (stat, p) = chi_square_two_sample(&a, &b);
    (k.epsilon(), stat, p)
}

fn mixture_identity() -> Outcome {
    let one = FnSystem { coords: vec![beta_coordinate()] };
    let (e1, s1, p1) = mixture_identity_for(&one, 2, &[0.5], 20, 100_000);
    let (e2, s2, p2) = mixture_identity_for(&coupled_system(), 4, &[0.3, 0.7], 5, 100_000);
    outcome(
        p1 > 0.01 && p2 > 0.01,
        format!("p=1: eps {e1:.3}, chi2 {s1:.1}, p-value {p1:.3}; p=2: eps {e2:.3}, chi2 {s2:.1}, p-value {p2:.3} (> 0.01)"),
    )
}

/// Draws `n` values and checks the squeeze at `probes` points of every
/// envelope the sampler builds along the way.
fn ars_case(
    h: impl Fn(f64) -> f64 + Copy,
    dh: impl Fn(f64) -> f64,
    interval: (f64, f64),
    n: usize,
    probes: usize,
    seed: u64,
) -> (Vec<f64>, usize, usize) {
    let mut ars = Ars::new(h, dh, interval, true).unwrap();
    let mut rng = KeyedRng::new(seed);
    let mut probe = KeyedRng::new(seed ^ 0xabc);
    let (mut envelopes, mut broken) = (0, 0);
    let mut seen = 0;
    let mut xs = Vec::with_capacity(n);
    for _ in 0..n {
        let env = ars.envelope();
        if env.abscissae().len() != seen {
            seen = env.abscissae().len();
            envelopes += 1;
            for _ in 0..probes {
                let x = probe.random_range(interval.0..interval.1);
                if !(env.lower(x) <= h(x) && h(x) <= env.upper(x)) {
                    broken += 1;
                }
            }
        }
        xs.push(ars.sample(&mut rng).unwrap());
    }
    (xs, envelopes, broken)
}

fn ars() -> Outcome {
    let n = 10_000;
    let (blo, bhi) = (0.05, 0.95);
    let (xs, e1, b1) =
        ars_case(|x| 2.0 * x.ln() + (1.0 - x).ln(), |x| 2.0 / x - 1.0 / (1.0 - x), (blo, bhi), n, 1000, 41);
    let beta = Beta::new(3.0, 2.0).unwrap();
    let d1 = ks_statistic(&xs, |x| (beta.cdf(x) - beta.cdf(blo)) / (beta.cdf(bhi) - beta.cdf(blo)));
    let (glo, ghi) = (0.5, 10.0);
    let (ys, e2, b2) = ars_case(|x| 2.0 * x.ln() - x, |x| 2.0 / x - 1.0, (glo, ghi), n, 1000, 42);
    let gamma = Gamma::new(3.0, 1.0).unwrap();
    let d2 = ks_statistic(&ys, |x| (gamma.cdf(x) - gamma.cdf(glo)) / (gamma.cdf(ghi) - gamma.cdf(glo)));
    let crit = ks_critical_01(n);
    outcome(
        d1 < crit && d2 < crit && b1 + b2 == 0,
        format!(
            "KS D beta {d1:.4}, gamma {d2:.4} (< {crit:.4}); squeeze broken at {} of {} points over {} envelopes",
            b1 + b2,
            (e1 + e2) * 1000,
            e1 + e2
        ),
    )
}

fn log_concavity() -> Outcome {
    let prior = PriorConfig::broadcast(3, 3, 1.0, 2.0, 1.0, (1.0, 1.0));
    let r = logconcavity(&prior, 100, 17).unwrap();
    let witness = match &r.witness {
        Some(w) => format!("witness at gamma = {:.2} (a = {}, y = {}, b = {})", w.x, w.a, w.y, w.b),
        None => "no witness".into(),
    };
    outcome(
        r.violations() == 0 && r.witness.is_some(),
        format!(
            "violations: phi {} / marginal {} / gamma {} over {} + {} + {} scans; {witness}",
            r.phi_violations, r.marginal_violations, r.gamma_violations, r.phi_scans, r.marginal_scans, r.gamma_scans
        ),
    )
}

fn bounds() -> Outcome {
    let panel = random_panel(2, 4, &mut KeyedRng::new(60));
    let anneal = AnnealConfig::default();
    let fixed = PriorConfig::broadcast(2, 3, 1.0, 2.0, 1.0, (1.0, 1.0));
    let free = PriorConfig::broadcast(2, 3, 1.0, 2.0, 1.0, (0.5, 3.0));
    let a = bounds_suite(&panel, &fixed, &anneal, 50, 500, 61, &RayonExecutor).unwrap();
    let b = bounds_suite(&panel, &free, &anneal, 50, 500, 62, &RayonExecutor).unwrap();
    let failures = a.property_failures + b.property_failures + a.sandwich_failures + b.sandwich_failures;
    let repairs = a.repairs + b.repairs;
    let rate = (a.repair_rate + b.repair_rate) / 2.0;
    outcome(
        failures == 0 && rate < 0.05,
        format!(
            "{} bounds, {} property failures; {} probes, {} sandwich failures; {repairs} repairs, rate {:.3}%",
            a.bounds + b.bounds,
            a.property_failures + b.property_failures,
            a.probes + b.probes,
            a.sandwich_failures + b.sandwich_failures,
            100.0 * rate
        ),
    )
}

fn random_theta(c: &[usize], rng: &mut KeyedRng) -> Vec<TransitionMatrix> {
    let top = c.iter().copied().max().unwrap_or(0);
    let distinct: Vec<TransitionMatrix> = (0..top)
        .map(|_| {
            let rows: Vec<Vec<f64>> = (0..2)
                .map(|_| {
                    let p = rng.random_range(0.01..0.99);
                    vec![p, 1.0 - p]
                })
                .collect();
            TransitionMatrix::from_rows(&rows).unwrap()
        })
        .collect();
    c.iter().map(|&h| distinct[h - 1].clone()).collect()
}

fn relabeling() -> Outcome {
    let mut rng = KeyedRng::new(70);
    let (mut equal, mut recursive) = (0, 0);
    let cases = 1000;
    for _ in 0..cases {
        let m = rng.random_range(1..=8);
        let c: Vec<usize> = (0..m).map(|_| rng.random_range(1..=m)).collect();
        let s1 = relabel(&c, &random_theta(&c, &mut rng)).unwrap();
        let s2 = relabel(&c, &random_theta(&c, &mut rng)).unwrap();
        equal += usize::from(s1 == s2);
        recursive += usize::from(relabel_recursive(&c) == s1 && canonical(&c) == s1);
    }
    outcome(
        equal == cases && recursive == cases,
        format!("equal S in {equal}/{cases} pairs; recursive rule agrees in {recursive}/{cases}"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tiny.csv");
    std::fs::write(&data, "1,1,1,1\n1,2,1,2\n1,2,1,2\n").unwrap();
    let base = RunConfig {
        data: Some(data),
        k: 2,
        m: 3,
        alpha: 1.0,
        a: Hyper::Scalar(2.0),
        b: Hyper::Scalar(1.0),
        gamma_support: GammaSupport::Pair([1.8, 2.2]),
        stick_support: [0.2, 0.8],
        seed: 8,
        samples: 6,
        ..RunConfig::default()
    };
    let panel = tiny_panel();
    let run = |threads: usize, parallel_coordinates: bool| {
        let cfg = RunConfig { threads, parallel_coordinates, ..base.clone() };
        let mut out = Vec::new();
        run_sampling(&cfg, &panel, &mut out).unwrap();
        out
    };
    let reference = run(1, false);
    let variants = [run(1, false), run(4, false), run(4, true), run(1, true)];
    let same = variants.iter().filter(|v| **v == reference).count();
    outcome(
        same == variants.len(),
        format!("{same}/{} repeated runs byte-identical ({} bytes, threads 1/4, per-coordinate parallelism off/on)", variants.len(), reference.len()),
    )
}

fn minorization() -> Outcome {
    let panel = tiny_panel();
    let parts = all_partitions(3);
    let mut rng = KeyedRng::new(90);
    let (mut kernels, mut pairs, mut violations) = (0, 0, 0);
    let mut worst = f64::NEG_INFINITY;
    for prior in [tiny_prior(), free_prior()] {
        for case in 0..10u64 {
            let z: Vec<usize> = (0..panel.n()).map(|_| rng.random_range(1..=3)).collect();
            let s = &parts[rng.random_range(0..parts.len())];
            let r = envelopes(&panel, &prior, &z, s, &KernelConfig::default(), 1000, 900 + case, &RayonExecutor).unwrap();
            kernels += 1;
            pairs += r.minorization.pairs;
            violations += r.minorization.violations;
            worst = worst.max(r.minorization.max_log_excess);
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations at {pairs} pairs over {kernels} kernels; max ln(eps g / P) = {worst:.3e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("exactness", exactness),
        ("perfect log-concave sampling", perfect_lc),
        ("mixture-kernel identity", mixture_identity),
        ("adaptive rejection sampling", ars),
        ("log-concavity scans", log_concavity),
        ("bound properties", bounds),
        ("relabeling", relabeling),
        ("determinism", determinism),
        ("minorization", minorization),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "criterion {} ({name}): {} {} [{:.1} s]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
