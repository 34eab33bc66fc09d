//! Accuracy-versus-runtime comparison of the two propagation engines.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dist_engine::{run_distributional_ess, DistConfig};
use crate::distribution::{wasserstein, EmpiricalDistribution};
use crate::error::{Error, Result};
use crate::mc::{final_errors, ground_truth};
use crate::measurement::{domain, mix64, NoiseModel};
use crate::pid::{ControlConfig, PidGains};
use crate::thermal::LumpedParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchPlan {
    pub noises: Vec<NoiseModel>,
    pub mc_sizes: Vec<usize>,
    pub dist_sizes: Vec<usize>,
    pub repetitions: usize,
    pub m_gt: usize,
    pub seed: u64,
    /// Worker threads for each timed MC run. 1 keeps the comparison
    /// single-core against the single-threaded distributional engine.
    pub mc_threads: usize,
    /// Worker threads for the reference ensembles (untimed); 0 = all.
    pub gt_threads: usize,
    /// Wasserstein order used for scoring.
    pub p: f64,
    /// Run the cells of one noise model concurrently. Faster, but cells then
    /// compete for cores and the runtimes are no longer comparable.
    pub parallel_cells: bool,
}

impl Default for BenchPlan {
    fn default() -> Self {
        Self {
            noises: vec![NoiseModel::REFERENCE_GAUSSIAN, NoiseModel::REFERENCE_UNIFORM],
            mc_sizes: vec![256, 512, 1152, 2048, 4096, 8192, 16000, 32000],
            dist_sizes: vec![4, 16, 32, 64, 128],
            repetitions: 30,
            m_gt: 200_000,
            seed: 0,
            mc_threads: 1,
            gt_threads: 0,
            p: 1.0,
            parallel_cells: false,
        }
    }
}

impl BenchPlan {
    /// Small ladders for smoke runs.
    pub fn quick() -> Self {
        Self {
            mc_sizes: vec![256, 1152, 4096],
            dist_sizes: vec![4, 16, 32],
            repetitions: 5,
            m_gt: 50_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 2 {
            return Err(Error::Config("bench.repetitions must be >= 2".into()));
        }
        if self.noises.is_empty() || (self.mc_sizes.is_empty() && self.dist_sizes.is_empty()) {
            return Err(Error::Config("bench plan needs at least one noise model and one ladder".into()));
        }
        if self.mc_sizes.contains(&0) || self.dist_sizes.contains(&0) {
            return Err(Error::Config("bench ladder sizes must be >= 1".into()));
        }
        if self.m_gt < crate::mc::MIN_GROUND_TRUTH {
            return Err(Error::Config(format!("bench.m_gt must be >= {}", crate::mc::MIN_GROUND_TRUTH)));
        }
        if !(self.p >= 1.0) {
            return Err(Error::Config("bench.p must be >= 1".into()));
        }
        for n in &self.noises {
            n.validate()?;
        }
        for &n in &self.dist_sizes {
            DistConfig::with_size(n).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mc,
    Distributional,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Distributional => "distributional",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub method: Method,
    pub size: usize,
    pub noise: String,
    pub w1_mean: f64,
    pub w1_std: f64,
    pub runtime_ms_mean: f64,
    pub runtime_ms_std: f64,
    pub repetitions: usize,
    pub seed: u64,
    /// Per-repetition values, in repetition order.
    #[serde(skip)]
    pub w1_values: Vec<f64>,
    #[serde(skip)]
    pub runtime_ms_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchMeta {
    pub timer_resolution_ns: f64,
    pub smallest_run_ns: f64,
    pub warnings: Vec<String>,
    pub mc_threads: usize,
    pub available_parallelism: usize,
    pub os: String,
    pub arch: String,
    pub cells_sequential: bool,
}

#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub records: Vec<BenchmarkRecord>,
    pub meta: BenchMeta,
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Smallest non-zero step of the monotonic clock, over a few hundred reads.
pub fn timer_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..200 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min(b - a);
    }
    best
}

/// Stream domain of MC repetition `rep` at size `m`.
pub fn mc_domain(rep: usize, m: usize) -> u64 {
    mix64(domain::BENCH ^ mix64(rep as u64 ^ mix64(m as u64)))
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, Duration)> {
    let t = Instant::now();
    let v = f()?;
    Ok((v, t.elapsed()))
}

/// Score every cell of the plan against one reference ensemble per noise.
/// Only the propagation run is timed; each cell gets one untimed warm-up.
pub fn run_benchmark(plan: &BenchPlan, cfg: &ControlConfig, gains: &PidGains, plant: &LumpedParams) -> Result<BenchOutput> {
    plan.validate()?;
    cfg.validate()?;
    gains.validate()?;
    plant.validate()?;
    let cells: Vec<(Method, usize)> = plan
        .dist_sizes
        .iter()
        .map(|&n| (Method::Distributional, n))
        .chain(plan.mc_sizes.iter().map(|&m| (Method::Mc, m)))
        .collect();
    let mut records = Vec::new();
    let mut smallest = Duration::MAX;
    for noise in &plan.noises {
        let gt = ground_truth(cfg, gains, plant, noise, plan.m_gt, plan.seed, plan.gt_threads)?;
        let threads = if plan.parallel_cells { 0 } else { 1 };
        let done = crate::par::map_indexed(cells.len(), threads, |i| {
            let (method, size) = cells[i];
            run_cell(plan, cfg, gains, plant, noise, &gt, method, size)
        })?;
        for (rec, fastest) in done {
            smallest = smallest.min(fastest);
            records.push(rec);
        }
    }
    let res = timer_resolution();
    let mut warnings = Vec::new();
    if res.as_secs_f64() > 0.01 * smallest.as_secs_f64() {
        warnings.push(format!(
            "timer resolution {res:?} is coarser than 1% of the smallest run ({smallest:?})"
        ));
    }
    Ok(BenchOutput {
        records,
        meta: BenchMeta {
            timer_resolution_ns: res.as_secs_f64() * 1e9,
            smallest_run_ns: smallest.as_secs_f64() * 1e9,
            warnings,
            mc_threads: plan.mc_threads,
            available_parallelism: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            cells_sequential: !plan.parallel_cells,
        },
    })
}

/// Warm up, then time `plan.repetitions` runs of one cell. Also returns the
/// fastest run.
#[allow(clippy::too_many_arguments)]
fn run_cell(
    plan: &BenchPlan,
    cfg: &ControlConfig,
    gains: &PidGains,
    plant: &LumpedParams,
    noise: &NoiseModel,
    gt: &EmpiricalDistribution,
    method: Method,
    size: usize,
) -> Result<(BenchmarkRecord, Duration)> {
    let mut w1 = Vec::with_capacity(plan.repetitions);
    let mut ms = Vec::with_capacity(plan.repetitions);
    let mut fastest = Duration::MAX;
    match method {
        Method::Distributional => {
            let dc = DistConfig::with_size(size);
            run_distributional_ess(cfg, gains, plant, noise, &dc)?;
            for _ in 0..plan.repetitions {
                let (m, dt) = timed(|| run_distributional_ess(cfg, gains, plant, noise, &dc))?;
                fastest = fastest.min(dt);
                ms.push(dt.as_secs_f64() * 1e3);
                w1.push(wasserstein(plan.p, &m, gt)?);
            }
        }
        Method::Mc => {
            final_errors(cfg, gains, plant, noise, size, plan.seed, mc_domain(usize::MAX, size), plan.mc_threads)?;
            for rep in 0..plan.repetitions {
                let dom = mc_domain(rep, size);
                let (e, dt) = timed(|| final_errors(cfg, gains, plant, noise, size, plan.seed, dom, plan.mc_threads))?;
                fastest = fastest.min(dt);
                ms.push(dt.as_secs_f64() * 1e3);
                w1.push(wasserstein(plan.p, &EmpiricalDistribution::new(e)?, gt)?);
            }
        }
    }
    Ok((record(method, size, noise, plan, w1, ms), fastest))
}

fn record(method: Method, size: usize, noise: &NoiseModel, plan: &BenchPlan, w1: Vec<f64>, ms: Vec<f64>) -> BenchmarkRecord {
    let (w1_mean, w1_std) = mean_std(&w1);
    let (runtime_ms_mean, runtime_ms_std) = mean_std(&ms);
    BenchmarkRecord {
        method,
        size,
        noise: noise.kind().into(),
        w1_mean,
        w1_std,
        runtime_ms_mean,
        runtime_ms_std,
        repetitions: plan.repetitions,
        seed: plan.seed,
        w1_values: w1,
        runtime_ms_values: ms,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Speedup {
    pub noise: String,
    /// `mc runtime / distributional runtime`; `None` when a method is absent.
    pub ratio: Option<f64>,
    pub matched: bool,
    pub mc_size: Option<usize>,
    pub dist_size: Option<usize>,
    pub mc_w1: Option<f64>,
    pub dist_w1: Option<f64>,
}

/// Runtime ratio at matched accuracy, per noise type.
///
/// A distributional cell counts as matched when some MC cell reaches its
/// W1 mean. Among matched cells the smallest size whose W1 is within one
/// combined standard deviation of the best matched cell is taken, and it
/// is paired with the smallest MC cell at least as accurate. When nothing
/// matches, the most accurate distributional cell is paired with the
/// largest MC cell and `matched` is false.
pub fn speedup_at_matched_accuracy(records: &[BenchmarkRecord]) -> Vec<Speedup> {
    let mut noises: Vec<&str> = Vec::new();
    for r in records {
        if !noises.contains(&r.noise.as_str()) {
            noises.push(&r.noise);
        }
    }
    noises
        .into_iter()
        .map(|noise| {
            let pick = |m: Method| {
                let mut v: Vec<&BenchmarkRecord> = records.iter().filter(|r| r.noise == noise && r.method == m).collect();
                v.sort_by_key(|r| r.size);
                v
            };
            let (mcs, dists) = (pick(Method::Mc), pick(Method::Distributional));
            let mut out = Speedup {
                noise: noise.into(),
                ratio: None,
                matched: false,
                mc_size: None,
                dist_size: None,
                mc_w1: None,
                dist_w1: None,
            };
            if mcs.is_empty() || dists.is_empty() {
                return out;
            }
            let reaches = |d: &BenchmarkRecord| mcs.iter().find(|m| m.w1_mean <= d.w1_mean).copied();
            let matched: Vec<&BenchmarkRecord> = dists.iter().copied().filter(|d| reaches(d).is_some()).collect();
            let (d, m) = if let Some(best) = matched.iter().copied().min_by(|a, b| a.w1_mean.total_cmp(&b.w1_mean)) {
                let d = matched
                    .iter()
                    .copied()
                    .find(|d| d.w1_mean <= best.w1_mean + d.w1_std + best.w1_std)
                    .unwrap_or(best);
                out.matched = true;
                (d, reaches(d).expect("matched cell"))
            } else {
                let best = dists.iter().copied().min_by(|a, b| a.w1_mean.total_cmp(&b.w1_mean)).expect("non-empty");
                (best, *mcs.last().expect("non-empty"))
            };
            out.ratio = Some(m.runtime_ms_mean / d.runtime_ms_mean);
            out.mc_size = Some(m.size);
            out.dist_size = Some(d.size);
            out.mc_w1 = Some(m.w1_mean);
            out.dist_w1 = Some(d.w1_mean);
            out
        })
        .collect()
}
