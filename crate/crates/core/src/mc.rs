//! Monte Carlo propagation: independent closed-loop rollouts, one counter
//! based substream per path, reduced in fixed block order.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{stats, EmpiricalDistribution};
use crate::error::{Error, Result};
use crate::measurement::{domain, substream, NoiseModel, NoiseSampler};
use crate::par::map_indexed;
use crate::pid::{ControlConfig, Loop, PidGains, PidState};
use crate::thermal::LumpedParams;

/// Paths per reduction block. Fixed so the floating-point reduction tree is
/// the same for every worker count.
pub const BLOCK: usize = 1024;

/// Smallest ground-truth ensemble accepted.
pub const MIN_GROUND_TRUTH: usize = 10_000;

const DEFAULT_BUDGET: usize = 1 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub paths: usize,
    pub noise: NoiseModel,
    pub seed: u64,
    /// 1-based iterations whose full sample vectors are kept. The final
    /// iteration is always added.
    pub record_iters: Vec<usize>,
    /// Upper bound on bytes of retained samples.
    pub memory_budget: usize,
    /// Worker threads; 0 means the global pool.
    pub threads: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            paths: 10_000,
            noise: NoiseModel::REFERENCE_GAUSSIAN,
            seed: 0,
            record_iters: Vec::new(),
            memory_budget: DEFAULT_BUDGET,
            threads: 0,
        }
    }
}

impl McConfig {
    /// Sorted, deduplicated record iterations including `n_iters`.
    pub fn resolved_record_iters(&self, n_iters: usize) -> Result<Vec<usize>> {
        let mut v = self.record_iters.clone();
        if let Some(&bad) = v.iter().find(|&&i| i == 0 || i > n_iters) {
            return Err(Error::Config(format!("record iteration {bad} outside [1, {n_iters}]")));
        }
        v.push(n_iters);
        v.sort_unstable();
        v.dedup();
        Ok(v)
    }

    pub fn validate(&self, n_iters: usize) -> Result<()> {
        if self.paths < 1 {
            return Err(Error::Config("mc.paths must be >= 1".into()));
        }
        self.noise.validate()?;
        let rec = self.resolved_record_iters(n_iters)?;
        let bytes = rec.len().saturating_mul(self.paths).saturating_mul(2 * std::mem::size_of::<f64>());
        if bytes > self.memory_budget {
            return Err(Error::Resource(format!(
                "retaining {} iterations x {} paths needs {bytes} bytes, budget is {}",
                rec.len(),
                self.paths,
                self.memory_budget
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    Error,
    Power,
}

impl Signal {
    pub fn as_str(self) -> &'static str {
        match self {
            Signal::Error => "error",
            Signal::Power => "power",
        }
    }
}

/// Per-iteration summary. Mode and interval need the full sample and are
/// only present where it was retained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iter: usize,
    pub signal: Signal,
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub mode: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retained {
    pub iter: usize,
    /// Indexed by path.
    pub errors: Vec<f64>,
    pub powers: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub paths: usize,
    pub error_stats: Vec<IterationStats>,
    pub power_stats: Vec<IterationStats>,
    pub retained: Vec<Retained>,
    pub e_ss: EmpiricalDistribution,
}

/// Central moment sums for a batch: count, mean and Σ(x−mean)^k, k = 2..4.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: f64,
    pub mean: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl Moments {
    /// Two-pass moments of a slice.
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Self::default();
        }
        let mean = xs.iter().sum::<f64>() / n;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &x in xs {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        Self { n, mean, m2, m3, m4 }
    }

    /// Pairwise combination (Chan et al. / Pébay).
    pub fn merge(a: Self, b: Self) -> Self {
        if a.n == 0.0 {
            return b;
        }
        if b.n == 0.0 {
            return a;
        }
        let n = a.n + b.n;
        let d = b.mean - a.mean;
        let d_n = d / n;
        let d2 = d * d;
        let ab = a.n * b.n;
        let mean = a.mean + b.n * d_n;
        let m2 = a.m2 + b.m2 + d2 * ab / n;
        let m3 = a.m3 + b.m3 + d * d2 * ab * (a.n - b.n) / (n * n) + 3.0 * d_n * (a.n * b.m2 - b.n * a.m2);
        let m4 = a.m4
            + b.m4
            + d2 * d2 * ab * (a.n * a.n - ab + b.n * b.n) / (n * n * n)
            + 6.0 * d_n * d_n * (a.n * a.n * b.m2 + b.n * b.n * a.m2)
            + 4.0 * d_n * (a.n * b.m3 - b.n * a.m3);
        Self { n, mean, m2, m3, m4 }
    }

    /// (sample std, skewness, non-excess kurtosis); zeros when degenerate.
    pub fn shape(&self) -> (f64, f64, f64) {
        if self.n < 2.0 || self.m2 <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let var_pop = self.m2 / self.n;
        (
            (self.m2 / (self.n - 1.0)).sqrt(),
            (self.m3 / self.n) / var_pop.powf(1.5),
            (self.m4 / self.n) / (var_pop * var_pop),
        )
    }
}

/// One rollout: per-iteration tracking errors and powers.
pub fn run_path<R: Rng + ?Sized>(
    cfg: &ControlConfig,
    gains: &PidGains,
    plant: &LumpedParams,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    gains.validate()?;
    plant.validate()?;
    let sampler = noise.sampler()?;
    let mut errors = Vec::with_capacity(cfg.n_iters);
    let mut powers = Vec::with_capacity(cfg.n_iters);
    rollout(&Loop { cfg, gains, plant }, &sampler, rng, |e, p| {
        errors.push(e);
        powers.push(p);
    });
    check_finite(errors.last().copied().unwrap_or(0.0))?;
    Ok((errors, powers))
}

#[inline(always)]
fn rollout<R: Rng + ?Sized, F: FnMut(f64, f64)>(lp: &Loop<'_>, sampler: &NoiseSampler, rng: &mut R, mut sink: F) -> f64 {
    let mut temp = lp.plant.t_initial;
    let mut pid = PidState::default();
    let mut last = 0.0;
    for _ in 0..lp.cfg.n_iters {
        let s = lp.step(temp, pid, sampler.draw(rng));
        sink(s.error, s.power);
        last = s.error;
        temp = s.next_temp;
        pid = s.pid;
    }
    last
}

fn check_finite(e: f64) -> Result<()> {
    if e.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric("a Monte Carlo path diverged".into()))
    }
}

struct BlockOut {
    // [iter][signal]
    moments: Vec<[Moments; 2]>,
    // [record slot] -> (errors, powers) for this block's paths
    kept: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Full ensemble with per-iteration streaming statistics.
pub fn run_ensemble(mc: &McConfig, cfg: &ControlConfig, gains: &PidGains, plant: &LumpedParams) -> Result<EnsembleResult> {
    cfg.validate()?;
    gains.validate()?;
    plant.validate()?;
    mc.validate(cfg.n_iters)?;
    let rec = mc.resolved_record_iters(cfg.n_iters)?;
    let sampler = mc.noise.sampler()?;
    let n_iters = cfg.n_iters;
    let lp = Loop { cfg, gains, plant };
    let blocks = mc.paths.div_ceil(BLOCK);

    let outs = map_indexed(blocks, mc.threads, |b| {
        let start = b * BLOCK;
        let len = BLOCK.min(mc.paths - start);
        // Iteration-major buffers for exact two-pass block moments.
        let mut err = vec![0.0; n_iters * len];
        let mut pow = vec![0.0; n_iters * len];
        for k in 0..len {
            let mut rng = substream(mc.seed, domain::ENSEMBLE, (start + k) as u64);
            let mut it = 0;
            let last = rollout(&lp, &sampler, &mut rng, |e, p| {
                err[it * len + k] = e;
                pow[it * len + k] = p;
                it += 1;
            });
            check_finite(last)?;
        }
        let moments = (0..n_iters)
            .map(|it| {
                let r = it * len..(it + 1) * len;
                [Moments::of(&err[r.clone()]), Moments::of(&pow[r])]
            })
            .collect();
        let kept = rec
            .iter()
            .map(|&i| {
                let r = (i - 1) * len..i * len;
                (err[r.clone()].to_vec(), pow[r].to_vec())
            })
            .collect();
        Ok(BlockOut { moments, kept })
    })?;

    let mut acc = vec![[Moments::default(); 2]; n_iters];
    let mut retained: Vec<Retained> = rec
        .iter()
        .map(|&iter| Retained {
            iter,
            errors: Vec::with_capacity(mc.paths),
            powers: Vec::with_capacity(mc.paths),
        })
        .collect();
    for out in outs {
        for (a, m) in acc.iter_mut().zip(&out.moments) {
            a[0] = Moments::merge(a[0], m[0]);
            a[1] = Moments::merge(a[1], m[1]);
        }
        for (r, (e, p)) in retained.iter_mut().zip(out.kept) {
            r.errors.extend(e);
            r.powers.extend(p);
        }
    }

    let mut error_stats = Vec::with_capacity(n_iters);
    let mut power_stats = Vec::with_capacity(n_iters);
    for (i, a) in acc.iter().enumerate() {
        let iter = i + 1;
        let full = retained.iter().find(|r| r.iter == iter);
        for (sig, m, out) in [(Signal::Error, a[0], &mut error_stats), (Signal::Power, a[1], &mut power_stats)] {
            let (std, skewness, kurtosis) = m.shape();
            let mut s = IterationStats {
                iter,
                signal: sig,
                mean: m.mean,
                std,
                skewness,
                kurtosis,
                mode: None,
                ci_lo: None,
                ci_hi: None,
            };
            if let Some(r) = full {
                let v = if sig == Signal::Error { &r.errors } else { &r.powers };
                let st = stats(&EmpiricalDistribution::new(v.clone())?)?;
                s.mode = Some(st.mode);
                s.ci_lo = Some(st.ci_lo);
                s.ci_hi = Some(st.ci_hi);
            }
            out.push(s);
        }
    }
    let e_ss = EmpiricalDistribution::new(retained.last().expect("final iteration retained").errors.clone())?;
    Ok(EnsembleResult {
        paths: mc.paths,
        error_stats,
        power_stats,
        retained,
        e_ss,
    })
}

/// Final-iteration errors only, path `k` on substream `(seed, dom, k)`.
/// This is the hot path for benchmarking and reference ensembles.
#[allow(clippy::too_many_arguments)]
pub fn final_errors(
    cfg: &ControlConfig,
    gains: &PidGains,
    plant: &LumpedParams,
    noise: &NoiseModel,
    paths: usize,
    seed: u64,
    dom: u64,
    threads: usize,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    gains.validate()?;
    plant.validate()?;
    if paths < 1 {
        return Err(Error::InvalidArgument("path count must be >= 1".into()));
    }
    let sampler = noise.sampler()?;
    let lp = Loop { cfg, gains, plant };
    let blocks = paths.div_ceil(BLOCK);
    let parts = map_indexed(blocks, threads, |b| {
        let start = b * BLOCK;
        let len = BLOCK.min(paths - start);
        let mut out = Vec::with_capacity(len);
        for k in start..start + len {
            let mut rng = substream(seed, dom, k as u64);
            let e = rollout(&lp, &sampler, &mut rng, |_, _| {});
            check_finite(e)?;
            out.push(e);
        }
        Ok(out)
    })?;
    Ok(parts.concat())
}

/// Reference `e_ss` sample set in the reserved ground-truth stream domain.
pub fn ground_truth(
    cfg: &ControlConfig,
    gains: &PidGains,
    plant: &LumpedParams,
    noise: &NoiseModel,
    m_gt: usize,
    seed: u64,
    threads: usize,
) -> Result<EmpiricalDistribution> {
    if m_gt < MIN_GROUND_TRUTH {
        return Err(Error::InvalidArgument(format!(
            "ground truth needs at least {MIN_GROUND_TRUTH} paths, got {m_gt}"
        )));
    }
    EmpiricalDistribution::new(final_errors(cfg, gains, plant, noise, m_gt, seed, domain::GROUND_TRUTH, threads)?)
}
