//! Browser bindings. Each operation takes plain numbers and strings and
//! returns a JSON document for the page to draw.
//!
//! The `*_json` functions are the native entry points; the `#[wasm_bindgen]`
//! wrappers only add a clock and error conversion.

use serde::Serialize;
use sinterbench_core::calibration::{calibrate, calibrate_mc, CalibrationParams, CalibrationUncertainty, OutputScale};
use sinterbench_core::dist_engine::{run_distributional_ess, DistConfig};
use sinterbench_core::distribution::{histogram, stats, wasserstein, EmpiricalDistribution, SummaryStats};
use sinterbench_core::mc::{final_errors, run_ensemble, run_path, McConfig};
use sinterbench_core::measurement::{domain, substream, NoiseModel};
use sinterbench_core::pid::{run_nominal, ControlConfig, PidGains};
use sinterbench_core::thermal::LumpedParams;
use sinterbench_core::Error;
use wasm_bindgen::prelude::*;

/// Caps keeping a single call interactive.
pub const MAX_PATHS: usize = 200_000;
pub const MAX_SIZE: usize = 128;
pub const MAX_TRACES: usize = 50;

type Res<T> = Result<T, String>;

fn err(e: Error) -> String {
    e.to_string()
}

fn noise(spec: &str) -> Res<NoiseModel> {
    spec.parse().map_err(err)
}

fn capped(what: &str, v: usize, max: usize) -> Res<usize> {
    if v == 0 || v > max {
        return Err(format!("{what} must be in 1..={max}, got {v}"));
    }
    Ok(v)
}

fn defaults() -> (ControlConfig, PidGains, LumpedParams) {
    (ControlConfig::default(), PidGains::default(), LumpedParams::default())
}

#[derive(Debug, Serialize)]
pub struct Fan {
    pub nominal: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// A few individual error traces.
    pub traces: Vec<Vec<f64>>,
}

/// Nominal error trace, ensemble mean ± std per iteration, and sample paths.
pub fn fan_json(noise_spec: &str, paths: usize, traces: usize, seed: u64) -> Res<String> {
    let (c, g, p) = defaults();
    let nz = noise(noise_spec)?;
    let paths = capped("paths", paths, MAX_PATHS)?;
    let traces = traces.min(MAX_TRACES).min(paths);
    let nominal = run_nominal(&c, &g, &p).map_err(err)?.iter().map(|r| r.error).collect();
    let mc = McConfig { paths, noise: nz, seed, threads: 1, ..McConfig::default() };
    let ens = run_ensemble(&mc, &c, &g, &p).map_err(err)?;
    let traces = (0..traces)
        .map(|k| run_path(&c, &g, &p, &nz, &mut substream(seed, domain::ENSEMBLE, k as u64)).map(|(e, _)| e))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let fan = Fan {
        nominal,
        mean: ens.error_stats.iter().map(|s| s.mean).collect(),
        std: ens.error_stats.iter().map(|s| s.std).collect(),
        traces,
    };
    serde_json::to_string(&fan).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct Hist {
    pub lo: f64,
    pub width: f64,
    /// Probability mass per bin.
    pub mass: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub mc_hist: Hist,
    pub mc_stats: SummaryStats,
    pub mc_ms: f64,
    /// `[x, w]` atoms of the final-error mixture.
    pub mixture: Vec<[f64; 2]>,
    pub mixture_stats: SummaryStats,
    pub dist_ms: f64,
    /// W1 between the two final-error distributions.
    pub w1: f64,
}

fn hist_of(d: &EmpiricalDistribution, bins: usize) -> Res<Hist> {
    let h = histogram(d, bins).map_err(err)?;
    let total: f64 = h.counts.iter().sum();
    Ok(Hist { lo: h.lo, width: h.width, mass: h.counts.iter().map(|c| c / total).collect() })
}

/// Final tracking error by Monte Carlo with `paths` runs and by the mixture
/// engine at size `n`. `now` returns milliseconds.
pub fn compare_json(noise_spec: &str, paths: usize, n: usize, seed: u64, now: impl Fn() -> f64) -> Res<String> {
    let (c, g, p) = defaults();
    let nz = noise(noise_spec)?;
    let paths = capped("paths", paths, MAX_PATHS)?;
    let n = capped("representation size", n, MAX_SIZE)?;

    let t0 = now();
    let e = final_errors(&c, &g, &p, &nz, paths, seed, domain::ENSEMBLE, 1).map_err(err)?;
    let mc_ms = now() - t0;
    let mc = EmpiricalDistribution::new(e).map_err(err)?;

    let t0 = now();
    let mix = run_distributional_ess(&c, &g, &p, &nz, &DistConfig::with_size(n)).map_err(err)?;
    let dist_ms = now() - t0;

    let cmp = Comparison {
        mc_hist: hist_of(&mc, 40)?,
        mc_stats: stats(&mc).map_err(err)?,
        mc_ms,
        mixture: mix.points().map(|(x, w)| [x, w]).collect(),
        mixture_stats: stats(&mix).map_err(err)?,
        dist_ms,
        w1: wasserstein(1.0, &mix, &mc).map_err(err)?,
    };
    serde_json::to_string(&cmp).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct Calibration {
    pub point: f64,
    pub hist: Hist,
    pub stats: SummaryStats,
    /// Share of draws in 400–480 K.
    pub in_band: f64,
    pub invalid: usize,
}

/// Point calibration and the Monte Carlo spread over the parameter
/// intervals. `sane` moves the reflected temperature to 293.15 K.
pub fn calibration_json(raw: f64, draws: usize, sane: bool, seed: u64) -> Res<String> {
    let draws = capped("draws", draws, MAX_PATHS)?;
    let (params, unc) = if sane {
        (CalibrationParams::sane(), CalibrationUncertainty::sane())
    } else {
        (CalibrationParams::default(), CalibrationUncertainty::default())
    };
    let scale = OutputScale::AsPrinted;
    let point = calibrate(raw, &params, scale).map_err(err)?;
    let s = calibrate_mc(raw, &unc, scale, draws, seed, 1).map_err(err)?;
    let xs = s.samples.samples();
    let in_band = xs.iter().filter(|x| (400.0..=480.0).contains(*x)).count() as f64 / xs.len() as f64;
    let out = Calibration {
        point,
        hist: hist_of(&s.samples, 40)?,
        stats: stats(&s.samples).map_err(err)?,
        in_band,
        invalid: s.invalid,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

fn js(r: Res<String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

fn performance_now() -> f64 {
    web_sys::window()
        .and_then(|w| w.performance())
        .map(|p| p.now())
        .unwrap_or(0.0)
}

#[wasm_bindgen]
pub fn fan(noise_spec: &str, paths: usize, traces: usize, seed: u32) -> Result<String, JsError> {
    js(fan_json(noise_spec, paths, traces, seed as u64))
}

#[wasm_bindgen]
pub fn compare(noise_spec: &str, paths: usize, n: usize, seed: u32) -> Result<String, JsError> {
    js(compare_json(noise_spec, paths, n, seed as u64, performance_now))
}

#[wasm_bindgen(js_name = calibrationSpread)]
pub fn calibration_spread(raw: f64, draws: usize, sane: bool, seed: u32) -> Result<String, JsError> {
    js(calibration_json(raw, draws, sane, seed as u64))
}
