//! Radiometric camera calibration: raw counts to temperature, and the
//! spread of that temperature under uniform uncertainty in the constants.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{equal_weight_groups, DiracMixture, EmpiricalDistribution};
use crate::error::{Error, Result};
use crate::measurement::{domain, substream};
use crate::par::map_indexed;

/// Largest fraction of parameter vectors allowed to hit a domain error.
pub const MAX_INVALID_FRACTION: f64 = 1e-3;

const KELVIN_OFFSET: f64 = 273.15;
/// Room-temperature substitute for the printed reflected temperature.
pub const SANE_T_REFL: f64 = 293.15;

/// Camera constants and scene parameters. `d`, `h` and `t_atm_c` are carried
/// through configs but do not enter the conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationParams {
    pub r: f64,
    pub b: f64,
    pub f: f64,
    pub j0: f64,
    pub j1: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub tau_e: f64,
    pub t_refl: f64,
    pub t_atm: f64,
    pub t_e: f64,
    pub d: f64,
    pub h: f64,
    pub t_atm_c: f64,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        Self {
            r: 16556.0,
            b: 1428.0,
            f: 1.0,
            j0: 89.796,
            j1: 22.5916,
            epsilon: 1.0,
            tau: 1.0,
            tau_e: 1.0,
            t_refl: 0.0,
            t_atm: 295.0,
            t_e: 20.0,
            d: 16556.0,
            h: 0.0,
            t_atm_c: 21.85,
        }
    }
}

/// Parameters that take part in the conversion, in propagation order.
pub const ACTIVE: [&str; 11] = ["b", "r", "f", "j1", "j0", "tau_e", "t_e", "tau", "t_refl", "epsilon", "t_atm"];

impl CalibrationParams {
    /// Reflected temperature at room temperature, 293.15 K, instead of 0.
    pub fn sane() -> Self {
        Self {
            t_refl: SANE_T_REFL,
            ..Self::default()
        }
    }

    pub fn get(&self, name: &str) -> f64 {
        match name {
            "r" => self.r,
            "b" => self.b,
            "f" => self.f,
            "j0" => self.j0,
            "j1" => self.j1,
            "epsilon" => self.epsilon,
            "tau" => self.tau,
            "tau_e" => self.tau_e,
            "t_refl" => self.t_refl,
            "t_atm" => self.t_atm,
            "t_e" => self.t_e,
            "d" => self.d,
            "h" => self.h,
            "t_atm_c" => self.t_atm_c,
            _ => panic!("unknown calibration parameter {name}"),
        }
    }

    pub fn set(&mut self, name: &str, v: f64) {
        *match name {
            "r" => &mut self.r,
            "b" => &mut self.b,
            "f" => &mut self.f,
            "j0" => &mut self.j0,
            "j1" => &mut self.j1,
            "epsilon" => &mut self.epsilon,
            "tau" => &mut self.tau,
            "tau_e" => &mut self.tau_e,
            "t_refl" => &mut self.t_refl,
            "t_atm" => &mut self.t_atm,
            "t_e" => &mut self.t_e,
            "d" => &mut self.d,
            "h" => &mut self.h,
            "t_atm_c" => &mut self.t_atm_c,
            _ => panic!("unknown calibration parameter {name}"),
        } = v;
    }

    pub fn validate(&self) -> Result<()> {
        for name in ACTIVE {
            crate::error::ensure_finite(name, self.get(name))?;
        }
        if !(self.b > 0.0 && self.r > 0.0 && self.j1 > 0.0) {
            return Err(Error::Config("calibration B, R and J1 must be > 0".into()));
        }
        for (name, v) in [("epsilon", self.epsilon), ("tau", self.tau), ("tau_e", self.tau_e)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("calibration {name} must lie in (0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// How the trailing constant of the conversion is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputScale {
    /// Formula exactly as written, including the −273.15.
    #[default]
    AsPrinted,
    /// Formula without the −273.15.
    NoOffset,
}

fn domain_err(term: &'static str, detail: String) -> Error {
    Error::Domain { term, detail }
}

/// Calibrated temperature for raw counts `raw`.
pub fn calibrate(raw: f64, p: &CalibrationParams, scale: OutputScale) -> Result<f64> {
    let (r, b, f) = (p.r, p.b, p.f);
    let (eps, tau, tau_e) = (p.epsilon, p.tau, p.tau_e);
    if eps == 0.0 || tau == 0.0 || tau_e == 0.0 || p.j1 == 0.0 {
        return Err(domain_err("signal scaling", "J1·τ·ε·τ_E is zero".into()));
    }
    let signal = (raw - p.j0) / (p.j1 * tau * eps * tau_e);
    let refl = (1.0 - eps) * r / (eps * (b / p.t_refl).exp() - f);
    let atm = (1.0 - tau) * r / (eps * tau * ((b / p.t_atm).exp() - f));
    let optics = (1.0 - tau_e) * r / (eps * tau * tau_e * ((b / p.t_e).exp() - f));
    for (term, v) in [("reflected term", refl), ("atmosphere term", atm), ("external optics term", optics)] {
        if !v.is_finite() {
            return Err(domain_err(term, format!("evaluates to {v}")));
        }
    }
    let bracket = signal - (refl + atm + optics);
    // R/(·) needs a positive corrected signal; values lost in rounding
    // against the signal count as zero.
    if !(bracket > 1e-12 * signal.abs()) {
        return Err(domain_err("radiance bracket", format!("corrected signal {bracket} is not positive")));
    }
    let arg = f + r / bracket;
    if !(arg > 0.0) || arg == 1.0 {
        return Err(domain_err("log argument", format!("F + R/(signal − corrections) = {arg}")));
    }
    let t = b / arg.ln();
    let t = match scale {
        OutputScale::AsPrinted => t - KELVIN_OFFSET,
        OutputScale::NoOffset => t,
    };
    if t.is_finite() {
        Ok(t)
    } else {
        Err(domain_err("temperature", format!("evaluates to {t}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn around(c: f64, minus: f64, plus: f64) -> Self {
        Self { lo: c - minus, hi: c + plus }
    }

    pub fn point(c: f64) -> Self {
        Self { lo: c, hi: c }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// One uniform interval per parameter. A zero-width interval pins it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationUncertainty {
    pub b: Interval,
    pub r: Interval,
    pub f: Interval,
    pub j1: Interval,
    pub j0: Interval,
    pub tau_e: Interval,
    pub t_e: Interval,
    pub tau: Interval,
    pub h: Interval,
    pub t_atm_c: Interval,
    pub t_refl: Interval,
    pub d: Interval,
    pub epsilon: Interval,
    pub t_atm: Interval,
}

impl Default for CalibrationUncertainty {
    fn default() -> Self {
        let s = Interval::around;
        Self {
            b: s(1428.0, 0.05, 0.05),
            r: s(16556.0, 0.05, 0.05),
            f: s(1.0, 0.05, 0.05),
            j1: s(22.5916, 0.00005, 0.00005),
            j0: s(89.796, 0.0005, 0.0005),
            tau_e: s(1.0, 0.05, 0.05),
            t_e: s(20.0, 0.05, 0.05),
            tau: s(1.0, 0.05, 0.05),
            h: s(0.0, 0.05 / 100.0, 0.5 / 100.0),
            t_atm_c: s(21.85, 0.005, 0.005),
            t_refl: s(0.0, 0.05, 0.05),
            d: s(16556.0, 0.05, 0.05),
            epsilon: s(1.0, 0.05, 0.05),
            t_atm: s(295.0, 0.005, 0.005),
        }
    }
}

impl CalibrationUncertainty {
    /// Defaults with the reflected-temperature interval moved to
    /// 293.15 K, keeping its width.
    pub fn sane() -> Self {
        Self {
            t_refl: Interval::around(SANE_T_REFL, 0.05, 0.05),
            ..Self::default()
        }
    }

    /// Human-readable remarks on intervals around the nominal values `p`:
    /// unused fields and intervals that look inconsistent.
    pub fn advisories(&self, p: &CalibrationParams) -> Vec<String> {
        let mut out = vec!["h, d and t_atm_c are carried in the configuration but do not enter the conversion".to_string()];
        if p.d == p.r {
            out.push(format!("d shares r's nominal value {}", p.r));
        }
        let (below, above) = (p.h - self.h.lo, self.h.hi - p.h);
        if (below - above).abs() > 1e-9 * below.abs().max(above.abs()) {
            out.push(format!("interval for h is asymmetric: [{}, {}]", self.h.lo, self.h.hi));
        }
        if self.t_refl.hi < 100.0 {
            out.push(format!(
                "reflected temperature interval [{}, {}] K is far below any ambient value; --sane-defaults uses {SANE_T_REFL} K",
                self.t_refl.lo, self.t_refl.hi
            ));
        }
        out
    }

    /// Every interval collapsed onto `p`.
    pub fn pinned(p: &CalibrationParams) -> Self {
        let mut u = Self::default();
        for name in ACTIVE {
            *u.interval_mut(name) = Interval::point(p.get(name));
        }
        u.h = Interval::point(p.h);
        u.d = Interval::point(p.d);
        u.t_atm_c = Interval::point(p.t_atm_c);
        u
    }

    pub fn interval(&self, name: &str) -> Interval {
        let mut c = self.clone();
        *c.interval_mut(name)
    }

    fn interval_mut(&mut self, name: &str) -> &mut Interval {
        match name {
            "b" => &mut self.b,
            "r" => &mut self.r,
            "f" => &mut self.f,
            "j1" => &mut self.j1,
            "j0" => &mut self.j0,
            "tau_e" => &mut self.tau_e,
            "t_e" => &mut self.t_e,
            "tau" => &mut self.tau,
            "h" => &mut self.h,
            "t_atm_c" => &mut self.t_atm_c,
            "t_refl" => &mut self.t_refl,
            "d" => &mut self.d,
            "epsilon" => &mut self.epsilon,
            "t_atm" => &mut self.t_atm,
            _ => panic!("unknown calibration parameter {name}"),
        }
    }

    /// Shrink every interval about its midpoint by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut u = self.clone();
        for name in ACTIVE.iter().chain(&["h", "d", "t_atm_c"]) {
            let iv = u.interval_mut(name);
            let (m, half) = (iv.mid(), 0.5 * iv.width() * factor);
            *iv = Interval { lo: m - half, hi: m + half };
        }
        u
    }

    /// Interval midpoints as a parameter vector.
    pub fn nominal(&self) -> CalibrationParams {
        let mut p = CalibrationParams::default();
        for name in ACTIVE.iter().chain(&["h", "d", "t_atm_c"]) {
            p.set(name, self.interval(name).mid());
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        for name in ACTIVE.iter().chain(&["h", "d", "t_atm_c"]) {
            let iv = self.interval(name);
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo <= iv.hi) {
                return Err(Error::Config(format!(
                    "calibration interval {name} must satisfy lo <= hi, got [{}, {}]",
                    iv.lo, iv.hi
                )));
            }
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> CalibrationParams {
        let mut p = self.nominal();
        for name in ACTIVE {
            let iv = self.interval(name);
            // One draw per parameter even when pinned keeps streams aligned.
            let u: f64 = rng.random();
            p.set(name, iv.lo + u * iv.width());
        }
        p
    }
}

/// Calibrated temperatures with the count of rejected parameter vectors.
#[derive(Debug, Clone)]
pub struct CalibrationSamples {
    pub samples: EmpiricalDistribution,
    pub invalid: usize,
    pub total: usize,
}

fn check_invalid(invalid: f64, total: f64) -> Result<()> {
    if invalid > MAX_INVALID_FRACTION * total {
        return Err(domain_err(
            "calibration propagation",
            format!("{:.4}% of parameter mass is outside the formula's domain", 100.0 * invalid / total),
        ));
    }
    Ok(())
}

/// Monte Carlo over independent uniform parameters.
pub fn calibrate_mc(
    raw: f64,
    u: &CalibrationUncertainty,
    scale: OutputScale,
    m: usize,
    seed: u64,
    threads: usize,
) -> Result<CalibrationSamples> {
    u.validate()?;
    if m < 1 {
        return Err(Error::InvalidArgument("calibration sample count must be >= 1".into()));
    }
    const BLOCK: usize = 4096;
    let parts = map_indexed(m.div_ceil(BLOCK), threads, |blk| {
        let start = blk * BLOCK;
        let mut out = Vec::with_capacity(BLOCK);
        let mut bad = 0;
        for k in start..(start + BLOCK).min(m) {
            let p = u.draw(&mut substream(seed, domain::CALIBRATION, k as u64));
            match calibrate(raw, &p, scale) {
                Ok(t) => out.push(t),
                Err(_) => bad += 1,
            }
        }
        Ok((out, bad))
    })?;
    let invalid: usize = parts.iter().map(|p| p.1).sum();
    check_invalid(invalid as f64, m as f64)?;
    let v: Vec<f64> = parts.into_iter().flat_map(|p| p.0).collect();
    Ok(CalibrationSamples {
        samples: EmpiricalDistribution::new(v)?,
        invalid,
        total: m,
    })
}

/// Result of the mixture propagation.
#[derive(Debug, Clone)]
pub struct CalibrationMixture {
    pub mixture: DiracMixture,
    /// Probability mass dropped for domain errors.
    pub invalid_mass: f64,
}

/// Single-pass propagation. Parameters are folded in one at a time: the
/// particle set of parameter vectors is crossed with an N-point
/// quantisation of the next parameter, then regrouped into N particles by
/// the temperature each vector gives with the remaining parameters at
/// their midpoints. The output is the temperature marginal of the last
/// product set.
pub fn calibrate_mixture(raw: f64, u: &CalibrationUncertainty, scale: OutputScale, n: usize) -> Result<CalibrationMixture> {
    u.validate()?;
    if n < 1 {
        return Err(Error::InvalidArgument("representation size must be >= 1".into()));
    }
    let nominal = u.nominal();
    let active: Vec<&str> = ACTIVE.iter().copied().filter(|k| u.interval(k).width() > 0.0).collect();
    let mut particles: Vec<(CalibrationParams, f64)> = vec![(nominal, 1.0)];
    let mut dropped = 0.0;
    let mut last: Vec<(f64, f64)> = vec![];

    if active.is_empty() {
        let t = calibrate(raw, &nominal, scale)?;
        return Ok(CalibrationMixture {
            mixture: DiracMixture::dirac(t)?,
            invalid_mass: 0.0,
        });
    }

    for (step, name) in active.iter().enumerate() {
        let iv = u.interval(name);
        let atoms: Vec<f64> = (1..=n).map(|i| iv.lo + iv.width() * (i as f64 - 0.5) / n as f64).collect();
        let wa = 1.0 / n as f64;
        let mut pushed: Vec<(f64, CalibrationParams, f64)> = Vec::with_capacity(particles.len() * n);
        for (p, w) in &particles {
            for &a in &atoms {
                let mut q = *p;
                q.set(name, a);
                match calibrate(raw, &q, scale) {
                    Ok(t) => pushed.push((t, q, w * wa)),
                    Err(_) => dropped += w * wa,
                }
            }
        }
        if pushed.is_empty() {
            return Err(domain_err("calibration propagation", "every parameter combination is invalid".into()));
        }
        if step + 1 == active.len() {
            last = pushed.iter().map(|&(t, _, w)| (t, w)).collect();
            break;
        }
        pushed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let weights: Vec<f64> = pushed.iter().map(|x| x.2).collect();
        let total: f64 = weights.iter().sum();
        let mut next = Vec::with_capacity(n);
        if pushed.len() <= n {
            next.extend(pushed.iter().map(|&(_, q, w)| (q, w / total)));
        } else {
            equal_weight_groups(&weights, n, |pieces| {
                let gw: f64 = pieces.iter().map(|p| p.1).sum();
                let mut c = nominal;
                for k in ACTIVE {
                    c.set(k, pieces.iter().map(|&(i, w)| w * pushed[i].1.get(k)).sum::<f64>() / gw);
                }
                next.push((c, gw / total));
            });
        }
        particles = next;
    }
    check_invalid(dropped, 1.0)?;
    Ok(CalibrationMixture {
        mixture: DiracMixture::from_weighted(last)?,
        invalid_mass: dropped,
    })
}
