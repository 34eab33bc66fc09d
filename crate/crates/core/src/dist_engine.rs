//! Single-pass propagation: the joint plant/controller state is a weighted
//! particle set pushed deterministically through the loop against a
//! quantised noise distribution, then compressed back to a fixed size.

use serde::{Deserialize, Serialize};

pub use crate::distribution::lift_through;
use crate::distribution::{compress, equal_weight_groups, quantize, stats, DiracMixture};
use crate::error::{Error, Result};
use crate::mc::{IterationStats, Signal};
use crate::measurement::NoiseModel;
use crate::pid::{ControlConfig, Loop, PidGains, PidState};
use crate::thermal::LumpedParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistConfig {
    /// Representation size N: particles kept per step and noise atoms K = N.
    pub size: usize,
    /// Largest product set N·K allowed per step.
    pub expansion_budget: usize,
}

impl Default for DistConfig {
    fn default() -> Self {
        Self {
            size: 32,
            expansion_budget: 1 << 20,
        }
    }
}

impl DistConfig {
    pub fn with_size(size: usize) -> Self {
        Self { size, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 1 {
            return Err(Error::InvalidArgument("representation size must be >= 1".into()));
        }
        match self.size.checked_mul(self.size) {
            Some(p) if p <= self.expansion_budget => Ok(()),
            _ => Err(Error::Config(format!(
                "representation size {} expands to {}^2 pairs per step, budget is {}",
                self.size, self.size, self.expansion_budget
            ))),
        }
    }
}

/// One support point of the joint state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub temp: f64,
    pub integral: f64,
    pub prev_error: f64,
    pub weight: f64,
}

/// Joint state, kept for inspection and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub particles: Vec<Particle>,
    pub initialized: bool,
}

impl JointState {
    pub fn initial(plant: &LumpedParams) -> Self {
        Self {
            particles: vec![Particle {
                temp: plant.t_initial,
                integral: 0.0,
                prev_error: 0.0,
                weight: 1.0,
            }],
            initialized: false,
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }
}

#[derive(Debug, Clone)]
pub struct DistResult {
    pub size: usize,
    /// Per-iteration marginals, compressed to N points.
    pub error: Vec<DiracMixture>,
    pub power: Vec<DiracMixture>,
    /// Final-iteration error marginal before compression (N·K points).
    pub e_ss: DiracMixture,
    /// State/noise pairs pushed through the loop over the whole run.
    pub pushes: u64,
}

impl DistResult {
    pub fn iteration_stats(&self) -> Result<(Vec<IterationStats>, Vec<IterationStats>)> {
        let conv = |ms: &[DiracMixture], signal| {
            ms.iter()
                .enumerate()
                .map(|(i, m)| {
                    let s = stats(m)?;
                    Ok(IterationStats {
                        iter: i + 1,
                        signal,
                        mean: s.mean,
                        std: s.std,
                        skewness: s.skewness,
                        kurtosis: s.kurtosis,
                        mode: Some(s.mode),
                        ci_lo: Some(s.ci_lo),
                        ci_hi: Some(s.ci_hi),
                    })
                })
                .collect::<Result<Vec<_>>>()
        };
        Ok((conv(&self.error, Signal::Error)?, conv(&self.power, Signal::Power)?))
    }
}

/// Pushed pair before compression.
#[derive(Clone, Copy)]
struct Pushed {
    next_temp: f64,
    integral: f64,
    error: f64,
    power: f64,
    weight: f64,
}

struct Engine<'a> {
    lp: Loop<'a>,
    noise: DiracMixture,
    size: usize,
    state: JointState,
    buf: Vec<Pushed>,
    weights: Vec<f64>,
    pushes: u64,
}

impl<'a> Engine<'a> {
    fn new(
        cfg: &'a ControlConfig,
        gains: &'a PidGains,
        plant: &'a LumpedParams,
        noise: &NoiseModel,
        dc: &DistConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        gains.validate()?;
        plant.validate()?;
        dc.validate()?;
        Ok(Self {
            lp: Loop { cfg, gains, plant },
            noise: quantize(noise, dc.size)?,
            size: dc.size,
            state: JointState::initial(plant),
            buf: Vec::with_capacity(dc.size * dc.size),
            weights: Vec::with_capacity(dc.size * dc.size),
            pushes: 0,
        })
    }

    /// Expand against the noise atoms and push every pair one iteration.
    fn expand(&mut self, iter: usize) -> Result<()> {
        self.buf.clear();
        let init = self.state.initialized;
        for p in &self.state.particles {
            let pid = PidState {
                integral: p.integral,
                prev_error: p.prev_error,
                initialized: init,
            };
            for (eps, w) in self.noise.points() {
                let s = self.lp.step(p.temp, pid, eps);
                self.buf.push(Pushed {
                    next_temp: s.next_temp,
                    integral: s.pid.integral,
                    error: s.error,
                    power: s.power,
                    weight: p.weight * w,
                });
            }
        }
        self.pushes += self.buf.len() as u64;
        if self.buf.iter().any(|q| !(q.next_temp.is_finite() && q.error.is_finite())) {
            return Err(Error::Numeric(format!("distributional state diverged at iteration {iter}")));
        }
        Ok(())
    }

    /// Compress the pushed set back to N particles. Groups are consecutive
    /// in the next temperature; every component takes its group centroid.
    fn compress_state(&mut self) {
        let buf = &mut self.buf;
        buf.sort_unstable_by(|a, b| {
            a.next_temp
                .total_cmp(&b.next_temp)
                .then(a.error.total_cmp(&b.error))
                .then(a.integral.total_cmp(&b.integral))
        });
        let total: f64 = buf.iter().map(|q| q.weight).sum();
        let mut out = Vec::with_capacity(self.size);
        if buf.len() <= self.size {
            out.extend(buf.iter().map(|q| Particle {
                temp: q.next_temp,
                integral: q.integral,
                prev_error: q.error,
                weight: q.weight / total,
            }));
        } else {
            self.weights.clear();
            self.weights.extend(buf.iter().map(|q| q.weight));
            equal_weight_groups(&self.weights, self.size, |pieces| {
                let (mut w, mut t, mut i, mut e) = (0.0, 0.0, 0.0, 0.0);
                for &(k, pw) in pieces {
                    let q = &buf[k];
                    w += pw;
                    t += pw * q.next_temp;
                    i += pw * q.integral;
                    e += pw * q.error;
                }
                out.push(Particle {
                    temp: t / w,
                    integral: i / w,
                    prev_error: e / w,
                    weight: w / total,
                });
            });
        }
        self.state = JointState {
            particles: out,
            initialized: true,
        };
    }

    fn marginal(&self, f: impl Fn(&Pushed) -> f64) -> Result<DiracMixture> {
        DiracMixture::from_weighted(self.buf.iter().map(|q| (f(q), q.weight)))
    }
}

/// Full run with per-iteration error and power marginals.
pub fn run_distributional(
    cfg: &ControlConfig,
    gains: &PidGains,
    plant: &LumpedParams,
    noise: &NoiseModel,
    dc: &DistConfig,
) -> Result<DistResult> {
    let mut eng = Engine::new(cfg, gains, plant, noise, dc)?;
    let mut error = Vec::with_capacity(cfg.n_iters);
    let mut power = Vec::with_capacity(cfg.n_iters);
    let mut e_ss = None;
    for iter in 1..=cfg.n_iters {
        eng.expand(iter)?;
        let em = eng.marginal(|q| q.error)?;
        error.push(compress(&em, dc.size)?);
        power.push(compress(&eng.marginal(|q| q.power)?, dc.size)?);
        if iter == cfg.n_iters {
            e_ss = Some(em);
        }
        eng.compress_state();
    }
    Ok(DistResult {
        size: dc.size,
        error,
        power,
        e_ss: e_ss.expect("n_iters >= 1"),
        pushes: eng.pushes,
    })
}

/// Only the final error distribution; what the benchmark times.
pub fn run_distributional_ess(
    cfg: &ControlConfig,
    gains: &PidGains,
    plant: &LumpedParams,
    noise: &NoiseModel,
    dc: &DistConfig,
) -> Result<DiracMixture> {
    let mut eng = Engine::new(cfg, gains, plant, noise, dc)?;
    for iter in 1..cfg.n_iters {
        eng.expand(iter)?;
        eng.compress_state();
    }
    eng.expand(cfg.n_iters)?;
    eng.marginal(|q| q.error)
}

/// Joint state after `iters` iterations (for inspection).
pub fn joint_state_after(
    cfg: &ControlConfig,
    gains: &PidGains,
    plant: &LumpedParams,
    noise: &NoiseModel,
    dc: &DistConfig,
    iters: usize,
) -> Result<JointState> {
    let mut eng = Engine::new(cfg, gains, plant, noise, dc)?;
    for iter in 1..=iters {
        eng.expand(iter)?;
        eng.compress_state();
    }
    Ok(eng.state)
}
