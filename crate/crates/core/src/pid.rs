//! Discrete PID laser-power controller and nominal (noise-free) tuning.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::thermal::LumpedParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 0.1,
            ki: 0.05,
            kd: 5e-5,
        }
    }
}

impl PidGains {
    pub const fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self { kp, ki, kd }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("gains.{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self::new(self.kp * lambda, self.ki * lambda, self.kd * lambda)
    }
}

/// Integral and derivative memory threaded between controller calls.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    /// Accumulated error, °C·s.
    pub integral: f64,
    pub prev_error: f64,
    pub initialized: bool,
}

/// Actuator range of the laser, W.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLimits {
    pub min: f64,
    pub max: f64,
}

/// One controller update.
///
/// The integral used for the output holds errors strictly before this call;
/// the current error is accumulated afterwards unless the output is clamped
/// and the error pushes further into the clamp.
#[inline]
pub fn pid_step(gains: &PidGains, st: PidState, error: f64, dt: f64, limits: PowerLimits) -> (f64, PidState) {
    let derivative = if st.initialized { (error - st.prev_error) / dt } else { 0.0 };
    let raw = gains.kp * error + gains.ki * st.integral + gains.kd * derivative;
    let power = raw.clamp(limits.min, limits.max);
    let winding = (raw > limits.max && error > 0.0) || (raw < limits.min && error < 0.0);
    let integral = if winding { st.integral } else { st.integral + error * dt };
    (
        power,
        PidState {
            integral,
            prev_error: error,
            initialized: true,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    /// Target spot temperature, °C.
    pub setpoint: f64,
    pub n_iters: usize,
    /// Control period, s. One thermal step per period.
    pub dt: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            setpoint: 167.5,
            n_iters: 200,
            dt: 0.1,
            p_min: 0.0,
            p_max: 5.0,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iters < 1 {
            return Err(Error::Config("control.n_iters must be >= 1".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("control.dt must be > 0, got {}", self.dt)));
        }
        ensure_finite("control.setpoint", self.setpoint)?;
        if !(self.p_min.is_finite() && self.p_max.is_finite() && self.p_min < self.p_max) {
            return Err(Error::Config(format!(
                "control power limits must satisfy p_min < p_max, got [{}, {}]",
                self.p_min, self.p_max
            )));
        }
        Ok(())
    }

    pub fn limits(&self) -> PowerLimits {
        PowerLimits {
            min: self.p_min,
            max: self.p_max,
        }
    }
}

/// Controller + lumped plant, advanced one control period at a time with a
/// caller-supplied measurement offset.
#[derive(Debug, Clone, Copy)]
pub struct Loop<'a> {
    pub cfg: &'a ControlConfig,
    pub gains: &'a PidGains,
    pub plant: &'a LumpedParams,
}

/// Everything a single control iteration produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopStep {
    pub error: f64,
    pub power: f64,
    /// True spot temperature seen by the sensor at this iteration.
    pub temp: f64,
    pub next_temp: f64,
    pub pid: PidState,
}

impl Loop<'_> {
    /// Measure `temp + noise`, compute the tracking error and power, and
    /// advance the plant.
    #[inline(always)]
    pub fn step(&self, temp: f64, pid: PidState, noise: f64) -> LoopStep {
        let error = self.cfg.setpoint - (temp + noise);
        let (power, pid) = pid_step(self.gains, pid, error, self.cfg.dt, self.cfg.limits());
        LoopStep {
            error,
            power,
            temp,
            next_temp: self.plant.advance(temp, power, self.cfg.dt),
            pid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    /// 1-based control iteration.
    pub iter: usize,
    pub error: f64,
    pub power: f64,
    pub temp: f64,
}

pub type Trajectory = Vec<TrajectoryRow>;

fn validate_all(cfg: &ControlConfig, gains: &PidGains, plant: &LumpedParams) -> Result<()> {
    cfg.validate()?;
    gains.validate()?;
    plant.validate()
}

/// Closed loop driven by an arbitrary per-iteration measurement offset.
pub fn run_with_offsets<F>(cfg: &ControlConfig, gains: &PidGains, plant: &LumpedParams, mut offset: F) -> Result<Trajectory>
where
    F: FnMut(usize) -> f64,
{
    validate_all(cfg, gains, plant)?;
    let lp = Loop { cfg, gains, plant };
    let mut temp = plant.t_initial;
    let mut pid = PidState::default();
    let mut out = Vec::with_capacity(cfg.n_iters);
    for iter in 1..=cfg.n_iters {
        let s = lp.step(temp, pid, offset(iter));
        if !(s.next_temp.is_finite() && s.error.is_finite()) {
            return Err(Error::Numeric(format!("closed loop diverged at iteration {iter}")));
        }
        out.push(TrajectoryRow {
            iter,
            error: s.error,
            power: s.power,
            temp: s.temp,
        });
        temp = s.next_temp;
        pid = s.pid;
    }
    Ok(out)
}

/// Noise-free closed loop.
pub fn run_nominal(cfg: &ControlConfig, gains: &PidGains, plant: &LumpedParams) -> Result<Trajectory> {
    run_with_offsets(cfg, gains, plant, |_| 0.0)
}

/// Tracking error at the final control iteration.
pub fn steady_state_error(traj: &Trajectory) -> f64 {
    traj.last().map(|r| r.error).unwrap_or(f64::NAN)
}

/// Grid search for the gains minimising the nominal steady-state error.
/// Ties go to the lexicographically smallest `(kp, ki, kd)`.
pub fn tune_nominal(cfg: &ControlConfig, plant: &LumpedParams, grid: &[PidGains]) -> Result<PidGains> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("tuning grid is empty".into()));
    }
    let mut best: Option<(f64, PidGains)> = None;
    for g in grid {
        let e = steady_state_error(&run_nominal(cfg, g, plant)?).abs();
        let e = if e.is_finite() { e } else { f64::INFINITY };
        let better = match &best {
            None => true,
            Some((be, bg)) => {
                e < *be || (e == *be && (g.kp, g.ki, g.kd).partial_cmp(&(bg.kp, bg.ki, bg.kd)) == Some(std::cmp::Ordering::Less))
            }
        };
        if better {
            best = Some((e, *g));
        }
    }
    Ok(best.map(|(_, g)| g).expect("grid is non-empty"))
}

/// Cartesian product of per-gain candidate lists.
pub fn gain_grid(kp: &[f64], ki: &[f64], kd: &[f64]) -> Vec<PidGains> {
    let mut out = Vec::with_capacity(kp.len() * ki.len() * kd.len());
    for &p in kp {
        for &i in ki {
            for &d in kd {
                out.push(PidGains::new(p, i, d));
            }
        }
    }
    out
}
