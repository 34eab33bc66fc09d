//! Heat-transfer plant: Gaussian volumetric laser source, an explicit
//! finite-difference grid solver, and the one-node lumped model that the
//! closed-loop engines drive.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Bulk material and beam parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialParams {
    /// Density, kg/m³.
    pub rho: f64,
    /// Specific heat, J/(kg·K).
    pub c: f64,
    /// Thermal conductivity, W/(m·K).
    pub k: f64,
    /// Powder absorptivity, dimensionless in (0, 1].
    pub absorptivity: f64,
    /// Beam radius, m.
    pub beam_radius: f64,
    /// Optical penetration depth, m.
    pub penetration_depth: f64,
}

impl Default for MaterialParams {
    /// PA12-like nylon powder.
    fn default() -> Self {
        Self {
            rho: 950.0,
            c: 1200.0,
            k: 0.12,
            absorptivity: 0.95,
            beam_radius: 200e-6,
            penetration_depth: 100e-6,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rho", self.rho),
            ("c", self.c),
            ("k", self.k),
            ("absorptivity", self.absorptivity),
            ("beam_radius", self.beam_radius),
            ("penetration_depth", self.penetration_depth),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "material.{name} must be strictly positive, got {v}"
                )));
            }
        }
        if self.absorptivity > 1.0 {
            return Err(Error::Config(format!(
                "material.absorptivity must be <= 1, got {}",
                self.absorptivity
            )));
        }
        Ok(())
    }

    fn diffusivity(&self) -> f64 {
        self.k / (self.rho * self.c)
    }
}

/// A point in metres.
pub type Point3 = [f64; 3];

/// Volumetric heat input (W/m³) of a Gaussian beam of power `power` centred
/// at `center`, evaluated at `point`.
pub fn heat_source(params: &MaterialParams, power: f64, point: Point3, center: Point3) -> Result<f64> {
    ensure_finite("power", power)?;
    for v in point.iter().chain(center.iter()) {
        ensure_finite("coordinate", *v)?;
    }
    if power < 0.0 {
        return Err(Error::InvalidArgument(format!("laser power must be >= 0, got {power}")));
    }
    let w2 = params.beam_radius * params.beam_radius;
    let dp2 = params.penetration_depth * params.penetration_depth;
    let dx = point[0] - center[0];
    let dy = point[1] - center[1];
    let dz = point[2] - center[2];
    let peak = 2.0 * params.absorptivity * power / (PI * w2 * params.penetration_depth);
    Ok(peak * (-2.0 * ((dx * dx + dy * dy) / w2 + dz * dz / dp2)).exp())
}

/// Discretisation of a rectangular block. Node `(i, j, k)` sits at
/// `(i·dx, j·dy, k·dz)`; the outermost layer of nodes is held at `boundary`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dt: f64,
    /// Fixed face temperature, K.
    pub boundary: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: 21,
            ny: 21,
            nz: 11,
            dx: 50e-6,
            dy: 50e-6,
            dz: 25e-6,
            dt: 1e-3,
            boundary: 298.15,
        }
    }
}

impl GridSpec {
    /// Largest time step for which the explicit scheme keeps the discrete
    /// maximum principle.
    pub fn max_stable_dt(&self, params: &MaterialParams) -> f64 {
        let inv = 1.0 / (self.dx * self.dx) + 1.0 / (self.dy * self.dy) + 1.0 / (self.dz * self.dz);
        (params.rho * params.c / (2.0 * params.k)) / inv
    }

    pub fn validate(&self, params: &MaterialParams) -> Result<()> {
        if self.nx < 3 || self.ny < 3 || self.nz < 3 {
            return Err(Error::Config(format!(
                "grid needs at least 3 nodes per axis, got {}x{}x{}",
                self.nx, self.ny, self.nz
            )));
        }
        for (name, v) in [("dx", self.dx), ("dy", self.dy), ("dz", self.dz), ("dt", self.dt)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("grid.{name} must be > 0, got {v}")));
            }
        }
        ensure_finite("grid.boundary", self.boundary)?;
        let limit = self.max_stable_dt(params);
        if self.dt > limit {
            return Err(Error::Config(format!(
                "grid.dt = {} violates the explicit stability bound; admissible dt <= {limit:.6e}",
                self.dt
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    fn is_boundary(&self, i: usize, j: usize, k: usize) -> bool {
        i == 0 || j == 0 || k == 0 || i == self.nx - 1 || j == self.ny - 1 || k == self.nz - 1
    }

    /// Node nearest to `p`, or `None` when `p` falls outside the block.
    pub fn node_at(&self, p: Point3) -> Option<(usize, usize, usize)> {
        let axis = |x: f64, d: f64, n: usize| {
            let r = (x / d).round();
            if r.is_finite() && r >= 0.0 && (r as usize) < n {
                Some(r as usize)
            } else {
                None
            }
        };
        Some((
            axis(p[0], self.dx, self.nx)?,
            axis(p[1], self.dy, self.ny)?,
            axis(p[2], self.dz, self.nz)?,
        ))
    }
}

/// Temperature field on a [`GridSpec`], in K.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub spec: GridSpec,
    pub temps: Vec<f64>,
    pub steps: u64,
}

impl GridState {
    pub fn uniform(spec: GridSpec, value: f64) -> Self {
        Self {
            spec,
            temps: vec![value; spec.len()],
            steps: 0,
        }
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.temps[self.spec.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.spec.index(i, j, k);
        self.temps[idx] = v;
    }
}

/// One explicit step of `ρc ∂T/∂t = ∇·(k∇T) + Q`.
pub fn step_grid(state: &GridState, params: &MaterialParams, power: f64, center: Point3) -> Result<GridState> {
    let spec = &state.spec;
    params.validate()?;
    spec.validate(params)?;
    if state.temps.len() != spec.len() {
        return Err(Error::InvalidArgument(format!(
            "grid state has {} cells, spec expects {}",
            state.temps.len(),
            spec.len()
        )));
    }

    let alpha_dt = params.diffusivity() * spec.dt;
    let src_scale = spec.dt / (params.rho * params.c);
    let (cx, cy, cz) = (
        1.0 / (spec.dx * spec.dx),
        1.0 / (spec.dy * spec.dy),
        1.0 / (spec.dz * spec.dz),
    );
    let t = &state.temps;
    let mut next = t.clone();

    for k in 0..spec.nz {
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let idx = spec.index(i, j, k);
                if spec.is_boundary(i, j, k) {
                    next[idx] = spec.boundary;
                    continue;
                }
                let c = t[idx];
                let lap = cx * (t[idx - 1] + t[idx + 1] - 2.0 * c)
                    + cy * (t[idx - spec.nx] + t[idx + spec.nx] - 2.0 * c)
                    + cz * (t[idx - spec.nx * spec.ny] + t[idx + spec.nx * spec.ny] - 2.0 * c);
                let p = [i as f64 * spec.dx, j as f64 * spec.dy, k as f64 * spec.dz];
                let q = heat_source(params, power, p, center)?;
                next[idx] = c + alpha_dt * lap + src_scale * q;
            }
        }
    }

    if let Some(bad) = next.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("grid step produced non-finite temperature {bad}")));
    }
    Ok(GridState {
        spec: *spec,
        temps: next,
        steps: state.steps + 1,
    })
}

/// One-node energy balance for the laser spot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LumpedParams {
    /// Effective heat capacity of the heated spot, J/°C.
    pub c_eff: f64,
    /// Loss coefficient to ambient, W/°C.
    pub h_loss: f64,
    /// Ambient temperature, °C.
    pub t_amb: f64,
    pub absorptivity: f64,
    /// Spot temperature at the first control iteration, °C.
    pub t_initial: f64,
}

impl Default for LumpedParams {
    fn default() -> Self {
        Self {
            c_eff: 0.1,
            h_loss: 0.014035,
            t_amb: 25.0,
            absorptivity: 1.0,
            t_initial: 165.0,
        }
    }
}

impl LumpedParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_eff.is_finite() && self.c_eff > 0.0) {
            return Err(Error::Config(format!("plant.c_eff must be > 0, got {}", self.c_eff)));
        }
        if !(self.h_loss.is_finite() && self.h_loss > 0.0) {
            return Err(Error::Config(format!("plant.h_loss must be > 0, got {}", self.h_loss)));
        }
        if !(self.absorptivity.is_finite() && self.absorptivity > 0.0 && self.absorptivity <= 1.0) {
            return Err(Error::Config(format!(
                "plant.absorptivity must lie in (0, 1], got {}",
                self.absorptivity
            )));
        }
        ensure_finite("plant.t_amb", self.t_amb)?;
        ensure_finite("plant.t_initial", self.t_initial)?;
        Ok(())
    }

    /// Temperature at which a constant `power` is balanced by losses.
    pub fn equilibrium(&self, power: f64) -> f64 {
        self.t_amb + self.absorptivity * power / self.h_loss
    }

    /// Power needed to hold the spot at `temp`.
    pub fn holding_power(&self, temp: f64) -> f64 {
        self.h_loss * (temp - self.t_amb) / self.absorptivity
    }

    /// Unchecked update used inside the hot loops of the engines.
    #[inline(always)]
    pub fn advance(&self, temp: f64, power: f64, dt: f64) -> f64 {
        temp + (dt / self.c_eff) * (self.absorptivity * power - self.h_loss * (temp - self.t_amb))
    }

    pub fn initial_state(&self) -> LumpedState {
        LumpedState {
            t_spot: self.t_initial,
            steps: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LumpedState {
    /// Spot temperature, °C.
    pub t_spot: f64,
    pub steps: u64,
}

pub fn step_lumped(state: LumpedState, lp: &LumpedParams, power: f64, dt: f64) -> Result<LumpedState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    ensure_finite("power", power)?;
    let t = lp.advance(state.t_spot, power, dt);
    if !t.is_finite() || t < lp.t_amb - 50.0 {
        return Err(Error::Numeric(format!(
            "lumped spot temperature left the admissible range: {t}"
        )));
    }
    Ok(LumpedState {
        t_spot: t,
        steps: state.steps + 1,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThermalState {
    Grid(GridState),
    Lumped(LumpedState),
}

/// Temperature fed to the measurement model: the lumped spot value, or the
/// grid node containing the beam centre.
pub fn spot_temperature(state: &ThermalState, center: Point3) -> Result<f64> {
    match state {
        ThermalState::Lumped(s) => Ok(s.t_spot),
        ThermalState::Grid(g) => {
            let (i, j, k) = g.spec.node_at(center).ok_or_else(|| {
                Error::InvalidArgument(format!("beam centre {center:?} lies outside the grid"))
            })?;
            Ok(g.at(i, j, k))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_material() -> MaterialParams {
        MaterialParams {
            rho: 1.0,
            c: 1.0,
            k: 1.0,
            absorptivity: 1.0,
            beam_radius: 1.0,
            penetration_depth: 1.0,
        }
    }

    #[test]
    fn heat_source_peak_and_offsets() {
        let m = unit_material();
        let q0 = heat_source(&m, 1.0, [0.0; 3], [0.0; 3]).unwrap();
        assert_relative_eq!(q0, 2.0 / PI, epsilon = 1e-15);

        let q1 = heat_source(&m, 1.0, [1.0, 0.0, 0.0], [0.0; 3]).unwrap();
        // 2/π · e^{-2}
        assert!((q1 - 0.086_15).abs() < 1e-5);

        assert_eq!(heat_source(&m, 0.0, [0.3, -0.2, 0.1], [0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn heat_source_uses_both_lateral_axes() {
        let m = unit_material();
        let along_x = heat_source(&m, 1.0, [0.5, 0.0, 0.0], [0.0; 3]).unwrap();
        let along_y = heat_source(&m, 1.0, [0.0, 0.5, 0.0], [0.0; 3]).unwrap();
        assert_eq!(along_x, along_y);
    }

    #[test]
    fn heat_source_rejects_bad_input() {
        let m = unit_material();
        assert!(heat_source(&m, f64::NAN, [0.0; 3], [0.0; 3]).is_err());
        assert!(heat_source(&m, 1.0, [f64::INFINITY, 0.0, 0.0], [0.0; 3]).is_err());
        assert!(heat_source(&m, -1.0, [0.0; 3], [0.0; 3]).is_err());
    }

    fn small_spec(n: usize) -> GridSpec {
        let m = MaterialParams::default();
        let mut spec = GridSpec {
            nx: n,
            ny: n,
            nz: n,
            dx: 1e-4,
            dy: 1e-4,
            dz: 1e-4,
            dt: 0.0,
            boundary: 300.0,
        };
        spec.dt = 0.5 * spec.max_stable_dt(&m);
        spec
    }

    #[test]
    fn uniform_field_is_stationary_without_power() {
        let spec = small_spec(5);
        let s = GridState::uniform(spec, spec.boundary);
        let next = step_grid(&s, &MaterialParams::default(), 0.0, [2e-4; 3]).unwrap();
        assert_eq!(next.temps, s.temps);
        assert_eq!(next.steps, 1);
    }

    #[test]
    fn hot_cell_diffuses_to_neighbours() {
        // 5x5x5 so that the six neighbours of the centre are interior nodes.
        let spec = small_spec(5);
        let m = MaterialParams::default();
        let mut s = GridState::uniform(spec, spec.boundary);
        s.set(2, 2, 2, spec.boundary + 10.0);
        let next = step_grid(&s, &m, 0.0, [0.0; 3]).unwrap();

        assert!(next.at(2, 2, 2) < s.at(2, 2, 2));
        let nbrs = [(1, 2, 2), (3, 2, 2), (2, 1, 2), (2, 3, 2), (2, 2, 1), (2, 2, 3)];
        for (i, j, k) in nbrs {
            assert!(next.at(i, j, k) > spec.boundary, "neighbour {i},{j},{k} did not warm");
        }
        // No flux reaches the boundary in a single step, so interior excess
        // heat is conserved.
        let excess = |g: &GridState| g.temps.iter().map(|t| t - spec.boundary).sum::<f64>();
        assert_relative_eq!(excess(&next), excess(&s), max_relative = 1e-12);

        // Hand stencil: centre loses 6·r·10, each neighbour gains r·10.
        let r = m.diffusivity() * spec.dt / (spec.dx * spec.dx);
        assert_relative_eq!(next.at(2, 2, 2), spec.boundary + 10.0 - 60.0 * r, max_relative = 1e-12);
        assert_relative_eq!(next.at(1, 2, 2), spec.boundary + 10.0 * r, max_relative = 1e-12);
    }

    #[test]
    fn heated_step_adds_source_at_centre() {
        let spec = small_spec(5);
        let m = MaterialParams::default();
        let s = GridState::uniform(spec, spec.boundary);
        let center = [2e-4, 2e-4, 2e-4];
        let power = 2.0;
        let next = step_grid(&s, &m, power, center).unwrap();
        let q_center = 2.0 * m.absorptivity * power / (PI * m.beam_radius.powi(2) * m.penetration_depth);
        let expected = spec.boundary + spec.dt / (m.rho * m.c) * q_center;
        assert_relative_eq!(next.at(2, 2, 2), expected, max_relative = 1e-12);

        let spot = spot_temperature(&ThermalState::Grid(next.clone()), center).unwrap();
        assert_eq!(spot, next.at(2, 2, 2));
    }

    #[test]
    fn unstable_dt_names_admissible_bound() {
        let mut spec = small_spec(4);
        let m = MaterialParams::default();
        spec.dt = 2.0 * spec.max_stable_dt(&m);
        let err = step_grid(&GridState::uniform(spec, 300.0), &m, 0.0, [0.0; 3]).unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("admissible dt")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spot_temperature_variants() {
        let lumped = ThermalState::Lumped(LumpedState { t_spot: 167.5, steps: 0 });
        assert_eq!(spot_temperature(&lumped, [0.0; 3]).unwrap(), 167.5);

        let spec = small_spec(4);
        let grid = ThermalState::Grid(GridState::uniform(spec, 310.0));
        assert_eq!(spot_temperature(&grid, [1e-4, 1e-4, 0.0]).unwrap(), 310.0);
        assert!(spot_temperature(&grid, [1.0, 0.0, 0.0]).is_err());
        assert!(spot_temperature(&grid, [-1e-3, 0.0, 0.0]).is_err());
    }

    #[test]
    fn lumped_fixed_points_and_hand_value() {
        let lp = LumpedParams::default();
        let p = 1.3;
        let eq = LumpedState { t_spot: lp.equilibrium(p), steps: 0 };
        let next = step_lumped(eq, &lp, p, 0.1).unwrap();
        assert_relative_eq!(next.t_spot, eq.t_spot, max_relative = 1e-14);

        let amb = LumpedState { t_spot: lp.t_amb, steps: 0 };
        assert_eq!(step_lumped(amb, &lp, 0.0, 0.1).unwrap().t_spot, lp.t_amb);

        let lp = LumpedParams {
            c_eff: 10.0,
            h_loss: 0.01404,
            t_amb: 25.0,
            absorptivity: 1.0,
            t_initial: 165.0,
        };
        let next = step_lumped(LumpedState { t_spot: 165.0, steps: 0 }, &lp, 0.25, 1.0).unwrap();
        // 165 + (0.25 − 0.01404·140)/10
        assert!((next.t_spot - 164.828_44).abs() < 1e-10);
        assert_eq!(next.steps, 1);
    }

    #[test]
    fn lumped_rejects_bad_dt_and_runaway() {
        let lp = LumpedParams::default();
        let s = lp.initial_state();
        assert!(step_lumped(s, &lp, 1.0, 0.0).is_err());
        assert!(step_lumped(s, &lp, f64::NAN, 0.1).is_err());
        // An overly coarse step overshoots far below ambient.
        let hot = LumpedState { t_spot: 1000.0, steps: 0 };
        let lp_fast = LumpedParams { c_eff: 1e-4, ..lp };
        assert!(step_lumped(hot, &lp_fast, 0.0, 1.0).is_err());
    }

    #[test]
    fn setpoint_holding_power() {
        let lp = LumpedParams::default();
        let p = lp.holding_power(167.5);
        assert!((p - 2.0).abs() < 1e-3, "holding power {p}");
    }
}
