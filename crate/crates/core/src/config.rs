//! The single JSON run configuration shared by every command.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::BenchPlan;
use crate::calibration::{CalibrationParams, CalibrationUncertainty, OutputScale};
use crate::error::{Error, Result};
use crate::measurement::NoiseModel;
use crate::pid::{ControlConfig, PidGains};
use crate::thermal::{GridSpec, LumpedParams, MaterialParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThermalMode {
    #[default]
    Lumped,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalBlock {
    pub mode: ThermalMode,
    pub lumped: LumpedParams,
    pub material: MaterialParams,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EngineBlock {
    Mc {
        #[serde(default = "default_paths")]
        paths: usize,
        #[serde(default)]
        record_iters: Vec<usize>,
        #[serde(default = "default_budget")]
        memory_budget: usize,
    },
    Distributional {
        #[serde(default = "default_size")]
        size: usize,
        #[serde(default = "default_expansion")]
        expansion_budget: usize,
    },
}

fn default_paths() -> usize {
    crate::mc::McConfig::default().paths
}
fn default_budget() -> usize {
    crate::mc::McConfig::default().memory_budget
}
fn default_size() -> usize {
    crate::dist_engine::DistConfig::default().size
}
fn default_expansion() -> usize {
    crate::dist_engine::DistConfig::default().expansion_budget
}

impl Default for EngineBlock {
    fn default() -> Self {
        EngineBlock::Mc {
            paths: default_paths(),
            record_iters: Vec::new(),
            memory_budget: default_budget(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationBlock {
    pub raw: Option<f64>,
    pub params: CalibrationParams,
    pub uncertainty: CalibrationUncertainty,
    pub scale: OutputScale,
}

impl Default for CalibrationBlock {
    fn default() -> Self {
        Self {
            raw: None,
            params: CalibrationParams::default(),
            uncertainty: CalibrationUncertainty::default(),
            scale: OutputScale::AsPrinted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub thermal: ThermalBlock,
    pub gains: PidGains,
    pub control: ControlConfig,
    pub noise: NoiseModel,
    pub engine: EngineBlock,
    pub calibration: CalibrationBlock,
    pub bench: BenchPlan,
    pub out: String,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            thermal: ThermalBlock::default(),
            gains: PidGains::default(),
            control: ControlConfig::default(),
            noise: NoiseModel::None,
            engine: EngineBlock::default(),
            calibration: CalibrationBlock::default(),
            bench: BenchPlan::default(),
            out: ".".into(),
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Parse JSON; errors name the offending field path.
    pub fn from_json(s: &str) -> Result<Self> {
        parse_json(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.control.validate()?;
        self.gains.validate()?;
        self.thermal.lumped.validate()?;
        self.noise.validate()?;
        if self.thermal.mode == ThermalMode::Grid {
            self.thermal.material.validate()?;
            self.thermal.grid.validate(&self.thermal.material)?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form. The output directory is left
    /// out: it does not change what is computed.
    pub fn hash(&self) -> String {
        config_hash(&RunConfig {
            out: String::new(),
            ..self.clone()
        })
    }
}

/// Deserialize with a field-path in the error message.
pub fn parse_json<T: serde::de::DeserializeOwned>(s: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(s);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config(format!("at `{path}`: {}", e.into_inner()))
    })
}

/// Hex SHA-256 over the compact JSON serialisation of `v`.
pub fn config_hash<T: Serialize>(v: &T) -> String {
    let json = serde_json::to_vec(v).expect("config types serialise");
    hex::encode(Sha256::digest(&json))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert!(c.validate().is_ok());
    }

    #[test]
    fn round_trip_and_hash_stability() {
        let c = RunConfig {
            noise: NoiseModel::REFERENCE_UNIFORM,
            engine: EngineBlock::Distributional {
                size: 16,
                expansion_budget: 4096,
            },
            seed: 42,
            ..RunConfig::default()
        };
        let s = serde_json::to_string_pretty(&c).unwrap();
        let back = RunConfig::from_json(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
        assert_ne!(c.hash(), RunConfig::default().hash());
        let moved = RunConfig { out: "elsewhere".into(), ..c.clone() };
        assert_eq!(moved.hash(), c.hash());
    }

    #[test]
    fn errors_carry_the_field_path() {
        let e = RunConfig::from_json(r#"{"control": {"n_iters": "many"}}"#).unwrap_err();
        assert!(e.to_string().contains("control.n_iters"), "{e}");
        assert_eq!(e.exit_code(), 2);
        let e = RunConfig::from_json(r#"{"gains": {"kp": 1, "kq": 2}}"#).unwrap_err();
        assert!(e.to_string().contains("gains"), "{e}");
        let e = RunConfig::from_json(r#"{"noise": {"kind": "gaussian", "mu": 0, "sigma": -1}}"#)
            .unwrap()
            .validate()
            .unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
