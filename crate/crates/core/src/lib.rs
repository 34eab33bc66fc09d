//! Measurement-uncertainty propagation through a closed-loop laser-power
//! controller for selective laser sintering.
//!
//! The crate models the spot temperature (a full 3-D grid and a lumped
//! surrogate), a PID power loop fed by noisy readings, and two ways of
//! pushing the sensor noise through that loop: a seeded Monte Carlo ensemble
//! and a single-pass engine on fixed-size Dirac mixtures. A benchmark
//! harness compares them by Wasserstein distance to a large reference
//! ensemble and by wall-clock time.
//!
//! ```
//! use sinterbench_core::prelude::*;
//!
//! let (cfg, gains, plant) = (ControlConfig::default(), PidGains::default(), LumpedParams::default());
//! let nominal = run_nominal(&cfg, &gains, &plant).unwrap();
//! assert!(steady_state_error(&nominal).abs() < 0.05);
//!
//! let m = run_distributional_ess(&cfg, &gains, &plant, &NoiseModel::REFERENCE_GAUSSIAN, &DistConfig::with_size(8)).unwrap();
//! assert!(m.mean().abs() < 0.05);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod calibration;
pub mod config;
pub mod dist_engine;
pub mod distribution;
pub mod error;
pub mod io;
pub mod mc;
pub mod measurement;
pub mod par;
pub mod pid;
pub mod thermal;

pub use error::{Error, Result};

/// The names most callers need.
pub mod prelude {
    pub use crate::bench::{run_benchmark, speedup_at_matched_accuracy, BenchPlan, BenchmarkRecord, Method};
    pub use crate::calibration::{calibrate, calibrate_mc, calibrate_mixture, CalibrationParams, CalibrationUncertainty, OutputScale};
    pub use crate::config::RunConfig;
    pub use crate::dist_engine::{run_distributional, run_distributional_ess, DistConfig};
    pub use crate::distribution::{
        combine, compress, lift_through, quantize, stats, wasserstein, DiracMixture, EmpiricalDistribution, SummaryStats,
    };
    pub use crate::error::{Error, Result};
    pub use crate::mc::{final_errors, ground_truth, run_ensemble, run_path, McConfig};
    pub use crate::measurement::{substream, NoiseModel};
    pub use crate::pid::{run_nominal, steady_state_error, tune_nominal, ControlConfig, PidGains};
    pub use crate::thermal::LumpedParams;
}
