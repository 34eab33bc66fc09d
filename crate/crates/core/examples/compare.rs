//! Print W1 to a reference ensemble and run time for both engines.
//!
//! cargo run --release -p sinterbench-core --example compare

use std::time::Instant;

use sinterbench_core::dist_engine::{run_distributional_ess, DistConfig};
use sinterbench_core::distribution::{wasserstein, EmpiricalDistribution};
use sinterbench_core::mc::{final_errors, ground_truth};
use sinterbench_core::measurement::{domain, NoiseModel};
use sinterbench_core::pid::{ControlConfig, PidGains};
use sinterbench_core::thermal::LumpedParams;

fn main() -> sinterbench_core::Result<()> {
    let (c, g, p) = (ControlConfig::default(), PidGains::default(), LumpedParams::default());
    for noise in [NoiseModel::REFERENCE_GAUSSIAN, NoiseModel::REFERENCE_UNIFORM] {
        let t = Instant::now();
        let gt = ground_truth(&c, &g, &p, &noise, 200_000, 7, 0)?;
        println!("{noise}: reference in {:.2?}, mean {:.5}", t.elapsed(), gt.mean());
        for n in [4, 8, 16, 32, 64, 128] {
            let t = Instant::now();
            let m = run_distributional_ess(&c, &g, &p, &noise, &DistConfig::with_size(n))?;
            let dt = t.elapsed();
            println!("  N={n:<4} W1={:.5} in {dt:.2?}", wasserstein(1.0, &m, &gt)?);
        }
        for m in [256, 1152, 4096, 16000, 32000] {
            let t = Instant::now();
            let e = EmpiricalDistribution::new(final_errors(&c, &g, &p, &noise, m, 1, domain::BENCH, 1)?)?;
            let dt = t.elapsed();
            println!("  m={m:<6} W1={:.5} in {dt:.2?}", wasserstein(1.0, &e, &gt)?);
        }
    }
    Ok(())
}
