//! Spread of the calibrated temperature at raw = 59000 under the default
//! and the sane-default parameter intervals.

use sinterbench_core::calibration::{calibrate_mc, calibrate_mixture, CalibrationUncertainty, OutputScale};
use sinterbench_core::distribution::{histogram, stats, wasserstein};

fn main() -> sinterbench_core::Result<()> {
    for (label, u) in [("verbatim", CalibrationUncertainty::default()), ("sane", CalibrationUncertainty::sane())] {
        let mc = match calibrate_mc(59000.0, &u, OutputScale::AsPrinted, 100_000, 3, 0) {
            Ok(mc) => mc,
            Err(e) => {
                println!("{label}: {e}");
                continue;
            }
        };
        let s = mc.samples.samples();
        let inside = s.iter().filter(|&&t| (400.0..=480.0).contains(&t)).count() as f64 / s.len() as f64;
        let st = stats(&mc.samples)?;
        println!(
            "{label}: invalid {}/{}, mean {:.2}, std {:.2}, in [400,480] {:.4}",
            mc.invalid, mc.total, st.mean, st.std, inside
        );
        println!("  histogram {:?}", histogram(&mc.samples, 20)?.counts.iter().map(|c| (c * 1000.0).round() as i64).collect::<Vec<_>>());
        for n in [16, 64] {
            let mx = calibrate_mixture(59000.0, &u, OutputScale::AsPrinted, n)?;
            println!("  N={n}: W1 to MC {:.3}, dropped mass {:.2e}", wasserstein(1.0, &mx.mixture, &mc.samples)?, mx.invalid_mass);
        }
    }
    Ok(())
}
