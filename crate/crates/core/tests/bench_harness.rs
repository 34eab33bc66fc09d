use sinterbench_core::bench::{run_benchmark, speedup_at_matched_accuracy, BenchPlan, BenchmarkRecord, Method};
use sinterbench_core::measurement::NoiseModel;
use sinterbench_core::pid::{ControlConfig, PidGains};
use sinterbench_core::thermal::LumpedParams;

fn row(method: Method, size: usize, noise: &str, w1: f64, w1_std: f64, ms: f64) -> BenchmarkRecord {
    BenchmarkRecord {
        method,
        size,
        noise: noise.into(),
        w1_mean: w1,
        w1_std,
        runtime_ms_mean: ms,
        runtime_ms_std: 0.0,
        repetitions: 30,
        seed: 0,
        w1_values: vec![],
        runtime_ms_values: vec![],
    }
}

/// A reference comparison table, Gaussian then uniform.
fn reference_table() -> Vec<BenchmarkRecord> {
    use Method::*;
    let g = "gaussian";
    let u = "uniform";
    vec![
        row(Distributional, 4, g, 0.02830, 0.00024, 3.974),
        row(Distributional, 16, g, 0.00605, 0.00048, 14.342),
        row(Distributional, 32, g, 0.00580, 0.00055, 29.509),
        row(Distributional, 64, g, 0.00514, 0.00050, 164.398),
        row(Distributional, 128, g, 0.00490, 0.00043, 605.530),
        row(Mc, 256, g, 0.03673, 0.01014, 15.358),
        row(Mc, 512, g, 0.02904, 0.00934, 28.859),
        row(Mc, 1152, g, 0.02032, 0.00747, 53.645),
        row(Mc, 2048, g, 0.01427, 0.00482, 85.686),
        row(Mc, 4096, g, 0.01164, 0.00524, 157.080),
        row(Mc, 8192, g, 0.00732, 0.00313, 293.571),
        row(Mc, 16000, g, 0.00544, 0.00200, 554.747),
        row(Mc, 32000, g, 0.00378, 0.00138, 1089.929),
        row(Distributional, 4, u, 0.01069, 0.00070, 3.946),
        row(Distributional, 16, u, 0.00578, 0.00071, 14.604),
        row(Distributional, 32, u, 0.00637, 0.00076, 28.722),
        row(Distributional, 64, u, 0.00651, 0.00083, 159.782),
        row(Distributional, 128, u, 0.00711, 0.00074, 587.920),
        row(Mc, 256, u, 0.06340, 0.02288, 12.079),
        row(Mc, 512, u, 0.04056, 0.01762, 21.329),
        row(Mc, 1152, u, 0.02925, 0.00969, 45.912),
        row(Mc, 2048, u, 0.02199, 0.00954, 76.898),
        row(Mc, 4096, u, 0.01572, 0.00634, 140.268),
        row(Mc, 8192, u, 0.01168, 0.00549, 271.253),
        row(Mc, 16000, u, 0.00825, 0.00427, 523.482),
        row(Mc, 32000, u, 0.00524, 0.00177, 1040.454),
    ]
}

#[test]
fn reference_table_selects_the_expected_pairs() {
    let s = speedup_at_matched_accuracy(&reference_table());
    assert_eq!(s.len(), 2);
    let g = &s[0];
    assert_eq!((g.noise.as_str(), g.mc_size, g.dist_size, g.matched), ("gaussian", Some(16000), Some(32), true));
    assert!((g.ratio.unwrap() - 554.747 / 29.509).abs() < 1e-9);
    let u = &s[1];
    assert_eq!((u.noise.as_str(), u.mc_size, u.dist_size, u.matched), ("uniform", Some(32000), Some(16), true));
    assert!((u.ratio.unwrap() - 71.24).abs() < 0.01);
}

#[test]
fn single_cell_is_not_matched() {
    let s = speedup_at_matched_accuracy(&[row(Method::Distributional, 32, "gaussian", 0.005, 0.0, 10.0)]);
    assert!(!s[0].matched);
    assert!(s[0].ratio.is_none());
}

fn tiny_plan() -> BenchPlan {
    BenchPlan {
        noises: vec![NoiseModel::REFERENCE_GAUSSIAN],
        mc_sizes: vec![256, 4096],
        dist_sizes: vec![8],
        repetitions: 2,
        m_gt: 20_000,
        seed: 3,
        ..BenchPlan::default()
    }
}

#[test]
fn repetitions_are_deterministic_only_for_the_single_pass_engine() {
    let (c, g, p) = (ControlConfig::default(), PidGains::default(), LumpedParams::default());
    let out = run_benchmark(&tiny_plan(), &c, &g, &p).unwrap();
    assert_eq!(out.records.len(), 3);
    let d = &out.records[0];
    assert_eq!(d.method, Method::Distributional);
    assert_eq!(d.w1_values[0], d.w1_values[1]);
    assert_eq!(d.w1_std, 0.0);
    for m in &out.records[1..] {
        assert_eq!(m.method, Method::Mc);
        assert_ne!(m.w1_values[0], m.w1_values[1]);
        assert!(m.w1_std >= 0.0 && m.runtime_ms_std >= 0.0);
    }
    assert!(out.records[1].w1_mean > out.records[2].w1_mean);

    let again = run_benchmark(&tiny_plan(), &c, &g, &p).unwrap();
    for (a, b) in out.records.iter().zip(&again.records) {
        assert_eq!(a.w1_values, b.w1_values);
    }
    assert!(out.meta.timer_resolution_ns > 0.0);
}

#[test]
fn parallel_cells_change_only_timing() {
    let (c, g, p) = (ControlConfig::default(), PidGains::default(), LumpedParams::default());
    let seq = run_benchmark(&tiny_plan(), &c, &g, &p).unwrap();
    let par = run_benchmark(&BenchPlan { parallel_cells: true, ..tiny_plan() }, &c, &g, &p).unwrap();
    assert!(!par.meta.cells_sequential);
    for (a, b) in seq.records.iter().zip(&par.records) {
        assert_eq!((a.method, a.size, &a.w1_values), (b.method, b.size, &b.w1_values));
    }
}

#[test]
fn default_plan_has_one_record_per_cell() {
    let p = BenchPlan::default();
    assert_eq!(p.noises.len() * (p.mc_sizes.len() + p.dist_sizes.len()), 26);
    assert_eq!(p.repetitions, 30);
}
