use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sinterbench_core::pid::{run_nominal, steady_state_error, ControlConfig, PidGains};
use sinterbench_core::thermal::LumpedParams;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sinterbench"));
    c.env_remove("SINTERBENCH_THREADS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = bin().arg("--out").arg(dir).args(args).output().unwrap();
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// Data rows of a CSV written by the tool, after checking its hash line.
fn rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let hash = lines.next().unwrap().strip_prefix("# config_hash=").expect("hash line");
    assert_eq!(hash.len(), 64);
    let header = lines.next().unwrap().to_string();
    let body = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, body)
}

fn col(rows: &[Vec<String>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn hash_of_json(path: &Path) -> String {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v["config_hash"].as_str().unwrap().to_string()
}

fn csv_hash(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap()["# config_hash=".len()..].to_string()
}

#[test]
fn nominal_sim_matches_the_library() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&run(d.path(), &["--noise", "none", "sim"])), 0);
    let (header, body) = rows(&d.path().join("trajectory.csv"));
    assert_eq!(header, "iter,error,power,temp");
    assert_eq!(body.len(), 200);
    let e = col(&body, 1);
    let oracle = run_nominal(&ControlConfig::default(), &PidGains::default(), &LumpedParams::default()).unwrap();
    assert_eq!(*e.last().unwrap(), steady_state_error(&oracle));
    assert!(e.last().unwrap().abs() < 0.05);
    assert_eq!(csv_hash(&d.path().join("trajectory.csv")), hash_of_json(&d.path().join("config.json")));
}

#[test]
fn seeded_sim_is_reproducible() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        assert_eq!(code(&run(d.path(), &["--noise", "gaussian:0,0.5", "--seed", "7", "sim"])), 0);
    }
    let read = |d: &TempDir| fs::read(d.path().join("trajectory.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let c = TempDir::new().unwrap();
    run(c.path(), &["--noise", "gaussian:0,0.5", "--seed", "8", "sim"]);
    assert_ne!(read(&a), read(&c));
}

#[test]
fn validation_errors_exit_2() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&run(d.path(), &["--iters", "0", "sim"])), 2);
    assert_eq!(code(&run(d.path(), &["--noise", "gaussian:0,-1", "sim"])), 2);
    assert_eq!(code(&run(d.path(), &["calib", "--point"])), 2);
    assert_eq!(code(&run(d.path(), &["calib", "--raw", "59000"])), 2);
    assert_eq!(code(&run(d.path(), &["dist", "--rep", "0"])), 2);

    let cfg = d.path().join("bad.json");
    fs::write(&cfg, r#"{"control": {"setpoint": "hot"}}"#).unwrap();
    let o = run(d.path(), &["--config", cfg.to_str().unwrap(), "sim"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("control.setpoint"));

    let grid = d.path().join("grid.json");
    fs::write(&grid, r#"{"thermal": {"mode": "grid"}}"#).unwrap();
    assert_eq!(code(&run(d.path(), &["--config", grid.to_str().unwrap(), "sim"])), 2);

    let o = bin().env("SINTERBENCH_THREADS", "many").arg("--out").arg(d.path()).arg("sim").output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn single_path_ensemble_is_the_seeded_sim() {
    let (s, m) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let common = ["--noise", "uniform:-1.5,1.5", "--seed", "21"];
    assert_eq!(code(&run(s.path(), &[&common[..], &["sim"]].concat())), 0);
    assert_eq!(code(&run(m.path(), &[&common[..], &["mc", "--paths", "1"]].concat())), 0);
    let traj = col(&rows(&s.path().join("trajectory.csv")).1, 1);
    let (header, stats) = rows(&m.path().join("stats.csv"));
    assert_eq!(header, "iter,signal,mean,std,skew,kurt,mode,ci_lo,ci_hi");
    let means: Vec<f64> = stats.iter().filter(|r| r[1] == "error").map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(means, traj);
}

#[test]
fn one_point_mixture_is_the_nominal_run() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&run(d.path(), &["--noise", "uniform:-1.5,1.5", "dist", "--rep", "1"])), 0);
    let (_, stats) = rows(&d.path().join("stats.csv"));
    let means: Vec<f64> = stats.iter().filter(|r| r[1] == "error").map(|r| r[2].parse().unwrap()).collect();
    let oracle = run_nominal(&ControlConfig::default(), &PidGains::default(), &LumpedParams::default()).unwrap();
    assert_eq!(means.len(), oracle.len());
    for (m, r) in means.iter().zip(&oracle) {
        assert!((m - r.error).abs() <= 1e-12, "iter {}: {m} vs {}", r.iter, r.error);
    }
    let (header, mix) = rows(&d.path().join("ess_mixture.csv"));
    assert_eq!(header, "x,w");
    assert_eq!(col(&mix, 1).iter().sum::<f64>(), 1.0);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("ess_mixture.json")).unwrap()).unwrap();
    assert_eq!(json["data"].as_array().unwrap().len(), mix.len());
}

#[test]
fn uniform_ensemble_spread() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&run(d.path(), &["--noise", "uniform:-1.5,1.5", "mc", "--paths", "100000"])), 0);
    let (_, stats) = rows(&d.path().join("stats.csv"));
    let last = stats.iter().rfind(|r| r[1] == "error").unwrap();
    assert_eq!(last[0], "200");
    let std: f64 = last[3].parse().unwrap();
    assert!((0.8..=1.0).contains(&std), "{std}");
    // Mode and interval are only filled where samples were kept.
    assert!(stats.iter().find(|r| r[0] == "100").unwrap()[6].is_empty());
    assert!(!last[6].is_empty());
    let (header, ess) = rows(&d.path().join("ess_samples.csv"));
    assert_eq!((header.as_str(), ess.len()), ("value", 100_000));
}

#[test]
fn worker_count_does_not_change_outputs() {
    let files = |threads: &str| {
        let d = TempDir::new().unwrap();
        let o = bin()
            .env("SINTERBENCH_THREADS", threads)
            .args(["--noise", "gaussian:0,0.5", "--seed", "3", "--out"])
            .arg(d.path())
            .args(["mc", "--paths", "5000", "--record", "10,50"])
            .output()
            .unwrap();
        assert!(o.status.success());
        ["stats.csv", "retained.csv", "ess_samples.csv"].map(|f| fs::read(d.path().join(f)).unwrap())
    };
    assert_eq!(files("1"), files("3"));
}

#[test]
fn memory_budget_exits_4() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("c.json");
    fs::write(&cfg, r#"{"engine": {"kind": "mc", "paths": 50000, "memory_budget": 1000}}"#).unwrap();
    assert_eq!(code(&run(d.path(), &["--config", cfg.to_str().unwrap(), "mc"])), 4);
}

#[test]
fn calibration_outputs() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), &["calib", "--raw", "59000", "--point"]);
    assert_eq!(code(&o), 0);
    let t: f64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
    assert!((t - 442.79).abs() <= 0.5, "{t}");
    let p: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("calib_point.json")).unwrap()).unwrap();
    assert!((p["temperature"].as_f64().unwrap() - t).abs() < 1e-5);

    let o = run(d.path(), &["calib", "--raw", "59000", "--mc", "100000", "--sane-defaults"]);
    assert_eq!(code(&o), 0);
    let (header, vals) = rows(&d.path().join("calib_samples.csv"));
    assert_eq!(header, "value");
    let v = col(&vals, 0);
    let inside = v.iter().filter(|x| (400.0..=480.0).contains(*x)).count();
    assert!(inside as f64 >= 0.99 * v.len() as f64, "{inside}");

    assert_eq!(code(&run(d.path(), &["calib", "--raw", "59000", "--mixture", "16", "--sane-defaults"])), 0);
    let (_, mix) = rows(&d.path().join("calib_mixture.csv"));
    // The final fold is left uncompressed: up to N·N points.
    assert!(!mix.is_empty() && mix.len() <= 16 * 16);
    assert!((col(&mix, 1).iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn calibration_domain_error_exits_3() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("c.json");
    fs::write(&cfg, r#"{"calibration": {"raw": 59000, "params": {"f": -10}}}"#).unwrap();
    let o = run(d.path(), &["--config", cfg.to_str().unwrap(), "calib", "--point"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn bench_plan_file_and_quick_run() {
    let d = TempDir::new().unwrap();
    let plan = d.path().join("plan.json");
    fs::write(&plan, r#"{"repetitions": 2, "m_gt": 10000}"#).unwrap();
    assert_eq!(code(&run(d.path(), &["bench", "--plan", plan.to_str().unwrap()])), 0);
    let (header, recs) = rows(&d.path().join("bench_results.csv"));
    assert_eq!(header, "method,size,noise,w1_mean,w1_std,runtime_ms_mean,runtime_ms_std,repetitions,seed");
    assert_eq!(recs.len(), 26);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("bench_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["speedup"].as_array().unwrap().len(), 2);
    assert_eq!(meta["config_hash"].as_str().unwrap(), csv_hash(&d.path().join("bench_results.csv")));

    let t = std::time::Instant::now();
    assert_eq!(code(&run(d.path(), &["bench", "--quick", "--repetitions", "2"])), 0);
    assert!(t.elapsed().as_secs() < 120);
    assert_eq!(rows(&d.path().join("bench_results.csv")).1.len(), 12);

    fs::write(&plan, r#"{"repetitions": "two"}"#).unwrap();
    let o = run(d.path(), &["bench", "--plan", plan.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("repetitions"));
}

fn tuned(dir: &Path, grid: &str) -> PidGains {
    assert_eq!(code(&run(dir, &["tune", "--grid", grid])), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("best_gains.json")).unwrap()).unwrap();
    serde_json::from_value(v["gains"].clone()).unwrap()
}

#[test]
fn tuning_examples() {
    let d = TempDir::new().unwrap();
    assert_eq!(tuned(d.path(), "kp=0.3;ki=0.02;kd=0"), PidGains::new(0.3, 0.02, 0.0));
    // Zero gains leave the loop at its full droop.
    let g = tuned(d.path(), "kp=0.1,0;ki=0.05,0;kd=5e-5");
    assert_ne!((g.kp, g.ki), (0.0, 0.0));

    let kp = [0.05, 0.1, 0.2];
    let ki = [0.02, 0.05, 0.1];
    let best = tuned(d.path(), "kp=0.05,0.1,0.2;ki=0.02,0.05,0.1;kd=5e-5");
    let (c, p) = (ControlConfig::default(), LumpedParams::default());
    let ess = |g: &PidGains| steady_state_error(&run_nominal(&c, g, &p).unwrap()).abs();
    let oracle = kp
        .iter()
        .flat_map(|&a| ki.iter().map(move |&b| PidGains::new(a, b, 5e-5)))
        .map(|g| ess(&g))
        .fold(f64::INFINITY, f64::min);
    assert_eq!(ess(&best), oracle);
    assert!(ess(&best) <= ess(&PidGains::default()));

    assert_eq!(code(&run(d.path(), &["tune", "--grid", "kq=1"])), 2);
    assert_eq!(code(&run(d.path(), &["tune", "--grid", "kp=-1"])), 2);
}

#[test]
fn written_config_reproduces_the_run() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(code(&run(a.path(), &["--noise", "gaussian:0,0.5", "--seed", "5", "dist", "--rep", "8"])), 0);
    let cfg = a.path().join("config.json");
    assert_eq!(code(&run(b.path(), &["--config", cfg.to_str().unwrap(), "dist"])), 0);
    for f in ["stats.csv", "ess_mixture.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}
