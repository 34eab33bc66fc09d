use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sinterbench_core::bench::{run_benchmark, speedup_at_matched_accuracy, BenchPlan};
use sinterbench_core::calibration::{
    calibrate, calibrate_mc, calibrate_mixture, CalibrationParams, CalibrationUncertainty, OutputScale,
};
use sinterbench_core::config::{config_hash, parse_json, EngineBlock, RunConfig, ThermalMode};
use sinterbench_core::dist_engine::{run_distributional, DistConfig};
use sinterbench_core::distribution::{stats, SummaryStats};
use sinterbench_core::io as out;
use sinterbench_core::mc::{run_ensemble, McConfig};
use sinterbench_core::measurement::{domain, substream, NoiseModel};
use sinterbench_core::pid::{gain_grid, run_nominal, run_with_offsets, steady_state_error, tune_nominal, PidGains};
use sinterbench_core::Error;

use crate::{CalibArgs, Cli, Cmd, Scale};

pub const THREADS_ENV: &str = "SINTERBENCH_THREADS";

#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Read(PathBuf, io::Error),
    Write(PathBuf, io::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) => e.exit_code() as u8,
            Failure::Read(..) => 2,
            Failure::Write(..) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Read(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            Failure::Write(p, e) => write!(f, "cannot write {}: {e}", p.display()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Res<T> = std::result::Result<T, Failure>;

/// Output directory plus the hash every file is stamped with.
struct Sink {
    dir: PathBuf,
    hash: String,
}

impl Sink {
    fn file(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Res<PathBuf> {
        let path = self.dir.join(name);
        let wrap = |e| Failure::Write(path.clone(), e);
        let mut w = BufWriter::new(File::create(&path).map_err(wrap)?);
        body(&mut w).map_err(wrap)?;
        w.flush().map_err(wrap)?;
        Ok(path)
    }

    fn json<T: Serialize>(&self, name: &str, v: &T) -> Res<PathBuf> {
        let s = out::json_with_hash(v, &self.hash).map_err(|e| Error::Numeric(format!("serialising {name}: {e}")))?;
        self.file(name, |w| writeln!(w, "{s}"))
    }
}

fn read(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|e| Failure::Read(path.to_path_buf(), e))
}

/// Parse a config file. A `config_hash` key, as written next to every run,
/// is ignored so that output configs can be fed back in.
fn load_config(path: &Path) -> Res<RunConfig> {
    let text = read(path)?;
    let mut v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if let Some(m) = v.as_object_mut() {
        m.remove("config_hash");
    }
    Ok(RunConfig::from_json(&v.to_string())?)
}

fn threads() -> Res<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a non-negative integer, got `{s}`")).into()),
    }
}

fn lumped_only(cfg: &RunConfig) -> Res<()> {
    if cfg.thermal.mode == ThermalMode::Grid {
        return Err(Error::Config(
            "thermal.mode: closed-loop commands run on the lumped plant; the grid model is for thermal checks only".into(),
        )
        .into());
    }
    Ok(())
}

pub fn run(cli: Cli) -> Res<()> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = &cli.noise {
        cfg.noise = n.parse::<NoiseModel>()?;
    }
    if let Some(n) = cli.iters {
        cfg.control.n_iters = n;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.to_string_lossy().into_owned();
    }
    let threads = threads()?;

    match cli.cmd {
        Cmd::Sim => sim(cfg),
        Cmd::Mc { paths, record } => {
            let (mut p, mut r, b) = match cfg.engine {
                EngineBlock::Mc { paths, record_iters, memory_budget } => (paths, record_iters, memory_budget),
                _ => (McConfig::default().paths, Vec::new(), McConfig::default().memory_budget),
            };
            if let Some(x) = paths {
                p = x;
            }
            if !record.is_empty() {
                r = record;
            }
            cfg.engine = EngineBlock::Mc { paths: p, record_iters: r, memory_budget: b };
            mc(cfg, threads)
        }
        Cmd::Dist { rep } => {
            let mut d = match cfg.engine {
                EngineBlock::Distributional { size, expansion_budget } => DistConfig { size, expansion_budget },
                _ => DistConfig::default(),
            };
            if let Some(n) = rep {
                d.size = n;
            }
            cfg.engine = EngineBlock::Distributional { size: d.size, expansion_budget: d.expansion_budget };
            dist(cfg, d)
        }
        Cmd::Calib(args) => calib(cfg, args, threads),
        Cmd::Bench { plan, repetitions, quick, parallel_cells } => {
            if let Some(p) = plan {
                cfg.bench = parse_json::<BenchPlan>(&read(&p)?)?;
            } else if quick {
                cfg.bench = BenchPlan { seed: cfg.bench.seed, ..BenchPlan::quick() };
            }
            if let Some(r) = repetitions {
                cfg.bench.repetitions = r;
            }
            if let Some(s) = cli.seed {
                cfg.bench.seed = s;
            }
            cfg.bench.parallel_cells |= parallel_cells;
            cfg.bench.gt_threads = threads;
            bench(cfg)
        }
        Cmd::Tune { grid } => tune(cfg, &grid),
    }
}

fn prepare(cfg: &RunConfig) -> Res<Sink> {
    prepare_with(cfg, cfg.hash())
}

fn prepare_with(cfg: &RunConfig, hash: String) -> Res<Sink> {
    cfg.validate()?;
    let dir = PathBuf::from(&cfg.out);
    fs::create_dir_all(&dir).map_err(|e| Failure::Write(dir.clone(), e))?;
    let sink = Sink { dir, hash };
    sink.json("config.json", cfg)?;
    Ok(sink)
}

fn sim(cfg: RunConfig) -> Res<()> {
    lumped_only(&cfg)?;
    let sink = prepare(&cfg)?;
    let plant = &cfg.thermal.lumped;
    let traj = if cfg.noise == NoiseModel::None {
        run_nominal(&cfg.control, &cfg.gains, plant)?
    } else {
        // Same stream as path 0 of an ensemble with this seed.
        let sampler = cfg.noise.sampler()?;
        let mut rng = substream(cfg.seed, domain::ENSEMBLE, 0);
        run_with_offsets(&cfg.control, &cfg.gains, plant, |_| sampler.draw(&mut rng))?
    };
    let path = sink.file("trajectory.csv", |w| out::write_trajectory(w, &sink.hash, &traj))?;
    let last = traj.last().expect("n_iters >= 1");
    println!(
        "final error {:.6} °C, power {:.6} W -> {}",
        last.error,
        last.power,
        path.display()
    );
    Ok(())
}

fn mc(cfg: RunConfig, threads: usize) -> Res<()> {
    lumped_only(&cfg)?;
    let EngineBlock::Mc { paths, record_iters, memory_budget } = cfg.engine.clone() else {
        unreachable!("engine set by the caller")
    };
    let mc = McConfig { paths, noise: cfg.noise, seed: cfg.seed, record_iters, memory_budget, threads };
    mc.validate(cfg.control.n_iters)?;
    let sink = prepare(&cfg)?;
    let r = run_ensemble(&mc, &cfg.control, &cfg.gains, &cfg.thermal.lumped)?;
    sink.file("stats.csv", |w| out::write_stats(w, &sink.hash, &r.error_stats, &r.power_stats))?;
    sink.file("ess_samples.csv", |w| out::write_values(w, &sink.hash, &r.e_ss))?;
    sink.file("retained.csv", |w| out::write_retained(w, &sink.hash, &r.retained))?;
    let s = stats(&r.e_ss)?;
    sink.json("ess_summary.json", &s)?;
    report("e_ss", &s);
    Ok(())
}

fn dist(cfg: RunConfig, d: DistConfig) -> Res<()> {
    lumped_only(&cfg)?;
    d.validate()?;
    let sink = prepare(&cfg)?;
    let r = run_distributional(&cfg.control, &cfg.gains, &cfg.thermal.lumped, &cfg.noise, &d)?;
    let (es, ps) = r.iteration_stats()?;
    sink.file("stats.csv", |w| out::write_stats(w, &sink.hash, &es, &ps))?;
    sink.file("ess_mixture.csv", |w| out::write_mixture_csv(w, &sink.hash, &r.e_ss))?;
    sink.json("ess_mixture.json", &r.e_ss)?;
    let s = stats(&r.e_ss)?;
    sink.json("ess_summary.json", &s)?;
    report("e_ss", &s);
    println!("{} state/noise pairs propagated", r.pushes);
    Ok(())
}

fn report(label: &str, s: &SummaryStats) {
    println!(
        "{label}: mean {:.6} std {:.6} skew {:.4} kurt {:.4} mode {:.4} 95% [{:.4}, {:.4}]{}",
        s.mean,
        s.std,
        s.skewness,
        s.kurtosis,
        s.mode,
        s.ci_lo,
        s.ci_hi,
        if s.degenerate { " (degenerate)" } else { "" }
    );
}

#[derive(Serialize)]
struct CalibPoint {
    raw: f64,
    temperature: f64,
    scale: OutputScale,
}

#[derive(Serialize)]
struct CalibSummary {
    raw: f64,
    scale: OutputScale,
    stats: SummaryStats,
    /// Draws (MC) or mass (mixture) dropped for domain errors.
    invalid: f64,
}

fn calib(mut cfg: RunConfig, args: CalibArgs, threads: usize) -> Res<()> {
    if let Some(r) = args.raw {
        cfg.calibration.raw = Some(r);
    }
    if args.sane_defaults {
        cfg.calibration.params = CalibrationParams::sane();
        cfg.calibration.uncertainty = CalibrationUncertainty::sane();
    }
    if let Some(s) = args.scale {
        cfg.calibration.scale = match s {
            Scale::AsPrinted => OutputScale::AsPrinted,
            Scale::NoOffset => OutputScale::NoOffset,
        };
    }
    let raw = cfg
        .calibration
        .raw
        .ok_or_else(|| Error::InvalidArgument("calib needs --raw or calibration.raw in the config".into()))?;
    let c = &cfg.calibration;
    let scale = c.scale;
    for note in c.uncertainty.advisories(&c.params) {
        eprintln!("note: {note}");
    }
    if args.mode.point {
        c.params.validate()?;
        let t = calibrate(raw, &c.params, scale)?;
        let sink = prepare(&cfg)?;
        sink.json("calib_point.json", &CalibPoint { raw, temperature: t, scale })?;
        println!("{t:.5}");
    } else if let Some(m) = args.mode.mc {
        let s = calibrate_mc(raw, &c.uncertainty, scale, m, cfg.seed, threads)?;
        let sink = prepare(&cfg)?;
        sink.file("calib_samples.csv", |w| out::write_values(w, &sink.hash, &s.samples))?;
        let st = stats(&s.samples)?;
        let invalid = s.invalid as f64 / s.total as f64;
        sink.json("calib_summary.json", &CalibSummary { raw, scale, stats: st, invalid })?;
        report("temperature", &st);
        println!("{} of {} draws outside the formula's domain", s.invalid, s.total);
    } else if let Some(n) = args.mode.mixture {
        let mx = calibrate_mixture(raw, &c.uncertainty, scale, n)?;
        let sink = prepare(&cfg)?;
        sink.file("calib_mixture.csv", |w| out::write_mixture_csv(w, &sink.hash, &mx.mixture))?;
        let st = stats(&mx.mixture)?;
        sink.json("calib_summary.json", &CalibSummary { raw, scale, stats: st, invalid: mx.invalid_mass })?;
        report("temperature", &st);
    }
    Ok(())
}

fn bench(cfg: RunConfig) -> Res<()> {
    lumped_only(&cfg)?;
    cfg.bench.validate()?;
    let sink = prepare(&cfg)?;
    let out = run_benchmark(&cfg.bench, &cfg.control, &cfg.gains, &cfg.thermal.lumped)?;
    let speedup = speedup_at_matched_accuracy(&out.records);
    let path = sink.file("bench_results.csv", |w| out::write_bench(w, &sink.hash, &out.records))?;
    sink.json(
        "bench_meta.json",
        &out::BenchSidecar { config_hash: &sink.hash, meta: &out.meta, speedup: &speedup, hardware_note: out::HARDWARE_NOTE },
    )?;
    for w in &out.meta.warnings {
        eprintln!("warning: {w}");
    }
    for s in &speedup {
        match s.ratio {
            Some(r) => println!(
                "{}: {r:.1}x (MC m={} vs N={}{})",
                s.noise,
                s.mc_size.unwrap_or(0),
                s.dist_size.unwrap_or(0),
                if s.matched { "" } else { ", no accuracy match" }
            ),
            None => println!("{}: no speedup (one method missing)", s.noise),
        }
    }
    println!("{} records -> {}", out.records.len(), path.display());
    Ok(())
}

/// `kp=0.05,0.1;ki=0.05;kd=5e-5`; an omitted gain keeps its configured value.
pub fn parse_grid(spec: &str, base: &PidGains) -> Res<Vec<PidGains>> {
    let (mut kp, mut ki, mut kd) = (vec![base.kp], vec![base.ki], vec![base.kd]);
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, vals) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("grid term `{part}`: expected NAME=V1,V2,...")))?;
        let vals = vals
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidArgument(format!("grid term `{part}`: {e}")))?;
        let slot = match name.trim() {
            "kp" => &mut kp,
            "ki" => &mut ki,
            "kd" => &mut kd,
            other => return Err(Error::InvalidArgument(format!("unknown gain `{other}` in grid")).into()),
        };
        *slot = vals;
    }
    let grid = gain_grid(&kp, &ki, &kd);
    for g in &grid {
        g.validate()?;
    }
    Ok(grid)
}

#[derive(Serialize)]
struct TuneResult {
    gains: PidGains,
    steady_state_error: f64,
    candidates: usize,
}

fn tune(cfg: RunConfig, spec: &str) -> Res<()> {
    lumped_only(&cfg)?;
    let grid = parse_grid(spec, &cfg.gains)?;
    cfg.validate()?;
    let best = tune_nominal(&cfg.control, &cfg.thermal.lumped, &grid)?;
    let e = steady_state_error(&run_nominal(&cfg.control, &best, &cfg.thermal.lumped)?);
    // The grid is part of the run's identity.
    let sink = prepare_with(&cfg, config_hash(&(cfg.hash(), &grid)))?;
    sink.json("best_gains.json", &TuneResult { gains: best, steady_state_error: e, candidates: grid.len() })?;
    println!("kp={} ki={} kd={} (e_ss {e:.3e})", best.kp, best.ki, best.kd);
    Ok(())
}
