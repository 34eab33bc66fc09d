//! CSV and JSON outputs. Every CSV starts with a `# config_hash=<hex>`
//! comment line followed by its header.

use std::io::{self, Write};

use serde::Serialize;

use crate::bench::{BenchMeta, BenchmarkRecord, Speedup};
use crate::distribution::{DiracMixture, EmpiricalDistribution};
use crate::mc::{IterationStats, Retained};
use crate::pid::TrajectoryRow;

pub const TRAJECTORY_HEADER: &str = "iter,error,power,temp";
pub const STATS_HEADER: &str = "iter,signal,mean,std,skew,kurt,mode,ci_lo,ci_hi";
pub const SAMPLES_HEADER: &str = "iter,path,value";
pub const VALUES_HEADER: &str = "value";
pub const MIXTURE_HEADER: &str = "x,w";
pub const BENCH_HEADER: &str = "method,size,noise,w1_mean,w1_std,runtime_ms_mean,runtime_ms_std,repetitions,seed";

fn preamble<W: Write>(w: &mut W, hash: &str, header: &str) -> io::Result<()> {
    writeln!(w, "# config_hash={hash}")?;
    writeln!(w, "{header}")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trajectory<W: Write>(w: &mut W, hash: &str, rows: &[TrajectoryRow]) -> io::Result<()> {
    preamble(w, hash, TRAJECTORY_HEADER)?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.iter, r.error, r.power, r.temp)?;
    }
    Ok(())
}

/// Error rows first, then power rows, each in iteration order. Mode and
/// interval cells are empty where the full sample was not kept.
pub fn write_stats<W: Write>(w: &mut W, hash: &str, error: &[IterationStats], power: &[IterationStats]) -> io::Result<()> {
    preamble(w, hash, STATS_HEADER)?;
    for s in error.iter().chain(power) {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            s.iter,
            s.signal.as_str(),
            s.mean,
            s.std,
            s.skewness,
            s.kurtosis,
            opt(s.mode),
            opt(s.ci_lo),
            opt(s.ci_hi)
        )?;
    }
    Ok(())
}

/// Retained tracking errors, one row per (iteration, path).
pub fn write_retained<W: Write>(w: &mut W, hash: &str, retained: &[Retained]) -> io::Result<()> {
    preamble(w, hash, SAMPLES_HEADER)?;
    for r in retained {
        for (path, v) in r.errors.iter().enumerate() {
            writeln!(w, "{},{},{}", r.iter, path, v)?;
        }
    }
    Ok(())
}

/// A sample set, one value per row.
pub fn write_values<W: Write>(w: &mut W, hash: &str, d: &EmpiricalDistribution) -> io::Result<()> {
    preamble(w, hash, VALUES_HEADER)?;
    for v in d.samples() {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn write_mixture_csv<W: Write>(w: &mut W, hash: &str, m: &DiracMixture) -> io::Result<()> {
    preamble(w, hash, MIXTURE_HEADER)?;
    for (x, p) in m.points() {
        writeln!(w, "{x},{p}")?;
    }
    Ok(())
}

pub fn write_bench<W: Write>(w: &mut W, hash: &str, records: &[BenchmarkRecord]) -> io::Result<()> {
    preamble(w, hash, BENCH_HEADER)?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.method.as_str(),
            r.size,
            r.noise,
            r.w1_mean,
            r.w1_std,
            r.runtime_ms_mean,
            r.runtime_ms_std,
            r.repetitions,
            r.seed
        )?;
    }
    Ok(())
}

/// JSON sidecar for a benchmark run.
#[derive(Debug, Clone, Serialize)]
pub struct BenchSidecar<'a> {
    pub config_hash: &'a str,
    pub meta: &'a BenchMeta,
    pub speedup: &'a [Speedup],
    pub hardware_note: &'static str,
}

pub const HARDWARE_NOTE: &str = "runtimes are wall-clock on the machine that produced this file and are not portable";

/// Any serialisable value as pretty JSON with a `config_hash` field added.
pub fn json_with_hash<T: Serialize>(v: &T, hash: &str) -> serde_json::Result<String> {
    let mut val = serde_json::to_value(v)?;
    match &mut val {
        serde_json::Value::Object(map) => {
            map.insert("config_hash".into(), hash.into());
        }
        other => {
            *other = serde_json::json!({ "config_hash": hash, "data": other.take() });
        }
    }
    serde_json::to_string_pretty(&val)
}
