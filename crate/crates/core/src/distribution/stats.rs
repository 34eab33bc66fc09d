use serde::{Deserialize, Serialize};

use super::WeightedSupport;
use crate::error::{Error, Result};

/// Cap on histogram bins for the mode estimate.
const MAX_BINS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub mode: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Fewer than two distinct support values; std/skew/kurt are reported as 0.
    pub degenerate: bool,
}

/// Weighted percentile with linear interpolation between midpoint
/// cumulative positions `C_i − w_i/2`; clamps outside the first/last.
pub fn weighted_quantile<D: WeightedSupport + ?Sized>(d: &D, q: f64) -> f64 {
    let xs = d.xs();
    let n = xs.len();
    if n == 1 {
        return xs[0];
    }
    let mut cum = 0.0;
    let mut prev_pos = f64::NAN;
    for i in 0..n {
        let w = d.weight(i);
        let pos = cum + 0.5 * w;
        if q <= pos {
            if i == 0 {
                return xs[0];
            }
            let t = (q - prev_pos) / (pos - prev_pos);
            return xs[i - 1] + t * (xs[i] - xs[i - 1]);
        }
        cum += w;
        prev_pos = pos;
    }
    xs[n - 1]
}

fn mode<D: WeightedSupport + ?Sized>(d: &D) -> f64 {
    let xs = d.xs();
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let range = hi - lo;
    if range <= 0.0 {
        return lo;
    }
    let n = xs.len() as f64;
    let iqr = weighted_quantile(d, 0.75) - weighted_quantile(d, 0.25);
    let mut h = 2.0 * iqr / n.cbrt();
    if !(h.is_finite() && h > 0.0) {
        // Sturges when the interquartile range collapses.
        h = range / (n.log2().ceil() + 1.0);
    }
    let bins = ((range / h).ceil() as usize).clamp(1, MAX_BINS);
    let h = range / bins as f64;
    let mut counts = vec![0.0; bins];
    for (i, &x) in xs.iter().enumerate() {
        let b = (((x - lo) / h) as usize).min(bins - 1);
        counts[b] += d.weight(i);
    }
    let mut best = 0;
    for (b, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = b;
        }
    }
    lo + (best as f64 + 0.5) * h
}

/// Equal-width histogram over the support range; counts are probability
/// mass per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<f64>,
}

impl Histogram {
    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.counts.len()).map(|b| self.lo + (b as f64 + 0.5) * self.width)
    }
}

pub fn histogram<D: WeightedSupport + ?Sized>(d: &D, bins: usize) -> Result<Histogram> {
    let xs = d.xs();
    if xs.is_empty() || bins == 0 {
        return Err(Error::InvalidArgument("histogram needs data and at least one bin".into()));
    }
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0.0; bins];
    for (i, &x) in xs.iter().enumerate() {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += d.weight(i);
    }
    Ok(Histogram { lo, width, counts })
}

pub fn stats<D: WeightedSupport + ?Sized>(d: &D) -> Result<SummaryStats> {
    let xs = d.xs();
    if xs.is_empty() {
        return Err(Error::InvalidArgument("statistics of an empty distribution".into()));
    }
    let mean: f64 = xs.iter().enumerate().map(|(i, &x)| d.weight(i) * x).sum();
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for (i, &x) in xs.iter().enumerate() {
        let w = d.weight(i);
        let dx = x - mean;
        let d2 = dx * dx;
        m2 += w * d2;
        m3 += w * d2 * dx;
        m4 += w * d2 * d2;
    }
    let degenerate = xs[0] == xs[xs.len() - 1] || m2 <= 0.0;
    let (std, skewness, kurtosis) = if degenerate {
        (0.0, 0.0, 0.0)
    } else {
        let n = xs.len() as f64;
        let var = if d.is_sample() { m2 * n / (n - 1.0) } else { m2 };
        (var.sqrt(), m3 / m2.powf(1.5), m4 / (m2 * m2))
    };
    Ok(SummaryStats {
        mean,
        std,
        skewness,
        kurtosis,
        mode: mode(d),
        ci_lo: weighted_quantile(d, 0.025),
        ci_hi: weighted_quantile(d, 0.975),
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{DiracMixture, EmpiricalDistribution};

    #[test]
    fn symmetric_three_points() {
        let s = stats(&EmpiricalDistribution::new(vec![-1.0, 0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(s.mean, 0.0);
        assert_eq!(s.skewness, 0.0);
        assert!((s.std - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_kurtosis_is_one() {
        let m = DiracMixture::uniform(&[-1.0, 1.0]).unwrap();
        let s = stats(&m).unwrap();
        assert!((s.kurtosis - 1.0).abs() < 1e-15);
        assert!((s.std - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_is_flagged() {
        let s = stats(&EmpiricalDistribution::new(vec![2.0; 5]).unwrap()).unwrap();
        assert!(s.degenerate);
        assert_eq!((s.std, s.mode, s.ci_lo, s.ci_hi), (0.0, 2.0, 2.0, 2.0));
    }

    #[test]
    fn percentile_interpolates_midpoints() {
        let e = EmpiricalDistribution::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(weighted_quantile(&e, 0.5), 1.5);
        assert_eq!(weighted_quantile(&e, 0.125), 0.0);
        assert_eq!(weighted_quantile(&e, 0.0), 0.0);
        assert_eq!(weighted_quantile(&e, 1.0), 3.0);
        assert!((weighted_quantile(&e, 0.25) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mode_finds_the_cluster() {
        let mut v: Vec<f64> = (0..50).map(|i| 10.0 + i as f64 * 1e-3).collect();
        v.extend((0..10).map(|i| i as f64));
        let s = stats(&EmpiricalDistribution::new(v).unwrap()).unwrap();
        assert!((s.mode - 10.0).abs() < 0.6, "{}", s.mode);
    }
}
