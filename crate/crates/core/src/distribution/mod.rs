//! Scalar distributions as unweighted sample sets or weighted Dirac
//! mixtures, together with the quantise / combine / compress operations the
//! single-pass engine is built from.

mod stats;
mod wasserstein;

pub use stats::{histogram, stats, weighted_quantile, Histogram, SummaryStats};
pub use wasserstein::{wasserstein, wasserstein_sorted};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::NoiseModel;

/// Sorted support with optional weights; `None` means equal weights.
pub trait WeightedSupport {
    fn xs(&self) -> &[f64];
    fn ws(&self) -> Option<&[f64]>;

    fn len(&self) -> usize {
        self.xs().len()
    }

    fn is_empty(&self) -> bool {
        self.xs().is_empty()
    }

    #[inline]
    fn weight(&self, i: usize) -> f64 {
        match self.ws() {
            Some(w) => w[i],
            None => 1.0 / self.xs().len() as f64,
        }
    }

    /// Sample statistics use the n−1 variance denominator.
    fn is_sample(&self) -> bool;
}

/// A finite, non-empty multiset of equally weighted draws.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empirical distribution needs at least one sample".into()));
        }
        if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample {bad}")));
        }
        samples.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    /// Samples in ascending order.
    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }
}

impl WeightedSupport for EmpiricalDistribution {
    fn xs(&self) -> &[f64] {
        &self.sorted
    }
    fn ws(&self) -> Option<&[f64]> {
        None
    }
    fn is_sample(&self) -> bool {
        true
    }
}

/// Weighted point masses, sorted by location with duplicates merged and
/// weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct DiracMixture {
    xs: Vec<f64>,
    ws: Vec<f64>,
}

impl TryFrom<Vec<(f64, f64)>> for DiracMixture {
    type Error = Error;
    fn try_from(v: Vec<(f64, f64)>) -> Result<Self> {
        DiracMixture::from_weighted(v)
    }
}

impl From<DiracMixture> for Vec<(f64, f64)> {
    fn from(m: DiracMixture) -> Self {
        m.xs.into_iter().zip(m.ws).collect()
    }
}

impl DiracMixture {
    /// Normalises, sorts and merges coincident locations.
    pub fn from_weighted<I: IntoIterator<Item = (f64, f64)>>(points: I) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = points.into_iter().collect();
        if pts.is_empty() {
            return Err(Error::InvalidArgument("mixture needs at least one point".into()));
        }
        for &(x, w) in &pts {
            if !x.is_finite() {
                return Err(Error::Numeric(format!("mixture location {x} is not finite")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidArgument(format!("mixture weight {w} must be finite and > 0")));
            }
        }
        pts.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self::from_sorted_unchecked(pts))
    }

    fn from_sorted_unchecked(pts: Vec<(f64, f64)>) -> Self {
        let total: f64 = pts.iter().map(|p| p.1).sum();
        let mut xs = Vec::with_capacity(pts.len());
        let mut ws: Vec<f64> = Vec::with_capacity(pts.len());
        for (x, w) in pts {
            if xs.last() == Some(&x) {
                *ws.last_mut().unwrap() += w / total;
            } else {
                xs.push(x);
                ws.push(w / total);
            }
        }
        Self { xs, ws }
    }

    pub fn dirac(x: f64) -> Result<Self> {
        Self::from_weighted([(x, 1.0)])
    }

    /// Equal weights on `xs`.
    pub fn uniform(xs: &[f64]) -> Result<Self> {
        Self::from_weighted(xs.iter().map(|&x| (x, 1.0)))
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ws.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn locations(&self) -> &[f64] {
        &self.xs
    }

    pub fn weights(&self) -> &[f64] {
        &self.ws
    }

    pub fn mean(&self) -> f64 {
        self.points().map(|(x, w)| x * w).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.points().map(|(x, w)| w * (x - m) * (x - m)).sum()
    }

    /// Reduce to at most `n` points by equal-weight consecutive groups.
    pub fn compress(&self, n: usize) -> Result<Self> {
        compress(self, n)
    }
}

impl WeightedSupport for DiracMixture {
    fn xs(&self) -> &[f64] {
        &self.xs
    }
    fn ws(&self) -> Option<&[f64]> {
        Some(&self.ws)
    }
    fn is_sample(&self) -> bool {
        false
    }
}

/// `n` equiprobable atoms at the quantile midpoints `F⁻¹((i − ½)/n)`.
pub fn quantize(model: &NoiseModel, n: usize) -> Result<DiracMixture> {
    if n == 0 {
        return Err(Error::InvalidArgument("quantisation needs at least one point".into()));
    }
    model.validate()?;
    let nf = n as f64;
    DiracMixture::from_weighted((1..=n).map(|i| (model.inverse_cdf((i as f64 - 0.5) / nf), 1.0)))
}

/// Partition sorted weighted points into `n` consecutive groups of equal
/// weight, splitting a point across a group boundary where needed, and call
/// `emit(pieces)` once per group with its `(index, piece_weight)` pairs.
/// Used both for scalar and for joint compression.
pub fn equal_weight_groups<F>(weights: &[f64], n: usize, mut emit: F)
where
    F: FnMut(&[(usize, f64)]),
{
    let total: f64 = weights.iter().sum();
    let target = total / n as f64;
    let mut pieces: Vec<(usize, f64)> = Vec::new();
    let mut filled = 0.0;
    let mut group = 0;
    for (i, &w) in weights.iter().enumerate() {
        let mut rem = w;
        while rem > 0.0 {
            if group == n - 1 {
                pieces.push((i, rem));
                break;
            }
            let room = target - filled;
            if rem < room {
                pieces.push((i, rem));
                filled += rem;
                break;
            }
            if room > 0.0 {
                pieces.push((i, room));
            }
            rem -= room;
            emit(&pieces);
            pieces.clear();
            filled = 0.0;
            group += 1;
        }
    }
    if !pieces.is_empty() {
        emit(&pieces);
    }
}

pub fn compress(m: &DiracMixture, n: usize) -> Result<DiracMixture> {
    if n == 0 {
        return Err(Error::InvalidArgument("compression target must be >= 1".into()));
    }
    if n >= m.xs.len() {
        return Ok(m.clone());
    }
    let mut out = Vec::with_capacity(n);
    equal_weight_groups(&m.ws, n, |pieces| {
        let gw: f64 = pieces.iter().map(|p| p.1).sum();
        let gs: f64 = pieces.iter().map(|&(i, w)| w * m.xs[i]).sum();
        out.push((gs / gw, gw));
    });
    // Centroids of consecutive groups are already ascending.
    Ok(DiracMixture::from_sorted_unchecked(out))
}

/// Distribution of `f(X, Y)` for independent `X ~ a`, `Y ~ b`, compressed
/// back to `n` points.
pub fn combine<F>(a: &DiracMixture, b: &DiracMixture, f: F, n: usize) -> Result<DiracMixture>
where
    F: Fn(f64, f64) -> f64,
{
    let mut pts = Vec::with_capacity(a.len() * b.len());
    for (xa, wa) in a.points() {
        for (xb, wb) in b.points() {
            let y = f(xa, xb);
            if !y.is_finite() {
                return Err(Error::Numeric(format!("combine produced {y} for pair ({xa}, {xb})")));
            }
            pts.push((y, wa * wb));
        }
    }
    compress(&DiracMixture::from_weighted(pts)?, n)
}

/// Push every atom through `f`, keeping its weight.
pub fn lift_through<F>(f: F, m: &DiracMixture) -> Result<DiracMixture>
where
    F: Fn(f64) -> f64,
{
    let mut pts = Vec::with_capacity(m.len());
    for (x, w) in m.points() {
        let y = f(x);
        if !y.is_finite() {
            return Err(Error::Numeric(format!("lift produced {y} at {x}")));
        }
        pts.push((y, w));
    }
    DiracMixture::from_weighted(pts)
}
