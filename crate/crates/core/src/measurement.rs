//! Additive temperature-measurement uncertainty and reproducible random
//! streams.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution of the sensor error ε added to the true spot temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseModel {
    #[default]
    None,
    /// `sigma` is a standard deviation, °C.
    Gaussian { mu: f64, sigma: f64 },
    Uniform { a: f64, b: f64 },
}

impl NoiseModel {
    pub const REFERENCE_GAUSSIAN: NoiseModel = NoiseModel::Gaussian { mu: 0.0, sigma: 0.5 };
    pub const REFERENCE_UNIFORM: NoiseModel = NoiseModel::Uniform { a: -1.5, b: 1.5 };

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::None => Ok(()),
            NoiseModel::Gaussian { mu, sigma } => {
                if mu.is_finite() && sigma.is_finite() && sigma > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!("gaussian noise needs finite mu and sigma > 0, got ({mu}, {sigma})")))
                }
            }
            NoiseModel::Uniform { a, b } => {
                if a.is_finite() && b.is_finite() && a < b {
                    Ok(())
                } else {
                    Err(Error::Config(format!("uniform noise needs a < b, got ({a}, {b})")))
                }
            }
        }
    }

    /// Short label used in result tables.
    pub fn kind(&self) -> &'static str {
        match self {
            NoiseModel::None => "none",
            NoiseModel::Gaussian { .. } => "gaussian",
            NoiseModel::Uniform { .. } => "uniform",
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian { mu, .. } => mu,
            NoiseModel::Uniform { a, b } => 0.5 * (a + b),
        }
    }

    pub fn std_dev(&self) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian { sigma, .. } => sigma,
            NoiseModel::Uniform { a, b } => (b - a) / 12f64.sqrt(),
        }
    }

    /// Quantile function F⁻¹(u) for u in (0, 1).
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian { mu, sigma } => mu + sigma * standard_normal_quantile(u),
            NoiseModel::Uniform { a, b } => a + (b - a) * u,
        }
    }

    pub fn median(&self) -> f64 {
        self.inverse_cdf(0.5)
    }

    pub fn sampler(&self) -> Result<NoiseSampler> {
        self.validate()?;
        Ok(match *self {
            NoiseModel::None => NoiseSampler::Zero,
            NoiseModel::Gaussian { mu, sigma } => NoiseSampler::Gaussian(
                Normal::new(mu, sigma).map_err(|e| Error::Config(format!("gaussian noise: {e}")))?,
            ),
            NoiseModel::Uniform { a, b } => NoiseSampler::Uniform(
                Uniform::new_inclusive(a, b).map_err(|e| Error::Config(format!("uniform noise: {e}")))?,
            ),
        })
    }

    /// One draw of ε.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(self.sampler()?.draw(rng))
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::None => write!(f, "none"),
            NoiseModel::Gaussian { mu, sigma } => write!(f, "gaussian:{mu},{sigma}"),
            NoiseModel::Uniform { a, b } => write!(f, "uniform:{a},{b}"),
        }
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    /// Parses `none`, `gaussian:MU,SIGMA` or `uniform:A,B`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("none") {
            return Ok(NoiseModel::None);
        }
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("noise spec `{s}`: expected none, gaussian:MU,SIGMA or uniform:A,B")))?;
        let nums = args
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(format!("noise spec `{s}`: {e}")))?;
        if nums.len() != 2 {
            return Err(Error::Config(format!("noise spec `{s}`: expected two parameters")));
        }
        let model = match kind.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => NoiseModel::Gaussian { mu: nums[0], sigma: nums[1] },
            "uniform" => NoiseModel::Uniform { a: nums[0], b: nums[1] },
            other => return Err(Error::Config(format!("unknown noise kind `{other}`"))),
        };
        model.validate()?;
        Ok(model)
    }
}

/// Pre-built sampler for hot loops.
#[derive(Debug, Clone, Copy)]
pub enum NoiseSampler {
    Zero,
    Gaussian(Normal<f64>),
    Uniform(Uniform<f64>),
}

impl NoiseSampler {
    #[inline(always)]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSampler::Zero => 0.0,
            NoiseSampler::Gaussian(d) => d.sample(rng),
            NoiseSampler::Uniform(d) => d.sample(rng),
        }
    }
}

/// Measured temperature: true value plus sensor error.
#[inline(always)]
pub fn measure(t_true: f64, eps: f64) -> f64 {
    t_true + eps
}

/// Stream namespaces. Streams in different domains never share a key.
pub mod domain {
    pub const SIM: u64 = 0x5349_4d00;
    pub const ENSEMBLE: u64 = 0x454e_5300;
    pub const GROUND_TRUTH: u64 = 0x4754_0000;
    pub const BENCH: u64 = 0x4245_4e00;
    pub const CALIBRATION: u64 = 0x4341_4c00;
}

/// Finaliser from SplitMix64, used to fold extra coordinates into a domain.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based substream `index` of `(seed, domain)`.
///
/// The key is `seed || domain` and `index` selects the ChaCha stream, so a
/// path's draws depend only on these three numbers, never on scheduling.
pub fn substream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Inverse of the standard normal CDF (Wichura, AS 241, ~1e-16 relative).
#[allow(clippy::excessive_precision)]
pub fn standard_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r + 67265.770927008700853) * r
                + 45921.953931549871457)
                * r
                + 13731.693765509461125)
                * r
                + 1971.5909503065514427)
                * r
                + 133.14166789178437745)
                * r
                + 3.387132872796366608)
            / (((((((r * 5226.495278852545925 + 28729.085735721942674) * r + 39307.89580009271061) * r
                + 21213.794301586595867)
                * r
                + 5394.1960214247511077)
                * r
                + 687.1870074920579083)
                * r
                + 42.313330701600911252)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r + 0.24178072517745061177) * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734)
            / (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r + 0.0151986665636164571966)
                * r
                + 0.14810397642748007459)
                * r
                + 0.68976733498510000455)
                * r
                + 1.6763848301838038494)
                * r
                + 2.05319162663775882187)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772)
            / (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r
                + 1.8463183175100546818e-5)
                * r
                + 7.868691311456132591e-4)
                * r
                + 0.0148753612908506148525)
                * r
                + 0.13692988092273580531)
                * r
                + 0.59983220655588793769)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}
