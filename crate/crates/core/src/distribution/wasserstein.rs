use super::WeightedSupport;
use crate::error::{Error, Result};

/// Exact 1-D p-Wasserstein distance between two sorted weighted supports.
pub fn wasserstein<A, B>(p: f64, a: &A, b: &B) -> Result<f64>
where
    A: WeightedSupport + ?Sized,
    B: WeightedSupport + ?Sized,
{
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("Wasserstein order must be >= 1, got {p}")));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("Wasserstein distance of an empty distribution".into()));
    }
    Ok(wasserstein_sorted(p, a.xs(), a.ws(), b.xs(), b.ws()))
}

/// Merge pass over two quantile functions. `None` weights mean `1/len`;
/// equal-weight cumulative levels are computed as `(i+1)/n` so they do not
/// drift on large sample sets.
pub fn wasserstein_sorted(p: f64, xa: &[f64], wa: Option<&[f64]>, xb: &[f64], wb: Option<&[f64]>) -> f64 {
    let (na, nb) = (xa.len(), xb.len());
    let level = |w: Option<&[f64]>, n: usize, i: usize, acc: f64| match w {
        Some(w) => acc + w[i],
        None => (i + 1) as f64 / n as f64,
    };
    let (mut i, mut j) = (0, 0);
    let mut ca = level(wa, na, 0, 0.0);
    let mut cb = level(wb, nb, 0, 0.0);
    let mut prev = 0.0;
    let mut acc = 0.0;
    let unit = p == 1.0;
    loop {
        let next = ca.min(cb).min(1.0);
        let d = (xa[i] - xb[j]).abs();
        if next > prev {
            acc += (next - prev) * if unit { d } else { d.powf(p) };
            prev = next;
        }
        if ca <= cb {
            i += 1;
            if i == na {
                break;
            }
            ca = level(wa, na, i, ca);
        } else {
            j += 1;
            if j == nb {
                break;
            }
            cb = level(wb, nb, j, cb);
        }
    }
    // Any sliver left by floating-point weight sums sits at the last atoms.
    if prev < 1.0 {
        let d = (xa[na.min(i + 1) - 1] - xb[nb.min(j + 1) - 1]).abs();
        acc += (1.0 - prev) * if unit { d } else { d.powf(p) };
    }
    if unit {
        acc
    } else {
        acc.powf(1.0 / p)
    }
}
