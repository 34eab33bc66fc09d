use proptest::prelude::*;
use sinterbench_core::distribution::{
    combine, compress, quantize, stats, wasserstein, DiracMixture, EmpiricalDistribution,
};
use sinterbench_core::measurement::NoiseModel;
use statrs::distribution::{ContinuousCDF, Normal};

fn mixture() -> impl Strategy<Value = DiracMixture> {
    prop::collection::vec((-50.0f64..50.0, 0.01f64..5.0), 1..40).prop_map(|v| DiracMixture::from_weighted(v).unwrap())
}

fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0f64..20.0, 1..60)
}

/// Quantile function evaluated on a fine grid; an independent estimate of W1.
fn w1_grid(a: &DiracMixture, b: &DiracMixture) -> f64 {
    let q = |m: &DiracMixture, u: f64| {
        let mut c = 0.0;
        for (x, w) in m.points() {
            c += w;
            if u < c {
                return x;
            }
        }
        *m.locations().last().unwrap()
    };
    let n = 20_000;
    (0..n).map(|i| (q(a, (i as f64 + 0.5) / n as f64) - q(b, (i as f64 + 0.5) / n as f64)).abs()).sum::<f64>() / n as f64
}

proptest! {
    #[test]
    fn compress_keeps_weight_and_mean(m in mixture(), n in 1usize..50) {
        let c = compress(&m, n).unwrap();
        let total: f64 = c.weights().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!((c.mean() - m.mean()).abs() <= 1e-12);
        prop_assert!(c.variance() <= m.variance() * (1.0 + 1e-12) + 1e-12);
        prop_assert!(c.len() <= n.max(1));
        prop_assert!(c.locations().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(c.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn compress_to_n_gives_n_points_on_distinct_equal_weights(k in 2usize..64, n in 1usize..64) {
        let xs: Vec<f64> = (0..k).map(|i| i as f64).collect();
        let m = DiracMixture::uniform(&xs).unwrap();
        prop_assert_eq!(compress(&m, n).unwrap().len(), n.min(k));
    }

    #[test]
    fn compress_error_shrinks_with_n(m in mixture()) {
        let coarse = wasserstein(1.0, &m, &compress(&m, 2).unwrap()).unwrap();
        let fine = wasserstein(1.0, &m, &compress(&m, 16).unwrap()).unwrap();
        prop_assert!(fine <= coarse + 1e-12);
    }

    #[test]
    fn metric_axioms(a in mixture(), b in mixture(), c in mixture(), p in prop::sample::select(vec![1.0, 2.0, 3.0])) {
        let ab = wasserstein(p, &a, &b).unwrap();
        let ba = wasserstein(p, &b, &a).unwrap();
        let ac = wasserstein(p, &a, &c).unwrap();
        let cb = wasserstein(p, &c, &b).unwrap();
        prop_assert_eq!(wasserstein(p, &a, &a).unwrap(), 0.0);
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
        prop_assert!(ab <= ac + cb + 1e-12 * (ac + cb).max(1.0));
        prop_assert!(ab >= 0.0);
    }

    #[test]
    fn w1_of_equal_size_samples_is_mean_sorted_difference(xs in samples(), shift in -5.0f64..5.0, seed in 0u64..1000) {
        // A second sample of the same size from a different recipe.
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * 0.5 + shift + ((i as u64 * 31 + seed) % 7) as f64).collect();
        let a = EmpiricalDistribution::new(xs.clone()).unwrap();
        let b = EmpiricalDistribution::new(ys.clone()).unwrap();
        let mut sx = xs.clone();
        let mut sy = ys.clone();
        sx.sort_by(f64::total_cmp);
        sy.sort_by(f64::total_cmp);
        let oracle = sx.iter().zip(&sy).map(|(x, y)| (x - y).abs()).sum::<f64>() / xs.len() as f64;
        prop_assert!((wasserstein(1.0, &a, &b).unwrap() - oracle).abs() <= 1e-10 * oracle.max(1.0));
    }

    #[test]
    fn w1_agrees_with_quantile_grid(a in mixture(), b in mixture()) {
        let exact = wasserstein(1.0, &a, &b).unwrap();
        let approx = w1_grid(&a, &b);
        // The grid misplaces at most one cell per atom boundary.
        let bound = (a.len() + b.len()) as f64 * 100.0 / 20_000.0;
        prop_assert!((exact - approx).abs() <= bound, "{} vs {}", exact, approx);
    }

    #[test]
    fn equal_weight_mixture_moments_match_expanded_samples(xs in prop::collection::vec(-10.0f64..10.0, 2..50)) {
        let distinct = {
            let mut s = xs.clone();
            s.sort_by(f64::total_cmp);
            s.dedup();
            s.len()
        };
        prop_assume!(distinct >= 2);
        let m = DiracMixture::uniform(&xs).unwrap();
        let e = EmpiricalDistribution::new(xs.clone()).unwrap();
        let sm = stats(&m).unwrap();
        let se = stats(&e).unwrap();
        let n = xs.len() as f64;
        prop_assert!((sm.mean - se.mean).abs() <= 1e-12 * se.mean.abs().max(1.0));
        prop_assert!((sm.skewness - se.skewness).abs() <= 1e-9);
        prop_assert!((sm.kurtosis - se.kurtosis).abs() <= 1e-9);
        // Mixtures report the population spread, sample sets the n−1 one.
        prop_assert!((sm.std * (n / (n - 1.0)).sqrt() - se.std).abs() <= 1e-9 * se.std.max(1.0));
        prop_assert!((sm.ci_lo - se.ci_lo).abs() <= 1e-9 && (sm.ci_hi - se.ci_hi).abs() <= 1e-9);
    }

    #[test]
    fn stats_invariants(m in mixture()) {
        let s = stats(&m).unwrap();
        prop_assert!(s.std >= 0.0);
        prop_assert!(s.ci_lo <= s.ci_hi);
        let lo = m.locations()[0];
        let hi = *m.locations().last().unwrap();
        prop_assert!(s.mode >= lo && s.mode <= hi);
    }

    #[test]
    fn combine_addition_mean_is_sum_of_means(a in mixture(), b in mixture(), n in 1usize..40) {
        let c = combine(&a, &b, |x, y| x + y, n).unwrap();
        prop_assert!((c.mean() - (a.mean() + b.mean())).abs() <= 1e-9);
        prop_assert!((c.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn quantize_gaussian_matches_inverse_normal(mu in -3.0f64..3.0, sigma in 0.01f64..4.0, n in 1usize..64) {
        let q = quantize(&NoiseModel::Gaussian { mu, sigma }, n).unwrap();
        let oracle = Normal::new(mu, sigma).unwrap();
        prop_assert_eq!(q.len(), n);
        for (i, (x, w)) in q.points().enumerate() {
            let want = oracle.inverse_cdf((i as f64 + 0.5) / n as f64);
            prop_assert!((x - want).abs() <= 1e-8 * sigma.max(1.0), "{} vs {}", x, want);
            prop_assert!((w - 1.0 / n as f64).abs() <= 1e-15);
        }
    }

    #[test]
    fn quantize_uniform_midpoints(a in -5.0f64..0.0, width in 0.1f64..10.0, n in 1usize..64) {
        let b = a + width;
        let q = quantize(&NoiseModel::Uniform { a, b }, n).unwrap();
        for (i, x) in q.locations().iter().enumerate() {
            let want = a + width * (i as f64 + 0.5) / n as f64;
            prop_assert!((x - want).abs() <= 1e-12 * width.max(1.0));
        }
    }
}

#[test]
fn sample_kurtosis_of_gaussian_draws() {
    use rand_distr::Distribution;
    let mut rng = sinterbench_core::measurement::substream(11, 0, 0);
    let d = rand_distr::Normal::new(0.0, 0.5).unwrap();
    let v: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
    let s = stats(&EmpiricalDistribution::new(v).unwrap()).unwrap();
    assert!((2.9..=3.1).contains(&s.kurtosis), "{}", s.kurtosis);
    assert!(s.skewness.abs() < 0.05);
    assert!(s.mode.abs() < 0.1, "{}", s.mode);
}

#[test]
fn wasserstein_rejects_empty_and_bad_order() {
    let a = DiracMixture::dirac(0.0).unwrap();
    assert!(wasserstein(0.99, &a, &a).is_err());
    assert!(EmpiricalDistribution::new(vec![]).is_err());
}
