//! Independent reference computations checked against the engine.

use num_complex::Complex64;
use sarsim::metrics::{crps, quantile_loss, DECILES};
use sarsim::polyroots::{expand, sample_pole_set, Convention};
use sarsim::sarima::{frac_diff_filter, sample_spec, unroll_with, warmup_length, UnrollOptions};
use sarsim::{SarimaSpec, SimulatorConfig, StreamKey};
use statrs::function::gamma::ln_gamma;

/// One trajectory at a time, straight from the recursion definition.
fn scalar_unroll(spec: &SarimaSpec, key: &StreamKey, row: u64, len: usize) -> Vec<f64> {
    let w = warmup_length(spec);
    let sigma = spec.innovation_sigma;
    let s = spec.season;
    let mut stream = key.child(row).stream();
    let mut y = vec![0.0; len];
    let mut e = vec![0.0; len];
    for v in y.iter_mut().take(w) {
        *v = sigma * stream.standard_normal();
    }
    for v in e.iter_mut() {
        *v = sigma * stream.standard_normal();
    }
    for t in w..len {
        let mut acc = 0.0;
        for (i, c) in spec.ar.coefficients.iter().enumerate() {
            acc += c * y[t - (i + 1)];
        }
        for (i, c) in spec.seasonal_ar.coefficients.iter().enumerate() {
            acc += c * y[t - (i + 1) * s];
        }
        for (i, c) in spec.ma.coefficients.iter().enumerate() {
            acc += c * e[t - (i + 1)];
        }
        for (i, c) in spec.seasonal_ma.coefficients.iter().enumerate() {
            acc += c * e[t - (i + 1) * s];
        }
        y[t] = acc + e[t];
    }
    y
}

#[test]
fn batched_unroll_matches_scalar_reference() {
    let cfg = SimulatorConfig::default();
    let opts = UnrollOptions {
        integrate: false,
        ..UnrollOptions::default()
    };
    let mut specs = StreamKey::new(2024).stream();
    for i in 0..100u64 {
        let spec = sample_spec(&mut specs, &cfg).unwrap();
        let key = StreamKey::with_lane(99, &[i]);
        let batch = unroll_with(&spec, &key, 8, 2000, &opts).unwrap();
        for r in 0..8 {
            let reference = scalar_unroll(&spec, &key, r as u64, 2000);
            let got = batch.data.row(r);
            assert!(
                got.iter().zip(&reference).all(|(a, b)| a.to_bits() == b.to_bits()),
                "spec {i} row {r} differs"
            );
        }
    }
}

/// `∏ (1 - φ L)` by complex convolution of linear factors in the given order.
fn brute_force_expand(poles: &[Complex64]) -> Vec<Complex64> {
    let mut acc = vec![Complex64::new(1.0, 0.0)];
    for &p in poles {
        let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
        for (i, a) in acc.iter().enumerate() {
            next[i] += a;
            next[i + 1] -= a * p;
        }
        acc = next;
    }
    acc
}

#[test]
fn expand_matches_brute_force_convolution() {
    let mut s = StreamKey::new(5).stream();
    for _ in 0..1000 {
        let order = s.int_inclusive(0, 10);
        let set = sample_pole_set(&mut s, order, 0.9).unwrap();
        let mut shuffled = set.poles.clone();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, s.int_inclusive(0, i));
        }
        let oracle = brute_force_expand(&shuffled);
        let got = expand(&set, Convention::Ar).unwrap().power_coefficients();
        assert_eq!(got.len(), oracle.len());
        let scale = oracle.iter().map(|c| c.norm()).fold(1.0, f64::max);
        for (g, o) in got.iter().zip(&oracle) {
            assert!(o.im.abs() <= 1e-12 * scale);
            assert!((g - o.re).abs() <= 1e-12 * scale, "{g} vs {o}");
        }
    }
}

#[test]
fn roots_round_trip() {
    let mut s = StreamKey::new(6).stream();
    for _ in 0..500 {
        let order = s.int_inclusive(1, 10);
        let set = sample_pole_set(&mut s, order, 0.9).unwrap();
        let recovered = expand(&set, Convention::Ar).unwrap().poles();
        assert_eq!(recovered.len(), order);
        // greedy matching of nearest remaining pole
        let mut left = recovered.clone();
        for p in &set.poles {
            let (j, d) = left
                .iter()
                .enumerate()
                .map(|(j, q)| (j, (q - p).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(d < 1e-6, "pole {p} recovered with error {d}");
            left.swap_remove(j);
        }
    }
}

#[test]
fn binomial_filter_matches_gamma_ratio() {
    for k in 1..=9 {
        let d = k as f64 / 10.0;
        let filter = frac_diff_filter(d, 513).unwrap();
        // ϱ_i = Γ(i - d) / (Γ(-d) Γ(i + 1)); Γ(-d) < 0 and Γ(i - d) > 0 for i ≥ 1
        let ln_gamma_neg_d = statrs::function::gamma::gamma(-d).abs().ln();
        assert_eq!(filter[0], 1.0);
        for (i, &rho) in filter.iter().enumerate().skip(1) {
            let i = i as f64;
            let magnitude = (ln_gamma(i - d) - ln_gamma_neg_d - ln_gamma(i + 1.0)).exp();
            let oracle = -magnitude;
            assert!((rho - oracle).abs() <= 1e-10, "d={d} i={i}: {rho} vs {oracle}");
        }
    }
}

#[test]
fn crps_matches_direct_summation() {
    // y = 1, point forecast 0: every level contributes τ · 1
    let direct: f64 = DECILES.iter().map(|t| t * 1.0).sum::<f64>() * 2.0 / 9.0;
    assert!((crps(1.0, &[0.0; 9], &DECILES).unwrap() - direct).abs() < 1e-15);
    assert!((direct - 1.0).abs() < 1e-15);
}

#[test]
fn crps_of_true_uniform_quantiles() {
    // E ρ_τ(Y, τ) = τ(1 - τ)/2 for Y ~ U(0,1), so the decile Riemann sum has
    // mean (1/9) Σ τ(1 - τ) = 11/60.
    let expected: f64 = DECILES.iter().map(|t| t * (1.0 - t)).sum::<f64>() / 9.0;
    assert!((expected - 11.0 / 60.0).abs() < 1e-15);
    let mut s = StreamKey::new(8).stream();
    let n = 100_000;
    let mean = (0..n).map(|_| crps(s.unit(), &DECILES, &DECILES).unwrap()).sum::<f64>() / n as f64;
    assert!((mean / expected - 1.0).abs() < 0.02, "mean {mean}");
}

#[test]
fn median_crps_is_absolute_error() {
    let mut s = StreamKey::new(9).stream();
    for _ in 0..1000 {
        let y = s.normal(0.0, 10.0).unwrap();
        let yhat = s.normal(0.0, 10.0).unwrap();
        assert_eq!(crps(y, &[yhat], &[0.5]).unwrap(), (y - yhat).abs());
        assert_eq!(2.0 * quantile_loss(y, yhat, 0.5), (y - yhat).abs());
    }
}
