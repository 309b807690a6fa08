//! Rate-conditioned observation noise.
//!
//! The structured series enters only through the rate
//! `λ_t = λ_0 (y_t - min y) / (max y - min y)`; the noised series is the draw
//! `η_t ~ N_κ(λ_t)` itself.

use serde::{Deserialize, Serialize};

use crate::config::NoiserConfig;
use crate::error::{param, Result};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiserFamily {
    Poisson,
    GenGamma,
    Lognormal,
    Passthrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiserSpec {
    Poisson {
        rate: f64,
    },
    /// Gamma with shape `κ` and mean `λ_t`, raised to the power `ζ`.
    GenGamma {
        rate: f64,
        shape: f64,
        power: f64,
    },
    /// LogNormal with `μ = λ_t` and `σ = κ`.
    Lognormal {
        rate: f64,
        shape: f64,
    },
    Passthrough,
}

impl NoiserSpec {
    pub fn family(&self) -> NoiserFamily {
        match self {
            NoiserSpec::Poisson { .. } => NoiserFamily::Poisson,
            NoiserSpec::GenGamma { .. } => NoiserFamily::GenGamma,
            NoiserSpec::Lognormal { .. } => NoiserFamily::Lognormal,
            NoiserSpec::Passthrough => NoiserFamily::Passthrough,
        }
    }

    pub fn base_rate(&self) -> Option<f64> {
        match *self {
            NoiserSpec::Poisson { rate } | NoiserSpec::GenGamma { rate, .. } | NoiserSpec::Lognormal { rate, .. } => {
                Some(rate)
            }
            NoiserSpec::Passthrough => None,
        }
    }

    /// True when every parameter lies inside its configured bracket.
    pub fn within(&self, cfg: &NoiserConfig) -> bool {
        match *self {
            NoiserSpec::Poisson { rate } => cfg.poisson_rate.contains(rate),
            NoiserSpec::GenGamma { rate, shape, power } => {
                cfg.gamma_rate.contains(rate) && cfg.gamma_shape.contains(shape) && cfg.gamma_power.contains(power)
            }
            NoiserSpec::Lognormal { rate, shape } => {
                cfg.lognormal_rate.contains(rate) && cfg.lognormal_shape.contains(shape)
            }
            NoiserSpec::Passthrough => true,
        }
    }
}

/// Draws a family uniformly from the configured list and its parameters from
/// their brackets.
pub fn sample_noiser_spec(stream: &mut Stream, cfg: &NoiserConfig) -> Result<NoiserSpec> {
    if cfg.families.is_empty() {
        return param("no noiser families configured");
    }
    let family = cfg.families[stream.int_inclusive(0, cfg.families.len() - 1)];
    Ok(match family {
        NoiserFamily::Poisson => NoiserSpec::Poisson {
            rate: stream.log_uniform(cfg.poisson_rate.lo, cfg.poisson_rate.hi)?,
        },
        NoiserFamily::GenGamma => NoiserSpec::GenGamma {
            rate: stream.log_uniform(cfg.gamma_rate.lo, cfg.gamma_rate.hi)?,
            shape: stream.log_uniform(cfg.gamma_shape.lo, cfg.gamma_shape.hi)?,
            power: stream.uniform(cfg.gamma_power.lo, cfg.gamma_power.hi)?,
        },
        NoiserFamily::Lognormal => NoiserSpec::Lognormal {
            rate: stream.log_uniform(cfg.lognormal_rate.lo, cfg.lognormal_rate.hi)?,
            shape: stream.log_uniform(cfg.lognormal_shape.lo, cfg.lognormal_shape.hi)?,
        },
        NoiserFamily::Passthrough => NoiserSpec::Passthrough,
    })
}

/// Level-normalized rate. A constant series maps to `λ_0 / 2` everywhere.
pub fn rate_track(y: &[f64], lambda0: f64) -> Vec<f64> {
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![lambda0 / 2.0; y.len()];
    }
    y.iter()
        .map(|&v| {
            if v == hi {
                lambda0
            } else {
                (lambda0 * (v - lo) / range).clamp(0.0, lambda0)
            }
        })
        .collect()
}

pub fn apply_poisson(y: &[f64], rate: f64, stream: &mut Stream) -> Result<Vec<f64>> {
    rate_track(y, rate)
        .into_iter()
        .map(|lambda| stream.poisson(lambda).map(|k| k as f64))
        .collect()
}

pub fn apply_gen_gamma(y: &[f64], rate: f64, shape: f64, power: f64, stream: &mut Stream) -> Result<Vec<f64>> {
    let scales: Vec<f64> = rate_track(y, rate).into_iter().map(|l| l / shape).collect();
    let mut eta = stream.gamma_scaled(shape, &scales)?;
    if power != 1.0 {
        for v in &mut eta {
            *v = v.powf(power);
        }
    }
    Ok(eta)
}

pub fn apply_lognormal(y: &[f64], rate: f64, shape: f64, stream: &mut Stream) -> Result<Vec<f64>> {
    rate_track(y, rate)
        .into_iter()
        .map(|mu| stream.lognormal(mu, shape))
        .collect()
}

/// Dispatches on the noiser family. Passthrough returns `y` unchanged.
pub fn apply(y: &[f64], spec: &NoiserSpec, stream: &mut Stream) -> Result<Vec<f64>> {
    match *spec {
        NoiserSpec::Poisson { rate } => apply_poisson(y, rate, stream),
        NoiserSpec::GenGamma { rate, shape, power } => apply_gen_gamma(y, rate, shape, power, stream),
        NoiserSpec::Lognormal { rate, shape } => apply_lognormal(y, rate, shape, stream),
        NoiserSpec::Passthrough => Ok(y.to_vec()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn rate_examples() {
        assert_eq!(rate_track(&[0.0, 5.0, 10.0], 4.0), vec![0.0, 2.0, 4.0]);
        assert_eq!(rate_track(&[7.0, 7.0], 3.0), vec![1.5, 1.5]);
        let r = rate_track(&[3.1, -2.0, 8.5, 0.4], 6.5);
        assert_eq!(r.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(r.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 6.5);
    }

    #[test]
    fn passthrough_is_identity() {
        let y = vec![1.5, -2.0, 3.25];
        let mut s = StreamKey::new(0).stream();
        assert_eq!(apply(&y, &NoiserSpec::Passthrough, &mut s).unwrap(), y);
    }

    #[test]
    fn poisson_zero_fraction_and_mean() {
        let mut s = StreamKey::new(1).stream();
        let y = vec![1.0; 100_000];
        let eta = apply_poisson(&y, 0.1, &mut s).unwrap();
        let zeros = eta.iter().filter(|&&v| v == 0.0).count() as f64 / eta.len() as f64;
        assert!((zeros / (-0.05f64).exp() - 1.0).abs() < 0.01, "zeros {zeros}");

        let eta = apply_poisson(&y, 8.0, &mut s).unwrap();
        let (m, _) = moments(&eta);
        assert!((m - 4.0).abs() < 3.0 * (4.0f64 / 1e5).sqrt(), "mean {m}");
    }

    #[test]
    fn poisson_zero_rate_at_minimum() {
        let mut s = StreamKey::new(2).stream();
        let y: Vec<f64> = (0..1000).map(|i| (i % 10) as f64).collect();
        let eta = apply_poisson(&y, 50.0, &mut s).unwrap();
        for (v, e) in y.iter().zip(&eta) {
            if *v == 0.0 {
                assert_eq!(*e, 0.0);
            }
        }
    }

    #[test]
    fn gamma_cv_and_power() {
        let mut s = StreamKey::new(3).stream();
        let y = vec![2.0; 1_000_000];
        let eta = apply_gen_gamma(&y, 10.0, 4.0, 1.0, &mut s).unwrap();
        let (m, v) = moments(&eta);
        assert!((m - 5.0).abs() < 0.02, "mean {m}");
        assert!((v.sqrt() / m * 2.0 - 1.0).abs() < 0.05);

        let eta = apply_gen_gamma(&y[..10_000], 10.0, 4.0, 0.5, &mut s).unwrap();
        assert!(eta.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn gamma_zero_rate_emits_zero() {
        let mut s = StreamKey::new(4).stream();
        let eta = apply_gen_gamma(&[0.0, 1.0], 5.0, 2.0, 1.0, &mut s).unwrap();
        assert_eq!(eta[0], 0.0);
        assert!(eta[1] > 0.0);
    }

    #[test]
    fn lognormal_median_and_positivity() {
        let mut s = StreamKey::new(5).stream();
        let y = vec![1.0; 100_000];
        let mut eta = apply_lognormal(&y, 2.0, 0.01, &mut s).unwrap();
        assert!(eta.iter().all(|&v| v > 0.0));
        eta.sort_by(f64::total_cmp);
        let median = eta[eta.len() / 2];
        assert!((median / 1f64.exp() - 1.0).abs() < 0.02);
    }

    #[test]
    fn family_selection_is_uniform() {
        let cfg = NoiserConfig::default();
        let mut s = StreamKey::new(6).stream();
        let mut counts = std::collections::HashMap::new();
        let n = 10_000;
        for _ in 0..n {
            let spec = sample_noiser_spec(&mut s, &cfg).unwrap();
            assert!(spec.within(&cfg));
            *counts.entry(spec.family()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 4);
        for (fam, c) in counts {
            let f = c as f64 / n as f64;
            assert!((f - 0.25).abs() < 0.015, "{fam:?}: {f}");
        }
    }

    #[test]
    fn poisson_tracks_seasonal_rate() {
        let mut s = StreamKey::new(7).stream();
        let y: Vec<f64> = (0..10_000)
            .map(|t| (t as f64 * std::f64::consts::TAU / 24.0).sin())
            .collect();
        let lambda = rate_track(&y, 50.0);
        let eta = apply_poisson(&y, 50.0, &mut s).unwrap();
        let (ml, vl) = moments(&lambda);
        let (me, ve) = moments(&eta);
        let cov = lambda.iter().zip(&eta).map(|(a, b)| (a - ml) * (b - me)).sum::<f64>() / (lambda.len() as f64 - 1.0);
        let r = cov / (vl * ve).sqrt();
        assert!(r > 0.5, "corr {r}");
    }
}
