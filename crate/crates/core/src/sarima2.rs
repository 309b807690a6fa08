//! Two-process superposition: a high-frequency base SARIMA modulated by an
//! upsampled low-frequency envelope SARIMA.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::config::{SimulatorConfig, Upsampling};
use crate::error::{param, Error, Result};
use crate::rng::Stream;
use crate::sarima::{sample_spec_with_season, SarimaSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mixing {
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sarima2Spec {
    pub base: SarimaSpec,
    pub envelope: SarimaSpec,
    pub mixing: Mixing,
    /// Modulation depth `ω`, used by multiplicative mixing only.
    pub omega: f64,
    /// Base steps per envelope step.
    pub upsample_factor: usize,
    pub upsampling: Upsampling,
}

impl Sarima2Spec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.envelope.validate()?;
        if !(0.0..=1.0).contains(&self.omega) {
            return param(format!("modulation depth {} outside [0, 1]", self.omega));
        }
        if self.upsample_factor == 0 {
            return param("upsample factor must be >= 1");
        }
        Ok(())
    }

    /// Envelope samples needed to cover `base_len` base steps.
    pub fn envelope_len(&self, base_len: usize) -> usize {
        base_len.div_ceil(self.upsample_factor)
    }
}

/// Draws a seasonality pair, the two component specs, the mixing mode and
/// the modulation depth.
pub fn sample_sarima2_spec(stream: &mut Stream, config: &SimulatorConfig) -> Result<Sarima2Spec> {
    if config.seasonality_pairs.is_empty() {
        return param("no seasonality pairs configured");
    }
    let idx = stream.int_inclusive(0, config.seasonality_pairs.len() - 1);
    let [s_base, s_env] = config.seasonality_pairs[idx];
    let base = sample_spec_with_season(stream, config, s_base)?;
    let envelope = sample_spec_with_season(stream, config, s_env)?;
    let mixing = if stream.coin(config.multiplicative_probability) {
        Mixing::Multiplicative
    } else {
        Mixing::Additive
    };
    let omega = stream.uniform(config.modulation_depth.lo, config.modulation_depth.hi)?;
    Ok(Sarima2Spec {
        base,
        envelope,
        mixing,
        omega,
        upsample_factor: s_base.max(1),
        upsampling: config.envelope_upsampling,
    })
}

/// Affine map sending `(min, max)` to `(-1, 1)`. A constant input maps to zeros.
pub fn normalize_envelope(env: &[f64]) -> Vec<f64> {
    let (lo, hi) = env.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.0; env.len()];
    }
    env.iter()
        .map(|&v| {
            if v == lo {
                -1.0
            } else if v == hi {
                1.0
            } else {
                (2.0 * (v - lo) / range - 1.0).clamp(-1.0, 1.0)
            }
        })
        .collect()
}

fn check_cover(env_len: usize, factor: usize, target_len: usize) -> Result<()> {
    if factor == 0 {
        return param("upsample factor must be >= 1");
    }
    if env_len.saturating_mul(factor) < target_len {
        return Err(Error::Length(format!(
            "envelope of length {env_len} upsampled by {factor} cannot cover {target_len} steps"
        )));
    }
    Ok(())
}

/// Zero-order hold: each envelope value repeated `factor` times, truncated to
/// `target_len`.
pub fn upsample_hold(env: &[f64], factor: usize, target_len: usize) -> Result<Vec<f64>> {
    check_cover(env.len(), factor, target_len)?;
    Ok((0..target_len).map(|t| env[t / factor]).collect())
}

/// Linear interpolation between consecutive envelope values, holding the last.
pub fn upsample_linear(env: &[f64], factor: usize, target_len: usize) -> Result<Vec<f64>> {
    check_cover(env.len(), factor, target_len)?;
    Ok((0..target_len)
        .map(|t| {
            let k = t / factor;
            let frac = (t % factor) as f64 / factor as f64;
            match env.get(k + 1) {
                Some(&next) => env[k] + frac * (next - env[k]),
                None => env[k],
            }
        })
        .collect())
}

pub fn upsample(env: &[f64], factor: usize, target_len: usize, mode: Upsampling) -> Result<Vec<f64>> {
    match mode {
        Upsampling::Hold => upsample_hold(env, factor, target_len),
        Upsampling::Linear => upsample_linear(env, factor, target_len),
    }
}

/// Combines base rows with envelope rows given at the envelope rate.
///
/// Additive: `y = y_b + up(y_e)`. Multiplicative: `y = (1 + ω up(norm(y_e))) y_b`,
/// with the envelope normalized per row before upsampling.
pub fn compose(base: &Array2<f64>, envelope: &Array2<f64>, spec: &Sarima2Spec) -> Result<Array2<f64>> {
    if base.nrows() != envelope.nrows() {
        return param(format!(
            "base has {} rows but envelope has {}",
            base.nrows(),
            envelope.nrows()
        ));
    }
    let len = base.ncols();
    let mut out = base.clone();
    for (mut out_row, env_row) in out.rows_mut().into_iter().zip(envelope.rows()) {
        let env_row = env_row.to_vec();
        match spec.mixing {
            Mixing::Additive => {
                let up = upsample(&env_row, spec.upsample_factor, len, spec.upsampling)?;
                for (y, e) in out_row.iter_mut().zip(up) {
                    *y += e;
                }
            }
            Mixing::Multiplicative => {
                let norm = normalize_envelope(&env_row);
                let up = upsample(&norm, spec.upsample_factor, len, spec.upsampling)?;
                for (y, e) in out_row.iter_mut().zip(up) {
                    *y *= 1.0 + spec.omega * e;
                }
            }
        }
    }
    Ok(out)
}

/// Elementwise check that `composed` stays within the multiplicative gain
/// band `[1 - ω, 1 + ω]` of `base`.
pub fn gain_within_band(base: &Array2<f64>, composed: &Array2<f64>, omega: f64) -> bool {
    let mut ok = true;
    Zip::from(base).and(composed).for_each(|&b, &y| {
        let tol = 1e-12 * b.abs();
        let (lo, hi) = if b >= 0.0 {
            ((1.0 - omega) * b, (1.0 + omega) * b)
        } else {
            ((1.0 + omega) * b, (1.0 - omega) * b)
        };
        if y < lo - tol || y > hi + tol {
            ok = false;
        }
    });
    ok
}
