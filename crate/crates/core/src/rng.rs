//! Deterministic, splittable random streams.
//!
//! A [`StreamKey`] names a stream by `(master_seed, lane)`, where the lane is a
//! hierarchical path such as `[batch, attempt, purpose, row]`. The key is hashed
//! into a 256-bit ChaCha key, so a stream's output depends on nothing but its
//! key: draws on one lane never perturb another, and work can be spread across
//! threads in any order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal, Weibull};
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Purpose tags used as lane components.
pub mod tag {
    pub const RECIPE: u64 = 0x5245_4349;
    pub const BASE: u64 = 0x4241_5345;
    pub const ENVELOPE: u64 = 0x454e_5645;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const WINDOW: u64 = 0x5749_4e44;
}

const MIX_CONSTANTS: [u64; 4] = [
    0x9e37_79b9_7f4a_7c15,
    0xc2b2_ae3d_27d4_eb4f,
    0x1656_67b1_9e37_79f9,
    0x27d4_eb2f_1656_67c5,
];

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Names an independent random stream.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub lane: Vec<u64>,
}

impl StreamKey {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            lane: Vec::new(),
        }
    }

    pub fn with_lane(master_seed: u64, lane: &[u64]) -> Self {
        Self {
            master_seed,
            lane: lane.to_vec(),
        }
    }

    /// Key of the sub-lane `self.lane ++ [index]`.
    pub fn child(&self, index: u64) -> Self {
        let mut lane = Vec::with_capacity(self.lane.len() + 1);
        lane.extend_from_slice(&self.lane);
        lane.push(index);
        Self {
            master_seed: self.master_seed,
            lane,
        }
    }

    fn chacha_key(&self) -> [u8; 32] {
        let mut acc = MIX_CONSTANTS.map(|c| splitmix(self.master_seed ^ c));
        let words = self.lane.iter().copied().chain(std::iter::once(self.lane.len() as u64));
        for word in words {
            for (a, c) in acc.iter_mut().zip(MIX_CONSTANTS) {
                *a = splitmix(a.rotate_left(23) ^ splitmix(word ^ c));
            }
        }
        let mut key = [0u8; 32];
        for (chunk, a) in key.chunks_exact_mut(8).zip(acc) {
            chunk.copy_from_slice(&a.to_le_bytes());
        }
        key
    }

    /// Opens the stream at its first draw.
    pub fn stream(&self) -> Stream {
        Stream {
            rng: ChaCha8Rng::from_seed(self.chacha_key()),
        }
    }
}

/// An owned random stream with the engine's samplers.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = StandardNormal.sample(&mut self.rng);
        }
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        if lo >= hi {
            return lo;
        }
        self.rng.random_range(lo..=hi)
    }

    /// `true` with probability `p`.
    pub fn coin(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return param(format!("uniform bounds must satisfy lo <= hi, got [{lo}, {hi}]"));
        }
        if lo == hi {
            return Ok(lo);
        }
        Ok((lo + (hi - lo) * self.unit()).clamp(lo, hi))
    }

    pub fn log_uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo > 0.0 && hi > 0.0) {
            return param(format!("log-uniform bounds must be positive, got [{lo}, {hi}]"));
        }
        if lo == hi {
            return Ok(lo);
        }
        let v = self.uniform(lo.ln(), hi.ln())?.exp();
        Ok(v.clamp(lo, hi))
    }

    pub fn normal(&mut self, mu: f64, sigma: f64) -> Result<f64> {
        if !(sigma >= 0.0) {
            return param(format!("normal sigma must be >= 0, got {sigma}"));
        }
        if sigma == 0.0 {
            return Ok(mu);
        }
        Ok(mu + sigma * self.standard_normal())
    }

    /// Poisson draw. Rates below 12 use inversion by sequential search on a
    /// single uniform; larger rates a transformed-rejection sampler.
    pub fn poisson(&mut self, lambda: f64) -> Result<u64> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return param(format!("poisson rate must be finite and >= 0, got {lambda}"));
        }
        if lambda == 0.0 {
            return Ok(0);
        }
        if lambda < 12.0 {
            let u = self.unit();
            let mut p = (-lambda).exp();
            let mut cdf = p;
            let mut k = 0u64;
            while u >= cdf && p > 0.0 {
                k += 1;
                p *= lambda / k as f64;
                cdf += p;
            }
            return Ok(k);
        }
        let dist = Poisson::new(lambda).map_err(|e| crate::Error::Parameter(format!("poisson({lambda}): {e}")))?;
        Ok(dist.sample(&mut self.rng) as u64)
    }

    /// Gamma draw with mean `shape * scale`. Shapes below one are boosted
    /// (sample at `shape + 1`, then multiply by `U^(1/shape)`).
    pub fn gamma(&mut self, shape: f64, scale: f64) -> Result<f64> {
        if !(shape > 0.0 && scale > 0.0) || !shape.is_finite() || !scale.is_finite() {
            return param(format!(
                "gamma parameters must be positive, got shape={shape}, scale={scale}"
            ));
        }
        let dist =
            Gamma::new(shape, scale).map_err(|e| crate::Error::Parameter(format!("gamma({shape}, {scale}): {e}")))?;
        Ok(dist.sample(&mut self.rng))
    }

    /// Gamma draws with a common shape and per-draw scales, sharing one
    /// unit-scale sampler.
    pub fn gamma_scaled(&mut self, shape: f64, scales: &[f64]) -> Result<Vec<f64>> {
        if !(shape > 0.0) || !shape.is_finite() {
            return param(format!("gamma shape must be positive, got {shape}"));
        }
        if let Some(bad) = scales.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return param(format!("gamma scale must be finite and >= 0, got {bad}"));
        }
        let unit = Gamma::new(shape, 1.0).map_err(|e| crate::Error::Parameter(format!("gamma({shape}, 1): {e}")))?;
        Ok(scales
            .iter()
            .map(|&scale| {
                let g: f64 = unit.sample(&mut self.rng);
                g * scale
            })
            .collect())
    }

    pub fn lognormal(&mut self, mu: f64, sigma: f64) -> Result<f64> {
        if !(sigma > 0.0) {
            return param(format!("lognormal sigma must be > 0, got {sigma}"));
        }
        Ok((mu + sigma * self.standard_normal()).exp())
    }

    pub fn weibull(&mut self, scale: f64, shape: f64) -> Result<f64> {
        if !(scale > 0.0 && shape > 0.0) {
            return param(format!(
                "weibull parameters must be positive, got scale={scale}, shape={shape}"
            ));
        }
        let dist = Weibull::new(scale, shape)
            .map_err(|e| crate::Error::Parameter(format!("weibull({scale}, {shape}): {e}")))?;
        Ok(dist.sample(&mut self.rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(lane: &[u64]) -> Stream {
        StreamKey::with_lane(42, lane).stream()
    }

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn degenerate_intervals() {
        let mut s = stream(&[0]);
        assert_eq!(s.uniform(3.0, 3.0).unwrap(), 3.0);
        assert_eq!(s.log_uniform(5.0, 5.0).unwrap(), 5.0);
        assert_eq!(s.normal(2.0, 0.0).unwrap(), 2.0);
        assert_eq!(s.poisson(0.0).unwrap(), 0);
    }

    #[test]
    fn parameter_errors() {
        let mut s = stream(&[1]);
        assert!(s.uniform(1.0, 0.0).is_err());
        assert!(s.log_uniform(0.0, 1.0).is_err());
        assert!(s.log_uniform(-1.0, 1.0).is_err());
        assert!(s.normal(0.0, -1.0).is_err());
        assert!(s.poisson(-1.0).is_err());
        assert!(s.poisson(f64::NAN).is_err());
        assert!(s.gamma(0.0, 1.0).is_err());
        assert!(s.gamma(1.0, -1.0).is_err());
        assert!(s.lognormal(0.0, 0.0).is_err());
        assert!(s.weibull(1.0, 0.0).is_err());
    }

    #[test]
    fn same_key_same_stream() {
        let a: Vec<u64> = (0..64)
            .map({
                let mut s = stream(&[3, 1, 4]);
                move |_| s.next_u64()
            })
            .collect();
        let b: Vec<u64> = (0..64)
            .map({
                let mut s = stream(&[3, 1, 4]);
                move |_| s.next_u64()
            })
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn lane_prefixes_differ() {
        // [a] vs [a, 0] vs [] must all be distinct streams.
        let first = |lane: &[u64]| stream(lane).next_u64();
        assert_ne!(first(&[]), first(&[0]));
        assert_ne!(first(&[0]), first(&[0, 0]));
        assert_ne!(first(&[1, 2]), first(&[2, 1]));
        assert_ne!(
            StreamKey::with_lane(1, &[0]).stream().next_u64(),
            StreamKey::with_lane(2, &[0]).stream().next_u64()
        );
    }

    #[test]
    fn child_equals_explicit_lane() {
        let k = StreamKey::new(9).child(4).child(7);
        assert_eq!(k, StreamKey::with_lane(9, &[4, 7]));
    }

    #[test]
    fn uniform_mean() {
        let mut s = stream(&[10]);
        let xs: Vec<f64> = (0..1_000_000).map(|_| s.uniform(0.0, 1.0).unwrap()).collect();
        let (m, _) = mean_var(&xs);
        assert!((m - 0.5).abs() < 0.002, "mean {m}");
        let mut s = stream(&[11]);
        for _ in 0..10_000 {
            let a = s.uniform(0.0, 2.0 * std::f64::consts::PI).unwrap();
            assert!((0.0..=2.0 * std::f64::consts::PI).contains(&a));
        }
    }

    #[test]
    fn log_uniform_median_and_bounds() {
        let mut s = stream(&[12]);
        let mut xs: Vec<f64> = (0..1_000_000).map(|_| s.log_uniform(0.1, 100.0).unwrap()).collect();
        xs.sort_by(f64::total_cmp);
        let median = xs[xs.len() / 2];
        assert!((median / 10f64.sqrt() - 1.0).abs() < 0.02, "median {median}");
        let mut s = stream(&[13]);
        for _ in 0..10_000 {
            let k = s.log_uniform(1.0, 50.0).unwrap();
            assert!((1.0..=50.0).contains(&k));
        }
    }

    #[test]
    fn normal_variance() {
        let mut s = stream(&[14]);
        let xs: Vec<f64> = (0..1_000_000).map(|_| s.normal(0.0, 1.0).unwrap()).collect();
        let (_, v) = mean_var(&xs);
        assert!((v - 1.0).abs() < 0.005, "var {v}");
    }

    #[test]
    fn poisson_moments() {
        let mut s = stream(&[15]);
        let xs: Vec<f64> = (0..1_000_000).map(|_| s.poisson(4.0).unwrap() as f64).collect();
        let (m, v) = mean_var(&xs);
        assert!((m - 4.0).abs() < 0.006, "mean {m}");
        assert!((v - 4.0).abs() < 0.02, "var {v}");
    }

    #[test]
    fn gamma_exponential_case_and_cv() {
        let mut s = stream(&[16]);
        let xs: Vec<f64> = (0..1_000_000).map(|_| s.gamma(1.0, 2.5).unwrap()).collect();
        let (m, _) = mean_var(&xs);
        assert!((m / 2.5 - 1.0).abs() < 0.003, "mean {m}");

        let mut s = stream(&[17]);
        let xs: Vec<f64> = (0..1_000_000).map(|_| s.gamma(9.0, 1.0).unwrap()).collect();
        let (m, v) = mean_var(&xs);
        let cv = v.sqrt() / m;
        assert!((cv * 3.0 - 1.0).abs() < 0.02, "cv {cv}");
    }

    #[test]
    fn gamma_small_shape_positive() {
        let mut s = stream(&[18]);
        let xs: Vec<f64> = (0..200_000).map(|_| s.gamma(0.3, 1.0).unwrap()).collect();
        assert!(xs.iter().all(|&x| x >= 0.0));
        let (m, _) = mean_var(&xs);
        assert!((m - 0.3).abs() < 0.01, "mean {m}");
    }

    #[test]
    fn gamma_skewness_vanishes_for_large_shape() {
        let skew = |shape: f64, lane: u64| {
            let mut s = stream(&[19, lane]);
            let xs: Vec<f64> = (0..200_000).map(|_| s.gamma(shape, 1.0).unwrap()).collect();
            let (m, v) = mean_var(&xs);
            xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / xs.len() as f64 / v.powf(1.5)
        };
        // Gamma skewness is 2/sqrt(shape).
        assert!(skew(1.0, 0) > 1.5);
        assert!(skew(10_000.0, 1).abs() < 0.05);
    }

    #[test]
    fn lognormal_mean_and_limit() {
        let mut s = stream(&[20]);
        let xs: Vec<f64> = (0..1_000_000).map(|_| s.lognormal(0.0, 1.0).unwrap()).collect();
        let (m, _) = mean_var(&xs);
        assert!((m / 0.5f64.exp() - 1.0).abs() < 0.01, "mean {m}");
        let mut s = stream(&[21]);
        for _ in 0..1000 {
            assert!((s.lognormal(0.0, 1e-9).unwrap() - 1.0).abs() < 1e-6);
        }
        // Appendix bound used to cap the lognormal noiser brackets.
        assert!(((5.0f64 + 4.5).exp() - 13_360.0).abs() < 5.0);
    }

    #[test]
    fn weibull_mean_median_limit() {
        let mut s = stream(&[22]);
        let xs: Vec<f64> = (0..1_000_000).map(|_| s.weibull(1.0, 1.0).unwrap()).collect();
        let (m, _) = mean_var(&xs);
        assert!((m - 1.0).abs() < 0.003, "mean {m}");

        let mut s = stream(&[23]);
        let mut xs: Vec<f64> = (0..1_000_000).map(|_| s.weibull(1.0, 2.0).unwrap()).collect();
        xs.sort_by(f64::total_cmp);
        let median = xs[xs.len() / 2];
        assert!((median / 2f64.ln().sqrt() - 1.0).abs() < 0.01, "median {median}");

        let mut s = stream(&[24]);
        for _ in 0..1000 {
            assert!((s.weibull(1.0, 1e6).unwrap() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn lane_independence() {
        let mut a = stream(&[30, 0]);
        let mut b = stream(&[30, 1]);
        let n = 1_000_000;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = a.standard_normal();
            let y = b.standard_normal();
            sab += x * y;
            saa += x * x;
            sbb += y * y;
        }
        let r = sab / (saa * sbb).sqrt();
        assert!(r.abs() < 0.005, "r {r}");
    }
}
