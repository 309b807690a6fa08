//! Integer and fractional integration passes.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlannerScalar};
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Upper bound on the fractional filter length.
pub const MAX_FIR_TAPS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegrationMode {
    Nonseasonal,
    Seasonal(usize),
}

/// In-place integrator pass: `y_t <- y_t + y_{t-1}` or `y_t <- y_t + y_{t-s}`,
/// applied in increasing `t`.
pub fn integrate(series: &mut [f64], mode: IntegrationMode) -> Result<()> {
    let lag = match mode {
        IntegrationMode::Nonseasonal => 1,
        IntegrationMode::Seasonal(s) if s >= 2 => s,
        IntegrationMode::Seasonal(s) => return param(format!("seasonal integration needs s >= 2, got {s}")),
    };
    for t in lag..series.len() {
        series[t] += series[t - lag];
    }
    Ok(())
}

/// Binomial coefficients of `(1 - L)^d`, truncated to `taps` terms, for any real `d`.
fn binomial_filter(d: f64, taps: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(taps);
    if taps == 0 {
        return w;
    }
    w.push(1.0);
    for i in 1..taps {
        let prev = w[i - 1];
        w.push(prev * (i as f64 - 1.0 - d) / i as f64);
    }
    w
}

/// FIR coefficients of the fractional differencing operator `(1 - L)^d`,
/// `ϱ_0 = 1, ϱ_i = ϱ_{i-1} (i - 1 - d) / i`.
pub fn frac_diff_filter(d: f64, taps: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&d) {
        return param(format!("fractional order must lie in [0, 1], got {d}"));
    }
    if taps == 0 {
        return param("filter needs at least one tap");
    }
    Ok(binomial_filter(d, taps))
}

/// Default filter length for a series of length `len`.
pub fn default_taps(len: usize) -> usize {
    len.clamp(1, MAX_FIR_TAPS)
}

/// Smallest `2^a 3^b` at or above `n`.
fn smooth_length(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Applies integration of order `d` in `[0, 1]` to series of a fixed length.
///
/// The operator is `(1 - L)^{-1} (1 - L)^{1-d}`: a causal convolution with the
/// truncated differencing filter of order `1 - d` followed by a cumulative
/// sum. `d = 0` is the identity and `d = 1` the plain cumulative sum; both
/// endpoints skip the convolution. The convolution runs through a scalar FFT
/// plan built once and shared across rows.
pub struct FractionalIntegrator {
    order: f64,
    len: usize,
    kind: IntegratorKind,
}

enum IntegratorKind {
    Identity,
    CumSum,
    Convolve {
        fft_len: usize,
        spectrum: Vec<Complex64>,
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
    },
}

impl FractionalIntegrator {
    pub fn new(order: f64, len: usize, taps: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&order) {
            return param(format!("integration order must lie in [0, 1], got {order}"));
        }
        if taps == 0 {
            return param("filter needs at least one tap");
        }
        let kind = if order == 0.0 {
            IntegratorKind::Identity
        } else if order == 1.0 || len <= 1 {
            IntegratorKind::CumSum
        } else {
            let taps = taps.min(len);
            let filter = binomial_filter(1.0 - order, taps);
            let fft_len = smooth_length(len + taps - 1);
            let mut planner = FftPlannerScalar::new();
            let forward = planner.plan_fft_forward(fft_len);
            let inverse = planner.plan_fft_inverse(fft_len);
            let mut spectrum: Vec<Complex64> = filter
                .iter()
                .map(|&h| Complex64::new(h, 0.0))
                .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
                .take(fft_len)
                .collect();
            forward.process(&mut spectrum);
            let norm = 1.0 / fft_len as f64;
            for v in &mut spectrum {
                *v *= norm;
            }
            IntegratorKind::Convolve {
                fft_len,
                spectrum,
                forward,
                inverse,
            }
        };
        Ok(Self { order, len, kind })
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    /// Integrates one series in place. The series must have the length the
    /// integrator was built for.
    pub fn apply(&self, series: &mut [f64]) -> Result<()> {
        self.check_len(series)?;
        match &self.kind {
            IntegratorKind::Identity => {}
            IntegratorKind::CumSum => integrate(series, IntegrationMode::Nonseasonal)?,
            IntegratorKind::Convolve { fft_len, .. } => {
                let mut buf: Vec<Complex64> = series
                    .iter()
                    .map(|&x| Complex64::new(x, 0.0))
                    .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
                    .take(*fft_len)
                    .collect();
                self.convolve(&mut buf);
                let mut acc = 0.0;
                for (y, b) in series.iter_mut().zip(&buf) {
                    acc += b.re;
                    *y = acc;
                }
            }
        }
        Ok(())
    }

    /// Integrates two series at once. The filter is real, so one complex
    /// transform carries `a` in the real part and `b` in the imaginary part.
    pub fn apply_pair(&self, a: &mut [f64], b: &mut [f64]) -> Result<()> {
        self.check_len(a)?;
        self.check_len(b)?;
        let IntegratorKind::Convolve { fft_len, .. } = &self.kind else {
            self.apply(a)?;
            return self.apply(b);
        };
        let mut buf: Vec<Complex64> = a
            .iter()
            .zip(b.iter())
            .map(|(&x, &y)| Complex64::new(x, y))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(*fft_len)
            .collect();
        self.convolve(&mut buf);
        let (mut acc_a, mut acc_b) = (0.0, 0.0);
        for ((ya, yb), v) in a.iter_mut().zip(b.iter_mut()).zip(&buf) {
            acc_a += v.re;
            acc_b += v.im;
            *ya = acc_a;
            *yb = acc_b;
        }
        Ok(())
    }

    fn check_len(&self, series: &[f64]) -> Result<()> {
        if series.len() != self.len {
            return Err(crate::Error::Length(format!(
                "integrator built for length {}, got {}",
                self.len,
                series.len()
            )));
        }
        Ok(())
    }

    fn convolve(&self, buf: &mut [Complex64]) {
        if let IntegratorKind::Convolve {
            spectrum,
            forward,
            inverse,
            ..
        } = &self.kind
        {
            forward.process(buf);
            for (b, h) in buf.iter_mut().zip(spectrum) {
                *b *= h;
            }
            inverse.process(buf);
        }
    }
}

/// One-shot fractional integration of a single series.
pub fn apply_fractional_integration(series: &mut [f64], order: f64, taps: usize) -> Result<()> {
    FractionalIntegrator::new(order, series.len(), taps)?.apply(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cumulative_and_seasonal_passes() {
        let mut y = vec![1.0, 1.0, 1.0, 1.0];
        integrate(&mut y, IntegrationMode::Nonseasonal).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0, 4.0]);

        let mut y = vec![1.0, 2.0, 3.0, 4.0];
        integrate(&mut y, IntegrationMode::Seasonal(2)).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 4.0, 6.0]);

        assert!(integrate(&mut y, IntegrationMode::Seasonal(1)).is_err());
    }

    #[test]
    fn integrate_then_difference_is_identity() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let mut y = x.clone();
        integrate(&mut y, IntegrationMode::Nonseasonal).unwrap();
        for t in 1..x.len() {
            assert_abs_diff_eq!(y[t] - y[t - 1], x[t], epsilon = 1e-12);
        }
    }

    #[test]
    fn filter_examples() {
        assert_eq!(frac_diff_filter(0.0, 4).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(frac_diff_filter(1.0, 4).unwrap(), vec![1.0, -1.0, 0.0, 0.0]);
        let h = frac_diff_filter(0.5, 4).unwrap();
        for (a, b) in h.iter().zip([1.0, -0.5, -0.125, -0.0625]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert!(frac_diff_filter(1.5, 4).is_err());
        assert!(frac_diff_filter(0.5, 0).is_err());
    }

    #[test]
    fn endpoints() {
        let x: Vec<f64> = (0..512).map(|i| (i as f64 * 0.37).sin() + 0.1).collect();
        let mut y = x.clone();
        apply_fractional_integration(&mut y, 0.0, 512).unwrap();
        assert_eq!(x, y);

        let mut y = x.clone();
        apply_fractional_integration(&mut y, 1.0, 512).unwrap();
        let mut c = x.clone();
        integrate(&mut c, IntegrationMode::Nonseasonal).unwrap();
        assert_eq!(y, c);
    }

    #[test]
    fn smooth_lengths() {
        assert_eq!(smooth_length(1), 1);
        assert_eq!(smooth_length(7), 8);
        assert_eq!(smooth_length(1537), 1728);
        assert_eq!(smooth_length(2048), 2048);
    }

    #[test]
    fn wrong_length_rejected() {
        let f = FractionalIntegrator::new(0.5, 10, 10).unwrap();
        assert!(f.apply(&mut [0.0; 9]).is_err());
        assert!(FractionalIntegrator::new(-0.1, 10, 10).is_err());
    }

    #[test]
    fn paired_rows_match_single_rows() {
        let a: Vec<f64> = (0..700).map(|i| (i as f64 * 0.11).sin()).collect();
        let b: Vec<f64> = (0..700).map(|i| ((i * 31) % 17) as f64 - 8.0).collect();
        for d in [0.0, 0.35, 1.0] {
            let f = FractionalIntegrator::new(d, 700, 512).unwrap();
            let (mut pa, mut pb) = (a.clone(), b.clone());
            f.apply_pair(&mut pa, &mut pb).unwrap();
            for (x, paired) in [(&a, &pa), (&b, &pb)] {
                let mut single = x.clone();
                f.apply(&mut single).unwrap();
                for (u, v) in single.iter().zip(paired.iter()) {
                    assert_abs_diff_eq!(u, v, epsilon = 1e-9 * (1.0 + u.abs()));
                }
            }
        }
    }
}
