//! Periodogram and peak picking for diagnostics.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Periodogram `|X_k|² / n` of the demeaned series for bins `0..=n/2`.
pub fn periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..=n / 2].iter().map(|c| c.norm_sqr() / n as f64).collect()
}

/// Bin nearest to a period of `period` samples in a series of length `n`.
pub fn bin_for_period(n: usize, period: f64) -> usize {
    (n as f64 / period).round() as usize
}

/// Bin of maximal power, ignoring the zero-frequency bin.
pub fn dominant_bin(power: &[f64]) -> Option<usize> {
    power
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
}

/// Up to `k` local maxima (bin 0 excluded), strongest first.
pub fn top_peaks(power: &[f64], k: usize) -> Vec<usize> {
    let n = power.len();
    let mut peaks: Vec<usize> = (1..n)
        .filter(|&i| {
            let left = power[i - 1];
            let right = if i + 1 < n { power[i + 1] } else { f64::NEG_INFINITY };
            power[i] > left && power[i] >= right
        })
        .collect();
    peaks.sort_by(|&a, &b| power[b].total_cmp(&power[a]));
    peaks.truncate(k);
    peaks
}

/// Median power over bins `1..`.
pub fn median_level(power: &[f64]) -> f64 {
    let mut v: Vec<f64> = power.iter().skip(1).copied().collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Whether a local maximum within `tol` bins of `bin` reaches `ratio` times
/// the median periodogram level.
pub fn has_peak_near(power: &[f64], bin: usize, tol: usize, ratio: f64) -> bool {
    let n = power.len();
    if bin == 0 || bin >= n {
        return false;
    }
    let floor = ratio * median_level(power);
    let lo = bin.saturating_sub(tol).max(1);
    let hi = (bin + tol).min(n - 1);
    (lo..=hi).any(|i| {
        let left = power[i - 1];
        let right = if i + 1 < n { power[i + 1] } else { f64::NEG_INFINITY };
        power[i] > left && power[i] >= right && power[i] >= floor
    })
}
