//! Summary statistics for generated files.

use sarsim::format::{decode_series, detect_format};
use sarsim::spectral::{periodogram, top_peaks};
use sarsim::OutputFormat;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    pub zero_fraction: f64,
}

impl Moments {
    fn of(values: &[f32]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
        let variance = if values.len() > 1 {
            values.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(f64::from(v)), hi.max(f64::from(v)))
        });
        let zeros = values.iter().filter(|&&v| v == 0.0).count();
        Self {
            mean,
            variance,
            min,
            max,
            zero_fraction: zeros as f64 / n,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Peak {
    pub bin: usize,
    /// Period in steps, `len / bin`.
    pub period: f64,
    pub power: f64,
}

#[derive(Debug, Serialize)]
pub struct RowSummary {
    pub row: usize,
    #[serde(flatten)]
    pub moments: Moments,
    pub top_peaks: Vec<Peak>,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub format: OutputFormat,
    pub rows: usize,
    pub length: usize,
    #[serde(flatten)]
    pub moments: Moments,
    pub sampled_rows: Vec<RowSummary>,
    /// Most frequent strongest peak across the sampled rows.
    pub modal_top_peak_bin: Option<usize>,
}

/// Evenly spaced row indices, first and last included.
fn sample_rows(total: usize, wanted: usize) -> Vec<usize> {
    match wanted.min(total) {
        0 => Vec::new(),
        1 => vec![0],
        k => (0..k).map(|i| i * (total - 1) / (k - 1)).collect(),
    }
}

pub fn summarize(bytes: &[u8], wanted_rows: usize) -> anyhow::Result<Summary> {
    let format = detect_format(bytes)?;
    let series = decode_series(bytes)?;
    if series.rows == 0 || series.len == 0 {
        anyhow::bail!("file holds no values");
    }
    let sampled_rows: Vec<RowSummary> = sample_rows(series.rows, wanted_rows)
        .into_iter()
        .map(|r| {
            let row = series.row(r);
            let x: Vec<f64> = row.iter().map(|&v| f64::from(v)).collect();
            let power = periodogram(&x);
            let top_peaks = top_peaks(&power, 3)
                .into_iter()
                .map(|bin| Peak {
                    bin,
                    period: series.len as f64 / bin as f64,
                    power: power[bin],
                })
                .collect();
            RowSummary {
                row: r,
                moments: Moments::of(row),
                top_peaks,
            }
        })
        .collect();
    let mut counts = std::collections::BTreeMap::<usize, usize>::new();
    for r in &sampled_rows {
        if let Some(p) = r.top_peaks.first() {
            *counts.entry(p.bin).or_default() += 1;
        }
    }
    // ties go to the lowest bin
    let modal_top_peak_bin = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&bin, _)| bin);
    Ok(Summary {
        format,
        rows: series.rows,
        length: series.len,
        moments: Moments::of(&series.values),
        sampled_rows,
        modal_top_peak_bin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use sarsim::format::{write_f32s, write_series_header};

    #[test]
    fn evenly_spaced_rows() {
        assert_eq!(sample_rows(10, 3), vec![0, 4, 9]);
        assert_eq!(sample_rows(2, 8), vec![0, 1]);
        assert!(sample_rows(5, 0).is_empty());
    }

    #[test]
    fn all_zero_payload() {
        let mut bytes = Vec::new();
        write_series_header(&mut bytes, 3, 16).unwrap();
        write_f32s(&mut bytes, &[0.0; 48]).unwrap();
        let s = summarize(&bytes, 2).unwrap();
        assert_eq!((s.rows, s.length), (3, 16));
        assert_eq!(s.moments.zero_fraction, 1.0);
        assert_eq!(s.moments.variance, 0.0);
    }

    #[test]
    fn tone_peak() {
        let len = 240;
        let row: Vec<f32> = (0..len)
            .map(|t| (2.0 * std::f32::consts::PI * t as f32 / 24.0).sin())
            .collect();
        let mut csv = Vec::new();
        sarsim::format::write_csv_rows(&mut csv, &row, len).unwrap();
        let s = summarize(&csv, 1).unwrap();
        assert_eq!(s.format, OutputFormat::Csv);
        assert_eq!(s.modal_top_peak_bin, Some(10));
        assert!((s.sampled_rows[0].top_peaks[0].period - 24.0).abs() < 1e-9);
    }
}
