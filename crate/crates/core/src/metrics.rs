//! Forecast evaluation: pinball loss, multi-horizon multi-quantile loss,
//! quantile-averaged CRPS, scaled CRPS, MASE and cross-dataset aggregation.

use ndarray::Array2;

use crate::error::{param, Error, Result};

/// Default quantile grid.
pub const DECILES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// `H × Q` matrix of predicted quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileForecast {
    levels: Vec<f64>,
    values: Array2<f64>,
}

impl QuantileForecast {
    pub fn new(levels: Vec<f64>, values: Array2<f64>) -> Result<Self> {
        if levels.is_empty() {
            return param("quantile grid is empty");
        }
        if levels.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return param("quantile levels must lie strictly inside (0, 1)");
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return param("quantile levels must be strictly increasing");
        }
        if values.ncols() != levels.len() {
            return param(format!(
                "forecast has {} columns for {} levels",
                values.ncols(),
                levels.len()
            ));
        }
        Ok(Self { levels, values })
    }

    /// Same value at every level (a point forecast).
    pub fn degenerate(levels: Vec<f64>, point: &[f64]) -> Result<Self> {
        let q = levels.len();
        let values = Array2::from_shape_fn((point.len(), q), |(h, _)| point[h]);
        Self::new(levels, values)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn horizon(&self) -> usize {
        self.values.nrows()
    }

    /// Whether quantiles are nondecreasing across levels at every horizon.
    pub fn is_monotone(&self) -> bool {
        self.values
            .rows()
            .into_iter()
            .all(|r| r.iter().zip(r.iter().skip(1)).all(|(a, b)| a <= b))
    }

    /// Copy with every value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            levels: self.levels.clone(),
            values: &self.values * c,
        }
    }
}

/// Pinball loss `τ (y - ŷ)_+ + (1 - τ) (ŷ - y)_+`.
pub fn quantile_loss(y: f64, yhat: f64, tau: f64) -> f64 {
    let diff = y - yhat;
    if diff >= 0.0 {
        tau * diff
    } else {
        (tau - 1.0) * diff
    }
}

/// Mean pinball loss over all horizons and levels.
pub fn mhmq_loss(actuals: &[f64], forecast: &QuantileForecast) -> Result<f64> {
    if actuals.len() != forecast.horizon() {
        return param(format!(
            "{} actuals for a forecast of horizon {}",
            actuals.len(),
            forecast.horizon()
        ));
    }
    if actuals.is_empty() {
        return param("empty horizon");
    }
    let total: f64 = actuals
        .iter()
        .zip(forecast.values.rows())
        .map(|(&y, row)| {
            row.iter()
                .zip(&forecast.levels)
                .map(|(&yhat, &tau)| quantile_loss(y, yhat, tau))
                .sum::<f64>()
        })
        .sum();
    Ok(total / (actuals.len() * forecast.levels.len()) as f64)
}

/// Riemann approximation `(2 / Q) Σ_τ ρ_τ(y, ŷ^τ)` of the CRPS.
pub fn crps(y: f64, quantiles: &[f64], levels: &[f64]) -> Result<f64> {
    if quantiles.len() != levels.len() || levels.is_empty() {
        return param(format!("{} quantiles for {} levels", quantiles.len(), levels.len()));
    }
    let sum: f64 = quantiles
        .iter()
        .zip(levels)
        .map(|(&q, &tau)| quantile_loss(y, q, tau))
        .sum();
    Ok(2.0 * sum / levels.len() as f64)
}

/// Sum of CRPS over every horizon of one forecast.
pub fn crps_sum(actuals: &[f64], forecast: &QuantileForecast) -> Result<f64> {
    if actuals.len() != forecast.horizon() {
        return param(format!(
            "{} actuals for a forecast of horizon {}",
            actuals.len(),
            forecast.horizon()
        ));
    }
    actuals
        .iter()
        .zip(forecast.values.rows())
        .map(|(&y, row)| crps(y, row.as_slice().expect("standard layout"), &forecast.levels))
        .sum()
}

/// `Σ CRPS / Σ |y|` pooled over all series and horizons.
pub fn scrps(series: &[(&[f64], &QuantileForecast)]) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (actuals, forecast) in series {
        num += crps_sum(actuals, forecast)?;
        den += actuals.iter().map(|y| y.abs()).sum::<f64>();
    }
    if !(den > 0.0) {
        return Err(Error::Undefined("sCRPS with all-zero actuals".into()));
    }
    Ok(num / den)
}

/// Repeats the last observed season of `history` over `horizon` steps.
pub fn seasonal_naive(history: &[f64], seasonality: usize, horizon: usize) -> Result<Vec<f64>> {
    if seasonality == 0 {
        return param("seasonality must be >= 1");
    }
    if history.len() < seasonality {
        return Err(Error::Length(format!(
            "history of length {} is shorter than one season ({seasonality})",
            history.len()
        )));
    }
    let start = history.len() - seasonality;
    Ok((0..horizon).map(|h| history[start + h % seasonality]).collect())
}

/// Denominator convention for MASE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaseScaling {
    /// Absolute error of the seasonal-naive forecast over the same horizon.
    #[default]
    SeasonalNaiveForecast,
    /// Mean absolute seasonal difference of the history.
    InSample,
}

/// Actuals plus the history needed for the seasonal-naive reference.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalFrame {
    pub actuals: Vec<f64>,
    pub history: Vec<f64>,
    pub seasonality: usize,
}

impl EvalFrame {
    fn numerator_denominator(&self, forecast: &[f64], scaling: MaseScaling) -> Result<(f64, f64)> {
        if forecast.len() != self.actuals.len() {
            return param(format!(
                "{} forecasts for {} actuals",
                forecast.len(),
                self.actuals.len()
            ));
        }
        let num: f64 = self.actuals.iter().zip(forecast).map(|(y, f)| (y - f).abs()).sum();
        let den = match scaling {
            MaseScaling::SeasonalNaiveForecast => {
                let naive = seasonal_naive(&self.history, self.seasonality, self.actuals.len())?;
                self.actuals.iter().zip(&naive).map(|(y, n)| (y - n).abs()).sum()
            }
            MaseScaling::InSample => {
                let s = self.seasonality.max(1);
                if self.history.len() <= s {
                    return Err(Error::Length("history too short for in-sample scaling".into()));
                }
                let diffs: Vec<f64> = (s..self.history.len())
                    .map(|t| (self.history[t] - self.history[t - s]).abs())
                    .collect();
                diffs.iter().sum::<f64>() / diffs.len() as f64 * self.actuals.len() as f64
            }
        };
        Ok((num, den))
    }
}

/// `Σ |y - ŷ| / Σ |y - ỹ|` with `ỹ` the seasonal-naive forecast.
pub fn mase(actuals: &[f64], forecast: &[f64], history: &[f64], seasonality: usize) -> Result<f64> {
    let frame = EvalFrame {
        actuals: actuals.to_vec(),
        history: history.to_vec(),
        seasonality,
    };
    mase_pooled(&[(&frame, forecast)], MaseScaling::SeasonalNaiveForecast)
}

/// MASE pooled over several series: sums numerators and denominators.
pub fn mase_pooled(frames: &[(&EvalFrame, &[f64])], scaling: MaseScaling) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (frame, forecast) in frames {
        let (n, d) = frame.numerator_denominator(forecast, scaling)?;
        num += n;
        den += d;
    }
    if !(den > 0.0) {
        return Err(Error::Undefined("MASE with zero seasonal-naive error".into()));
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aggregation<'a> {
    /// `Σ w_i s_i / Σ w_i`.
    WeightedMean,
    /// `exp(Σ w_i ln(s_i / b_i) / Σ w_i)`.
    GeometricMeanRatio { baseline: &'a [f64] },
}

/// Combines per-dataset scores.
pub fn aggregate(scores: &[f64], weights: Option<&[f64]>, mode: Aggregation<'_>) -> Result<f64> {
    if scores.is_empty() {
        return param("no scores to aggregate");
    }
    let unit = vec![1.0; scores.len()];
    let weights = weights.unwrap_or(&unit);
    if weights.len() != scores.len() {
        return param("weights and scores differ in length");
    }
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return param("weights must be nonnegative");
    }
    let wsum: f64 = weights.iter().sum();
    if !(wsum > 0.0) {
        return param("weights sum to zero");
    }
    match mode {
        Aggregation::WeightedMean => Ok(scores.iter().zip(weights).map(|(s, w)| s * w).sum::<f64>() / wsum),
        Aggregation::GeometricMeanRatio { baseline } => {
            if baseline.len() != scores.len() {
                return param("baseline and scores differ in length");
            }
            if scores.iter().chain(baseline).any(|&v| !(v > 0.0)) {
                return param("geometric aggregation needs positive scores");
            }
            let log_mean = scores
                .iter()
                .zip(baseline)
                .zip(weights)
                .map(|((s, b), w)| w * (s / b).ln())
                .sum::<f64>()
                / wsum;
            Ok(log_mean.exp())
        }
    }
}
