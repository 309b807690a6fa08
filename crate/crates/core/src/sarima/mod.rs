//! Stable SARIMA specifications and batched trajectory unrolling.
//!
//! Unrolling follows the time-domain recursion
//!
//! ```text
//! y_t = Σ φ_i y_{t-i} + Σ Φ_j y_{t-js} + Σ ϑ_i ε_{t-i} + Σ Θ_j ε_{t-js} + ε_t
//! ```
//!
//! started after a Gaussian warmup of length `w`, followed by the seasonal
//! integrator (when `D = 1`) and the fractional integrator of order `d'`.

mod integrate;

pub use integrate::{
    apply_fractional_integration, default_taps, frac_diff_filter, integrate, FractionalIntegrator, IntegrationMode,
    MAX_FIR_TAPS,
};

use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimulatorConfig;
use crate::error::{param, Error, Result};
use crate::polyroots::{expand, sample_pole_set, verify_stability, Convention, LagPolynomial};
use crate::rng::{Stream, StreamKey};

/// Rows unrolled together in one time-major block.
const LANES: usize = 8;

/// Default magnitude beyond which a trajectory counts as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// A fully resolved SARIMA parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaSpec {
    /// Seasonal period `s`; values `<= 1` mean no seasonality.
    pub season: usize,
    /// Fractional (nonseasonal) integration order `d'` in `[0, 1]`.
    pub frac_order: f64,
    /// Seasonal integration order `D` in `{0, 1}`.
    pub seasonal_integration: u8,
    pub ar: LagPolynomial,
    pub ma: LagPolynomial,
    pub seasonal_ar: LagPolynomial,
    pub seasonal_ma: LagPolynomial,
    pub innovation_sigma: f64,
}

impl SarimaSpec {
    /// Gaussian white noise with no integration.
    pub fn white_noise() -> Self {
        Self {
            season: 0,
            frac_order: 0.0,
            seasonal_integration: 0,
            ar: LagPolynomial::empty(Convention::Ar),
            ma: LagPolynomial::empty(Convention::Ma),
            seasonal_ar: LagPolynomial::empty(Convention::Ar),
            seasonal_ma: LagPolynomial::empty(Convention::Ma),
            innovation_sigma: 1.0,
        }
    }

    pub fn p(&self) -> usize {
        self.ar.order()
    }

    pub fn q(&self) -> usize {
        self.ma.order()
    }

    pub fn seasonal_p(&self) -> usize {
        self.seasonal_ar.order()
    }

    pub fn seasonal_q(&self) -> usize {
        self.seasonal_ma.order()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ar.convention != Convention::Ar
            || self.seasonal_ar.convention != Convention::Ar
            || self.ma.convention != Convention::Ma
            || self.seasonal_ma.convention != Convention::Ma
        {
            return param("SARIMA polynomials carry the wrong sign convention");
        }
        if self.p() > 0 && self.seasonal_p() > 0 {
            return param("AR and seasonal AR parts cannot both be active");
        }
        if self.season <= 1 && (self.seasonal_p() > 0 || self.seasonal_q() > 0 || self.seasonal_integration > 0) {
            return param(format!(
                "season {} admits no seasonal terms or seasonal integration",
                self.season
            ));
        }
        if self.seasonal_integration > 1 {
            return param("seasonal integration order must be 0 or 1");
        }
        if !(0.0..=1.0).contains(&self.frac_order) {
            return param(format!("fractional order {} outside [0, 1]", self.frac_order));
        }
        if !(self.innovation_sigma > 0.0 && self.innovation_sigma.is_finite()) {
            return param("innovation sigma must be positive");
        }
        Ok(())
    }

    /// Checks the AR polynomial against `ar_bound` and the seasonal AR
    /// polynomial (in `z = L^s`) against `seasonal_bound`.
    pub fn is_stable(&self, ar_bound: f64, seasonal_bound: f64) -> bool {
        verify_stability(&self.ar, ar_bound) && verify_stability(&self.seasonal_ar, seasonal_bound)
    }
}

/// `B × T` trajectories sharing one spec, row `b` drawn from lane `stream_key ++ [b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesBatch {
    pub data: Array2<f64>,
    pub spec: SarimaSpec,
    pub stream_key: StreamKey,
}

impl SeriesBatch {
    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Drops the first `n` time steps of every row.
    pub fn trim_front(&mut self, n: usize) {
        let n = n.min(self.len());
        self.data = self.data.slice(s![.., n..]).to_owned();
    }

    /// Applies an integrator pass to every row.
    pub fn integrate(&mut self, mode: IntegrationMode) -> Result<()> {
        for mut row in self.data.rows_mut() {
            let row = row.as_slice_mut().expect("standard layout");
            integrate(row, mode)?;
        }
        Ok(())
    }

    /// Applies fractional integration of order `d` to every row.
    pub fn apply_fractional_integration(&mut self, d: f64, taps: usize) -> Result<()> {
        let integrator = FractionalIntegrator::new(d, self.len(), taps)?;
        for mut row in self.data.rows_mut() {
            integrator.apply(row.as_slice_mut().expect("standard layout"))?;
        }
        Ok(())
    }
}

/// Draws a SARIMA spec with the season drawn uniformly from `0..=season_max`.
pub fn sample_spec(stream: &mut Stream, config: &SimulatorConfig) -> Result<SarimaSpec> {
    let season = stream.int_inclusive(0, config.season_max);
    sample_spec_with_season(stream, config, season)
}

/// Draws a SARIMA spec for a fixed seasonal period.
///
/// Orders are uniform on `0..=max`; a fair coin then zeroes either the AR or
/// the seasonal AR order, so the AR side never mixes the two. Poles are drawn
/// inside the configured radii and expanded into coefficients. The seasonal
/// integrator is switched on whenever `season > 1`.
pub fn sample_spec_with_season(stream: &mut Stream, config: &SimulatorConfig, season: usize) -> Result<SarimaSpec> {
    let m = &config.orders;
    let mut p = stream.int_inclusive(0, m.ar);
    let q = stream.int_inclusive(0, m.ma);
    let mut big_p = stream.int_inclusive(0, m.seasonal_ar);
    let mut big_q = stream.int_inclusive(0, m.seasonal_ma);
    if stream.coin(0.5) {
        p = 0;
    } else {
        big_p = 0;
    }
    if season <= 1 {
        big_p = 0;
        big_q = 0;
    }
    let frac_order = stream.uniform(config.frac_order.lo, config.frac_order.hi)?;

    let ar = expand(&sample_pole_set(stream, p, config.ar_radius_max)?, Convention::Ar)?;
    let ma = expand(&sample_pole_set(stream, q, config.ma_radius_max)?, Convention::Ma)?;
    let seasonal_ar = expand(
        &sample_pole_set(stream, big_p, config.seasonal_ar_radius_max)?,
        Convention::Ar,
    )?;
    let seasonal_ma = expand(&sample_pole_set(stream, big_q, config.ma_radius_max)?, Convention::Ma)?;

    Ok(SarimaSpec {
        season,
        frac_order,
        seasonal_integration: u8::from(season > 1),
        ar,
        ma,
        seasonal_ar,
        seasonal_ma,
        innovation_sigma: 1.0,
    })
}

/// `w = max(p, q, P·s, Q·s, d + D·s)` with the integer order `d` taken as 1.
pub fn warmup_length(spec: &SarimaSpec) -> usize {
    let s = spec.season;
    [
        spec.p(),
        spec.q(),
        spec.seasonal_p() * s,
        spec.seasonal_q() * s,
        1 + spec.seasonal_integration as usize * s,
    ]
    .into_iter()
    .max()
    .unwrap_or(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnrollOptions {
    /// Fractional filter length cap; the effective length is `min(len, fir_taps)`.
    pub fir_taps: usize,
    pub divergence_limit: f64,
    /// Whether to apply the seasonal and fractional integrators.
    pub integrate: bool,
}

impl Default for UnrollOptions {
    fn default() -> Self {
        Self {
            fir_taps: MAX_FIR_TAPS,
            divergence_limit: DIVERGENCE_LIMIT,
            integrate: true,
        }
    }
}

/// Lagged terms of the recursion in summation order.
struct Terms {
    output: Vec<(usize, f64)>,
    innovation: Vec<(usize, f64)>,
}

impl Terms {
    fn new(spec: &SarimaSpec) -> Self {
        let s = spec.season;
        fn lagged(poly: &LagPolynomial, step: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
            poly.coefficients
                .iter()
                .enumerate()
                .map(move |(i, &c)| ((i + 1) * step, c))
        }
        Self {
            output: lagged(&spec.ar, 1).chain(lagged(&spec.seasonal_ar, s)).collect(),
            innovation: lagged(&spec.ma, 1).chain(lagged(&spec.seasonal_ma, s)).collect(),
        }
    }
}

fn check_finite(row: &[f64], limit: f64) -> Result<()> {
    match row.iter().position(|v| !v.is_finite() || v.abs() > limit) {
        Some(t) => Err(Error::Divergence { t, value: row[t] }),
        None => Ok(()),
    }
}

/// Unrolls a block of up to `LANES` rows time-major and writes them row-major
/// into `out`.
fn unroll_block(spec: &SarimaSpec, terms: &Terms, key: &StreamKey, first_row: usize, len: usize, out: &mut [f64]) {
    let rows = out.len() / len;
    let w = warmup_length(spec).min(len);
    let sigma = spec.innovation_sigma;
    let mut y = vec![[0.0f64; LANES]; len];
    let mut e = vec![[0.0f64; LANES]; len];

    for lane in 0..rows {
        let mut stream = key.child((first_row + lane) as u64).stream();
        for slot in y.iter_mut().take(w) {
            slot[lane] = sigma * stream.standard_normal();
        }
        for slot in e.iter_mut() {
            slot[lane] = sigma * stream.standard_normal();
        }
    }

    for t in w..len {
        let mut acc = [0.0f64; LANES];
        for &(lag, c) in &terms.output {
            let src = &y[t - lag];
            for l in 0..LANES {
                acc[l] += c * src[l];
            }
        }
        for &(lag, c) in &terms.innovation {
            let src = &e[t - lag];
            for l in 0..LANES {
                acc[l] += c * src[l];
            }
        }
        let eps = &e[t];
        for l in 0..LANES {
            acc[l] += eps[l];
        }
        y[t] = acc;
    }

    for (lane, row) in out.chunks_exact_mut(len).enumerate() {
        for (dst, src) in row.iter_mut().zip(&y) {
            *dst = src[lane];
        }
    }
}

/// Unrolls `rows` trajectories of length `len` (warmup included) with the
/// default options.
pub fn unroll(spec: &SarimaSpec, key: &StreamKey, rows: usize, len: usize) -> Result<SeriesBatch> {
    unroll_with(spec, key, rows, len, &UnrollOptions::default())
}

/// Unrolls `rows` trajectories of length `len`.
///
/// Each row draws, from its own lane, the warmup states `y_{1:w}`, then the
/// innovations `ε_{1:len}`, all `N(0, σ²)`. The recursion sums the AR terms,
/// seasonal AR terms, MA terms and seasonal MA terms in that order, then adds
/// `ε_t`. Any non-finite value or magnitude above the divergence limit aborts
/// the whole batch with [`Error::Divergence`].
pub fn unroll_with(
    spec: &SarimaSpec,
    key: &StreamKey,
    rows: usize,
    len: usize,
    opts: &UnrollOptions,
) -> Result<SeriesBatch> {
    spec.validate()?;
    if rows == 0 {
        return param("batch needs at least one row");
    }
    let w = warmup_length(spec);
    if len <= w {
        return Err(Error::Length(format!("series length {len} must exceed warmup {w}")));
    }
    let terms = Terms::new(spec);
    let integrator = if opts.integrate {
        Some(FractionalIntegrator::new(
            spec.frac_order,
            len,
            opts.fir_taps.min(len).max(1),
        )?)
    } else {
        None
    };
    let seasonal = opts.integrate && spec.seasonal_integration == 1;

    let mut data = vec![0.0f64; rows * len];
    data.par_chunks_mut(LANES * len)
        .enumerate()
        .try_for_each(|(block, out)| -> Result<()> {
            unroll_block(spec, &terms, key, block * LANES, len, out);
            for row in out.chunks_exact_mut(len) {
                check_finite(row, opts.divergence_limit)?;
                if seasonal {
                    integrate(row, IntegrationMode::Seasonal(spec.season))?;
                }
            }
            if let Some(integrator) = &integrator {
                // rows go through the transform two at a time
                let mut rows = out.chunks_exact_mut(len);
                while let Some(a) = rows.next() {
                    match rows.next() {
                        Some(b) => {
                            integrator.apply_pair(a, b)?;
                            check_finite(b, opts.divergence_limit)?;
                        }
                        None => integrator.apply(a)?,
                    }
                    check_finite(a, opts.divergence_limit)?;
                }
            }
            Ok(())
        })?;

    let data = Array2::from_shape_vec((rows, len), data).expect("shape matches buffer");
    Ok(SeriesBatch {
        data,
        spec: spec.clone(),
        stream_key: key.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acf(x: &[f64], lag: usize) -> f64 {
        let n = x.len();
        let m = x.iter().sum::<f64>() / n as f64;
        let var: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
        let cov: f64 = (lag..n).map(|t| (x[t] - m) * (x[t - lag] - m)).sum();
        cov / var
    }

    #[test]
    fn warmup_examples() {
        let mut spec = SarimaSpec::white_noise();
        assert_eq!(warmup_length(&spec), 1);
        spec.ar = LagPolynomial::new(vec![0.0; 10], Convention::Ar);
        assert_eq!(warmup_length(&spec), 10);
        spec.ar = LagPolynomial::empty(Convention::Ar);
        spec.season = 24;
        spec.seasonal_integration = 1;
        spec.seasonal_ar = LagPolynomial::new(vec![0.01, 0.0], Convention::Ar);
        assert!(warmup_length(&spec) >= 48);
    }

    #[test]
    fn zero_maxima_give_white_noise_plus_integrators() {
        let cfg = SimulatorConfig {
            orders: crate::config::OrderMaxima {
                ar: 0,
                ma: 0,
                seasonal_ar: 0,
                seasonal_ma: 0,
            },
            ..SimulatorConfig::default()
        };
        let mut s = StreamKey::new(5).stream();
        for _ in 0..100 {
            let spec = sample_spec(&mut s, &cfg).unwrap();
            assert_eq!((spec.p(), spec.q(), spec.seasonal_p(), spec.seasonal_q()), (0, 0, 0, 0));
            assert_eq!(spec.seasonal_integration, u8::from(spec.season > 1));
        }
    }

    #[test]
    fn mixture_rule_and_invariants() {
        let cfg = SimulatorConfig::default();
        let mut s = StreamKey::new(6).stream();
        for _ in 0..10_000 {
            let spec = sample_spec(&mut s, &cfg).unwrap();
            assert!(!(spec.p() > 0 && spec.seasonal_p() > 0));
            assert!(spec.p() <= 10 && spec.q() <= 3 && spec.seasonal_p() <= 2 && spec.seasonal_q() <= 2);
            assert!(spec.season <= 52);
            spec.validate().unwrap();
        }
    }

    #[test]
    fn white_noise_rows() {
        let key = StreamKey::new(7);
        let spec = SarimaSpec::white_noise();
        let opts = UnrollOptions {
            integrate: false,
            ..Default::default()
        };
        let b = unroll_with(&spec, &key, 1, 100_000, &opts).unwrap();
        let row = b.data.row(0).to_vec();
        assert!(acf(&row, 1).abs() < 0.01);
        let var = row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64;
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn ar1_and_ma1_autocorrelation() {
        let key = StreamKey::new(8);
        let opts = UnrollOptions {
            integrate: false,
            ..Default::default()
        };
        let mut spec = SarimaSpec::white_noise();
        spec.ar = LagPolynomial::new(vec![0.8], Convention::Ar);
        let b = unroll_with(&spec, &key, 1, 100_000, &opts).unwrap();
        let r = acf(b.data.row(0).as_slice().unwrap(), 1);
        assert!((r - 0.8).abs() < 0.02, "ar1 {r}");

        let mut spec = SarimaSpec::white_noise();
        spec.ma = LagPolynomial::new(vec![0.5], Convention::Ma);
        let b = unroll_with(&spec, &key, 1, 100_000, &opts).unwrap();
        let row = b.data.row(0).to_vec();
        assert!((acf(&row, 1) - 0.4).abs() < 0.02);
        assert!(acf(&row, 2).abs() < 0.02);
        assert!(acf(&row, 3).abs() < 0.02);
    }

    #[test]
    fn rows_use_their_own_lanes() {
        let key = StreamKey::with_lane(9, &[3]);
        let spec = SarimaSpec::white_noise();
        let big = unroll(&spec, &key, 11, 64).unwrap();
        let small = unroll(&spec, &key, 3, 64).unwrap();
        for r in 0..3 {
            assert_eq!(big.data.row(r), small.data.row(r));
        }
        assert_ne!(big.data.row(0), big.data.row(1));
    }

    #[test]
    fn length_and_row_errors() {
        let spec = SarimaSpec::white_noise();
        let key = StreamKey::new(1);
        assert!(matches!(unroll(&spec, &key, 1, 1), Err(Error::Length(_))));
        assert!(unroll(&spec, &key, 0, 10).is_err());
    }

    #[test]
    fn divergence_detected() {
        let mut spec = SarimaSpec::white_noise();
        spec.ar = LagPolynomial::new(vec![1.5], Convention::Ar);
        let r = unroll(&spec, &StreamKey::new(2), 2, 2000);
        assert!(matches!(r, Err(Error::Divergence { .. })));
    }

    #[test]
    fn trim_front_drops_columns() {
        let spec = SarimaSpec::white_noise();
        let mut b = unroll(&spec, &StreamKey::new(3), 2, 20).unwrap();
        let tail = b.data.slice(s![.., 5..]).to_owned();
        b.trim_front(5);
        assert_eq!(b.data, tail);
    }
}
