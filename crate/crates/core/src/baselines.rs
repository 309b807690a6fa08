//! Reference implementations of two competing synthetic generators, an ETS
//! style generator (ForecastPFN) and a Gaussian-process kernel composer
//! (KernelSynth), plus a timing harness comparing them with SarSim.

use std::f64::consts::{LN_2, PI, TAU};
use std::fmt;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::SimulatorConfig;
use crate::error::{param, Error, Result};
use crate::pipeline::generate_batch;
use crate::rng::{Stream, StreamKey};

pub const P_WEEK: f64 = 7.0;
pub const P_MONTH: f64 = 30.5;
pub const P_YEAR: f64 = 365.25;

/// Fourier seasonality at one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalComponent {
    pub period: f64,
    pub amplitude: f64,
    /// Sine coefficients for harmonics `1..=floor(period / 2)`.
    pub sin: Vec<f64>,
    pub cos: Vec<f64>,
}

impl SeasonalComponent {
    pub fn harmonics(period: f64) -> usize {
        (period / 2.0).floor() as usize
    }

    /// `Σ_f (c_f² + d_f²)`.
    pub fn energy(&self) -> f64 {
        self.sin.iter().chain(&self.cos).map(|v| v * v).sum()
    }

    pub fn value(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (f, (c, d)) in self.sin.iter().zip(&self.cos).enumerate() {
            let arg = TAU * (f + 1) as f64 * t / self.period;
            acc += c * arg.sin() + d * arg.cos();
        }
        1.0 + self.amplitude * acc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastPfnSpec {
    pub m_lin: f64,
    pub c_lin: f64,
    pub m_exp: f64,
    pub c_exp: f64,
    /// Week, month and year components, in that order.
    pub seasonal: Vec<SeasonalComponent>,
    pub m_noise: f64,
    /// Weibull shape `k`.
    pub weibull_shape: f64,
}

/// Prior widths for [`sample_forecastpfn_spec`]. Trend parameters are
/// Gaussian; the remaining widths are free choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastPfnPriors {
    pub lin_slope_sd: f64,
    pub lin_offset_sd: f64,
    pub exp_scale_mean: f64,
    pub exp_scale_sd: f64,
    pub exp_base_sd: f64,
    pub amplitude_sd: f64,
    pub noise_max: f64,
    pub weibull_shape: [f64; 2],
}

impl Default for ForecastPfnPriors {
    fn default() -> Self {
        Self {
            lin_slope_sd: 0.001,
            lin_offset_sd: 0.1,
            exp_scale_mean: 1.0,
            exp_scale_sd: 0.1,
            exp_base_sd: 0.0005,
            amplitude_sd: 0.3,
            noise_max: 0.3,
            weibull_shape: [1.0, 5.0],
        }
    }
}

fn sample_component(stream: &mut Stream, period: f64, amplitude: f64) -> Result<SeasonalComponent> {
    let h = SeasonalComponent::harmonics(period);
    let mut sin = Vec::with_capacity(h);
    let mut cos = Vec::with_capacity(h);
    for f in 1..=h {
        let sd = (1.0 / f as f64).sqrt();
        sin.push(stream.normal(0.0, sd)?);
        cos.push(stream.normal(0.0, sd)?);
    }
    let mut comp = SeasonalComponent {
        period,
        amplitude,
        sin,
        cos,
    };
    let norm = comp.energy().sqrt();
    if norm > 0.0 {
        comp.sin.iter_mut().chain(comp.cos.iter_mut()).for_each(|v| *v /= norm);
    }
    Ok(comp)
}

pub fn sample_forecastpfn_spec(stream: &mut Stream, priors: &ForecastPfnPriors) -> Result<ForecastPfnSpec> {
    let m_lin = stream.normal(0.0, priors.lin_slope_sd)?;
    let c_lin = stream.normal(0.0, priors.lin_offset_sd)?;
    let m_exp = stream.normal(priors.exp_scale_mean, priors.exp_scale_sd)?;
    let c_exp = stream.normal(1.0, priors.exp_base_sd)?;
    let mut seasonal = Vec::with_capacity(3);
    for period in [P_WEEK, P_MONTH, P_YEAR] {
        let amplitude = stream.normal(0.0, priors.amplitude_sd)?;
        seasonal.push(sample_component(stream, period, amplitude)?);
    }
    Ok(ForecastPfnSpec {
        m_lin,
        c_lin,
        m_exp,
        c_exp,
        seasonal,
        m_noise: stream.uniform(0.0, priors.noise_max)?,
        weibull_shape: stream.uniform(priors.weibull_shape[0], priors.weibull_shape[1])?,
    })
}

impl ForecastPfnSpec {
    pub fn trend(&self, t: f64) -> f64 {
        (1.0 + self.m_lin * t + self.c_lin) * (self.m_exp * self.c_exp.powf(t))
    }

    pub fn seasonal(&self, t: f64) -> f64 {
        self.seasonal.iter().map(|c| c.value(t)).product()
    }

    /// Noise-free path `ψ(t) = trend(t) seasonal(t)`.
    pub fn psi(&self, t: f64) -> f64 {
        self.trend(t) * self.seasonal(t)
    }
}

/// `y_t = ψ(t) z_t` for `t = 0..len`, with `z_t = 1 + m_noise (z - (ln 2)^{1/k})`
/// and `z ~ Weibull(1, k)`. The Weibull draw is skipped when `m_noise = 0`.
pub fn forecastpfn_generate(stream: &mut Stream, spec: &ForecastPfnSpec, len: usize) -> Result<Vec<f64>> {
    if len == 0 {
        return param("series length must be >= 1");
    }
    let k = spec.weibull_shape;
    let median = LN_2.powf(1.0 / k);
    (0..len)
        .map(|t| {
            let psi = spec.psi(t as f64);
            if spec.m_noise == 0.0 {
                return Ok(psi);
            }
            let z = stream.weibull(1.0, k)?;
            Ok(psi * (1.0 + spec.m_noise * (z - median)))
        })
        .collect()
}

/// Periods of the periodic atoms, in samples; divided by the length on a unit grid.
pub const KERNEL_PERIODS: [f64; 12] = [4.0, 6.0, 12.0, 24.0, 26.0, 30.0, 48.0, 52.0, 60.0, 96.0, 365.0, 730.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelAtom {
    Constant { variance: f64 },
    White { variance: f64 },
    Linear { variance: f64 },
    Rbf { length_scale: f64 },
    RationalQuadratic { length_scale: f64, alpha: f64 },
    Periodic { period: f64, length_scale: f64 },
}

impl KernelAtom {
    pub fn eval(&self, t: f64, u: f64) -> f64 {
        let d = t - u;
        match *self {
            KernelAtom::Constant { variance } => variance,
            KernelAtom::White { variance } => {
                if d == 0.0 {
                    variance
                } else {
                    0.0
                }
            }
            KernelAtom::Linear { variance } => variance * t * u,
            KernelAtom::Rbf { length_scale } => (-d * d / (2.0 * length_scale * length_scale)).exp(),
            KernelAtom::RationalQuadratic { length_scale, alpha } => {
                (1.0 + d * d / (2.0 * alpha * length_scale * length_scale)).powf(-alpha)
            }
            KernelAtom::Periodic { period, length_scale } => {
                let s = (PI * d / period).sin();
                (-2.0 * s * s / (length_scale * length_scale)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelExpr {
    Atom(KernelAtom),
    Sum(Box<KernelExpr>, Box<KernelExpr>),
    Product(Box<KernelExpr>, Box<KernelExpr>),
}

impl KernelExpr {
    pub fn eval(&self, t: f64, u: f64) -> f64 {
        match self {
            KernelExpr::Atom(a) => a.eval(t, u),
            KernelExpr::Sum(a, b) => a.eval(t, u) + b.eval(t, u),
            KernelExpr::Product(a, b) => a.eval(t, u) * b.eval(t, u),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            KernelExpr::Atom(_) => 1,
            KernelExpr::Sum(a, b) | KernelExpr::Product(a, b) => a.leaves() + b.leaves(),
        }
    }

    /// Covariance on the grid `t_i = i / n`.
    pub fn covariance(&self, n: usize) -> DMatrix<f64> {
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let mut k = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = self.eval(grid[i], grid[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

/// Atom hyperparameters. The source leaves them open; all default to unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelBank {
    pub variance: f64,
    pub length_scale: f64,
    pub alpha: f64,
    pub periodic_length_scale: f64,
    pub periods: Vec<f64>,
    /// Maximum number of atoms `J`.
    pub max_atoms: usize,
}

impl Default for KernelBank {
    fn default() -> Self {
        Self {
            variance: 1.0,
            length_scale: 1.0,
            alpha: 1.0,
            periodic_length_scale: 1.0,
            periods: KERNEL_PERIODS.to_vec(),
            max_atoms: 5,
        }
    }
}

impl KernelBank {
    fn sample_atom(&self, stream: &mut Stream, n: usize) -> KernelAtom {
        match stream.int_inclusive(0, 5) {
            0 => KernelAtom::Constant {
                variance: self.variance,
            },
            1 => KernelAtom::White {
                variance: self.variance,
            },
            2 => KernelAtom::Linear {
                variance: self.variance,
            },
            3 => KernelAtom::Rbf {
                length_scale: self.length_scale,
            },
            4 => KernelAtom::RationalQuadratic {
                length_scale: self.length_scale,
                alpha: self.alpha,
            },
            _ => KernelAtom::Periodic {
                period: self.periods[stream.int_inclusive(0, self.periods.len() - 1)] / n as f64,
                length_scale: self.periodic_length_scale,
            },
        }
    }
}

/// Draws `j ~ U{1..J}` atoms and left-folds them with random `+` / `×`.
pub fn sample_kernel(stream: &mut Stream, bank: &KernelBank, n: usize) -> Result<KernelExpr> {
    if bank.max_atoms == 0 || bank.periods.is_empty() {
        return param("kernel bank needs at least one atom and one period");
    }
    let j = stream.int_inclusive(1, bank.max_atoms);
    let mut expr = KernelExpr::Atom(bank.sample_atom(stream, n));
    for _ in 1..j {
        let next = Box::new(KernelExpr::Atom(bank.sample_atom(stream, n)));
        expr = if stream.coin(0.5) {
            KernelExpr::Sum(Box::new(expr), next)
        } else {
            KernelExpr::Product(Box::new(expr), next)
        };
    }
    Ok(expr)
}

/// Cholesky factor of `K + δI`, with `δ` doubling from `1e-10` to at most
/// `1e-4` times the mean diagonal.
pub fn jittered_cholesky(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = k.nrows();
    let scale = (k.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut jitter = 1e-10 * scale;
    while jitter <= 1e-4 * scale * (1.0 + 1e-12) {
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = m.cholesky() {
            return Ok(ch.unpack());
        }
        jitter *= 2.0;
    }
    Err(Error::Generation {
        attempts: 1,
        reason: "covariance not positive definite at maximum jitter".into(),
        recipe: None,
    })
}

/// Draws one path `x ~ N(0, K)` of length `n` for the given kernel.
pub fn kernelsynth_path(stream: &mut Stream, kernel: &KernelExpr, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return param("series length must be >= 1");
    }
    let l = jittered_cholesky(&kernel.covariance(n))?;
    let mut z = vec![0.0; n];
    stream.fill_standard_normal(&mut z);
    let x = l * nalgebra::DVector::from_vec(z);
    Ok(x.iter().copied().collect())
}

/// Samples a kernel composition and draws one path from it.
pub fn kernelsynth_generate(stream: &mut Stream, bank: &KernelBank, n: usize) -> Result<Vec<f64>> {
    let kernel = sample_kernel(stream, bank, n)?;
    kernelsynth_path(stream, &kernel, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Sarsim,
    Forecastpfn,
    Kernelsynth,
}

impl Generator {
    pub fn name(&self) -> &'static str {
        match self {
            Generator::Sarsim => "sarsim",
            Generator::Forecastpfn => "forecastpfn",
            Generator::Kernelsynth => "kernelsynth",
        }
    }
}

impl std::str::FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sarsim" => Ok(Generator::Sarsim),
            "forecastpfn" => Ok(Generator::Forecastpfn),
            "kernelsynth" => Ok(Generator::Kernelsynth),
            other => Err(Error::Parameter(format!("unknown generator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub generator: Generator,
    pub length: usize,
    pub series: usize,
    pub seconds: f64,
}

impl BenchRow {
    pub fn per_series(&self) -> f64 {
        self.seconds / self.series as f64
    }

    pub fn series_per_second(&self) -> f64 {
        self.series as f64 / self.seconds
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, generator: Generator, length: usize) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.generator == generator && r.length == length)
    }

    /// Per-series time of `other` divided by that of SarSim.
    pub fn speedup(&self, other: Generator, length: usize) -> Option<f64> {
        let base = self.row(Generator::Sarsim, length)?;
        Some(self.row(other, length)?.per_series() / base.per_series())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("generator,length,series,seconds,per_series_s,series_per_s,speedup_vs_sarsim\n");
        for r in &self.rows {
            let speedup = self
                .speedup(r.generator, r.length)
                .map_or(String::new(), |v| format!("{v:.3}"));
            out.push_str(&format!(
                "{},{},{},{:.6},{:.9},{:.1},{}\n",
                r.generator.name(),
                r.length,
                r.series,
                r.seconds,
                r.per_series(),
                r.series_per_second(),
                speedup
            ));
        }
        out
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12} {:>7} {:>8} {:>14} {:>14} {:>10}",
            "generator", "length", "series", "us/series", "series/s", "speedup"
        )?;
        for r in &self.rows {
            let speedup = self
                .speedup(r.generator, r.length)
                .map_or("-".to_string(), |v| format!("{v:.1}x"));
            writeln!(
                f,
                "{:<12} {:>7} {:>8} {:>14.2} {:>14.1} {:>10}",
                r.generator.name(),
                r.length,
                r.series,
                r.per_series() * 1e6,
                r.series_per_second(),
                speedup
            )?;
        }
        Ok(())
    }
}

/// Times `count` series of length `len` from one generator on the calling thread.
pub fn time_generator(generator: Generator, len: usize, count: usize, seed: u64) -> Result<BenchRow> {
    if count == 0 {
        return param("bench count must be >= 1");
    }
    let start = Instant::now();
    let series = match generator {
        Generator::Sarsim => {
            let mut cfg = SimulatorConfig::default().with_sequence_length(len);
            cfg.batch_size = count.min(cfg.batch_size);
            let batches = count.div_ceil(cfg.batch_size);
            for b in 0..batches {
                std::hint::black_box(generate_batch(seed, b as u64, &cfg)?);
            }
            batches * cfg.batch_size
        }
        Generator::Forecastpfn => {
            let priors = ForecastPfnPriors::default();
            for i in 0..count {
                let mut s = StreamKey::with_lane(seed, &[i as u64]).stream();
                let spec = sample_forecastpfn_spec(&mut s, &priors)?;
                std::hint::black_box(forecastpfn_generate(&mut s, &spec, len)?);
            }
            count
        }
        Generator::Kernelsynth => {
            let bank = KernelBank::default();
            for i in 0..count {
                let mut s = StreamKey::with_lane(seed, &[i as u64]).stream();
                std::hint::black_box(kernelsynth_generate(&mut s, &bank, len)?);
            }
            count
        }
    };
    Ok(BenchRow {
        generator,
        length: len,
        series,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Times each generator at each length on a single worker thread.
pub fn bench_compare(generators: &[Generator], lengths: &[usize], count: usize, seed: u64) -> Result<BenchReport> {
    if generators.is_empty() {
        return param("no generators selected");
    }
    if count == 0 {
        return param("bench count must be >= 1");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    let mut rows = Vec::new();
    for &len in lengths {
        for &g in generators {
            rows.push(pool.install(|| time_generator(g, len, count, seed))?);
        }
    }
    Ok(BenchReport { rows })
}
