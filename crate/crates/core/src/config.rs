//! Simulator configuration. Defaults reproduce the reference hyperparameter
//! schedule; every field can be overridden from a JSON document.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::noisers::NoiserFamily;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrderMaxima {
    pub ar: usize,
    pub ma: usize,
    pub seasonal_ar: usize,
    pub seasonal_ma: usize,
}

impl Default for OrderMaxima {
    fn default() -> Self {
        Self {
            ar: 10,
            ma: 3,
            seasonal_ar: 2,
            seasonal_ma: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Upsampling {
    #[default]
    Hold,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiserConfig {
    /// Families drawn uniformly.
    pub families: Vec<NoiserFamily>,
    pub poisson_rate: Bracket,
    pub gamma_rate: Bracket,
    pub gamma_shape: Bracket,
    pub gamma_power: Bracket,
    pub lognormal_rate: Bracket,
    pub lognormal_shape: Bracket,
}

impl Default for NoiserConfig {
    fn default() -> Self {
        Self {
            families: vec![
                NoiserFamily::Poisson,
                NoiserFamily::GenGamma,
                NoiserFamily::Lognormal,
                NoiserFamily::Passthrough,
            ],
            poisson_rate: Bracket::new(0.1, 100.0),
            gamma_rate: Bracket::new(0.1, 100.0),
            gamma_shape: Bracket::new(1.0, 50.0),
            gamma_power: Bracket::new(0.5, 1.5),
            lognormal_rate: Bracket::new(0.1, 5.0),
            lognormal_shape: Bracket::new(1.0, 3.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowGeometry {
    pub context: usize,
    pub horizon: usize,
    pub pad_max: usize,
}

impl Default for WindowGeometry {
    fn default() -> Self {
        Self {
            context: 4096,
            horizon: 512,
            pad_max: 4088,
        }
    }
}

impl WindowGeometry {
    pub fn total(&self) -> usize {
        self.context + self.horizon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorConfig {
    pub sequence_length: usize,
    pub batch_size: usize,
    pub orders: OrderMaxima,
    pub season_max: usize,
    pub ar_radius_max: f64,
    pub seasonal_ar_radius_max: f64,
    /// Radius bound for MA and seasonal-MA roots.
    pub ma_radius_max: f64,
    pub frac_order: Bracket,
    pub fir_taps_max: usize,
    pub seasonality_pairs: Vec<[usize; 2]>,
    pub modulation_depth: Bracket,
    pub multiplicative_probability: f64,
    pub envelope_upsampling: Upsampling,
    pub sarima2_probability: f64,
    pub noisers: NoiserConfig,
    pub window: WindowGeometry,
    /// Maximum generation attempts per batch before giving up.
    pub max_attempts: usize,
    /// Values beyond this magnitude count as divergence.
    pub divergence_limit: f64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            sequence_length: 6000,
            batch_size: 256,
            orders: OrderMaxima::default(),
            season_max: 52,
            ar_radius_max: 0.9,
            seasonal_ar_radius_max: 0.1,
            ma_radius_max: 0.9,
            frac_order: Bracket::new(0.0, 1.0),
            fir_taps_max: crate::sarima::MAX_FIR_TAPS,
            seasonality_pairs: vec![[24, 7], [7, 52], [0, 7], [0, 3], [0, 24], [0, 52]],
            modulation_depth: Bracket::new(0.0, 1.0),
            multiplicative_probability: 0.5,
            envelope_upsampling: Upsampling::Hold,
            sarima2_probability: 0.5,
            noisers: NoiserConfig::default(),
            window: WindowGeometry::default(),
            max_attempts: 32,
            divergence_limit: 1e12,
        }
    }
}

fn check_bracket(diags: &mut Vec<String>, name: &str, b: &Bracket, positive: bool) {
    if !(b.lo.is_finite() && b.hi.is_finite()) {
        diags.push(format!("{name}: bounds must be finite"));
    } else if b.lo > b.hi {
        diags.push(format!("{name}: lo ({}) exceeds hi ({})", b.lo, b.hi));
    } else if positive && b.lo <= 0.0 {
        diags.push(format!("{name}: bounds must be positive, got lo = {}", b.lo));
    }
}

fn check_probability(diags: &mut Vec<String>, name: &str, p: f64) {
    if !(0.0..=1.0).contains(&p) {
        diags.push(format!("{name}: probability must lie in [0, 1], got {p}"));
    }
}

fn check_radius(diags: &mut Vec<String>, name: &str, r: f64) {
    if !(r > 0.0 && r < 1.0) {
        diags.push(format!("{name}: radius must lie in (0, 1), got {r}"));
    }
}

impl SimulatorConfig {
    /// Parses and validates a JSON document. Missing fields take defaults,
    /// unknown fields are rejected.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("schema: {e}")]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::Config(vec![format!("schema: {e}")]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical (compact) JSON encoding.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let hash = Sha256::digest(text.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Collects every violated constraint.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut d = Vec::new();
        if self.sequence_length < 2 {
            d.push(format!("sequence_length must be >= 2, got {}", self.sequence_length));
        }
        if self.batch_size == 0 {
            d.push("batch_size must be >= 1".to_string());
        }
        check_radius(&mut d, "ar_radius_max", self.ar_radius_max);
        check_radius(&mut d, "seasonal_ar_radius_max", self.seasonal_ar_radius_max);
        check_radius(&mut d, "ma_radius_max", self.ma_radius_max);
        check_bracket(&mut d, "frac_order", &self.frac_order, false);
        if self.frac_order.lo < 0.0 || self.frac_order.hi > 1.0 {
            d.push("frac_order: must lie within [0, 1]".to_string());
        }
        if self.fir_taps_max == 0 {
            d.push("fir_taps_max must be >= 1".to_string());
        }
        if self.seasonality_pairs.is_empty() {
            d.push("seasonality_pairs must not be empty".to_string());
        }
        check_bracket(&mut d, "modulation_depth", &self.modulation_depth, false);
        if self.modulation_depth.lo < 0.0 || self.modulation_depth.hi > 1.0 {
            d.push("modulation_depth: must lie within [0, 1]".to_string());
        }
        check_probability(&mut d, "multiplicative_probability", self.multiplicative_probability);
        check_probability(&mut d, "sarima2_probability", self.sarima2_probability);
        let n = &self.noisers;
        if n.families.is_empty() {
            d.push("noisers.families must not be empty".to_string());
        }
        check_bracket(&mut d, "noisers.poisson_rate", &n.poisson_rate, true);
        check_bracket(&mut d, "noisers.gamma_rate", &n.gamma_rate, true);
        check_bracket(&mut d, "noisers.gamma_shape", &n.gamma_shape, true);
        check_bracket(&mut d, "noisers.gamma_power", &n.gamma_power, true);
        check_bracket(&mut d, "noisers.lognormal_rate", &n.lognormal_rate, true);
        check_bracket(&mut d, "noisers.lognormal_shape", &n.lognormal_shape, true);
        let w = &self.window;
        if w.context == 0 || w.horizon == 0 {
            d.push("window: context and horizon must be >= 1".to_string());
        }
        if w.pad_max >= w.context.max(1) {
            d.push(format!(
                "window.pad_max ({}) must be smaller than window.context ({})",
                w.pad_max, w.context
            ));
        }
        if w.total() > self.sequence_length {
            d.push(format!(
                "window: context + horizon ({}) exceeds sequence_length ({})",
                w.total(),
                self.sequence_length
            ));
        }
        if self.max_attempts == 0 {
            d.push("max_attempts must be >= 1".to_string());
        }
        if !(self.divergence_limit > 0.0) {
            d.push("divergence_limit must be positive".to_string());
        }
        d
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(d))
        }
    }

    /// Copy adjusted to a different sequence length, with a window geometry
    /// scaled to fit when the default one does not.
    pub fn with_sequence_length(&self, len: usize) -> Self {
        let mut cfg = self.clone();
        cfg.sequence_length = len;
        if cfg.window.total() > len {
            let horizon = (len / 8).max(1);
            let context = (len - horizon).max(1);
            cfg.window = WindowGeometry {
                context,
                horizon,
                pad_max: context.saturating_sub(8),
            };
        }
        cfg
    }
}
