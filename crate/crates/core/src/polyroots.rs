//! Pole sampling inside the stability disc and product expansion of lag
//! polynomials.
//!
//! Poles are drawn directly (radius uniform on `[0, r_max)`, angle uniform on
//! `[0, π)` with the conjugate added) and expanded into coefficients, so every
//! sampled AR polynomial is stable by construction.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::rng::Stream;

/// Slack allowed on the companion-matrix eigenvalue check.
pub const STABILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// `1 - Σ c_i L^i`
    Ar,
    /// `1 + Σ c_i L^i`
    Ma,
}

/// A conjugate-closed multiset of poles bounded by `radius_bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleSet {
    pub poles: Vec<Complex64>,
    pub radius_bound: f64,
}

impl PoleSet {
    pub fn new(poles: Vec<Complex64>, radius_bound: f64) -> Self {
        Self { poles, radius_bound }
    }

    pub fn order(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }
}

/// Coefficients `c_1..c_n` of a lag polynomial in the given convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagPolynomial {
    pub coefficients: Vec<f64>,
    pub convention: Convention,
}

impl LagPolynomial {
    pub fn new(coefficients: Vec<f64>, convention: Convention) -> Self {
        Self {
            coefficients,
            convention,
        }
    }

    pub fn empty(convention: Convention) -> Self {
        Self::new(Vec::new(), convention)
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// Full power-series coefficients `[1, a_1, .., a_n]` of the polynomial in `L`.
    pub fn power_coefficients(&self) -> Vec<f64> {
        let sign = match self.convention {
            Convention::Ar => -1.0,
            Convention::Ma => 1.0,
        };
        std::iter::once(1.0)
            .chain(self.coefficients.iter().map(|c| sign * c))
            .collect()
    }

    /// Inverse roots of the polynomial (the poles `φ_i` in `∏(1 - φ_i L)`),
    /// computed as eigenvalues of the companion matrix.
    pub fn poles(&self) -> Vec<Complex64> {
        let n = self.order();
        if n == 0 {
            return Vec::new();
        }
        // ∏(1 - φ_i L) = 1 + Σ a_i L^i  <=>  ∏(z - φ_i) = z^n + Σ a_i z^{n-i}
        let a = self.power_coefficients();
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            companion[(0, j)] = -a[j + 1];
        }
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        let mut roots: Vec<Complex64> = companion.complex_eigenvalues().iter().copied().collect();
        polish_roots(&a, &mut roots);
        roots
    }
}

/// `p(z)` and `p'(z)` for the monic `p(z) = Σ a_i z^{n-i}`.
fn horner(a: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(a[0], 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in &a[1..] {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Aberth-Ehrlich refinement of all roots at once. Eigenvalues of the
/// companion matrix lose accuracy when small roots cluster; the simultaneous
/// correction keeps neighbouring estimates from collapsing onto one root.
fn polish_roots(a: &[f64], roots: &mut [Complex64]) {
    for _ in 0..64 {
        let mut moved = 0.0f64;
        for i in 0..roots.len() {
            let z = roots[i];
            let (p, dp) = horner(a, z);
            if p == Complex64::new(0.0, 0.0) {
                continue;
            }
            let w = p / dp;
            let repulsion: Complex64 = roots
                .iter()
                .enumerate()
                .filter(|&(j, r)| j != i && *r != z)
                .map(|(_, r)| (z - r).inv())
                .sum();
            let step = w / (Complex64::new(1.0, 0.0) - w * repulsion);
            if step.re.is_finite() && step.im.is_finite() {
                roots[i] = z - step;
                moved = moved.max(step.norm() / z.norm().max(1e-300));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
}

/// Draws `order` poles with modulus below `radius_max`: `order / 2` conjugate
/// pairs, plus one real pole when `order` is odd.
pub fn sample_pole_set(stream: &mut Stream, order: usize, radius_max: f64) -> Result<PoleSet> {
    if !(radius_max > 0.0 && radius_max < 1.0) {
        return param(format!("radius_max must lie in (0, 1), got {radius_max}"));
    }
    let mut poles = Vec::with_capacity(order);
    for _ in 0..order / 2 {
        let r = stream.uniform(0.0, radius_max)?;
        let theta = stream.uniform(0.0, std::f64::consts::PI)?;
        let z = Complex64::from_polar(r, theta);
        poles.push(z);
        poles.push(z.conj());
    }
    if order % 2 == 1 {
        let r = stream.uniform(-radius_max, radius_max)?;
        poles.push(Complex64::new(r, 0.0));
    }
    Ok(PoleSet::new(poles, radius_max))
}

fn conj_tolerance(z: Complex64) -> f64 {
    1e-12 * z.norm().max(1.0)
}

/// Splits poles into real poles and representatives of conjugate pairs.
fn pair_poles(poles: &[Complex64]) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let mut used = vec![false; poles.len()];
    let mut reals = Vec::new();
    let mut pairs = Vec::new();
    for i in 0..poles.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let z = poles[i];
        if !z.re.is_finite() || !z.im.is_finite() {
            return param(format!("non-finite pole {z}"));
        }
        if z.im.abs() <= conj_tolerance(z) {
            reals.push(z.re);
            continue;
        }
        let target = z.conj();
        let mate = (i + 1..poles.len())
            .filter(|&j| !used[j])
            .map(|j| (j, (poles[j] - target).norm()))
            .filter(|&(_, d)| d <= conj_tolerance(z))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match mate {
            Some((j, _)) => {
                used[j] = true;
                pairs.push(z);
            }
            None => return param(format!("pole {z} has no conjugate partner")),
        }
    }
    Ok((reals, pairs))
}

fn convolve_into(acc: &[f64], factor: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; acc.len() + factor.len() - 1];
    for (i, a) in acc.iter().enumerate() {
        for (j, f) in factor.iter().enumerate() {
            out[i + j] += a * f;
        }
    }
    out
}

/// Expands `∏(1 - φ_i L)` and returns its coefficients in `convention`.
///
/// Conjugate pairs are multiplied as real quadratics
/// `1 - 2 Re(φ) L + |φ|² L²`, so the result is real without rounding residue.
pub fn expand(poles: &PoleSet, convention: Convention) -> Result<LagPolynomial> {
    let (reals, pairs) = pair_poles(&poles.poles)?;
    let mut acc = vec![1.0];
    for z in pairs {
        acc = convolve_into(&acc, &[1.0, -2.0 * z.re, z.norm_sqr()]);
    }
    for r in reals {
        acc = convolve_into(&acc, &[1.0, -r]);
    }
    let coefficients = match convention {
        Convention::Ar => acc[1..].iter().map(|a| -a).collect(),
        Convention::Ma => acc[1..].to_vec(),
    };
    Ok(LagPolynomial::new(coefficients, convention))
}

/// True iff every pole of `poly` has modulus at most `bound` (plus a small
/// numerical slack).
pub fn verify_stability(poly: &LagPolynomial, bound: f64) -> bool {
    if poly.coefficients.iter().any(|c| !c.is_finite()) {
        return false;
    }
    poly.poles().iter().all(|z| z.norm() <= bound + STABILITY_SLACK)
}
