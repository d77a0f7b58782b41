//! Real-valued periodic profiles θ stored as finite Fourier series.
//!
//! A `PeriodicProfile` represents the P-periodic modulation θ(s) that drives
//! the fast scale of the oscillatory systems in this crate: coefficients C_k
//! with C_{-k} = conj(C_k) so that
//!
//!   θ(s) = Σ_{|k| ≤ K} C_k e^{i 2π k s / P}
//!
//! is real. The common modulations (cos s, 1 + cos s, 2 + ½cos² s) are exact
//! finite series with K ≤ 2, so every integral the time integrators need can
//! be computed exactly in the [`crate::oscpoly`] algebra. For a general θ the
//! caller chooses the cutoff K and owns the truncation-tail budget.

use num_complex::Complex64;

use crate::error::OscError;
use crate::oscpoly::OscPoly;

/// Relative tolerance for "this should be real" checks on Fourier pipelines.
const IMAG_TOL: f64 = 1e-12;

/// A real P-periodic function stored as a one-sided finite Fourier series.
///
/// Only harmonics k ≥ 0 are stored; the k < 0 half is implied by the
/// conjugate symmetry C_{-k} = conj(C_k), which makes real-valuedness a
/// structural invariant rather than a runtime property.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicProfile {
    period: f64,
    /// `coeffs[k]` is C_k for k = 0..=K. `coeffs[0]` is real.
    coeffs: Vec<Complex64>,
}

impl PeriodicProfile {
    /// Build a profile from one-sided Fourier coefficients `coeffs[k] = C_k`,
    /// k = 0..=K. The implied two-sided series is real because C_{-k} is
    /// taken as conj(C_k).
    ///
    /// Fails if the period is not positive/finite or if C_0 has an imaginary
    /// part (C_0 = conj(C_0) forces it to be real).
    pub fn from_one_sided(period: f64, coeffs: Vec<Complex64>) -> Result<Self, OscError> {
        if !(period.is_finite() && period > 0.0) {
            return Err(OscError::InvalidProfile(format!(
                "period must be a positive finite real, got {period}"
            )));
        }
        if coeffs.is_empty() {
            return Err(OscError::InvalidProfile(
                "at least the constant coefficient C_0 is required".into(),
            ));
        }
        let c0 = coeffs[0];
        if c0.im.abs() > IMAG_TOL * (1.0 + c0.re.abs()) {
            return Err(OscError::InvalidProfile(format!(
                "C_0 must be real (conjugate symmetry), got imaginary part {}",
                c0.im
            )));
        }
        let mut coeffs = coeffs;
        coeffs[0] = Complex64::new(c0.re, 0.0);
        Ok(Self { period, coeffs })
    }

    /// The constant profile θ ≡ c (period 2π by convention).
    pub fn constant(c: f64) -> Self {
        Self {
            period: std::f64::consts::TAU,
            coeffs: vec![Complex64::new(c, 0.0)],
        }
    }

    /// θ(s) = cos s.
    pub fn cos() -> Self {
        Self {
            period: std::f64::consts::TAU,
            coeffs: vec![Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0)],
        }
    }

    /// θ(s) = 1 + cos s.
    pub fn one_plus_cos() -> Self {
        Self {
            period: std::f64::consts::TAU,
            coeffs: vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)],
        }
    }

    /// θ(s) = 2 + ½ cos² s = 9/4 + ¼ cos 2s.
    pub fn two_plus_half_cos_sq() -> Self {
        Self {
            period: std::f64::consts::TAU,
            coeffs: vec![
                Complex64::new(2.25, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.125, 0.0),
            ],
        }
    }

    /// Fast-phase period P.
    pub fn period(&self) -> f64 {
        self.period
    }

    /// Highest retained harmonic K.
    pub fn cutoff(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// One-sided coefficient C_k (zero beyond the cutoff).
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    /// Pointwise evaluation θ(s) = C_0 + 2 Σ_{k≥1} Re(C_k e^{i 2πks/P}).
    pub fn eval(&self, s: f64) -> f64 {
        let omega0 = std::f64::consts::TAU / self.period;
        let mut v = self.coeffs[0].re;
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            let phase = omega0 * k as f64 * s;
            // C_k e^{iks} + conj(C_k) e^{-iks} = 2 Re(C_k e^{iks})
            v += 2.0 * (c * Complex64::from_polar(1.0, phase)).re;
        }
        v
    }

    /// The profile scaled by a real factor: (a·θ)(s) = a·θ(s).
    ///
    /// Used to absorb a magnetic-field amplitude into the modulation.
    pub fn scaled(&self, a: f64) -> Self {
        Self {
            period: self.period,
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    /// The profile shifted by a real constant: (θ + a)(s) = θ(s) + a.
    pub fn shifted(&self, a: f64) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] += a;
        Self {
            period: self.period,
            coeffs,
        }
    }

    /// Pointwise product of two profiles with the same period
    /// (Fourier coefficients convolve; the cutoff grows to K₁ + K₂).
    pub fn product(&self, other: &Self) -> Result<Self, OscError> {
        if (self.period - other.period).abs() > IMAG_TOL * self.period {
            return Err(OscError::InvalidProfile(format!(
                "profile product requires equal periods, got {} and {}",
                self.period, other.period
            )));
        }
        let ka = self.cutoff() as i64;
        let kb = other.cutoff() as i64;
        let kc = ka + kb;
        let a = |k: i64| two_sided(&self.coeffs, k);
        let b = |k: i64| two_sided(&other.coeffs, k);
        let mut coeffs = vec![Complex64::default(); (kc + 1) as usize];
        for k in 0..=kc {
            let mut acc = Complex64::default();
            for j in -ka..=ka {
                acc += a(j) * b(k - j);
            }
            coeffs[k as usize] = acc;
        }
        Self::from_one_sided(self.period, coeffs)
    }

    /// θ^m as a profile (m-fold self-product), m ≥ 1.
    pub fn power(&self, m: u32) -> Result<Self, OscError> {
        if m == 0 {
            return Err(OscError::InvalidProfile(
                "profile power requires m ≥ 1".into(),
            ));
        }
        let mut acc = self.clone();
        for _ in 1..m {
            acc = acc.product(self)?;
        }
        Ok(acc)
    }

    /// The fast-period average ⟨θ^m⟩ = (1/P) ∫₀^P θ(s)^m ds, i.e. the constant
    /// Fourier mode of the m-fold self-convolution of the coefficients.
    ///
    /// This is the quantity every averaged (ε → 0) model is built from.
    pub fn power_average(&self, m: u32) -> Result<f64, OscError> {
        let p = self.power(m)?;
        Ok(p.coeffs[0].re)
    }

    /// ⟨θ⟩, the plain average.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Lift θ(t/ε)^m into the oscillatory-polynomial algebra.
    ///
    /// θ(t/ε)^m = Σ_k (θ^m)_k e^{i 2πk (t/ε) / P} is encoded with integer
    /// modes against the effective oscillation parameter ε̃ = ε·P/(2π), so
    /// each harmonic k becomes the algebra term (c = (θ^m)_k, j = 0, mode k)
    /// of c·t^j·e^{ikt/ε̃}. Exact whenever θ is a finite series.
    pub fn as_oscpoly(&self, m: u32, epsilon: f64) -> Result<OscPoly, OscError> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(OscError::InvalidEpsilon(epsilon));
        }
        let pw = self.power(m)?;
        let eps_eff = epsilon * pw.period / std::f64::consts::TAU;
        let kmax = pw.cutoff() as i64;
        let mut terms = Vec::with_capacity((2 * kmax + 1) as usize);
        for k in -kmax..=kmax {
            let c = two_sided(&pw.coeffs, k);
            terms.push((c, 0u32, k as i32));
        }
        Ok(OscPoly::from_terms(eps_eff, terms))
    }
}

/// Two-sided lookup into a one-sided coefficient table.
fn two_sided(coeffs: &[Complex64], k: i64) -> Complex64 {
    let idx = k.unsigned_abs() as usize;
    let c = coeffs.get(idx).copied().unwrap_or_default();
    if k < 0 {
        c.conj()
    } else {
        c
    }
}
