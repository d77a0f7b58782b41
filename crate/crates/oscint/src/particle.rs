//! Charged-particle model assembly on the plane: the rotation generator J,
//! the laboratory ↔ guiding change of variables, construction of the 4×4
//! oscillatory system matrix, quadratic invariants of the averaged model,
//! and its spectral analysis.
//!
//! Two coefficient conventions coexist and are both expressible through one
//! effective profile θ_eff:
//!
//! * `Normalized`: the (x, q) system is written directly with θ_eff = B·θ —
//!   the form used by the scheme benchmarks.
//! * `Physical`: the laboratory model with magnetic amplitude B yields the
//!   (x, q) system with θ_eff = (B/2)·θ (and the θ_eff² coefficient (B/2)²)
//!   after the guiding change of variables — the form the kinetic solver
//!   pushes.

use nalgebra::{DMatrix, Matrix2, Vector2};

use crate::error::OscError;
use crate::linear::LinearOscSystem;
use crate::profile::PeriodicProfile;
use crate::sav::PotentialField;

/// State in guiding variables: position x and guiding velocity q.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GuidingState {
    pub x: Vector2<f64>,
    pub q: Vector2<f64>,
}

/// State in laboratory variables: position x and velocity v.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysState {
    pub x: Vector2<f64>,
    pub v: Vector2<f64>,
}

/// The planar rotation generator: J(a₁, a₂) = (a₂, −a₁), so J² = −I.
#[inline]
pub fn j_apply(a: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(a.y, -a.x)
}

/// J as a matrix (consistent with [`j_apply`]).
pub fn j_matrix() -> Matrix2<f64> {
    Matrix2::new(0.0, 1.0, -1.0, 0.0)
}

/// Which coefficient convention the 4×4 system uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ModelForm {
    /// θ_eff = B·θ: the benchmark form of the (x, q) equations.
    #[default]
    Normalized,
    /// θ_eff = (B/2)·θ: the laboratory model after the guiding transform.
    Physical,
}

/// The effective profile that multiplies J in the (x, q) equations.
pub fn effective_profile(profile: &PeriodicProfile, b_amp: f64, form: ModelForm) -> PeriodicProfile {
    match form {
        ModelForm::Normalized => profile.scaled(b_amp),
        ModelForm::Physical => profile.scaled(0.5 * b_amp),
    }
}

/// Assemble the 4×4 oscillatory system for the particle state U = (x, q):
///
///   ẋ = q + θ_eff(t/ε) J x,
///   q̇ = θ_eff(t/ε) J q − θ_eff²(t/ε) x,
///
/// i.e. A(t/ε) = parts₀ + θ_eff·parts₁ + θ_eff²·parts₂ with constant blocks.
pub fn build_a(
    profile: &PeriodicProfile,
    b_amp: f64,
    epsilon: f64,
    form: ModelForm,
) -> Result<LinearOscSystem, OscError> {
    let eff = effective_profile(profile, b_amp, form);
    let mut p0 = DMatrix::zeros(4, 4);
    p0[(0, 2)] = 1.0;
    p0[(1, 3)] = 1.0;
    let mut p1 = DMatrix::zeros(4, 4);
    let j = j_matrix();
    for i in 0..2 {
        for jj in 0..2 {
            p1[(i, jj)] = j[(i, jj)];
            p1[(2 + i, 2 + jj)] = j[(i, jj)];
        }
    }
    let mut p2 = DMatrix::zeros(4, 4);
    p2[(2, 0)] = -1.0;
    p2[(3, 1)] = -1.0;
    LinearOscSystem::new(eff, epsilon, vec![p0, p1, p2])
}

/// Laboratory → guiding change of variables at time t:
/// q = v − (B/2)·θ(t/ε)·Jx (the physical convention; kinetic initial data
/// is converted with exactly this map).
pub fn to_guiding(
    s: &PhysState,
    t: f64,
    profile: &PeriodicProfile,
    b_amp: f64,
    epsilon: f64,
) -> GuidingState {
    let theta = profile.eval(t / epsilon);
    GuidingState {
        x: s.x,
        q: s.v - j_apply(s.x) * (0.5 * b_amp * theta),
    }
}

/// Exact inverse of [`to_guiding`]: v = q + (B/2)·θ(t/ε)·Jx.
pub fn from_guiding(
    s: &GuidingState,
    t: f64,
    profile: &PeriodicProfile,
    b_amp: f64,
    epsilon: f64,
) -> PhysState {
    let theta = profile.eval(t / epsilon);
    PhysState {
        x: s.x,
        v: s.q + j_apply(s.x) * (0.5 * b_amp * theta),
    }
}

/// Oscillation frequencies of the averaged model: the absolute imaginary
/// parts of the eigenvalues of ⟨A⟩, deduplicated and sorted ascending.
///
/// Errors unless the spectrum is purely imaginary (a real part would mean
/// the averaged model is not oscillatory).
pub fn averaged_frequencies(sys: &LinearOscSystem) -> Result<Vec<f64>, OscError> {
    averaged_frequencies_of(&sys.averaged())
}

/// [`averaged_frequencies`] on an explicit matrix (dimension 2 or 4).
///
/// Eigenvalues are taken from the characteristic polynomial, whose
/// coefficients come from trace powers (Newton's identities) — exact,
/// similarity-invariant, and no general eigensolver involved. A purely
/// imaginary spectrum forces the odd coefficients to vanish and turns the
/// even part into a quadratic in λ², solved in closed form.
pub fn averaged_frequencies_of(avg: &DMatrix<f64>) -> Result<Vec<f64>, OscError> {
    let d = avg.nrows();
    if avg.ncols() != d || (d != 2 && d != 4) {
        return Err(OscError::DimensionMismatch(format!(
            "frequency analysis supports 2x2 and 4x4 matrices, got {}x{}",
            avg.nrows(),
            avg.ncols()
        )));
    }
    let scale = avg.norm().max(1.0);
    let tol = 1e-9;

    let p1 = avg.trace();
    let a2 = avg * avg;
    let p2 = a2.trace();
    let e1 = p1;
    let e2 = (e1 * p1 - p2) / 2.0;

    let mut omegas: Vec<f64> = Vec::new();
    if d == 2 {
        // λ² − e1·λ + e2 with e1 ≈ 0 and e2 = ω² ≥ 0.
        if e1.abs() > tol * scale || e2 < -tol * scale * scale {
            return Err(OscError::InvalidConfig(format!(
                "averaged matrix spectrum is not purely imaginary (trace {e1:.3e}, det {e2:.3e})"
            )));
        }
        omegas.push(e2.max(0.0).sqrt());
    } else {
        let a3 = &a2 * avg;
        let p3 = a3.trace();
        let p4 = (&a2 * &a2).trace();
        let e3 = (e2 * p1 - e1 * p2 + p3) / 3.0;
        let e4 = (e3 * p1 - e2 * p2 + e1 * p3 - p4) / 4.0;
        let s2 = scale * scale;
        if e1.abs() > tol * scale || e3.abs() > tol * scale * s2 {
            return Err(OscError::InvalidConfig(format!(
                "averaged matrix spectrum is not purely imaginary (odd coefficients {e1:.3e}, {e3:.3e})"
            )));
        }
        // λ⁴ + e2·λ² + e4 = 0 ⇒ μ = λ² real negative: μ² + e2·μ + e4 = 0.
        let disc = e2 * e2 - 4.0 * e4;
        if disc < -tol * s2 * s2 {
            return Err(OscError::InvalidConfig(format!(
                "averaged matrix spectrum is not purely imaginary (discriminant {disc:.3e})"
            )));
        }
        let root = disc.max(0.0).sqrt();
        for mu in [(e2 - root) / 2.0, (e2 + root) / 2.0] {
            if mu < -tol * s2 {
                return Err(OscError::InvalidConfig(format!(
                    "averaged matrix has a non-imaginary eigenvalue pair (λ² = {mu:.3e})"
                )));
            }
            omegas.push(mu.max(0.0).sqrt());
        }
    }

    omegas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    omegas.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
    Ok(omegas)
}

/// Quadratic invariants of the averaged particle model plus the potential
/// energy: returns (H, H₁, H₂) with
///
///   H₁ = ½|q|² + ½⟨θ²⟩|x|²,  H₂ = ⟨θ⟩ q·Jx,  H = H₁ + H₂ + φ(x).
pub fn hamiltonians(
    s: &GuidingState,
    field: &PotentialField,
    theta_avg: f64,
    theta2_avg: f64,
) -> (f64, f64, f64) {
    let h1 = 0.5 * s.q.norm_squared() + 0.5 * theta2_avg * s.x.norm_squared();
    let h2 = theta_avg * s.q.dot(&j_apply(s.x));
    let h = h1 + h2 + field.phi(s.x);
    (h, h1, h2)
}
