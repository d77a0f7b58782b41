//! Named model ingredients shared by the experiment drivers: θ profiles by
//! id, the 4×4 charged-particle benchmark system, the scalar growth model,
//! the trig/cubic coupling force with its potentials, and the closed-form
//! endpoint of the scalar linear flow.

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, Matrix2, Vector2};
use oscint::linear::LinearOscSystem;
use oscint::nonlinear::NonlinearTerm;
use oscint::particle::{build_a, ModelForm};
use oscint::sav::PotentialField;
use oscint::PeriodicProfile;

/// Resolve a θ profile id. Known ids: `cos`, `one_plus_cos`,
/// `two_plus_half_cos_sq`, and `constant:<value>`.
pub fn profile_by_id(id: &str) -> Result<PeriodicProfile> {
    if let Some(v) = id.strip_prefix("constant:") {
        let c: f64 = v
            .parse()
            .with_context(|| format!("invalid constant profile value {v:?}"))?;
        return Ok(PeriodicProfile::constant(c));
    }
    match id {
        "cos" => Ok(PeriodicProfile::cos()),
        "one_plus_cos" => Ok(PeriodicProfile::one_plus_cos()),
        "two_plus_half_cos_sq" => Ok(PeriodicProfile::two_plus_half_cos_sq()),
        other => bail!(
            "unknown profile id {other:?} (expected cos, one_plus_cos, \
             two_plus_half_cos_sq, or constant:<value>)"
        ),
    }
}

/// The 4×4 guiding-variable system with θ_eff = b·θ:
/// A = [θ_eff J, I; −θ_eff² I, θ_eff J].
pub fn charged_particle_system(
    profile_id: &str,
    b: f64,
    epsilon: f64,
) -> Result<LinearOscSystem> {
    let profile = profile_by_id(profile_id)?;
    Ok(build_a(&profile, b, epsilon, ModelForm::Normalized)?)
}

/// Scalar growth model U̇ = θ(t/ε)·U, expressed as the degree-1 part of the
/// polynomial-in-θ system family.
pub fn scalar_theta_system(profile_id: &str, epsilon: f64) -> Result<LinearOscSystem> {
    let profile = profile_by_id(profile_id)?;
    let parts = vec![DMatrix::zeros(1, 1), DMatrix::from_element(1, 1, 1.0)];
    Ok(LinearOscSystem::new(profile, epsilon, parts)?)
}

/// Exact endpoint of the scalar linear flow: U(t) = exp(∫₀ᵗ θ(s/ε) ds)·u0.
/// The integral is evaluated in closed form from the profile's Fourier data,
/// so this endpoint carries no time-marching error at all.
pub fn scalar_exact_endpoint(
    profile: &PeriodicProfile,
    epsilon: f64,
    t: f64,
    u0: f64,
) -> Result<f64> {
    let poly = profile.as_oscpoly(1, epsilon)?;
    let integral = poly.integral_from_zero().eval_real(t);
    Ok(integral.exp() * u0)
}

/// Trig-plus-cubic coupling force on the momentum components:
/// g = (0, 0, cos x₁ sin x₂ + x₁ + x₁³, sin x₁ cos x₂ + x₂ + x₂³).
/// This force pushes away from the origin, so it is only used on short
/// horizons; matching potential: [`coupling_potential`].
pub fn coupling_term() -> NonlinearTerm {
    NonlinearTerm::new(|u| {
        let (x1, x2) = (u[0], u[1]);
        let mut g = nalgebra::DVector::zeros(4);
        g[2] = x1.cos() * x2.sin() + x1 + x1.powi(3);
        g[3] = x1.sin() * x2.cos() + x2 + x2.powi(3);
        g
    })
    .with_jacobian(|u| {
        let (x1, x2) = (u[0], u[1]);
        let mut j = DMatrix::zeros(4, 4);
        j[(2, 0)] = -x1.sin() * x2.sin() + 1.0 + 3.0 * x1 * x1;
        j[(2, 1)] = x1.cos() * x2.cos();
        j[(3, 0)] = x1.cos() * x2.cos();
        j[(3, 1)] = -x1.sin() * x2.sin() + 1.0 + 3.0 * x2 * x2;
        j
    })
}

/// Potential whose negative gradient is [`coupling_term`]'s force:
/// φ(x) = −sin x₁ sin x₂ − |x|²/2 − (x₁⁴ + x₂⁴)/4. Unbounded below, so
/// trajectories escape on long horizons; used for the T = 1 accuracy sweeps.
pub fn coupling_potential() -> PotentialField {
    PotentialField::sine_quartic_well()
}

/// Confining variant with the force sign flipped:
/// φ(x) = sin x₁ sin x₂ + |x|²/2 + (x₁⁴ + x₂⁴)/4, so −∇φ pulls toward the
/// origin and every energy level set is bounded. Used by the long-horizon
/// energy audits and the confinement study.
pub fn anharmonic_well() -> PotentialField {
    PotentialField::new(
        |x: Vector2<f64>| {
            x[0].sin() * x[1].sin()
                + 0.5 * (x[0] * x[0] + x[1] * x[1])
                + 0.25 * (x[0].powi(4) + x[1].powi(4))
        },
        |x: Vector2<f64>| {
            Vector2::new(
                x[0].cos() * x[1].sin() + x[0] + x[0].powi(3),
                x[0].sin() * x[1].cos() + x[1] + x[1].powi(3),
            )
        },
        |x: Vector2<f64>| {
            let off = x[0].cos() * x[1].cos();
            Matrix2::new(
                -x[0].sin() * x[1].sin() + 1.0 + 3.0 * x[0] * x[0],
                off,
                off,
                -x[0].sin() * x[1].sin() + 1.0 + 3.0 * x[1] * x[1],
            )
        },
    )
}
