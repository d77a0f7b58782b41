//! Uniformly accurate time integration for highly oscillatory systems.
//!
//! This crate implements time integrators for ODE systems of the form
//!
//!   U̇(t) = A(t/ε) U(t) + g(U(t)),   0 < ε ≤ 1,
//!
//! where A is matrix-valued and periodic in its fast argument. The schemes
//! are *uniformly accurate* (UA): their error constants are independent of
//! ε, so a fixed step size works unchanged from the non-stiff regime ε = 1
//! down to ε → 0, where the dynamics converge to an averaged model driven
//! by ⟨A⟩. Energy-preserving variants based on a scalar auxiliary variable
//! are provided for the charged-particle system with a potential force.
//!
//! Module map:
//! - [`profile`]: real periodic modulations θ as finite Fourier series.
//! - [`oscpoly`]: the oscillatory-polynomial algebra all scheme
//!   coefficients are computed in (exact single and nested integrals).
//! - [`particle`]: the 2-D charged-particle model in guiding variables.
//! - [`linear`]: explicit order-1..4 UA schemes, midpoint variants, and
//!   averaged limit schemes for linear systems.
//! - [`nonlinear`]: explicit UA schemes of order 1 and 2 with a source term.
//! - [`sav`]: scalar-auxiliary-variable schemes preserving a modified energy.
//! - [`reference`]: brute-force reference solver, quadrature oracle, and the
//!   kinetic dispersion-rate oracle used to validate everything else.

pub mod error;
pub mod linalg;
pub mod linear;
pub mod nonlinear;
pub mod oscpoly;
pub mod particle;
pub mod profile;
pub mod reference;
pub mod sav;

pub use error::OscError;
pub use oscpoly::{nested_integral, OscPoly};
pub use profile::PeriodicProfile;
