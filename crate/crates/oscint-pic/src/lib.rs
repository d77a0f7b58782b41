//! Particle-in-cell solver for the Vlasov–Poisson system with a strong
//! oscillating magnetic field, built on the `oscint` integrators.
//!
//! The pipeline is the classical explicit electrostatic PIC cycle on a
//! periodic 2D grid: B-spline charge deposition, spectral Poisson solve,
//! field interpolation at particle positions, and a per-particle push with
//! one of the oscillation-aware steppers (the electric field is frozen over
//! each step). Particle phases are data-parallel over fixed particle slabs,
//! so results are bit-identical between the parallel and sequential
//! execution modes and across thread counts.

pub mod exec;
pub mod field;
pub mod grid;
pub mod push;
pub mod sample;
pub mod spline;

pub use exec::ExecMode;
pub use field::{
    deposit_density, deposit_density_mode, electric_energy, field_gradients, interpolate_field,
    interpolate_field_mode, solve_poisson, FieldState,
};
pub use grid::{Grid2D, GridData};
pub use push::{pic_step, PicPusher, PusherMode};
pub use sample::{
    from_guiding_ensemble, sample_initial, to_guiding_ensemble, InitCondition, ParticleEnsemble,
};
pub use spline::bspline_weights;
