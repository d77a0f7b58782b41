//! Grid-side field operations: B-spline charge deposition, the spectral
//! Poisson solve −Δφ = ρ − ⟨ρ⟩ with E = −∇φ, interpolation back to
//! particle positions, spectral field gradients, and the electric-energy
//! diagnostic.
//!
//! Deposition runs over fixed particle slabs into private grids merged in
//! slab order, so parallel and sequential execution produce bit-identical
//! densities.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::Vector2;
use num_complex::Complex64;
use oscint::OscError;
use rustfft::{Fft, FftPlanner};

use crate::exec::{map_slabs, slab_ranges, ExecMode};
use crate::grid::{kahan_sum, Grid2D, GridData};
use crate::sample::ParticleEnsemble;
use crate::spline::bspline_weights;

/// Deposited density, potential, and electric field on the grid nodes.
/// Invariants after [`solve_poisson`]: `phi` has zero mean, `e1/e2` are the
/// spectral −∇φ, and the discrete spectral divergence of E reproduces
/// ρ − ⟨ρ⟩ on the resolved modes.
#[derive(Clone, Debug)]
pub struct FieldState {
    pub rho: GridData,
    pub phi: GridData,
    pub e1: GridData,
    pub e2: GridData,
}

impl FieldState {
    /// Zero fields (useful to disable the electrostatic coupling).
    pub fn zeros(grid: &Grid2D) -> Self {
        Self {
            rho: GridData::zeros(grid),
            phi: GridData::zeros(grid),
            e1: GridData::zeros(grid),
            e2: GridData::zeros(grid),
        }
    }
}

// ---------------------------------------------------------------------------
// Deposition.
// ---------------------------------------------------------------------------

/// Tensor-product spline coupling of one particle, with node indices
/// already wrapped into the periodic grid.
#[derive(Clone, Copy, Debug)]
pub(crate) struct WrappedWeights {
    idx1: [usize; 4],
    idx2: [usize; 4],
    w1: [f64; 4],
    w2: [f64; 4],
    len: usize,
}

impl WrappedWeights {
    pub(crate) fn at(grid: &Grid2D, p: Vector2<f64>, m: usize) -> Result<Self, OscError> {
        let s1 = bspline_weights(p.x, grid.dx1(), m)?;
        let s2 = bspline_weights(p.y, grid.dx2(), m)?;
        let mut out = Self {
            idx1: [0; 4],
            idx2: [0; 4],
            w1: [0.0; 4],
            w2: [0.0; 4],
            len: m + 1,
        };
        for (k, (i, w)) in s1.iter().enumerate() {
            out.idx1[k] = Grid2D::wrap_index(i, grid.n1());
            out.w1[k] = w;
        }
        for (k, (i, w)) in s2.iter().enumerate() {
            out.idx2[k] = Grid2D::wrap_index(i, grid.n2());
            out.w2[k] = w;
        }
        Ok(out)
    }

    /// Σ nodes value·w1·w2 for one scalar grid.
    pub(crate) fn interp(&self, d: &GridData) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.len {
            let mut row = 0.0;
            for b in 0..self.len {
                row += self.w2[b] * d[(self.idx1[a], self.idx2[b])];
            }
            acc += self.w1[a] * row;
        }
        acc
    }

    /// Scatter `value·w1·w2` onto the nodes of one scalar grid.
    pub(crate) fn deposit(&self, d: &mut GridData, value: f64) {
        for a in 0..self.len {
            let va = value * self.w1[a];
            for b in 0..self.len {
                d[(self.idx1[a], self.idx2[b])] += va * self.w2[b];
            }
        }
    }
}

/// Charge density on the nodes: ρ(node) = ω Σ_p w1·w2 / (dx1·dx2), so that
/// Σ nodes ρ·dx1·dx2 = N_p·ω exactly up to rounding.
pub fn deposit_density(
    ens: &ParticleEnsemble,
    grid: &Grid2D,
    m: usize,
) -> Result<GridData, OscError> {
    deposit_density_mode(ens, grid, m, ExecMode::default())
}

/// [`deposit_density`] with an explicit execution mode (bit-identical
/// results in both modes).
pub fn deposit_density_mode(
    ens: &ParticleEnsemble,
    grid: &Grid2D,
    m: usize,
    mode: ExecMode,
) -> Result<GridData, OscError> {
    bspline_weights(0.0, grid.dx1(), m)?; // validate the order once
    let ranges = slab_ranges(ens.count());
    let partials = map_slabs(mode, &ranges, |r| {
        let mut local = GridData::zeros(grid);
        for k in r {
            let w = WrappedWeights::at(grid, ens.positions[k], m)
                .expect("spline order validated above");
            w.deposit(&mut local, 1.0);
        }
        local
    });
    let mut rho = GridData::zeros(grid);
    for p in &partials {
        rho.accumulate(p);
    }
    let scale = ens.weight / grid.cell_area();
    for v in rho.as_mut_slice() {
        *v *= scale;
    }
    Ok(rho)
}

// ---------------------------------------------------------------------------
// Spectral solve.
// ---------------------------------------------------------------------------

fn fft_plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    map.entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// In-place 2D FFT over row-major (n1, n2) data. The inverse includes the
/// 1/(n1·n2) normalization.
fn fft2(data: &mut [Complex64], n1: usize, n2: usize, inverse: bool) {
    let row = fft_plan(n2, inverse);
    for r in 0..n1 {
        row.process(&mut data[r * n2..(r + 1) * n2]);
    }
    let col = fft_plan(n1, inverse);
    let mut buf = vec![Complex64::default(); n1];
    for c in 0..n2 {
        for r in 0..n1 {
            buf[r] = data[r * n2 + c];
        }
        col.process(&mut buf);
        for r in 0..n1 {
            data[r * n2 + c] = buf[r];
        }
    }
    if inverse {
        let s = 1.0 / (n1 as f64 * n2 as f64);
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

fn to_complex(d: &GridData) -> Vec<Complex64> {
    d.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

fn to_real(grid: &Grid2D, data: &[Complex64]) -> GridData {
    let mut out = GridData::zeros(grid);
    for (o, v) in out.as_mut_slice().iter_mut().zip(data) {
        *o = v.re;
    }
    out
}

/// Signed integer frequency of FFT bin j out of n.
fn freq(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Wavenumber for the inverse Laplacian (Nyquist kept).
fn kappa(j: usize, n: usize, l: f64) -> f64 {
    std::f64::consts::TAU * freq(j, n) as f64 / l
}

/// Wavenumber multiplier for spectral differentiation: the Nyquist mode is
/// zeroed, the standard convention that keeps derivatives of real data real.
fn kappa_deriv(j: usize, n: usize, l: f64) -> f64 {
    if n % 2 == 0 && j == n / 2 {
        0.0
    } else {
        kappa(j, n, l)
    }
}

/// Spectral Poisson solve on the periodic grid: with ρ̂ the transform of
/// ρ − ⟨ρ⟩, φ̂ = ρ̂/|κ|² (φ̂(0) = 0) and Ê = −iκφ̂. The mean of ρ is
/// subtracted as the neutralizing background, so the κ = 0 mode vanishes
/// exactly regardless of sampling noise.
pub fn solve_poisson(rho: GridData, grid: &Grid2D) -> Result<FieldState, OscError> {
    if rho.n1() != grid.n1() || rho.n2() != grid.n2() {
        return Err(OscError::DimensionMismatch(format!(
            "density is {}x{}, grid is {}x{}",
            rho.n1(),
            rho.n2(),
            grid.n1(),
            grid.n2()
        )));
    }
    let (n1, n2) = (grid.n1(), grid.n2());
    let mean = rho.mean();
    let mut hat = to_complex(&rho);
    for v in hat.iter_mut() {
        *v -= mean;
    }
    fft2(&mut hat, n1, n2, false);
    let mut phi_hat = vec![Complex64::default(); n1 * n2];
    let mut e1_hat = vec![Complex64::default(); n1 * n2];
    let mut e2_hat = vec![Complex64::default(); n1 * n2];
    for j1 in 0..n1 {
        let k1 = kappa(j1, n1, grid.l1());
        let k1d = kappa_deriv(j1, n1, grid.l1());
        for j2 in 0..n2 {
            let k2 = kappa(j2, n2, grid.l2());
            let k2d = kappa_deriv(j2, n2, grid.l2());
            let ksq = k1 * k1 + k2 * k2;
            if ksq == 0.0 {
                continue;
            }
            let idx = j1 * n2 + j2;
            let ph = hat[idx] / ksq;
            phi_hat[idx] = ph;
            // E = −∇φ  ⇒  Ê = −iκφ̂.
            e1_hat[idx] = Complex64::new(0.0, -k1d) * ph;
            e2_hat[idx] = Complex64::new(0.0, -k2d) * ph;
        }
    }
    fft2(&mut phi_hat, n1, n2, true);
    fft2(&mut e1_hat, n1, n2, true);
    fft2(&mut e2_hat, n1, n2, true);
    Ok(FieldState {
        phi: to_real(grid, &phi_hat),
        e1: to_real(grid, &e1_hat),
        e2: to_real(grid, &e2_hat),
        rho,
    })
}

/// Spectral derivative ∂d/∂x_axis (axis 0 or 1).
fn spectral_derivative(d: &GridData, grid: &Grid2D, axis: usize) -> GridData {
    let (n1, n2) = (grid.n1(), grid.n2());
    let mut hat = to_complex(d);
    fft2(&mut hat, n1, n2, false);
    for j1 in 0..n1 {
        for j2 in 0..n2 {
            let k = if axis == 0 {
                kappa_deriv(j1, n1, grid.l1())
            } else {
                kappa_deriv(j2, n2, grid.l2())
            };
            hat[j1 * n2 + j2] *= Complex64::new(0.0, k);
        }
    }
    fft2(&mut hat, n1, n2, true);
    to_real(grid, &hat)
}

/// Spectral gradients of the electric field,
/// [∂E1/∂x1, ∂E1/∂x2, ∂E2/∂x1, ∂E2/∂x2] — the per-particle Jacobian data
/// used by the second-order and midpoint pushers.
pub fn field_gradients(fields: &FieldState, grid: &Grid2D) -> [GridData; 4] {
    [
        spectral_derivative(&fields.e1, grid, 0),
        spectral_derivative(&fields.e1, grid, 1),
        spectral_derivative(&fields.e2, grid, 0),
        spectral_derivative(&fields.e2, grid, 1),
    ]
}

/// Discrete spectral divergence ∂E1/∂x1 + ∂E2/∂x2 (diagnostic; equals
/// ρ − ⟨ρ⟩ after [`solve_poisson`] on the resolved modes).
pub fn spectral_divergence(fields: &FieldState, grid: &Grid2D) -> GridData {
    let d1 = spectral_derivative(&fields.e1, grid, 0);
    let d2 = spectral_derivative(&fields.e2, grid, 1);
    let mut out = d1;
    for (a, b) in out.as_mut_slice().iter_mut().zip(d2.as_slice()) {
        *a += b;
    }
    out
}

// ---------------------------------------------------------------------------
// Interpolation and diagnostics.
// ---------------------------------------------------------------------------

/// Electric field at each particle position by tensor-product spline
/// interpolation with the same order as deposition.
pub fn interpolate_field(
    fields: &FieldState,
    grid: &Grid2D,
    positions: &[Vector2<f64>],
    m: usize,
) -> Result<Vec<Vector2<f64>>, OscError> {
    interpolate_field_mode(fields, grid, positions, m, ExecMode::default())
}

/// [`interpolate_field`] with an explicit execution mode.
pub fn interpolate_field_mode(
    fields: &FieldState,
    grid: &Grid2D,
    positions: &[Vector2<f64>],
    m: usize,
    mode: ExecMode,
) -> Result<Vec<Vector2<f64>>, OscError> {
    bspline_weights(0.0, grid.dx1(), m)?;
    let ranges = slab_ranges(positions.len());
    let slabs = map_slabs(mode, &ranges, |r| {
        r.map(|k| {
            let w = WrappedWeights::at(grid, positions[k], m)
                .expect("spline order validated above");
            Vector2::new(w.interp(&fields.e1), w.interp(&fields.e2))
        })
        .collect::<Vec<_>>()
    });
    Ok(slabs.concat())
}

/// Node-sum quadrature of ∬|E|²: Σ nodes (E1² + E2²)·dx1·dx2.
pub fn electric_energy(fields: &FieldState, grid: &Grid2D) -> f64 {
    let sum = kahan_sum(
        fields
            .e1
            .as_slice()
            .iter()
            .zip(fields.e2.as_slice())
            .map(|(a, b)| a * a + b * b),
    );
    sum * grid.cell_area()
}
