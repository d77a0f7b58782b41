//! Run configuration: every experiment driver reads its parameters from a
//! section of [`RunConfig`]. Defaults reproduce the desk-scale study; a TOML
//! file passed via `--config` overrides any subset of fields, and unknown
//! keys are rejected so typos fail loudly instead of silently running the
//! defaults.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

/// Top-level configuration; one section per subcommand.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub converge: ConvergeConfig,
    pub energy: EnergyConfig,
    pub spectrum: SpectrumConfig,
    pub confine: ConfineConfig,
    pub landau: LandauConfig,
    pub oracle: OracleConfig,
}

impl RunConfig {
    /// Load from a TOML file, or produce the all-defaults configuration
    /// when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }
}

/// Accuracy sweeps over (ε, Δt) grids.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeConfig {
    /// Case names to run; empty means all registered cases.
    pub cases: Vec<String>,
    /// Step sizes are 2^-k for k in min..=max.
    pub dt_exponent_min: u32,
    pub dt_exponent_max: u32,
    /// Final time of every sweep.
    pub t_end: f64,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        Self {
            cases: Vec::new(),
            dt_exponent_min: 4,
            dt_exponent_max: 10,
            t_end: 1.0,
        }
    }
}

/// Long-horizon energy audits of the averaged-model steppers.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub t_end: f64,
    pub dt: f64,
    /// Also run the non-preserving control scheme and require it to drift.
    pub negative_control: bool,
    /// Steps of the norm-isometry check (skew averaged matrix).
    pub isometry_steps: usize,
    pub isometry_dt: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            t_end: 100.0,
            dt: 0.1,
            negative_control: true,
            isometry_steps: 10_000,
            isometry_dt: 0.01,
        }
    }
}

/// Frequency read-off of long averaged-model trajectories.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub t_end: f64,
    pub dt: f64,
    /// Field amplitudes for the zero-mean profile scan.
    pub b_values: Vec<f64>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            t_end: 100.0,
            dt: 1e-3,
            b_values: vec![0.5, 1.0, 5.0],
        }
    }
}

/// Confinement study: orbit extent vs field amplitude.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfineConfig {
    pub b_values: Vec<f64>,
    pub eps_values: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
}

impl Default for ConfineConfig {
    fn default() -> Self {
        Self {
            b_values: vec![0.5, 1.0, 5.0],
            eps_values: vec![0.1, 0.001],
            t_end: 100.0,
            dt: 0.1,
        }
    }
}

/// Landau damping and its disintegration under the oscillatory field.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandauConfig {
    /// Cells along x₁ for the one-dimensional-like runs (x₂ keeps 4 cells).
    pub cells_1d: usize,
    /// Cells per side for the square two-dimensional run.
    pub cells_2d: usize,
    pub particles_per_cell: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Seeded perturbation amplitude ξ.
    pub xi: f64,
    /// Wave numbers of the zero-field damping scan.
    pub k_values: Vec<f64>,
    /// Decay-rate fit window (start, end) in time units.
    pub fit_window: (f64, f64),
    /// Field amplitudes of the disintegration scan (0 is the baseline).
    pub disintegration_b: Vec<f64>,
    pub disintegration_epsilon: f64,
    pub disintegration_k: f64,
    pub disintegration_t_end: f64,
    pub disintegration_dt: f64,
    /// Cells along x₁ and particles per cell for the disintegration scan;
    /// it needs more resolution than the zero-field fits because the
    /// classifier compares rates between runs.
    pub disintegration_cells: usize,
    pub disintegration_ppc: usize,
}

impl Default for LandauConfig {
    fn default() -> Self {
        Self {
            cells_1d: 64,
            cells_2d: 64,
            particles_per_cell: 50,
            dt: 0.05,
            t_end: 30.0,
            xi: 0.05,
            k_values: vec![0.5, 0.4, 0.3],
            fit_window: (2.0, 25.0),
            disintegration_b: vec![0.0, 0.01, 0.05, 0.1, 0.15],
            disintegration_epsilon: 1e-3,
            disintegration_k: 0.3,
            disintegration_t_end: 30.0,
            disintegration_dt: 0.02,
            disintegration_cells: 128,
            disintegration_ppc: 100,
        }
    }
}

impl LandauConfig {
    /// Published-scale variant: 128 cells along the driven direction
    /// (128×128 in two dimensions), 100 particles per cell, Δt = 0.01.
    pub fn paper_scale(mut self) -> Self {
        self.cells_1d = 128;
        self.cells_2d = 128;
        self.particles_per_cell = 100;
        self.dt = 0.01;
        self.disintegration_dt = 0.01;
        self
    }
}

/// Cross-checks of the closed-form integral machinery.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// ε values for the quadrature-vs-closed-form comparison.
    pub quadrature_eps: Vec<f64>,
    /// ε and Δt grids for the averaging-identity residual scan.
    pub identity_eps: Vec<f64>,
    pub identity_dts: Vec<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            quadrature_eps: vec![1e-1, 1e-2],
            identity_eps: vec![1e-2, 1e-3, 1e-4],
            identity_dts: vec![0.1, 0.05],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_load_without_a_file() {
        let cfg = RunConfig::load(None).unwrap();
        assert_eq!(cfg.converge.dt_exponent_min, 4);
        assert_eq!(cfg.landau.cells_1d, 64);
        assert_eq!(cfg.landau.fit_window, (2.0, 25.0));
    }

    #[test]
    fn toml_overrides_a_subset_and_keeps_the_rest() {
        let text = "[landau]\ncells_1d = 32\ndt = 0.1\n\n[converge]\nt_end = 0.5\n";
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.landau.cells_1d, 32);
        assert_eq!(cfg.landau.dt, 0.1);
        assert_eq!(cfg.landau.particles_per_cell, 50);
        assert_eq!(cfg.converge.t_end, 0.5);
        assert_eq!(cfg.converge.dt_exponent_max, 10);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[landau]\ncels_1d = 32\n";
        assert!(toml::from_str::<RunConfig>(text).is_err());
    }

    #[test]
    fn paper_scale_bumps_resolution() {
        let lc = LandauConfig::default().paper_scale();
        assert_eq!(lc.cells_1d, 128);
        assert_eq!(lc.cells_2d, 128);
        assert_eq!(lc.particles_per_cell, 100);
        assert_eq!(lc.dt, 0.01);
    }
}
