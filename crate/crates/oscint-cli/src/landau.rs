//! Kinetic experiments: collisionless damping of seeded density waves at
//! zero magnetic field (validated against the dispersion-relation oracle)
//! and the breakdown of that damping as the oscillatory field amplitude B
//! grows.

use std::f64::consts::TAU;
use std::path::Path;

use anyhow::{Context, Result};
use oscint::linear::StepContext;
use oscint::reference::landau_dispersion_rate;
use oscint::PeriodicProfile;
use oscint_pic::{
    deposit_density_mode, electric_energy, sample_initial, solve_poisson, to_guiding_ensemble,
    ExecMode, Grid2D, InitCondition, PicPusher, PusherMode,
};

use crate::config::LandauConfig;
use crate::fit::{fit_decay_rate, DecayFit};
use crate::report::{fmt_f64, write_csv, GateOutcome};

/// Spline order used for deposition and interpolation throughout.
const SPLINE_ORDER: usize = 2;

/// One particle-in-cell energy history with its fitted envelope rate.
#[derive(Debug, Clone)]
pub struct LandauRun {
    pub label: String,
    pub k: f64,
    pub b: f64,
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub fit: DecayFit,
    /// Dispersion-oracle amplitude rate, when one applies (B = 0 runs).
    pub oracle: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LandauReport {
    pub runs: Vec<LandauRun>,
    pub gates: Vec<GateOutcome>,
}

struct RunSpec {
    label: String,
    /// (ξ₁, k₁, ξ₂, k₂)
    ic: (f64, f64, f64, f64),
    cells: (usize, usize),
    particles_per_cell: usize,
    b: f64,
    epsilon: f64,
    dt: f64,
    t_end: f64,
}

/// March one PIC run and record the electric energy after every step.
fn run_pic(
    spec: &RunSpec,
    seed: u64,
    exec: ExecMode,
    fit_window: (f64, f64),
    snapshot_dir: Option<&Path>,
) -> Result<LandauRun> {
    let profile = PeriodicProfile::cos();
    let (xi1, k1, xi2, k2) = spec.ic;
    let ic = InitCondition::new(xi1, k1, xi2, k2)?;
    let (l1, l2) = ic.domain_lengths();
    let grid = Grid2D::new(spec.cells.0, spec.cells.1, l1, l2)?;
    let n_p = spec.cells.0 * spec.cells.1 * spec.particles_per_cell;

    let mut ens = sample_initial(&ic, n_p, seed)?;
    to_guiding_ensemble(&mut ens, &profile, spec.b, spec.epsilon, 0.0);
    let rho = deposit_density_mode(&ens, &grid, SPLINE_ORDER, exec)?;
    let mut fields = solve_poisson(rho, &grid)?;

    let pusher = PicPusher::new(&profile, spec.b, spec.epsilon)?;
    let n_steps = (spec.t_end / spec.dt).round() as usize;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut energy = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    energy.push(electric_energy(&fields, &grid));
    for i in 0..n_steps {
        let ctx = StepContext::new(i as f64 * spec.dt, spec.dt, 2)?;
        let (new_ens, new_fields) = pusher.step(
            &ens,
            &fields,
            &grid,
            &ctx,
            PusherMode::Order2Explicit,
            SPLINE_ORDER,
            exec,
        )?;
        ens = new_ens;
        fields = new_fields;
        times.push((i + 1) as f64 * spec.dt);
        energy.push(electric_energy(&fields, &grid));
    }

    if let Some(dir) = snapshot_dir {
        let rows: Vec<Vec<String>> = ens
            .positions
            .iter()
            .zip(&ens.momenta)
            .map(|(x, q)| vec![fmt_f64(x[0]), fmt_f64(x[1]), fmt_f64(q[0]), fmt_f64(q[1])])
            .collect();
        write_csv(
            dir,
            &format!("landau_snapshot_{}.csv", spec.label),
            &["x1", "x2", "q1", "q2"],
            rows,
        )?;
    }

    let fit = fit_decay_rate(&times, &energy, fit_window.0, fit_window.1)
        .with_context(|| format!("fitting the {} energy envelope", spec.label))?;
    Ok(LandauRun {
        label: spec.label.clone(),
        k: k1,
        b: spec.b,
        times,
        energy,
        fit,
        oracle: None,
    })
}

fn write_run_csvs(runs: &[LandauRun], dir: &Path) -> Result<()> {
    for run in runs {
        let rows: Vec<Vec<String>> = run
            .times
            .iter()
            .zip(&run.energy)
            .map(|(&t, &e)| vec![fmt_f64(t), fmt_f64(e)])
            .collect();
        write_csv(
            dir,
            &format!("landau_{}.csv", run.label),
            &["t", "elec_energy"],
            rows,
        )?;
    }
    let summary: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                fmt_f64(r.k),
                fmt_f64(r.b),
                fmt_f64(r.fit.rate),
                fmt_f64(r.fit.rms_residual),
                r.oracle.map(fmt_f64).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        dir,
        "landau_summary.csv",
        &["label", "k", "b", "fitted_rate", "rms_residual", "oracle_rate"],
        summary,
    )?;
    Ok(())
}

/// Zero-field damping scan: one-dimensional-like runs for each configured
/// wave number plus the square two-dimensional run at k = 0.5. Writes one
/// `landau_<label>.csv` per run and `landau_summary.csv`.
pub fn run_landau(
    cfg: &LandauConfig,
    seed: u64,
    exec: ExecMode,
    snapshot: bool,
    out_dir: Option<&Path>,
) -> Result<LandauReport> {
    let mut runs = Vec::new();
    let mut gates = Vec::new();

    for (idx, &k) in cfg.k_values.iter().enumerate() {
        let spec = RunSpec {
            label: format!("1d_k{k}"),
            ic: (cfg.xi, k, 0.0, TAU),
            cells: (cfg.cells_1d, 4),
            particles_per_cell: cfg.particles_per_cell,
            b: 0.0,
            epsilon: 1.0,
            dt: cfg.dt,
            t_end: cfg.t_end,
        };
        // Snapshots (when requested) are written for the first scan run.
        let snap_dir = (snapshot && idx == 0).then_some(out_dir).flatten();
        let mut run = run_pic(&spec, seed, exec, cfg.fit_window, snap_dir)?;
        let oracle = landau_dispersion_rate(k)?.im;
        run.oracle = Some(oracle);
        // The two larger wave numbers damp fast enough to be fitted cleanly
        // at desk scale; smaller k values are reported without a gate.
        if k > 0.35 {
            let rel = (run.fit.rate - oracle).abs() / oracle.abs();
            gates.push(GateOutcome::new(
                format!("landau_rate_{}", run.label),
                rel <= 0.15,
                format!(
                    "fitted rate {:.4} vs oracle {oracle:.4} (relative gap {rel:.2}, limit 0.15)",
                    run.fit.rate
                ),
            ));
        }
        runs.push(run);
    }

    let k2d = 0.5;
    let spec = RunSpec {
        label: "2d_k0.5".to_string(),
        ic: (cfg.xi, k2d, cfg.xi, k2d),
        cells: (cfg.cells_2d, cfg.cells_2d),
        particles_per_cell: cfg.particles_per_cell,
        b: 0.0,
        epsilon: 1.0,
        dt: cfg.dt,
        t_end: cfg.t_end,
    };
    let mut run = run_pic(&spec, seed, exec, cfg.fit_window, None)?;
    run.oracle = Some(-0.15);
    let rel = (run.fit.rate - (-0.15)).abs() / 0.15;
    gates.push(GateOutcome::new(
        "landau_rate_2d_k0.5",
        rel <= 0.20,
        format!(
            "fitted rate {:.4} vs the square-domain value -0.15 (relative gap {rel:.2}, limit 0.20)",
            run.fit.rate
        ),
    ));
    runs.push(run);

    if let Some(dir) = out_dir {
        write_run_csvs(&runs, dir)?;
    }
    Ok(LandauReport { runs, gates })
}

/// Verdict of the damping classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampingClass {
    Damping,
    Disintegrated,
}

/// A run still counts as damping when its envelope decays at no less than
/// half the zero-field rate measured at the same resolution; anything
/// weaker (or growing) means the damping has broken down.
pub fn classify(rate: f64, baseline_rate: f64) -> DampingClass {
    if rate < 0.0 && rate.abs() >= 0.5 * baseline_rate.abs() {
        DampingClass::Damping
    } else {
        DampingClass::Disintegrated
    }
}

#[derive(Debug, Clone)]
pub struct DisintegrationRow {
    pub b: f64,
    pub rate: f64,
    pub class: Option<DampingClass>,
}

#[derive(Debug, Clone)]
pub struct DisintegrationReport {
    pub baseline_rate: f64,
    pub rows: Vec<DisintegrationRow>,
    pub runs: Vec<LandauRun>,
    pub gates: Vec<GateOutcome>,
}

/// Field-amplitude scan at fixed k and ε: the B = 0 run calibrates the
/// baseline rate, and each B > 0 run is classified against it. Writes one
/// `landau_<label>.csv` per run plus `landau_disintegration.csv`.
pub fn run_disintegration(
    cfg: &LandauConfig,
    seed: u64,
    exec: ExecMode,
    out_dir: Option<&Path>,
) -> Result<DisintegrationReport> {
    let k = cfg.disintegration_k;
    let mut runs = Vec::new();
    for &b in &cfg.disintegration_b {
        let spec = RunSpec {
            label: format!("b{b}_k{k}"),
            ic: (cfg.xi, k, 0.0, TAU),
            cells: (cfg.disintegration_cells, 4),
            particles_per_cell: cfg.disintegration_ppc,
            b,
            epsilon: cfg.disintegration_epsilon,
            dt: cfg.disintegration_dt,
            t_end: cfg.disintegration_t_end,
        };
        runs.push(run_pic(&spec, seed, exec, cfg.fit_window, None)?);
    }

    let baseline = runs
        .iter()
        .find(|r| r.b == 0.0)
        .context("the disintegration scan needs a B = 0 baseline run")?;
    let baseline_rate = baseline.fit.rate;

    let mut rows = Vec::new();
    let mut gates = Vec::new();
    for run in &runs {
        let class = (run.b != 0.0).then(|| classify(run.fit.rate, baseline_rate));
        // Only the published boundary amplitudes carry gates; other values
        // are reported for context.
        let expected = match run.b {
            b if b == 0.01 || b == 0.05 => Some(DampingClass::Damping),
            b if b == 0.1 || b == 0.15 => Some(DampingClass::Disintegrated),
            _ => None,
        };
        if let (Some(c), Some(e)) = (class, expected) {
            gates.push(GateOutcome::new(
                format!("disintegration_b{}", run.b),
                c == e,
                format!(
                    "rate {:.4} vs baseline {baseline_rate:.4} → {c:?} (expected {e:?})",
                    run.fit.rate
                ),
            ));
        }
        rows.push(DisintegrationRow {
            b: run.b,
            rate: run.fit.rate,
            class,
        });
    }

    if let Some(dir) = out_dir {
        write_run_csvs(&runs, dir)?;
        let csv_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    fmt_f64(r.b),
                    fmt_f64(r.rate),
                    match r.class {
                        None => "baseline".to_string(),
                        Some(DampingClass::Damping) => "damping".to_string(),
                        Some(DampingClass::Disintegrated) => "disintegrated".to_string(),
                    },
                ]
            })
            .collect();
        write_csv(
            dir,
            "landau_disintegration.csv",
            &["b", "fitted_rate", "class"],
            csv_rows,
        )?;
    }

    Ok(DisintegrationReport {
        baseline_rate,
        rows,
        runs,
        gates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classifier_boundaries() {
        let baseline = -0.1;
        assert_eq!(classify(-0.09, baseline), DampingClass::Damping);
        assert_eq!(classify(-0.05, baseline), DampingClass::Damping);
        assert_eq!(classify(-0.049, baseline), DampingClass::Disintegrated);
        assert_eq!(classify(0.02, baseline), DampingClass::Disintegrated);
        // A growing envelope is never damping, however large the magnitude.
        assert_eq!(classify(0.2, baseline), DampingClass::Disintegrated);
    }

    #[test]
    #[ignore = "calibration probe"]
    fn probe_desk_scale() {
        // Acceptance-scale 1D-like run: dump the peak sequence to see where
        // the decay meets the sampling-noise floor.
        let spec = RunSpec {
            label: "desk".to_string(),
            ic: (0.05, 0.5, 0.0, TAU),
            cells: (64, 4),
            particles_per_cell: 50,
            b: 0.0,
            epsilon: 1.0,
            dt: 0.05,
            t_end: 30.0,
        };
        let t = std::time::Instant::now();
        let run = run_pic(&spec, 1, ExecMode::default(), (2.0, 25.0), None).unwrap();
        println!(
            "desk 64x4 ppc 50: rate {:.4} resid {:.2e} ({:?})",
            run.fit.rate,
            run.fit.rms_residual,
            t.elapsed()
        );
        for (t, v) in &run.fit.peaks {
            println!("  peak t {t:.2}  E {v:.4e}  lnE {:.2}", v.ln());
        }
    }

    #[test]
    fn tiny_zero_field_run_damps() {
        // 16×4 cells and 20 particles per cell is far below the accuracy
        // gates, but the energy envelope must still trend downward.
        let cfg = LandauConfig {
            cells_1d: 16,
            particles_per_cell: 20,
            dt: 0.1,
            t_end: 15.0,
            k_values: vec![0.5],
            fit_window: (1.0, 14.0),
            ..LandauConfig::default()
        };
        let spec = RunSpec {
            label: "tiny".to_string(),
            ic: (cfg.xi, 0.5, 0.0, TAU),
            cells: (cfg.cells_1d, 4),
            particles_per_cell: cfg.particles_per_cell,
            b: 0.0,
            epsilon: 1.0,
            dt: cfg.dt,
            t_end: cfg.t_end,
        };
        let run = run_pic(&spec, 42, ExecMode::default(), cfg.fit_window, None).unwrap();
        assert!(
            run.fit.rate < -0.05,
            "rate {} (energy: first {:.3e}, last {:.3e})",
            run.fit.rate,
            run.energy[0],
            run.energy.last().unwrap()
        );
    }
}
