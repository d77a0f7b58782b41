//! Command-line front end: one subcommand per experiment family. Each run
//! prints its gate verdicts (and writes CSV files when `--out` is given);
//! the process exits 0 only if every configured gate passed.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use oscint_cli::config::RunConfig;
use oscint_cli::report::{all_passed, print_gates, GateOutcome};
use oscint_cli::{confinement, convergence, energy, landau, oracle_suite, spectrum};
use oscint_pic::ExecMode;

#[derive(Parser)]
#[command(
    name = "oscint",
    about = "Uniformly accurate oscillatory integrators: experiment harness",
    version
)]
struct Cli {
    /// TOML file overriding experiment defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV outputs (omit to skip writing files).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the particle sampler.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads (1 forces fully sequential execution).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run the kinetic experiments at the published resolution instead of
    /// desk scale.
    #[arg(long, global = true)]
    paper_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Accuracy sweeps over (ε, Δt) grids plus the ε → 0 degeneracy study.
    Converge {
        /// Run a single named case (default: all registered cases).
        #[arg(long)]
        case: Option<String>,
    },
    /// Long-horizon energy and norm conservation audits.
    Energy,
    /// Frequency spectra of averaged trajectories.
    Spectrum,
    /// Orbit-extent study in the confining well.
    Confine,
    /// Particle-in-cell damping runs.
    Landau {
        /// Also run the field-amplitude scan with its damping classifier.
        #[arg(long)]
        disintegration: bool,
        /// Write the final particle states of the first damping run.
        #[arg(long)]
        snapshot: bool,
    },
    /// Closed-form integral and dispersion-oracle cross-checks.
    Oracle,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if cli.paper_scale {
        cfg.landau = cfg.landau.paper_scale();
    }
    if let Command::Converge { case: Some(name) } = &cli.command {
        cfg.converge.cases = vec![name.clone()];
    }

    #[cfg(feature = "parallel")]
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .ok(); // a pool may already exist in tests; same semantics
    }
    let exec = if cli.threads == Some(1) {
        ExecMode::Sequential
    } else {
        ExecMode::default()
    };
    let out = cli.out.as_deref();

    let gates: Vec<GateOutcome> = match cli.command {
        Command::Converge { .. } => {
            let reports = convergence::run_convergence(&cfg.converge, out)?;
            let mut gates = Vec::new();
            for r in &reports {
                println!(
                    "{}: envelope slope {:.3} (rms residual {:.2e})",
                    r.scheme.name(),
                    r.envelope.slope,
                    r.envelope.rms_residual
                );
                for (eps, fit) in &r.per_eps {
                    println!("  ε={eps:>8.0e}: slope {:.3}", fit.slope);
                }
                gates.push(r.gate.clone());
            }
            let degeneracy = convergence::run_limit_degeneracy(out)?;
            for (eps, gap) in &degeneracy.rows {
                println!("degeneracy ε={eps:.0e}: gap {gap:.3e}");
            }
            gates.push(degeneracy.gate);
            gates
        }
        Command::Energy => {
            let report = energy::run_energy(&cfg.energy, out)?;
            let isometry = energy::run_isometry(&cfg.energy, out)?;
            let mut gates = report.gates;
            gates.push(isometry.gate);
            gates
        }
        Command::Spectrum => {
            let report = spectrum::run_spectrum(&cfg.spectrum, out)?;
            for run in &report.runs {
                let peaks: Vec<String> = run
                    .peaks
                    .iter()
                    .map(|p| format!("{:.4} (|X|={:.2e})", p.omega, p.magnitude))
                    .collect();
                println!(
                    "{}: bin width {:.3e}; peaks: {}",
                    run.label,
                    run.bin,
                    peaks.join(", ")
                );
            }
            report.gates
        }
        Command::Confine => {
            let report = confinement::run_confinement(&cfg.confine, out)?;
            for row in &report.rows {
                println!("B={:<4} ε={:<6}: extent {:.4}", row.b, row.eps, row.extent);
            }
            println!("free control: extent {:.2}", report.control_extent);
            report.gates
        }
        Command::Landau {
            disintegration,
            snapshot,
        } => {
            let report = landau::run_landau(&cfg.landau, cli.seed, exec, snapshot, out)?;
            let mut gates = report.gates;
            for run in &report.runs {
                println!(
                    "{}: fitted rate {:.4}{} ({} peaks)",
                    run.label,
                    run.fit.rate,
                    run.oracle
                        .map(|o| format!(" vs oracle {o:.4}"))
                        .unwrap_or_default(),
                    run.fit.peaks.len()
                );
            }
            if disintegration {
                let dis = landau::run_disintegration(&cfg.landau, cli.seed, exec, out)?;
                println!("disintegration baseline rate {:.4}", dis.baseline_rate);
                for row in &dis.rows {
                    println!(
                        "B={:<5}: rate {:.4} → {}",
                        row.b,
                        row.rate,
                        row.class
                            .map(|c| format!("{c:?}"))
                            .unwrap_or_else(|| "baseline".to_string())
                    );
                }
                gates.extend(dis.gates);
            }
            gates
        }
        Command::Oracle => {
            let report = oracle_suite::run_oracle(&cfg.oracle, out)?;
            for d in &report.dispersion {
                println!("k={}: ω = {:.5} + {:.5}i", d.k, d.omega_re, d.gamma);
            }
            report.gates
        }
    };

    print_gates(&gates);
    let ok = all_passed(&gates);
    println!("{}", if ok { "ALL GATES PASS" } else { "GATE FAILURES PRESENT" });
    Ok(ok)
}
