//! Cross-validation of the closed-form integral machinery: nested
//! oscillatory integrals against adaptive quadrature, the averaging
//! identities against their computable Fourier-sum bounds, and the kinetic
//! dispersion oracle against frozen literature anchors.

use std::path::Path;

use anyhow::Result;
use num_complex::Complex64;
use oscint::reference::{landau_dispersion_rate, quadrature_oracle};
use oscint::{nested_integral, OscPoly};

use crate::config::OracleConfig;
use crate::report::{fmt_f64, write_csv, GateOutcome};
use crate::systems::profile_by_id;

const PROFILE_IDS: [&str; 3] = ["cos", "one_plus_cos", "two_plus_half_cos_sq"];

/// One closed-form vs quadrature comparison.
#[derive(Debug, Clone)]
pub struct EquivalenceRow {
    pub profile: String,
    pub eps: f64,
    pub t_n: f64,
    pub seq: String,
    pub closed: Complex64,
    pub quadrature: Complex64,
    pub rel_err: f64,
}

/// One averaging-identity residual with its analytic bound.
#[derive(Debug, Clone)]
pub struct IdentityRow {
    pub profile: String,
    pub eps: f64,
    pub dt: f64,
    pub t_n: f64,
    pub id: &'static str,
    pub residual: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct DispersionRow {
    pub k: f64,
    pub omega_re: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub equivalence: Vec<EquivalenceRow>,
    pub identities: Vec<IdentityRow>,
    pub dispersion: Vec<DispersionRow>,
    pub gates: Vec<GateOutcome>,
}

/// Σ|C_k|/|k| and Σ|C_k|/k² over the nonzero modes of θ — the quantities
/// the averaging-identity bounds are built from.
fn fourier_sums(theta: &OscPoly) -> (f64, f64) {
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for (coeff, _pow, mode) in theta.terms() {
        if mode != 0 {
            let m = mode.unsigned_abs() as f64;
            s1 += coeff.norm() / m;
            s2 += coeff.norm() / (m * m);
        }
    }
    (s1, s2)
}

fn equivalence_rows(cfg: &OracleConfig) -> Result<Vec<EquivalenceRow>> {
    let dt = 0.1;
    let mut rows = Vec::new();
    for pid in PROFILE_IDS {
        let profile = profile_by_id(pid)?;
        for &eps in &cfg.quadrature_eps {
            let theta = profile.as_oscpoly(1, eps)?;
            let one = OscPoly::from_terms(eps, vec![(Complex64::new(1.0, 0.0), 0, 0)]);
            for &t_n in &[0.0, 0.3] {
                let ramp_from_tn = OscPoly::from_terms(
                    eps,
                    vec![
                        (Complex64::new(1.0, 0.0), 1, 0),
                        (Complex64::new(-t_n, 0.0), 0, 0),
                    ],
                );
                let seqs: Vec<(&str, Vec<OscPoly>)> = vec![
                    ("theta", vec![theta.clone()]),
                    ("theta,theta", vec![theta.clone(), theta.clone()]),
                    ("one,theta", vec![one.clone(), theta.clone()]),
                    (
                        "theta,theta,theta",
                        vec![theta.clone(), theta.clone(), theta.clone()],
                    ),
                    (
                        "theta,one,theta",
                        vec![theta.clone(), one.clone(), theta.clone()],
                    ),
                    ("theta*(t-tn)", vec![theta.mul(&ramp_from_tn)?]),
                ];
                for (name, seq) in seqs {
                    let closed = nested_integral(&seq, t_n, dt)?;
                    let quad = quadrature_oracle(&seq, t_n, dt)?;
                    let rel_err = (closed - quad).norm() / quad.norm().max(1e-12);
                    rows.push(EquivalenceRow {
                        profile: pid.to_string(),
                        eps,
                        t_n,
                        seq: name.to_string(),
                        closed,
                        quadrature: quad,
                        rel_err,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Residuals of the five averaging identities. Each identity replaces an
/// oscillatory integral by its mean-field value; integrating the nonzero
/// Fourier modes by parts bounds the replacement error by ε (and ε·Δt, ε²)
/// times the mode sums above, with no unknown constants.
fn identity_rows(cfg: &OracleConfig) -> Result<Vec<IdentityRow>> {
    let mut rows = Vec::new();
    for pid in PROFILE_IDS {
        let profile = profile_by_id(pid)?;
        let mean = profile.mean();
        for &eps in &cfg.identity_eps {
            let theta = profile.as_oscpoly(1, eps)?;
            let one = OscPoly::from_terms(eps, vec![(Complex64::new(1.0, 0.0), 0, 0)]);
            let (s1, s2) = fourier_sums(&theta);
            for &dt in &cfg.identity_dts {
                for &t_n in &[0.0, 3.0 * dt] {
                    let i1 = theta.definite_integral(t_n, t_n + dt).re;
                    let i2 = nested_integral(&[one.clone(), theta.clone()], t_n, dt)?.re;
                    let i3 = dt * i1 - i2;
                    let ramp_up = OscPoly::from_terms(
                        eps,
                        vec![
                            (Complex64::new(1.0, 0.0), 1, 0),
                            (Complex64::new(-t_n, 0.0), 0, 0),
                        ],
                    );
                    let ramp_down = OscPoly::from_terms(
                        eps,
                        vec![
                            (Complex64::new(t_n + dt, 0.0), 0, 0),
                            (Complex64::new(-1.0, 0.0), 1, 0),
                        ],
                    );
                    let i4 = theta.mul(&ramp_up)?.definite_integral(t_n, t_n + dt).re;
                    let i5 = theta.mul(&ramp_down)?.definite_integral(t_n, t_n + dt).re;

                    let half = 0.5 * dt * dt * mean;
                    let slack = |b: f64| b * (1.0 + 1e-9) + 1e-13;
                    let entries: [(&'static str, f64, f64); 5] = [
                        ("single_vs_mean", (i1 - dt * mean).abs(), 2.0 * eps * s1),
                        (
                            "double_from_start",
                            (i2 - half).abs(),
                            eps * dt * s1 + 2.0 * eps * eps * s2,
                        ),
                        (
                            "double_to_end",
                            (i3 - half).abs(),
                            3.0 * eps * dt * s1 + 2.0 * eps * eps * s2,
                        ),
                        (
                            "ramp_up_weight",
                            (i4 - half).abs(),
                            eps * dt * s1 + 2.0 * eps * eps * s2,
                        ),
                        (
                            "ramp_down_weight",
                            (i5 - half).abs(),
                            eps * dt * s1 + 2.0 * eps * eps * s2,
                        ),
                    ];
                    for (id, residual, bound) in entries {
                        rows.push(IdentityRow {
                            profile: pid.to_string(),
                            eps,
                            dt,
                            t_n,
                            id,
                            residual,
                            bound: slack(bound),
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Frozen kinetic damping anchors: the classic tabulated roots of the
/// electrostatic dispersion relation for a unit Maxwellian.
const DISPERSION_ANCHORS: [(f64, f64); 3] =
    [(0.5, -0.15336), (0.4, -0.06613), (0.3, -0.01262)];

pub fn run_oracle(cfg: &OracleConfig, out_dir: Option<&Path>) -> Result<OracleReport> {
    let equivalence = equivalence_rows(cfg)?;
    let identities = identity_rows(cfg)?;

    let mut dispersion = Vec::new();
    for &k in &[0.3, 0.4, 0.5, 0.6] {
        let root = landau_dispersion_rate(k)?;
        dispersion.push(DispersionRow {
            k,
            omega_re: root.re,
            gamma: root.im,
        });
    }

    let mut gates = Vec::new();
    let worst_eq = equivalence
        .iter()
        .max_by(|a, b| a.rel_err.total_cmp(&b.rel_err))
        .expect("equivalence matrix is never empty");
    gates.push(GateOutcome::new(
        "oscpoly_matches_quadrature",
        equivalence.iter().all(|r| r.rel_err <= 1e-8),
        format!(
            "{} comparisons; worst relative gap {:.2e} ({} / {} / ε={} / t_n={})",
            equivalence.len(),
            worst_eq.rel_err,
            worst_eq.profile,
            worst_eq.seq,
            worst_eq.eps,
            worst_eq.t_n
        ),
    ));
    let worst_id = identities
        .iter()
        .max_by(|a, b| (a.residual / a.bound).total_cmp(&(b.residual / b.bound)))
        .expect("identity scan is never empty");
    gates.push(GateOutcome::new(
        "identity_residuals_within_bounds",
        identities.iter().all(|r| r.residual <= r.bound),
        format!(
            "{} residuals; worst residual/bound {:.3} ({} / {} / ε={} / Δt={})",
            identities.len(),
            worst_id.residual / worst_id.bound,
            worst_id.profile,
            worst_id.id,
            worst_id.eps,
            worst_id.dt
        ),
    ));
    let anchors_ok = DISPERSION_ANCHORS.iter().all(|&(k, g)| {
        dispersion
            .iter()
            .any(|d| d.k == k && (d.gamma - g).abs() <= 2e-5)
    });
    gates.push(GateOutcome::new(
        "dispersion_anchors",
        anchors_ok,
        format!(
            "rates {:?} vs anchors {:?} (tolerance 2e-5)",
            dispersion
                .iter()
                .map(|d| (d.k, (d.gamma * 1e5).round() / 1e5))
                .collect::<Vec<_>>(),
            DISPERSION_ANCHORS
        ),
    ));

    if let Some(dir) = out_dir {
        let eq_rows: Vec<Vec<String>> = equivalence
            .iter()
            .map(|r| {
                vec![
                    r.profile.clone(),
                    fmt_f64(r.eps),
                    fmt_f64(r.t_n),
                    r.seq.clone(),
                    fmt_f64(r.closed.re),
                    fmt_f64(r.closed.im),
                    fmt_f64(r.quadrature.re),
                    fmt_f64(r.quadrature.im),
                    fmt_f64(r.rel_err),
                ]
            })
            .collect();
        write_csv(
            dir,
            "oracle_equivalence.csv",
            &[
                "profile", "eps", "t_n", "seq", "closed_re", "closed_im", "quad_re", "quad_im",
                "rel_err",
            ],
            eq_rows,
        )?;
        let id_rows: Vec<Vec<String>> = identities
            .iter()
            .map(|r| {
                vec![
                    r.profile.clone(),
                    fmt_f64(r.eps),
                    fmt_f64(r.dt),
                    fmt_f64(r.t_n),
                    r.id.to_string(),
                    fmt_f64(r.residual),
                    fmt_f64(r.bound),
                ]
            })
            .collect();
        write_csv(
            dir,
            "oracle_identities.csv",
            &["profile", "eps", "dt", "t_n", "id", "residual", "bound"],
            id_rows,
        )?;
        let disp_rows: Vec<Vec<String>> = dispersion
            .iter()
            .map(|d| vec![fmt_f64(d.k), fmt_f64(d.omega_re), fmt_f64(d.gamma)])
            .collect();
        write_csv(dir, "oracle_dispersion.csv", &["k", "omega_re", "gamma"], disp_rows)?;
    }

    Ok(OracleReport {
        equivalence,
        identities,
        dispersion,
        gates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::all_passed;
    use oscint::PeriodicProfile;

    #[test]
    fn full_suite_passes_with_defaults() {
        let report = run_oracle(&OracleConfig::default(), None).unwrap();
        assert!(all_passed(&report.gates), "{:#?}", report.gates);
        assert_eq!(report.equivalence.len(), 3 * 2 * 2 * 6);
        assert_eq!(report.identities.len(), 3 * 3 * 2 * 2 * 5);
    }

    #[test]
    fn fourier_sums_of_the_pure_cosine() {
        // cos has C_{±1} = 1/2, so Σ|C_k|/|k| = 1 and Σ|C_k|/k² = 1.
        let theta = PeriodicProfile::cos().as_oscpoly(1, 0.1).unwrap();
        let (s1, s2) = fourier_sums(&theta);
        assert!((s1 - 1.0).abs() < 1e-14, "s1 = {s1}");
        assert!((s2 - 1.0).abs() < 1e-14, "s2 = {s2}");
    }

    #[test]
    fn identity_bounds_shrink_with_epsilon() {
        let cfg = OracleConfig {
            quadrature_eps: vec![],
            identity_eps: vec![1e-2, 1e-3],
            identity_dts: vec![0.1],
        };
        let rows = identity_rows(&cfg).unwrap();
        // For the single-integral identity at fixed profile/Δt/t_n, the
        // bound is proportional to ε, and the residual actually obeys it.
        let pick = |eps: f64| {
            rows.iter()
                .find(|r| r.profile == "cos" && r.eps == eps && r.t_n == 0.0 && r.id == "single_vs_mean")
                .unwrap()
        };
        let (big, small) = (pick(1e-2), pick(1e-3));
        assert!(big.bound / small.bound > 9.0 && big.bound / small.bound < 11.0);
        assert!(big.residual <= big.bound && small.residual <= small.bound);
    }
}
