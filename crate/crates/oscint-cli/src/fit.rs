//! Least-squares fits used by every experiment driver: log-log convergence
//! slopes (with residuals, so a "slope" that isn't actually a power law is
//! visible) and exponential decay rates extracted from oscillatory energy
//! traces via their local maxima.

use anyhow::{bail, Result};

/// Result of a straight-line least-squares fit y ≈ slope·x + intercept.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in y units.
    pub rms_residual: f64,
}

/// Ordinary least squares on (x, y) pairs. Needs at least two distinct x.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        bail!("fit_line: {} x values vs {} y values", xs.len(), ys.len());
    }
    let n = xs.len();
    if n < 2 {
        bail!("fit_line: need at least 2 points, got {n}");
    }
    let mean_x = xs.iter().sum::<f64>() / n as f64;
    let mean_y = ys.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        bail!("fit_line: all x values identical");
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        rms_residual: (ss_res / n as f64).sqrt(),
    })
}

/// Fit errors vs step sizes as err ≈ C·Δt^p in log-log coordinates and
/// return the fitted order p with its residual. Non-positive errors are
/// rejected (they would mean the scheme hit an exact answer or a bug).
pub fn fit_convergence_order(dts: &[f64], errs: &[f64]) -> Result<LineFit> {
    if dts.iter().any(|&d| d <= 0.0) {
        bail!("fit_convergence_order: non-positive step size");
    }
    if errs.iter().any(|&e| e <= 0.0 || !e.is_finite()) {
        bail!("fit_convergence_order: non-positive or non-finite error");
    }
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    fit_line(&xs, &ys)
}

/// Exponential rate fitted to the local maxima of a sampled trace.
#[derive(Debug, Clone)]
pub struct DecayFit {
    /// Field-amplitude rate γ: energy peaks behave like e^{2γt}.
    pub rate: f64,
    pub rms_residual: f64,
    /// (t, value) pairs of the peaks the fit used.
    pub peaks: Vec<(f64, f64)>,
}

/// Fit the envelope of an oscillating, exponentially growing or decaying
/// energy trace. Peaks are interior samples at least as large as both
/// neighbours (strictly positive, so the log is defined); the straight-line
/// fit runs on (t, ln peak) and the returned rate is half the log-energy
/// slope, i.e. the rate of the field amplitude itself.
pub fn fit_decay_rate(times: &[f64], values: &[f64], t_min: f64, t_max: f64) -> Result<DecayFit> {
    if times.len() != values.len() {
        bail!(
            "fit_decay_rate: {} times vs {} values",
            times.len(),
            values.len()
        );
    }
    let mut peaks = Vec::new();
    for i in 1..times.len().saturating_sub(1) {
        let t = times[i];
        if t < t_min || t > t_max {
            continue;
        }
        let v = values[i];
        if v > 0.0 && v >= values[i - 1] && v >= values[i + 1] {
            peaks.push((t, v));
        }
    }
    if peaks.len() < 4 {
        bail!(
            "fit_decay_rate: only {} peaks in [{t_min}, {t_max}], need at least 4",
            peaks.len()
        );
    }
    let xs: Vec<f64> = peaks.iter().map(|&(t, _)| t).collect();
    let ys: Vec<f64> = peaks.iter().map(|&(_, v)| v.ln()).collect();
    let fit = fit_line(&xs, &ys)?;
    Ok(DecayFit {
        rate: 0.5 * fit.slope,
        rms_residual: fit.rms_residual,
        peaks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fit_line_recovers_an_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let fit = fit_line(&xs, &ys).unwrap();
        assert_relative_eq!(fit.slope, 2.0, max_relative = 1e-14);
        assert_relative_eq!(fit.intercept, 1.0, max_relative = 1e-14);
        assert!(fit.rms_residual < 1e-14);
    }

    #[test]
    fn fit_line_rejects_degenerate_input() {
        assert!(fit_line(&[1.0], &[2.0]).is_err());
        assert!(fit_line(&[1.0, 1.0], &[2.0, 3.0]).is_err());
        assert!(fit_line(&[1.0, 2.0], &[2.0]).is_err());
    }

    #[test]
    fn convergence_order_of_a_synthetic_second_order_scheme() {
        let dts: Vec<f64> = (2..8).map(|k| 0.5f64.powi(k)).collect();
        let errs: Vec<f64> = dts.iter().map(|d| 3.0 * d * d).collect();
        let fit = fit_convergence_order(&dts, &errs).unwrap();
        assert_relative_eq!(fit.slope, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn convergence_order_rejects_zero_errors() {
        assert!(fit_convergence_order(&[0.1, 0.05], &[1e-3, 0.0]).is_err());
    }

    #[test]
    fn decay_rate_of_a_synthetic_damped_wave() {
        // Energy trace e^{2γt}·cos²(ωt) with γ = −0.15, sampled densely
        // enough that every oscillation contributes a peak.
        let gamma = -0.15;
        let omega = 1.4;
        let dt = 0.01;
        let n = 3001;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|&t| (2.0 * gamma * t).exp() * (omega * t).cos().powi(2))
            .collect();
        let fit = fit_decay_rate(&times, &values, 2.0, 28.0).unwrap();
        assert_relative_eq!(fit.rate, gamma, max_relative = 1e-2);
        assert!(fit.peaks.len() > 8);
    }

    #[test]
    fn decay_rate_needs_enough_peaks() {
        let times: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let values = vec![1.0; 10];
        // A constant positive trace makes every interior point a peak, so
        // the fit succeeds with slope zero...
        let fit = fit_decay_rate(&times, &values, 0.0, 9.0).unwrap();
        assert!(fit.rate.abs() < 1e-14);
        // ...but a monotone trace has no interior peaks at all.
        let ramp: Vec<f64> = (0..10).map(|i| (i + 1) as f64).collect();
        assert!(fit_decay_rate(&times, &ramp, 0.0, 9.0).is_err());
    }
}
