//! Discrete Fourier analysis of sampled trajectories: magnitude spectrum on
//! the non-negative angular-frequency axis and local-maximum peak
//! extraction, used to read mode frequencies off long time series.

use anyhow::{bail, Result};
use num_complex::Complex64;
use rustfft::FftPlanner;

/// One spectral line: angular frequency and DFT magnitude.
#[derive(Debug, Clone, Copy)]
pub struct SpectralPeak {
    pub omega: f64,
    pub magnitude: f64,
}

/// Magnitude spectrum of a real series sampled at spacing `dt`, restricted
/// to bins 0..=N/2. Returned as (angular frequency, magnitude) pairs with
/// ω_j = 2πj/(N·dt). No window is applied: the drivers sample at fixed Δt
/// over horizons long enough that bin spacing, not leakage, limits the
/// frequency read-off.
pub fn magnitude_spectrum(samples: &[f64], dt: f64) -> Result<Vec<(f64, f64)>> {
    let n = samples.len();
    if n < 4 {
        bail!("magnitude_spectrum: need at least 4 samples, got {n}");
    }
    if !(dt > 0.0) {
        bail!("magnitude_spectrum: non-positive sample spacing {dt}");
    }
    let mut buf: Vec<Complex64> = samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let domega = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    Ok((0..=n / 2)
        .map(|j| (j as f64 * domega, buf[j].norm()))
        .collect())
}

/// Bin spacing Δω = 2π/(N·dt) of [`magnitude_spectrum`] output — the
/// resolution limit for any frequency read off the spectrum.
pub fn bin_width(n_samples: usize, dt: f64) -> f64 {
    2.0 * std::f64::consts::PI / (n_samples as f64 * dt)
}

/// Extract the significant peaks of a magnitude spectrum: interior bins at
/// least as large as both neighbours and above a noise threshold of ten
/// times the median non-DC magnitude (plus a small floor tied to the
/// largest magnitude, so an all-but-flat spectrum yields no spurious peaks).
pub fn extract_peaks(spectrum: &[(f64, f64)]) -> Vec<SpectralPeak> {
    if spectrum.len() < 3 {
        return Vec::new();
    }
    let mut mags: Vec<f64> = spectrum[1..].iter().map(|&(_, m)| m).collect();
    mags.sort_by(|a, b| a.total_cmp(b));
    let median = mags[mags.len() / 2];
    // The floor uses the global maximum (DC included) so that a constant
    // series, whose AC bins hold only rounding noise, yields no peaks.
    let max = spectrum.iter().map(|&(_, m)| m).fold(0.0, f64::max);
    let threshold = 10.0 * median + 1e-12 * max + 1e-300;
    let mut peaks = Vec::new();
    for i in 1..spectrum.len() - 1 {
        let (omega, m) = spectrum[i];
        if m > threshold && m >= spectrum[i - 1].1 && m >= spectrum[i + 1].1 {
            peaks.push(SpectralPeak {
                omega,
                magnitude: m,
            });
        }
    }
    peaks
}
