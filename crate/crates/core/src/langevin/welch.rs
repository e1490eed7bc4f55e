use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use super::TraceEnsemble;
use crate::error::{Error, Result};
use crate::numeric::{median, pairwise_sum};
use crate::spectrum::{Spectrum, SpectrumKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchConfig {
    pub segment_len: usize,
    /// Fraction of a segment shared with the next one, in [0, 0.9].
    pub overlap: f64,
}

impl Default for WelchConfig {
    fn default() -> Self {
        WelchConfig {
            segment_len: 1024,
            overlap: 0.5,
        }
    }
}

/// Hann-windowed, mean-detrended Welch estimate of the two-sided PSD of one
/// real series sampled at `dt`, averaged over every segment of every series.
///
/// Output grid: `ω_k = 2πk/(N dt)`, `k = 0..=N/2`. Normalization
/// `P_k = dt |Σ w_n x_n e^{−2πikn/N}|² / Σ w_n²`, so summing `P_k Δω/2π`
/// over all two-sided bins returns the variance.
pub fn welch_series(series: &[Vec<f64>], dt: f64, cfg: &WelchConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = cfg.segment_len;
    if n < 4 {
        return Err(Error::validation("welch.segment_len", "must be >= 4"));
    }
    if !(0.0..=0.9).contains(&cfg.overlap) {
        return Err(Error::validation("welch.overlap", "must lie in [0, 0.9]"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::validation("welch.dt", "must be finite and > 0"));
    }
    if series.is_empty() || series.iter().any(|s| s.len() < n) {
        return Err(Error::validation(
            "welch.segment_len",
            "segment longer than a trace (or no traces)",
        ));
    }
    let hop = ((1.0 - cfg.overlap) * n as f64).round().max(1.0) as usize;
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect();
    let w2 = pairwise_sum(&window.iter().map(|w| w * w).collect::<Vec<_>>());
    let fft = FftPlanner::new().plan_fft_forward(n);
    let half = n / 2 + 1;

    // per-segment periodograms, summed in a fixed order
    let mut periodograms: Vec<Vec<f64>> = Vec::new();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for s in series {
        let mut start = 0;
        while start + n <= s.len() {
            let seg = &s[start..start + n];
            let mean = pairwise_sum(seg) / n as f64;
            for (b, (x, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
                *b = Complex64::new((x - mean) * w, 0.0);
            }
            fft.process(&mut buf);
            periodograms.push(buf[..half].iter().map(|c| dt * c.norm_sqr() / w2).collect());
            start += hop;
        }
    }
    let count = periodograms.len() as f64;
    let values = (0..half)
        .map(|k| {
            let col: Vec<f64> = periodograms.iter().map(|p| p[k]).collect();
            pairwise_sum(&col) / count
        })
        .collect();
    let omegas = (0..half)
        .map(|k| 2.0 * PI * k as f64 / (n as f64 * dt))
        .collect();
    Ok((omegas, values))
}

/// Welch PSD of `δq` over every realization, in m²·s on a rad/s grid.
pub fn welch_psd(ensemble: &TraceEnsemble, cfg: &WelchConfig) -> Result<Spectrum> {
    let series: Vec<Vec<f64>> = ensemble.traces.iter().map(|t| t.dq()).collect();
    let (omegas, values) = welch_series(&series, ensemble.sample_interval, cfg)?;
    Ok(Spectrum {
        omegas,
        values,
        kind: SpectrumKind::DisplacementClassicalMarkov,
        params_fingerprint: ensemble.params_fingerprint.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub band: (f64, f64),
    pub n_points: usize,
    pub max_rel_dev: f64,
    pub median_rel_dev: f64,
    pub tolerance: f64,
    /// Median deviation within tolerance.
    pub pass: bool,
}

/// Relative deviation `|measured/analytic − 1|` on the shared grid points
/// inside `band`.
pub fn compare_psd(
    measured: &Spectrum,
    analytic: &Spectrum,
    band: (f64, f64),
    tolerance: f64,
) -> Result<ComparisonReport> {
    if measured.omegas != analytic.omegas {
        return Err(Error::validation(
            "analytic",
            "must be evaluated on the measured frequency grid",
        ));
    }
    let devs: Vec<f64> = measured
        .omegas
        .iter()
        .zip(measured.values.iter().zip(&analytic.values))
        .filter(|(w, _)| **w >= band.0 && **w <= band.1)
        .map(|(_, (m, a))| (m / a - 1.0).abs())
        .collect();
    let median_rel_dev = median(&devs).ok_or(Error::EmptyBand {
        lo: band.0,
        hi: band.1,
    })?;
    Ok(ComparisonReport {
        band,
        n_points: devs.len(),
        max_rel_dev: devs.iter().copied().fold(0.0, f64::max),
        median_rel_dev,
        tolerance,
        pass: median_rel_dev <= tolerance,
    })
}
