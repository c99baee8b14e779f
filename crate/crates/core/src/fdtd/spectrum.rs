//! Windowed Fourier projection at prescribed frequencies.

use num_complex::Complex64 as C;

use super::config::MIN_ANALYSIS_PERIODS;
use super::FdtdError;

/// Uniformly sampled time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<C>,
    /// Complex (single-sided) samples; real cosines need the factor of two.
    pub analytic: bool,
}

impl Series {
    pub fn real(t0: f64, dt: f64, values: impl IntoIterator<Item = f64>) -> Self {
        Self {
            t0,
            dt,
            values: values.into_iter().map(|v| C::new(v, 0.0)).collect(),
            analytic: false,
        }
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        self.values.len().saturating_sub(1) as f64 * self.dt
    }
}

/// Hann weight of time `t` inside `[start, start + length]`.
#[inline]
pub fn hann(t: f64, start: f64, length: f64) -> f64 {
    let u = (t - start) / length;
    if (0.0..=1.0).contains(&u) {
        (std::f64::consts::PI * u).sin().powi(2)
    } else {
        0.0
    }
}

/// Amplitudes of `e^{-iωt}` components (or of `cos(ωt + φ)` for real input)
/// over the final `periods` periods of `omega_s`, Hann-weighted and normalised
/// so a unit tone returns one.
pub fn spectrum(series: &Series, freqs: &[f64], omega_s: f64, periods: f64) -> Result<Vec<C>, FdtdError> {
    if periods < MIN_ANALYSIS_PERIODS {
        return Err(FdtdError::Window {
            available: periods,
            required: MIN_ANALYSIS_PERIODS,
        });
    }
    let length = periods * 2.0 * std::f64::consts::PI / omega_s;
    if series.duration() + 1e-12 * length < length {
        return Err(FdtdError::Window {
            available: series.duration() * omega_s / (2.0 * std::f64::consts::PI),
            required: periods,
        });
    }
    let end = series.time(series.values.len() - 1);
    let start = end - length;
    let first = ((start - series.t0) / series.dt).floor().max(0.0) as usize;
    let mut out = vec![C::new(0.0, 0.0); freqs.len()];
    let mut wsum = 0.0;
    for j in first..series.values.len() {
        let t = series.time(j);
        let w = hann(t, start, length);
        if w == 0.0 {
            continue;
        }
        wsum += w;
        let x = series.values[j] * w;
        for (o, &f) in out.iter_mut().zip(freqs) {
            *o += x * C::from_polar(1.0, f * t);
        }
    }
    let scale = if series.analytic { 1.0 } else { 2.0 } / wsum;
    for (o, &f) in out.iter_mut().zip(freqs) {
        *o *= if f == 0.0 && !series.analytic { 0.5 * scale } else { scale };
    }
    Ok(out)
}

/// `20 log10(|a| / |reference|)`.
pub fn db(a: C, reference: C) -> f64 {
    20.0 * (a.norm() / reference.norm()).log10()
}
