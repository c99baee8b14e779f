//! Space-time harmonic bookkeeping shared by the bulk and slab eigenproblems.
//!
//! A field in the modulated medium is expanded as
//! `Σ_n a_n exp(i(k_zn z − ω_n t))` with `ω_n = ω + n ω_s` and
//! `k_zn = k_z + n κ_s`. Multiplying by `1 + δ cos(ω_s t − κ_s z + φ)` couples
//! harmonic `n` to `n ± 1`, so the constitutive relations become tridiagonal
//! Toeplitz matrices over the harmonic index.

use crate::linalg::CMat;
use crate::medium::ModulationProfile;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Harmonics with `|ω_n|` below this fraction of `max(ω_s, |ω|)` are treated as static.
pub const STATIC_TOL: f64 = 1e-9;

/// Contiguous range of harmonic indices `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarmonicWindow {
    pub lo: i32,
    pub hi: i32,
}

impl HarmonicWindow {
    /// Symmetric window `−order..=order` (`2·order + 1` harmonics).
    pub fn symmetric(order: usize) -> Self {
        assert!(order >= 1, "truncation order must be >= 1");
        let n = order as i32;
        Self { lo: -n, hi: n }
    }

    pub fn shifted(self, by: i32) -> Self {
        Self {
            lo: self.lo + by,
            hi: self.hi + by,
        }
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn indices(&self) -> impl Iterator<Item = i32> {
        self.lo..=self.hi
    }

    pub fn slot(&self, n: i32) -> Option<usize> {
        (self.lo..=self.hi).contains(&n).then(|| (n - self.lo) as usize)
    }

    pub fn harmonic(&self, slot: usize) -> i32 {
        self.lo + slot as i32
    }
}

/// `ω + n ω_s`, with exact zero snapped for harmonics that are static to
/// within [`STATIC_TOL`].
pub fn harmonic_frequency(omega: f64, n: i32, omega_s: f64) -> f64 {
    let w = omega + n as f64 * omega_s;
    if w.abs() < STATIC_TOL * omega_s.max(omega.abs()) {
        0.0
    } else {
        w
    }
}

/// Toeplitz matrix of `avg · (1 + depth cos(ω_s t − κ_s z + φ))` over the window.
pub fn convolution(avg: f64, depth: f64, phi: f64, window: HarmonicWindow) -> CMat {
    let k = window.len();
    let diag = Complex64::new(avg, 0.0);
    let half = 0.5 * avg * depth;
    // (εE)_n picks up E_{n+1} via e^{+iφ} and E_{n-1} via e^{-iφ}
    let upper = Complex64::from_polar(half, phi);
    let lower = Complex64::from_polar(half, -phi);
    let mut m = CMat::zeros(k, k);
    for i in 0..k {
        m[(i, i)] = diag;
        if i + 1 < k {
            m[(i, i + 1)] = upper;
            m[(i + 1, i)] = lower;
        }
    }
    m
}

pub fn permittivity_matrix(p: &ModulationProfile, window: HarmonicWindow) -> CMat {
    convolution(p.eps_avg, p.delta_e, p.phi, window)
}

pub fn permeability_matrix(p: &ModulationProfile, window: HarmonicWindow) -> CMat {
    convolution(p.mu_avg, p.delta_m, p.phi, window)
}

/// Inverse of the truncated permeability matrix (Hermitian positive definite
/// because `μ > 0` everywhere).
pub fn inverse_permeability_matrix(p: &ModulationProfile, window: HarmonicWindow) -> CMat {
    permeability_matrix(p, window)
        .try_inverse()
        .expect("permeability matrix of a positive profile is invertible")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::make_profile;
    use std::f64::consts::PI;

    #[test]
    fn window_bookkeeping() {
        let w = HarmonicWindow::symmetric(3);
        assert_eq!(w.len(), 7);
        assert_eq!(w.slot(0), Some(3));
        assert_eq!(w.slot(4), None);
        assert_eq!(w.harmonic(0), -3);
        assert_eq!(w.shifted(1).slot(4), Some(6));
    }

    #[test]
    fn static_harmonic_snaps_to_zero() {
        assert_eq!(harmonic_frequency(1.0, -1, 1.0), 0.0);
        assert_eq!(harmonic_frequency(1.0 + 1e-13, -1, 1.0), 0.0);
        assert_eq!(harmonic_frequency(0.5, -1, 1.0), -0.5);
    }

    /// The matrix must reproduce the product of two truncated Fourier series.
    #[test]
    fn convolution_matches_pointwise_product() {
        let p = make_profile(2.0, 1.0, 0.3, 0.0, 1.0, 1.3, 0.7).unwrap();
        let w = HarmonicWindow::symmetric(4);
        let m = permittivity_matrix(&p, w);
        // field with only harmonic 0 populated: (1, 0) at (k=0.2, ω=0.9)
        let (kz, om) = (0.2, 0.9);
        let mut a = crate::linalg::CVec::zeros(w.len());
        a[w.slot(0).unwrap()] = Complex64::new(1.0, 0.0);
        let d = &m * &a;
        for (z, t) in [(0.1, 0.3), (1.0, -2.0), (PI, 0.5)] {
            let field = Complex64::new(0.0, kz * z - om * t).exp();
            let (eps, _) = p.sample(z, t);
            let direct = field * eps;
            let series: Complex64 = w
                .indices()
                .map(|n| {
                    let ph = (kz + n as f64 * p.kappa_s) * z - (om + n as f64 * p.omega_s) * t;
                    d[w.slot(n).unwrap()] * Complex64::new(0.0, ph).exp()
                })
                .sum();
            assert!((direct - series).norm() < 1e-12);
        }
    }

    #[test]
    fn inverse_permeability_is_inverse() {
        let p = make_profile(1.0, 3.0, 0.0, 0.6, 1.0, 1.0, 0.2).unwrap();
        let w = HarmonicWindow::symmetric(5);
        let prod = permeability_matrix(&p, w) * inverse_permeability_matrix(&p, w);
        assert!((prod - CMat::identity(w.len(), w.len())).norm() < 1e-12);
    }
}
