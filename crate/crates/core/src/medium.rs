//! Constitutive description of the modulated slab and its surroundings.
//!
//! All quantities are in natural units (`c = 1`, vacuum ε = μ = 1). The
//! modulation is a single-tone traveling wave along the tangential axis `z`:
//!
//! ```text
//! ε(z, t) = ε_avg · (1 + δ_e · cos(ω_s t − κ_s z + φ))
//! μ(z, t) = μ_avg · (1 + δ_m · cos(ω_s t − κ_s z + φ))
//! ```
//!
//! The slab normal is `x`; the incidence plane is `x–z`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative distance to the sonic point below which the Floquet series is
/// considered slowly convergent.
pub const SONIC_GUARD: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MediumError {
    #[error("{field} = {value} is out of range: {rule}")]
    OutOfRange {
        field: &'static str,
        value: f64,
        rule: &'static str,
    },
}

fn check(field: &'static str, value: f64, ok: bool, rule: &'static str) -> Result<(), MediumError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(MediumError::OutOfRange { field, value, rule })
    }
}

/// Space-time modulation of permittivity and permeability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationProfile {
    pub eps_avg: f64,
    pub mu_avg: f64,
    pub delta_e: f64,
    pub delta_m: f64,
    pub omega_s: f64,
    pub kappa_s: f64,
    pub phi: f64,
}

impl ModulationProfile {
    /// Validating constructor. Out-of-range inputs are rejected, never clamped.
    pub fn new(
        eps_avg: f64,
        mu_avg: f64,
        delta_e: f64,
        delta_m: f64,
        omega_s: f64,
        kappa_s: f64,
        phi: f64,
    ) -> Result<Self, MediumError> {
        let p = Self {
            eps_avg,
            mu_avg,
            delta_e,
            delta_m,
            omega_s,
            kappa_s,
            phi,
        };
        p.validate()?;
        Ok(p)
    }

    /// Unmodulated medium with the given averages (`ω_s = 1`, `κ_s = 0`).
    pub fn stat(eps_avg: f64, mu_avg: f64) -> Result<Self, MediumError> {
        Self::new(eps_avg, mu_avg, 0.0, 0.0, 1.0, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<(), MediumError> {
        check("eps_avg", self.eps_avg, self.eps_avg > 0.0, "must be > 0")?;
        check("mu_avg", self.mu_avg, self.mu_avg > 0.0, "must be > 0")?;
        check(
            "delta_e",
            self.delta_e,
            (0.0..1.0).contains(&self.delta_e),
            "must lie in [0, 1)",
        )?;
        check(
            "delta_m",
            self.delta_m,
            (0.0..1.0).contains(&self.delta_m),
            "must lie in [0, 1)",
        )?;
        check("omega_s", self.omega_s, self.omega_s > 0.0, "must be > 0")?;
        check("kappa_s", self.kappa_s, self.kappa_s >= 0.0, "must be >= 0")?;
        check("phi", self.phi, true, "must be finite")?;
        Ok(())
    }

    /// Phase of the modulation, `ω_s t − κ_s z + φ`.
    #[inline]
    pub fn phase(&self, z: f64, t: f64) -> f64 {
        self.omega_s * t - self.kappa_s * z + self.phi
    }

    /// Pointwise `(ε, μ)` at `(z, t)`.
    #[inline]
    pub fn sample(&self, z: f64, t: f64) -> (f64, f64) {
        let c = self.phase(z, t).cos();
        (
            self.eps_avg * (1.0 + self.delta_e * c),
            self.mu_avg * (1.0 + self.delta_m * c),
        )
    }

    pub fn is_static(&self) -> bool {
        self.delta_e == 0.0 && self.delta_m == 0.0
    }

    /// `δ_e == δ_m`: the local wave impedance stays at `sqrt(μ_avg/ε_avg)`.
    pub fn is_impedance_matched(&self) -> bool {
        self.delta_e == self.delta_m
    }

    /// Refractive index of the average medium.
    pub fn index(&self) -> f64 {
        (self.eps_avg * self.mu_avg).sqrt()
    }

    pub fn impedance(&self) -> f64 {
        (self.mu_avg / self.eps_avg).sqrt()
    }

    /// Phase velocity of the unmodulated medium.
    pub fn phase_velocity(&self) -> f64 {
        1.0 / self.index()
    }

    /// Velocity of the modulation pattern, `ω_s / κ_s` (infinite for `κ_s = 0`).
    pub fn modulation_velocity(&self) -> f64 {
        if self.kappa_s == 0.0 {
            f64::INFINITY
        } else {
            self.omega_s / self.kappa_s
        }
    }

    /// `|v_m − v_p| / v_p`.
    pub fn sonic_detuning(&self) -> f64 {
        let vp = self.phase_velocity();
        (self.modulation_velocity() - vp).abs() / vp
    }

    pub fn is_near_sonic(&self) -> bool {
        !self.is_static() && self.sonic_detuning() < SONIC_GUARD
    }

    /// Range `(v_min, v_max)` of the local phase velocity `1/sqrt(ε(z,t) μ(z,t))`.
    pub fn local_velocity_range(&self) -> (f64, f64) {
        let hi = (self.eps_avg * self.mu_avg * (1.0 + self.delta_e) * (1.0 + self.delta_m)).sqrt();
        let lo = (self.eps_avg * self.mu_avg * (1.0 - self.delta_e) * (1.0 - self.delta_m)).sqrt();
        // the extremes need not be reached together, so this brackets the true range
        (1.0 / hi, 1.0 / lo)
    }

    /// Modulation velocity inside the local phase-velocity range: the pattern
    /// is luminal somewhere and harmonic expansions stop converging.
    pub fn is_luminal(&self) -> bool {
        let (lo, hi) = self.local_velocity_range();
        let vm = self.modulation_velocity();
        !self.is_static() && vm >= lo && vm <= hi
    }
}

/// `make_profile` with positional arguments in the documented order.
pub fn make_profile(
    eps_avg: f64,
    mu_avg: f64,
    delta_e: f64,
    delta_m: f64,
    omega_s: f64,
    kappa_s: f64,
    phi: f64,
) -> Result<ModulationProfile, MediumError> {
    ModulationProfile::new(eps_avg, mu_avg, delta_e, delta_m, omega_s, kappa_s, phi)
}

pub fn sample_material(profile: &ModulationProfile, z: f64, t: f64) -> (f64, f64) {
    profile.sample(z, t)
}

/// Finite slab `0 <= x <= thickness` embedded in a static exterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabGeometry {
    pub thickness: f64,
    pub exterior_eps: f64,
    pub exterior_mu: f64,
}

impl SlabGeometry {
    pub fn new(thickness: f64, exterior_eps: f64, exterior_mu: f64) -> Result<Self, MediumError> {
        check("thickness", thickness, thickness > 0.0, "must be > 0")?;
        check("exterior_eps", exterior_eps, exterior_eps > 0.0, "must be > 0")?;
        check("exterior_mu", exterior_mu, exterior_mu > 0.0, "must be > 0")?;
        Ok(Self {
            thickness,
            exterior_eps,
            exterior_mu,
        })
    }

    /// Slab in vacuum.
    pub fn in_vacuum(thickness: f64) -> Result<Self, MediumError> {
        Self::new(thickness, 1.0, 1.0)
    }

    pub fn exterior_index(&self) -> f64 {
        (self.exterior_eps * self.exterior_mu).sqrt()
    }
}

/// TE plane wave (`E_y`, `H_x`, `H_z`) incident from the exterior.
///
/// `theta` is in degrees from the `+z` modulation axis: `θ < 90°` co-propagates
/// with the modulation, `θ > 90°` counter-propagates. The normal component
/// always points into the slab from the `x < 0` side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncidentWave {
    pub omega_0: f64,
    pub theta: f64,
    pub amplitude: f64,
}

impl IncidentWave {
    pub fn new(omega_0: f64, theta: f64, amplitude: f64) -> Result<Self, MediumError> {
        check("omega_0", omega_0, omega_0 > 0.0, "must be > 0")?;
        check(
            "theta",
            theta,
            theta > 0.0 && theta < 180.0,
            "must lie in (0, 180) degrees",
        )?;
        check("amplitude", amplitude, amplitude.is_finite(), "must be finite")?;
        Ok(Self {
            omega_0,
            theta,
            amplitude,
        })
    }

    /// Tangential wavenumber `k_z0` in an exterior of index `n_ext`.
    pub fn k_z(&self, n_ext: f64) -> f64 {
        self.omega_0 * n_ext * self.theta.to_radians().cos()
    }

    /// Normal wavenumber `k_x0` (> 0) in an exterior of index `n_ext`.
    pub fn k_x(&self, n_ext: f64) -> f64 {
        self.omega_0 * n_ext * self.theta.to_radians().sin()
    }

    /// Same wave arriving from the mirror direction `180° − θ`.
    pub fn mirrored(&self) -> Self {
        Self {
            theta: 180.0 - self.theta,
            ..*self
        }
    }
}
