//! Oblique TE scattering from a space-time-modulated slab by mode matching.
//!
//! The slab occupies `0 <= x <= d` with the modulation running along `z`.
//! Inside, the field is expanded in slab Floquet eigenmodes (normal
//! wavenumbers `k_x` at the fixed ladder `(ω_n, k_z,n)`); outside, in
//! reflected and transmitted plane-wave harmonics. Continuity of `E_y` and
//! `H_z` at both faces gives one dense `4K × 4K` system.

use crate::dispersion::{
    classify, escalate, harmonic_frequencies, Axis, BlochSolution, DispersionError, Direction,
    HarmonicFields, Truncation,
};
use crate::floquet::{
    harmonic_frequency, inverse_permeability_matrix, permeability_matrix, permittivity_matrix,
    HarmonicWindow,
};
use crate::linalg::{eigen, solve_equilibrated, CMat, CVec, LinalgError};
use crate::medium::{IncidentWave, ModulationProfile, SlabGeometry};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest accepted 1-norm condition estimate of the boundary system.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScatteringError {
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error(
        "boundary system is ill-conditioned at N={order} (condition estimate {cond:.3e}); \
         try a different truncation order or move away from grazing/cutoff harmonics"
    )]
    IllConditioned { order: usize, cond: f64 },
    #[error("harmonic n={n} has omega_n = 0 and k_z,n = 0; the static field is undetermined")]
    DegenerateStatic { n: i32 },
    #[error("harmonic n={n} is at grazing cutoff (k_x = 0) in the exterior")]
    Grazing { n: i32 },
    #[error("{label} incidence failed: {source}")]
    Direction {
        label: &'static str,
        #[source]
        source: Box<ScatteringError>,
    },
    #[error("{0}")]
    Invalid(String),
}

/// One space-time harmonic of the incident wave's ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeEntry {
    pub n: i32,
    pub omega_n: f64,
    pub k_z_n: f64,
    /// Exterior normal wavenumber of the wave leaving toward `+x`.
    pub k_x_n_exterior: Complex64,
    pub propagating: bool,
    pub is_static: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicLattice {
    pub omega_0: f64,
    pub k_z0: f64,
    pub window: HarmonicWindow,
    pub exterior_eps: f64,
    pub exterior_mu: f64,
    pub entries: Vec<LatticeEntry>,
}

impl HarmonicLattice {
    pub fn entry(&self, n: i32) -> Option<&LatticeEntry> {
        self.window.slot(n).map(|s| &self.entries[s])
    }

    /// Normal admittance `k_x/(ω μ)` of the `+x`-going exterior wave (static: `−k_x/(k_z μ)`).
    fn admittance(&self, slot: usize, k_x: Complex64) -> Complex64 {
        let e = &self.entries[slot];
        if e.is_static {
            -k_x / (e.k_z_n * self.exterior_mu)
        } else {
            k_x / (e.omega_n * self.exterior_mu)
        }
    }

    /// Time-averaged `+x` flux of a unit-amplitude outgoing harmonic.
    pub fn unit_flux(&self, slot: usize) -> f64 {
        let e = &self.entries[slot];
        if e.is_static || !e.propagating {
            0.0
        } else {
            0.5 * (e.k_x_n_exterior / (e.omega_n * self.exterior_mu)).re
        }
    }
}

/// Exterior ladder of `wave` over `window`.
pub fn harmonic_lattice_window(
    wave: &IncidentWave,
    profile: &ModulationProfile,
    geometry: &SlabGeometry,
    window: HarmonicWindow,
) -> HarmonicLattice {
    let n_ext = geometry.exterior_index();
    let k_z0 = wave.k_z(n_ext);
    let entries = window
        .indices()
        .map(|n| {
            let omega_n = harmonic_frequency(wave.omega_0, n, profile.omega_s);
            let k_z_n = k_z0 + n as f64 * profile.kappa_s;
            let is_static = omega_n == 0.0;
            let arg = omega_n * omega_n * n_ext * n_ext - k_z_n * k_z_n;
            let scale = omega_n * omega_n * n_ext * n_ext + k_z_n * k_z_n;
            let propagating = !is_static && arg > 1e-12 * scale.max(f64::MIN_POSITIVE);
            let k_x = if propagating {
                Complex64::new(arg.sqrt() * omega_n.signum(), 0.0)
            } else {
                Complex64::new(0.0, (-arg).max(0.0).sqrt())
            };
            LatticeEntry {
                n,
                omega_n,
                k_z_n,
                k_x_n_exterior: k_x,
                propagating,
                is_static,
            }
        })
        .collect();
    HarmonicLattice {
        omega_0: wave.omega_0,
        k_z0,
        window,
        exterior_eps: geometry.exterior_eps,
        exterior_mu: geometry.exterior_mu,
        entries,
    }
}

/// Exterior ladder over the symmetric window `−order..=order`.
pub fn harmonic_lattice(
    wave: &IncidentWave,
    profile: &ModulationProfile,
    geometry: &SlabGeometry,
    order: usize,
) -> HarmonicLattice {
    harmonic_lattice_window(wave, profile, geometry, HarmonicWindow::symmetric(order))
}

/// Slab coupling matrix: `k_x v = A v` with `v = [P_n, H_z,n]`, where
/// `P_n = E_y,n` for dynamic harmonics and `P_n = B_x,n` for a static one.
pub fn slab_matrix(p: &ModulationProfile, omega_0: f64, k_z0: f64, window: HarmonicWindow) -> CMat {
    let k = window.len();
    let (omegas, statics) = harmonic_frequencies(omega_0, p.omega_s, window);
    let kz: Vec<f64> = window.indices().map(|n| k_z0 + n as f64 * p.kappa_s).collect();
    let eps = permittivity_matrix(p, window);
    let mu = permeability_matrix(p, window);
    let u = inverse_permeability_matrix(p, window);
    let mut a = CMat::zeros(2 * k, 2 * k);
    for i in 0..k {
        let pre = if statics[i] { -kz[i] } else { omegas[i] };
        for m in 0..k {
            a[(i, k + m)] = mu[(i, m)] * pre;
        }
        for m in 0..k {
            let b = if statics[m] { 1.0 } else { -kz[m] / omegas[m] };
            let mut entry = u[(i, m)] * (kz[i] * b);
            if !statics[m] {
                entry += eps[(i, m)] * omegas[i];
            }
            a[(k + i, m)] = entry;
        }
    }
    a
}

fn slab_fields(p: &ModulationProfile, omega_0: f64, k_z0: f64, window: HarmonicWindow, v: &CVec) -> HarmonicFields {
    let k = window.len();
    let (omegas, statics) = harmonic_frequencies(omega_0, p.omega_s, window);
    let u = inverse_permeability_matrix(p, window);
    let zero = Complex64::new(0.0, 0.0);
    let kz: Vec<f64> = window.indices().map(|n| k_z0 + n as f64 * p.kappa_s).collect();
    let b_x = CVec::from_fn(k, |i, _| if statics[i] { v[i] } else { v[i] * (-kz[i] / omegas[i]) });
    HarmonicFields {
        e_y: (0..k).map(|i| if statics[i] { zero } else { v[i] }).collect(),
        h_x: (&u * b_x).iter().copied().collect(),
        h_z: (0..k).map(|i| v[k + i]).collect(),
        b_static: (0..k).map(|i| if statics[i] { v[i] } else { zero }).collect(),
    }
}

/// Normal-wavenumber eigenmodes of the modulated slab at the fixed ladder.
pub fn slab_eigenmodes(
    p: &ModulationProfile,
    omega_0: f64,
    k_z0: f64,
    window: HarmonicWindow,
) -> Result<BlochSolution, ScatteringError> {
    let (_, statics) = harmonic_frequencies(omega_0, p.omega_s, window);
    for (slot, n) in window.indices().enumerate() {
        if statics[slot] && (k_z0 + n as f64 * p.kappa_s) == 0.0 {
            return Err(ScatteringError::DegenerateStatic { n });
        }
    }
    let a = slab_matrix(p, omega_0, k_z0, window);
    let eig = eigen(&a).map_err(|source| DispersionError::Eigen {
        omega: omega_0,
        k_x: k_z0,
        source,
    })?;
    let static_slots: Vec<usize> = (0..statics.len()).filter(|&i| statics[i]).collect();
    let im_tol = 1e-9 * omega_0;
    let mut fields = Vec::new();
    let mut power = Vec::new();
    let mut classes = Vec::new();
    for (j, &kx) in eig.values.iter().enumerate() {
        let f = slab_fields(p, omega_0, k_z0, window, &eig.vectors.column(j).clone_owned());
        let pw = f.power(Axis::X) / f.norm_sqr().max(f64::MIN_POSITIVE);
        classes.push(classify(kx, pw, im_tol));
        power.push(pw);
        fields.push(f);
    }
    Ok(BlochSolution {
        axis: Axis::X,
        omega: omega_0,
        transverse: k_z0,
        omega_s: p.omega_s,
        kappa_s: p.kappa_s,
        window,
        wavenumbers: eig.values,
        modes: eig.vectors,
        fields,
        classes,
        power,
        static_slots,
        warnings: crate::dispersion::regime_warnings(p),
    })
}

/// `‖E_y‖ / ‖(H_x, H_z)‖` of one mode.
pub fn mode_impedance(f: &HarmonicFields) -> f64 {
    let e: f64 = f.e_y.iter().map(|z| z.norm_sqr()).sum();
    let h: f64 = f.h_x.iter().chain(&f.h_z).map(|z| z.norm_sqr()).sum();
    (e / h).sqrt()
}

/// Whether slab mode `j` is referenced at the front face (`x = 0`).
fn launches_forward(sol: &BlochSolution, j: usize) -> bool {
    let k = sol.wavenumbers[j];
    match sol.classes[j] {
        Direction::Forward => true,
        Direction::Backward => false,
        Direction::Evanescent => k.im >= 0.0,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatteringResult {
    pub lattice: HarmonicLattice,
    pub order: usize,
    /// Reflected `E_y` amplitudes (`B_x` for a static harmonic), referenced at `x = 0`.
    pub reflection: Vec<Complex64>,
    /// Transmitted amplitudes, referenced at `x = d`.
    pub transmission: Vec<Complex64>,
    pub internal_coefficients: Vec<Complex64>,
    pub internal_wavenumbers: Vec<Complex64>,
    pub p_inc: f64,
    pub p_refl: Vec<f64>,
    pub p_trans: Vec<f64>,
    pub absorption: f64,
    pub condition: f64,
    pub relative_residual: f64,
    pub warnings: Vec<String>,
}

impl ScatteringResult {
    pub fn slot(&self, n: i32) -> Option<usize> {
        self.lattice.window.slot(n)
    }

    pub fn reflected_fraction(&self) -> f64 {
        self.p_refl.iter().sum::<f64>() / self.p_inc
    }

    pub fn transmitted_fraction(&self) -> f64 {
        self.p_trans.iter().sum::<f64>() / self.p_inc
    }

    /// Manley-Rowe sum `Σ S_x,n / ω_n` over outgoing harmonics, relative to the incident term.
    pub fn action_balance(&self) -> f64 {
        let out: f64 = self
            .lattice
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.is_static)
            .map(|(s, e)| (self.p_refl[s] + self.p_trans[s]) / e.omega_n)
            .sum();
        out / (self.p_inc / self.lattice.omega_0)
    }
}

/// `(ΣP_refl, ΣP_trans, A)`, propagating harmonics only.
pub fn power_balance(r: &ScatteringResult) -> (f64, f64, f64) {
    let pr: f64 = r.p_refl.iter().sum();
    let pt: f64 = r.p_trans.iter().sum();
    (pr, pt, 1.0 - (pr + pt) / r.p_inc)
}

/// Solve the boundary system for a lit slab.
pub fn match_boundaries(
    modes: &BlochSolution,
    lattice: &HarmonicLattice,
    geometry: &SlabGeometry,
    wave: &IncidentWave,
) -> Result<ScatteringResult, ScatteringError> {
    if modes.window != lattice.window || modes.axis != Axis::X {
        return Err(ScatteringError::Invalid(
            "slab modes and lattice must share the harmonic window".into(),
        ));
    }
    let k = lattice.window.len();
    let d = geometry.thickness;
    let slot0 = lattice
        .window
        .slot(0)
        .ok_or_else(|| ScatteringError::Invalid("harmonic window must contain n = 0".into()))?;
    for e in &lattice.entries {
        if e.is_static && e.k_z_n == 0.0 {
            return Err(ScatteringError::DegenerateStatic { n: e.n });
        }
        if e.k_x_n_exterior == Complex64::new(0.0, 0.0) {
            return Err(ScatteringError::Grazing { n: e.n });
        }
    }
    let i = Complex64::i();
    let one = Complex64::new(1.0, 0.0);
    let kx0 = lattice.entries[slot0].k_x_n_exterior;
    let amp = Complex64::new(wave.amplitude, 0.0);
    let y_inc = lattice.admittance(slot0, kx0);

    // unknowns: R (0..K), T (K..2K), c (2K..4K); rows: E@0, H@0, E@d, H@d
    let dim = 4 * k;
    let mut a = CMat::zeros(dim, dim);
    let mut b = CVec::zeros(dim);
    let nm = modes.len();
    let refs: Vec<bool> = (0..nm).map(|j| launches_forward(modes, j)).collect();
    let prop = |j: usize, x: f64| -> Complex64 {
        let x_ref = if refs[j] { 0.0 } else { d };
        (i * modes.wavenumbers[j] * (x - x_ref)).exp()
    };
    for s in 0..k {
        let kx = lattice.entries[s].k_x_n_exterior;
        let y_out = lattice.admittance(s, kx);
        let y_back = lattice.admittance(s, -kx);
        a[(s, s)] = one;
        a[(k + s, s)] = y_back;
        a[(2 * k + s, k + s)] = -one;
        a[(3 * k + s, k + s)] = -y_out;
        for j in 0..nm {
            let v = modes.modes.column(j);
            let (f0, fd) = (prop(j, 0.0), prop(j, d));
            a[(s, 2 * k + j)] = -v[s] * f0;
            a[(k + s, 2 * k + j)] = -v[k + s] * f0;
            a[(2 * k + s, 2 * k + j)] = v[s] * fd;
            a[(3 * k + s, 2 * k + j)] = v[k + s] * fd;
        }
    }
    b[slot0] = -amp;
    b[k + slot0] = -amp * y_inc;

    let solved = solve_equilibrated(&a, &b, MAX_CONDITION).map_err(|e| match e {
        LinalgError::Singular { cond } | LinalgError::NoConvergence { cond, .. } => {
            ScatteringError::IllConditioned {
                order: (k - 1) / 2,
                cond,
            }
        }
    })?;
    let x = solved.x;
    let reflection: Vec<Complex64> = (0..k).map(|s| x[s]).collect();
    let transmission: Vec<Complex64> = (0..k).map(|s| x[k + s]).collect();
    let p_inc = 0.5 * wave.amplitude * wave.amplitude * (kx0 / (lattice.entries[slot0].omega_n * lattice.exterior_mu)).re;
    let p_refl: Vec<f64> = (0..k).map(|s| reflection[s].norm_sqr() * lattice.unit_flux(s)).collect();
    let p_trans: Vec<f64> = (0..k).map(|s| transmission[s].norm_sqr() * lattice.unit_flux(s)).collect();
    let absorption = 1.0 - (p_refl.iter().sum::<f64>() + p_trans.iter().sum::<f64>()) / p_inc;
    let mut warnings = modes.warnings.clone();
    if solved.relative_residual > 1e-10 {
        warnings.push(format!(
            "boundary system relative residual {:.2e} exceeds 1e-10",
            solved.relative_residual
        ));
    }
    Ok(ScatteringResult {
        lattice: lattice.clone(),
        order: (k - 1) / 2,
        reflection,
        transmission,
        internal_coefficients: (0..nm).map(|j| x[2 * k + j]).collect(),
        internal_wavenumbers: modes.wavenumbers.clone(),
        p_inc,
        p_refl,
        p_trans,
        absorption,
        condition: solved.condition,
        relative_residual: solved.relative_residual,
        warnings,
    })
}

/// Scattering at one fixed harmonic window.
pub fn scatter_window(
    p: &ModulationProfile,
    geometry: &SlabGeometry,
    wave: &IncidentWave,
    window: HarmonicWindow,
) -> Result<ScatteringResult, ScatteringError> {
    let lattice = harmonic_lattice_window(wave, p, geometry, window);
    let modes = slab_eigenmodes(p, wave.omega_0, lattice.k_z0, window)?;
    match_boundaries(&modes, &lattice, geometry, wave)
}

fn headline_shift(a: &ScatteringResult, b: &ScatteringResult) -> f64 {
    let (sa, sb) = (a.slot(0).unwrap_or(0), b.slot(0).unwrap_or(0));
    (a.reflection[sa] - b.reflection[sb]).norm() + (a.transmission[sa] - b.transmission[sb]).norm()
}

/// Full scattering solve with automatic truncation control on `(R_0, T_0)`.
pub fn scatter(
    p: &ModulationProfile,
    geometry: &SlabGeometry,
    wave: &IncidentWave,
    trunc: &Truncation,
) -> Result<ScatteringResult, ScatteringError> {
    let (start, mut warnings) = trunc.start_order(p)?;
    let (mut r, _, more) = escalate(
        trunc,
        start,
        |n| scatter_window(p, geometry, wave, HarmonicWindow::symmetric(n)),
        headline_shift,
    )?;
    warnings.extend(more);
    warnings.extend(std::mem::take(&mut r.warnings));
    let mut seen = std::collections::HashSet::new();
    warnings.retain(|w| seen.insert(w.clone()));
    r.warnings = warnings;
    Ok(r)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonreciprocityReport {
    pub theta: f64,
    pub a_forward: f64,
    pub a_backward: f64,
    pub t_forward: f64,
    pub t_backward: f64,
    pub r_forward: f64,
    pub r_backward: f64,
    pub contrast: f64,
    pub order: usize,
    pub forward: ScatteringResult,
    pub backward: ScatteringResult,
}

/// Scatter at `θ` and `180° − θ` with identical truncation and compare.
pub fn nonreciprocity(
    p: &ModulationProfile,
    geometry: &SlabGeometry,
    omega_0: f64,
    theta: f64,
    trunc: &Truncation,
) -> Result<NonreciprocityReport, ScatteringError> {
    if (theta - 90.0).abs() < 1e-12 {
        return Err(ScatteringError::Invalid("theta must differ from 90 degrees".into()));
    }
    let fwd = IncidentWave::new(omega_0, theta, 1.0).map_err(|e| ScatteringError::Invalid(e.to_string()))?;
    let bwd = fwd.mirrored();
    let label = |l: &'static str| move |e: ScatteringError| ScatteringError::Direction { label: l, source: Box::new(e) };
    let f0 = scatter(p, geometry, &fwd, trunc).map_err(label("forward"))?;
    let b0 = scatter(p, geometry, &bwd, trunc).map_err(label("backward"))?;
    let order = f0.order.max(b0.order);
    let window = HarmonicWindow::symmetric(order);
    let forward = if f0.order == order { f0 } else { scatter_window(p, geometry, &fwd, window).map_err(label("forward"))? };
    let backward = if b0.order == order { b0 } else { scatter_window(p, geometry, &bwd, window).map_err(label("backward"))? };
    Ok(NonreciprocityReport {
        theta,
        a_forward: forward.absorption,
        a_backward: backward.absorption,
        t_forward: forward.transmitted_fraction(),
        t_backward: backward.transmitted_fraction(),
        r_forward: forward.reflected_fraction(),
        r_backward: backward.reflected_fraction(),
        contrast: forward.absorption - backward.absorption,
        order,
        forward,
        backward,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::make_profile;
    use crate::slab::static_slab;

    #[test]
    fn lattice_entries() {
        let p = make_profile(2.0, 2.0, 0.2, 0.2, 1.0, 2.0, 0.0).unwrap();
        let g = SlabGeometry::in_vacuum(1.0).unwrap();
        let w = IncidentWave::new(1.0, 55.0, 1.0).unwrap();
        let l = harmonic_lattice(&w, &p, &g, 2);
        let e0 = l.entry(0).unwrap();
        assert!((e0.k_z_n - 0.57358).abs() < 1e-5);
        assert!((e0.k_x_n_exterior.re - 0.81915).abs() < 1e-5);
        assert!(e0.propagating);
        let em = l.entry(-1).unwrap();
        assert!(em.is_static && em.omega_n == 0.0 && !em.propagating);
        let e1 = l.entry(1).unwrap();
        assert!((e1.k_z_n - 2.57358).abs() < 1e-5 && !e1.propagating);
    }

    #[test]
    fn static_slab_against_airy() {
        let p = ModulationProfile::stat(4.0, 1.0).unwrap();
        let g = SlabGeometry::in_vacuum(1.7).unwrap();
        for th in [30.0, 60.0, 89.0, 120.0] {
            let w = IncidentWave::new(1.0, th, 1.0).unwrap();
            let r = scatter_window(&p, &g, &w, HarmonicWindow::symmetric(1)).unwrap();
            let s = r.slot(0).unwrap();
            let c = static_slab(1.0, th, 4.0, 1.0, 1.7, 1.0, 1.0);
            assert!((r.reflection[s] - c.r).norm() < 1e-10, "theta {th}");
            assert!((r.transmission[s] - c.t).norm() < 1e-10, "theta {th}");
            assert!(r.absorption.abs() < 1e-10);
        }
    }

    #[test]
    fn matched_slab_modes_have_background_impedance() {
        // time-only matched modulation at normal incidence: every harmonic is a
        // plane wave along x, so E/H is exactly the background impedance
        let p = make_profile(2.0, 2.0, 0.2, 0.2, 1.0, 0.0, 0.0).unwrap();
        let sol = slab_eigenmodes(&p, 0.7, 0.0, HarmonicWindow::symmetric(4)).unwrap();
        for j in 0..sol.len() {
            if sol.classes[j] != Direction::Evanescent {
                assert!((mode_impedance(&sol.fields[j]) - 1.0).abs() < 1e-6);
            }
        }
    }
}
