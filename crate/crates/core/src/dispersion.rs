//! Bulk Floquet dispersion of the modulated medium.
//!
//! At fixed drive frequency `ω` and transverse wavenumber `k_x` the harmonic
//! amplitudes obey a standard eigenproblem `κ₀ v = A v` for the Bloch
//! wavenumber `κ₀` along the modulation axis. The state is
//! `v = [P_n, H_x,n]` where `P_n = E_y,n` for dynamic harmonics and
//! `P_n = B_z,n` for a static harmonic (`ω_n = 0`), whose electric field
//! vanishes identically.

use crate::floquet::{
    harmonic_frequency, inverse_permeability_matrix, permeability_matrix, permittivity_matrix,
    HarmonicWindow,
};
use crate::linalg::{eigen, CMat, CVec, LinalgError};
use crate::medium::ModulationProfile;
use crate::par::{self, Exec};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum truncation order inside the sonic guard band.
pub const SONIC_ORDER_FLOOR: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispersionError {
    #[error("eigen solve failed at omega={omega}, k_x={k_x}: {source}")]
    Eigen {
        omega: f64,
        k_x: f64,
        #[source]
        source: LinalgError,
    },
    #[error(
        "sonic regime (detuning {detuning:.4}) needs truncation order >= {floor}, but the cap is {cap}"
    )]
    SonicTruncation { floor: usize, cap: usize, detuning: f64 },
    #[error("sweep grid must be strictly monotone")]
    NonMonotoneGrid,
    #[error("branch {branch} cannot be followed around the query point (best overlap {overlap:.3})")]
    BranchDiscontinuity { branch: usize, overlap: f64 },
    #[error("{0}")]
    Invalid(String),
}

/// Harmonic truncation policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Starting order `N` (harmonics `−N..=N`).
    pub order: usize,
    /// Double `N` until the fundamental branch moves by less than `tol`.
    pub auto: bool,
    pub cap: usize,
    pub tol: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            order: 10,
            auto: true,
            cap: 40,
            tol: 1e-8,
        }
    }
}

impl Truncation {
    pub fn fixed(order: usize) -> Self {
        Self {
            order,
            auto: false,
            cap: order.max(40),
            tol: 1e-8,
        }
    }

    /// Starting order after the sonic floor, plus any warnings.
    pub fn start_order(&self, p: &ModulationProfile) -> Result<(usize, Vec<String>), DispersionError> {
        if self.order < 1 {
            return Err(DispersionError::Invalid("truncation order must be >= 1".into()));
        }
        let mut warnings = Vec::new();
        let mut order = self.order;
        if p.is_near_sonic() {
            warnings.extend(regime_warnings(p));
            warnings.push(format!("truncation floor raised to N={SONIC_ORDER_FLOOR}"));
            if self.cap < SONIC_ORDER_FLOOR {
                return Err(DispersionError::SonicTruncation {
                    floor: SONIC_ORDER_FLOOR,
                    cap: self.cap,
                    detuning: p.sonic_detuning(),
                });
            }
            order = order.max(SONIC_ORDER_FLOOR);
        }
        Ok((order.min(self.cap.max(1)), warnings))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Propagating, net power toward `+axis`.
    Forward,
    /// Propagating, net power toward `−axis`.
    Backward,
    Evanescent,
}

/// Axis along which the eigen-wavenumber is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// Along the modulation (`κ₀` at fixed `k_x`).
    Z,
    /// Across the slab (`k_x` at fixed `k_z0`).
    X,
}

/// Per-harmonic field amplitudes of one eigenmode.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicFields {
    pub e_y: Vec<Complex64>,
    pub h_x: Vec<Complex64>,
    pub h_z: Vec<Complex64>,
    /// `B_x` (axis X) or `B_z` (axis Z) of static harmonics; zero elsewhere.
    pub b_static: Vec<Complex64>,
}

impl HarmonicFields {
    /// Time-averaged Poynting flux along `axis`, summed over harmonics.
    pub fn power(&self, axis: Axis) -> f64 {
        let s: f64 = match axis {
            Axis::Z => self
                .e_y
                .iter()
                .zip(&self.h_x)
                .map(|(e, h)| -(e * h.conj()).re)
                .sum(),
            Axis::X => self
                .e_y
                .iter()
                .zip(&self.h_z)
                .map(|(e, h)| (e * h.conj()).re)
                .sum(),
        };
        0.5 * s
    }

    pub fn norm_sqr(&self) -> f64 {
        self.e_y
            .iter()
            .chain(&self.h_x)
            .chain(&self.h_z)
            .chain(&self.b_static)
            .map(|z| z.norm_sqr())
            .sum()
    }
}

/// Eigen-wavenumbers and harmonic content of the modulated medium.
#[derive(Debug, Clone)]
pub struct BlochSolution {
    pub axis: Axis,
    pub omega: f64,
    /// Fixed wavenumber across the solve axis: `k_x` for [`Axis::Z`], `k_z0` for [`Axis::X`].
    pub transverse: f64,
    pub omega_s: f64,
    pub kappa_s: f64,
    pub window: HarmonicWindow,
    pub wavenumbers: Vec<Complex64>,
    /// Unit-norm state vectors, one column per eigenvalue.
    pub modes: CMat,
    pub fields: Vec<HarmonicFields>,
    pub classes: Vec<Direction>,
    /// Normalised power flux along the solve axis (flux / field norm²).
    pub power: Vec<f64>,
    /// Slots of static harmonics inside the window.
    pub static_slots: Vec<usize>,
    pub warnings: Vec<String>,
}

impl BlochSolution {
    pub fn len(&self) -> usize {
        self.wavenumbers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavenumbers.is_empty()
    }

    pub fn mode(&self, j: usize) -> CVec {
        self.modes.column(j).clone_owned()
    }

    /// Fraction of mode `j`'s state norm carried by each harmonic slot.
    pub fn harmonic_weights(&self, j: usize) -> Vec<f64> {
        let k = self.window.len();
        let v = self.modes.column(j);
        (0..k)
            .map(|i| v[i].norm_sqr() + v[k + i].norm_sqr())
            .collect()
    }

    pub fn dominant_harmonic(&self, j: usize) -> i32 {
        let w = self.harmonic_weights(j);
        let (slot, _) = w
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
        self.window.harmonic(slot)
    }

    /// Physical ladder `(n, ω_n, κ_n)` of mode `j` (real parts of the wavenumber).
    pub fn ladder(&self, j: usize) -> Vec<(i32, f64, Complex64)> {
        let kappa = self.wavenumbers[j];
        self.window
            .indices()
            .map(|n| {
                let shift = match self.axis {
                    Axis::Z => n as f64 * self.kappa_s,
                    Axis::X => 0.0,
                };
                (n, self.omega + n as f64 * self.omega_s, kappa + shift)
            })
            .collect()
    }

    /// Indices of modes with a real wavenumber classified `dir`.
    pub fn indices_of(&self, dir: Direction) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.classes[j] == dir).collect()
    }

    /// Forward mode with the largest weight on harmonic 0 (falls back to any mode).
    pub fn fundamental(&self) -> usize {
        let slot0 = self.window.slot(0);
        let score = |j: usize| slot0.map(|s| self.harmonic_weights(j)[s]).unwrap_or(0.0);
        let pick = |cands: Vec<usize>| {
            cands
                .into_iter()
                .fold(None, |best: Option<(usize, f64)>, j| {
                    let s = score(j);
                    match best {
                        Some((_, b)) if b >= s => best,
                        _ => Some((j, s)),
                    }
                })
                .map(|(j, _)| j)
        };
        pick(self.indices_of(Direction::Forward)).or_else(|| pick((0..self.len()).collect())).unwrap_or(0)
    }
}

/// Static-harmonic mask and frequencies over a window.
pub(crate) fn harmonic_frequencies(omega: f64, omega_s: f64, window: HarmonicWindow) -> (Vec<f64>, Vec<bool>) {
    let omegas: Vec<f64> = window.indices().map(|n| harmonic_frequency(omega, n, omega_s)).collect();
    let statics = omegas.iter().map(|&w| w == 0.0).collect();
    (omegas, statics)
}

/// Coupling matrix `A` with `κ₀ v = A v` over an explicit harmonic window.
pub fn coupling_matrix_window(p: &ModulationProfile, omega: f64, k_x: f64, window: HarmonicWindow) -> CMat {
    let k = window.len();
    let (omegas, statics) = harmonic_frequencies(omega, p.omega_s, window);
    let eps = permittivity_matrix(p, window);
    let mu = permeability_matrix(p, window);
    let u = inverse_permeability_matrix(p, window);
    let c = |x: f64| Complex64::new(x, 0.0);
    let mut a = CMat::zeros(2 * k, 2 * k);
    for (i, n) in window.indices().enumerate() {
        let shift = c(-(n as f64) * p.kappa_s);
        a[(i, i)] = shift;
        a[(k + i, k + i)] = shift;
        // P rows: Faraday (dynamic) or Gauss (static) in terms of B_x = (M_mu H_x)
        let pre = if statics[i] { -k_x } else { -omegas[i] };
        for m in 0..k {
            if mu[(i, m)] != c(0.0) {
                a[(i, k + m)] = mu[(i, m)] * pre;
            }
        }
        // H_x rows: Ampere with H_z = U B_z
        for m in 0..k {
            let bz = if statics[m] { 1.0 } else { k_x / omegas[m] };
            let mut entry = u[(i, m)] * (k_x * bz);
            if !statics[m] {
                entry -= eps[(i, m)] * omegas[i];
            }
            a[(k + i, m)] += entry;
        }
    }
    a
}

/// Coupling matrix over the symmetric window `−order..=order`.
pub fn coupling_matrix(p: &ModulationProfile, omega: f64, k_x: f64, order: usize) -> CMat {
    coupling_matrix_window(p, omega, k_x, HarmonicWindow::symmetric(order))
}

fn bulk_fields(p: &ModulationProfile, omega: f64, k_x: f64, window: HarmonicWindow, v: &CVec) -> HarmonicFields {
    let k = window.len();
    let (omegas, statics) = harmonic_frequencies(omega, p.omega_s, window);
    let u = inverse_permeability_matrix(p, window);
    let zero = Complex64::new(0.0, 0.0);
    let e_y: Vec<Complex64> = (0..k).map(|i| if statics[i] { zero } else { v[i] }).collect();
    let b_static: Vec<Complex64> = (0..k).map(|i| if statics[i] { v[i] } else { zero }).collect();
    let h_x: Vec<Complex64> = (0..k).map(|i| v[k + i]).collect();
    let b_z = CVec::from_fn(k, |i, _| if statics[i] { v[i] } else { v[i] * (k_x / omegas[i]) });
    let h_z = (&u * b_z).iter().copied().collect();
    HarmonicFields {
        e_y,
        h_x,
        h_z,
        b_static,
    }
}

/// Classification thresholds shared by both axes.
pub(crate) fn classify(kappa: Complex64, power: f64, im_tol: f64) -> Direction {
    if kappa.im.abs() > im_tol {
        Direction::Evanescent
    } else if power > 1e-12 {
        Direction::Forward
    } else if power < -1e-12 {
        Direction::Backward
    } else {
        Direction::Evanescent
    }
}

/// Eigen-solve over an explicit window, no convergence control.
pub fn eigen_kappa_window(
    p: &ModulationProfile,
    omega: f64,
    k_x: f64,
    window: HarmonicWindow,
) -> Result<BlochSolution, DispersionError> {
    let a = coupling_matrix_window(p, omega, k_x, window);
    let eig = eigen(&a).map_err(|source| DispersionError::Eigen { omega, k_x, source })?;
    let (_, statics) = harmonic_frequencies(omega, p.omega_s, window);
    let static_slots: Vec<usize> = (0..statics.len()).filter(|&i| statics[i]).collect();
    let mut fields = Vec::with_capacity(eig.values.len());
    let mut power = Vec::with_capacity(eig.values.len());
    let mut classes = Vec::with_capacity(eig.values.len());
    for (j, &kappa) in eig.values.iter().enumerate() {
        let f = bulk_fields(p, omega, k_x, window, &eig.vectors.column(j).clone_owned());
        let pw = f.power(Axis::Z) / f.norm_sqr().max(f64::MIN_POSITIVE);
        let tol = 1e-9 * kappa.norm().max(1.0);
        classes.push(classify(kappa, pw, tol));
        power.push(pw);
        fields.push(f);
    }
    Ok(BlochSolution {
        axis: Axis::Z,
        omega,
        transverse: k_x,
        omega_s: p.omega_s,
        kappa_s: p.kappa_s,
        window,
        wavenumbers: eig.values,
        modes: eig.vectors,
        fields,
        classes,
        power,
        static_slots,
        warnings: regime_warnings(p),
    })
}

/// Warnings about regimes where harmonic expansions converge slowly.
pub fn regime_warnings(p: &ModulationProfile) -> Vec<String> {
    let mut w = Vec::new();
    if p.is_near_sonic() {
        w.push(format!(
            "near-sonic modulation: |v_m - v_p|/v_p = {:.4} < {}",
            p.sonic_detuning(),
            crate::medium::SONIC_GUARD
        ));
    }
    if p.is_luminal() {
        let (lo, hi) = p.local_velocity_range();
        w.push(format!(
            "modulation velocity {:.4} lies inside the local phase-velocity range [{:.4}, {:.4}]; harmonic truncation may not converge",
            p.modulation_velocity(),
            lo,
            hi
        ));
    }
    w
}

/// Nearest eigenvalue in `sol` to `target`.
fn nearest(sol: &BlochSolution, target: Complex64) -> Complex64 {
    sol.wavenumbers
        .iter()
        .copied()
        .min_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()))
        .unwrap_or(target)
}

/// Run `solve(order)` with doubling until `probe` stops moving.
pub(crate) fn escalate<S, E, F, G>(
    trunc: &Truncation,
    start: usize,
    solve: F,
    probe: G,
) -> Result<(S, usize, Vec<String>), E>
where
    F: Fn(usize) -> Result<S, E>,
    G: Fn(&S, &S) -> f64,
{
    let mut order = start;
    let mut current = solve(order)?;
    let mut warnings = Vec::new();
    if !trunc.auto {
        return Ok((current, order, warnings));
    }
    loop {
        let next_order = (order * 2).min(trunc.cap);
        if next_order <= order {
            warnings.push(format!(
                "truncation cap N={} reached before convergence to {:.1e}",
                trunc.cap, trunc.tol
            ));
            return Ok((current, order, warnings));
        }
        let next = solve(next_order)?;
        let moved = probe(&current, &next);
        order = next_order;
        current = next;
        if moved < trunc.tol {
            return Ok((current, order, warnings));
        }
    }
}

/// Bloch wavenumbers at `(ω, k_x)` with automatic truncation control.
pub fn eigen_kappa(
    p: &ModulationProfile,
    omega: f64,
    k_x: f64,
    trunc: &Truncation,
) -> Result<BlochSolution, DispersionError> {
    let (start, mut warnings) = trunc.start_order(p)?;
    let (mut sol, _, more) = escalate(
        trunc,
        start,
        |n| eigen_kappa_window(p, omega, k_x, HarmonicWindow::symmetric(n)),
        |a, b| {
            let k = a.wavenumbers[a.fundamental()];
            (nearest(b, k) - k).norm()
        },
    )?;
    warnings.extend(more);
    sol.warnings = dedup(warnings.into_iter().chain(sol.warnings).collect());
    Ok(sol)
}

fn dedup(mut v: Vec<String>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    v.retain(|s| seen.insert(s.clone()));
    v
}

/// Order that converges at the hardest (largest) frequency of a sweep.
fn sweep_order(p: &ModulationProfile, omega_max: f64, k_x: f64, trunc: &Truncation) -> Result<(usize, Vec<String>), DispersionError> {
    let (start, mut warnings) = trunc.start_order(p)?;
    let (_, order, more) = escalate(
        trunc,
        start,
        |n| eigen_kappa_window(p, omega_max, k_x, HarmonicWindow::symmetric(n)),
        |a, b| {
            let k = a.wavenumbers[a.fundamental()];
            (nearest(b, k) - k).norm()
        },
    )?;
    warnings.extend(more);
    warnings.extend(regime_warnings(p));
    Ok((order, dedup(warnings)))
}

/// `|⟨a, b⟩|` over components that are comparable between two solutions.
fn overlap(a: &CVec, b: &CVec, skip: &[usize]) -> f64 {
    let mut s = Complex64::new(0.0, 0.0);
    let (mut na, mut nb) = (0.0, 0.0);
    for i in 0..a.len() {
        if skip.contains(&i) {
            continue;
        }
        s += a[i].conj() * b[i];
        na += a[i].norm_sqr();
        nb += b[i].norm_sqr();
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        s.norm() / (na * nb).sqrt()
    }
}

/// Assign each mode of `next` to a branch of `prev` by maximal overlap,
/// ties broken by eigenvalue proximity. Returns `perm[j_next] = branch`.
fn track(prev: &BlochSolution, prev_ids: &[usize], next: &BlochSolution) -> Vec<usize> {
    let skip: Vec<usize> = prev.static_slots.iter().chain(&next.static_slots).copied().collect();
    let n = next.len();
    let m = prev.len();
    let mut pairs = Vec::with_capacity(n * m);
    for i in 0..m {
        let a = prev.mode(i);
        for j in 0..n {
            let ov = overlap(&a, &next.mode(j), &skip);
            let dist = (prev.wavenumbers[i] - next.wavenumbers[j]).norm();
            pairs.push((ov, dist, i, j));
        }
    }
    pairs.sort_by(|x, y| {
        let ov = (y.0 * 1e6).round().total_cmp(&(x.0 * 1e6).round());
        ov.then(x.1.total_cmp(&y.1))
    });
    let mut used_prev = vec![false; m];
    let mut perm = vec![usize::MAX; n];
    for (_, _, i, j) in pairs {
        if !used_prev[i] && perm[j] == usize::MAX {
            used_prev[i] = true;
            perm[j] = prev_ids[i];
        }
    }
    let mut fresh = prev_ids.iter().copied().max().map_or(0, |x| x + 1);
    for p in perm.iter_mut() {
        if *p == usize::MAX {
            *p = fresh;
            fresh += 1;
        }
    }
    perm
}

/// One eigenvalue at one sweep point, tagged with its tracked branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub branch: usize,
    pub kappa: Complex64,
    pub class: Direction,
    pub dominant_harmonic: i32,
    /// Per-harmonic weight of the mode (window order).
    pub weights: Vec<f64>,
    /// Group velocity `(∂ω/∂k_x, ∂ω/∂κ)`, when computed.
    pub group_velocity: Option<[f64; 2]>,
}

/// Swept branches: the sweep variable is `ω` for a band diagram and `k_x`
/// for an isofrequency diagram.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchSweep {
    pub grid: Vec<f64>,
    /// `None` marks a grid point where the eigen-solve failed.
    pub points: Vec<Option<Vec<BranchPoint>>>,
    pub failures: Vec<(usize, String)>,
    pub window: HarmonicWindow,
    pub warnings: Vec<String>,
}

pub type BandDiagram = BranchSweep;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsofrequencyDiagram {
    pub omega: f64,
    pub sweep: BranchSweep,
}

fn check_monotone(grid: &[f64]) -> Result<(), DispersionError> {
    let up = grid.windows(2).all(|w| w[1] > w[0]);
    let down = grid.windows(2).all(|w| w[1] < w[0]);
    if grid.is_empty() || !(up || down) {
        Err(DispersionError::NonMonotoneGrid)
    } else {
        Ok(())
    }
}

fn assemble(
    solutions: Vec<Result<(BlochSolution, Vec<Option<GroupVelocity>>), DispersionError>>,
    grid: Vec<f64>,
    window: HarmonicWindow,
    warnings: Vec<String>,
) -> BranchSweep {
    let mut points = Vec::with_capacity(solutions.len());
    let mut failures = Vec::new();
    let mut prev: Option<(BlochSolution, Vec<usize>)> = None;
    for (g, res) in solutions.into_iter().enumerate() {
        match res {
            Err(e) => {
                failures.push((g, e.to_string()));
                points.push(None);
            }
            Ok((sol, gv)) => {
                let ids = match &prev {
                    None => {
                        let mut order: Vec<usize> = (0..sol.len()).collect();
                        order.sort_by(|&a, &b| sol.wavenumbers[a].re.total_cmp(&sol.wavenumbers[b].re));
                        let mut ids = vec![0; sol.len()];
                        for (rank, j) in order.into_iter().enumerate() {
                            ids[j] = rank;
                        }
                        ids
                    }
                    Some((p, pid)) => track(p, pid, &sol),
                };
                let pts = (0..sol.len())
                    .map(|j| BranchPoint {
                        branch: ids[j],
                        kappa: sol.wavenumbers[j],
                        class: sol.classes[j],
                        dominant_harmonic: sol.dominant_harmonic(j),
                        weights: sol.harmonic_weights(j),
                        group_velocity: gv[j].map(|g| [g.vg_x, g.vg_z]),
                    })
                    .collect();
                points.push(Some(pts));
                prev = Some((sol, ids));
            }
        }
    }
    BranchSweep {
        grid,
        points,
        failures,
        window,
        warnings,
    }
}

/// `ω–κ` band structure over a monotone frequency grid at `k_x = 0`.
pub fn band_structure(
    p: &ModulationProfile,
    omega_grid: &[f64],
    trunc: &Truncation,
    exec: Exec,
) -> Result<BandDiagram, DispersionError> {
    check_monotone(omega_grid)?;
    let omax = omega_grid.iter().copied().fold(f64::MIN, f64::max);
    let (order, warnings) = sweep_order(p, omax, 0.0, trunc)?;
    let window = HarmonicWindow::symmetric(order);
    let sols = par::map(exec, omega_grid, |&w| {
        eigen_kappa_window(p, w, 0.0, window).map(|s| {
            let n = s.len();
            (s, vec![None; n])
        })
    });
    Ok(assemble(sols, omega_grid.to_vec(), window, warnings))
}

/// `k_x–κ` isofrequency contours at fixed `ω₀`, with group velocities on
/// propagating branches.
pub fn isofrequency(
    p: &ModulationProfile,
    omega_0: f64,
    kx_grid: &[f64],
    trunc: &Truncation,
    exec: Exec,
) -> Result<IsofrequencyDiagram, DispersionError> {
    if omega_0 <= 0.0 {
        return Err(DispersionError::Invalid("omega_0 must be > 0".into()));
    }
    check_monotone(kx_grid)?;
    let kmax = kx_grid.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let (order, warnings) = sweep_order(p, omega_0, kmax, trunc)?;
    let window = HarmonicWindow::symmetric(order);
    let sols = par::map(exec, kx_grid, |&kx| {
        eigen_kappa_window(p, omega_0, kx, window).map(|s| {
            let gv = group_velocities(p, &s, GV_STEP);
            (s, gv)
        })
    });
    let sweep = assemble(sols, kx_grid.to_vec(), window, warnings);
    Ok(IsofrequencyDiagram { omega: omega_0, sweep })
}

/// Default finite-difference step for group velocities.
pub const GV_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupVelocity {
    /// `∂ω/∂k_x`
    pub vg_x: f64,
    /// `∂ω/∂κ`
    pub vg_z: f64,
}

impl GroupVelocity {
    pub fn magnitude(&self) -> f64 {
        self.vg_x.hypot(self.vg_z)
    }
}

/// Wavenumber of the mode in `other` that continues mode `j` of `sol`.
fn follow_into(sol: &BlochSolution, j: usize, other: &BlochSolution) -> Result<Complex64, DispersionError> {
    let skip: Vec<usize> = sol.static_slots.iter().chain(&other.static_slots).copied().collect();
    let v = sol.mode(j);
    let target = sol.wavenumbers[j];
    let mut best: Option<(f64, f64, usize)> = None;
    for i in 0..other.len() {
        let ov = overlap(&v, &other.mode(i), &skip);
        let d = (other.wavenumbers[i] - target).norm();
        let better = match best {
            None => true,
            Some((bo, bd, _)) => ov > bo + 1e-6 || ((ov - bo).abs() <= 1e-6 && d < bd),
        };
        if better {
            best = Some((ov, d, i));
        }
    }
    match best {
        Some((ov, _, i)) if ov > 0.5 => Ok(other.wavenumbers[i]),
        Some((ov, _, _)) => Err(DispersionError::BranchDiscontinuity { branch: j, overlap: ov }),
        None => Err(DispersionError::BranchDiscontinuity { branch: j, overlap: 0.0 }),
    }
}

/// Solutions at `(ω ± h, k_x)` and `(ω, k_x ± h)` on the same window.
fn neighbours(p: &ModulationProfile, sol: &BlochSolution, step: f64) -> Result<[BlochSolution; 4], DispersionError> {
    let (w, kx) = (sol.omega, sol.transverse);
    Ok([
        eigen_kappa_window(p, w + step, kx, sol.window)?,
        eigen_kappa_window(p, w - step, kx, sol.window)?,
        eigen_kappa_window(p, w, kx + step, sol.window)?,
        eigen_kappa_window(p, w, kx - step, sol.window)?,
    ])
}

fn velocity_from(sol: &BlochSolution, j: usize, nb: &[BlochSolution; 4], step: f64) -> Result<GroupVelocity, DispersionError> {
    let wp = follow_into(sol, j, &nb[0])?;
    let wm = follow_into(sol, j, &nb[1])?;
    let kp = follow_into(sol, j, &nb[2])?;
    let km = follow_into(sol, j, &nb[3])?;
    let dk_dw = (wp.re - wm.re) / (2.0 * step);
    let dk_dkx = (kp.re - km.re) / (2.0 * step);
    if dk_dw == 0.0 || !dk_dw.is_finite() {
        return Err(DispersionError::BranchDiscontinuity { branch: j, overlap: 0.0 });
    }
    Ok(GroupVelocity {
        vg_x: -dk_dkx / dk_dw,
        vg_z: 1.0 / dk_dw,
    })
}

/// Group velocities of every propagating mode of `sol` (`None` for evanescent
/// modes and branches that cannot be followed), sharing one set of
/// neighbouring solves.
pub fn group_velocities(p: &ModulationProfile, sol: &BlochSolution, step: f64) -> Vec<Option<GroupVelocity>> {
    if sol.axis != Axis::Z {
        return vec![None; sol.len()];
    }
    let Ok(nb) = neighbours(p, sol, step) else {
        return vec![None; sol.len()];
    };
    (0..sol.len())
        .map(|j| {
            if sol.classes[j] == Direction::Evanescent {
                None
            } else {
                velocity_from(sol, j, &nb, step).ok()
            }
        })
        .collect()
}

/// Central-difference group velocity `(∂ω/∂k_x, ∂ω/∂κ)` of mode `j`.
///
/// The branch is followed to `ω ± h` and `k_x ± h` by eigenvector overlap;
/// `∂ω/∂κ = 1/(∂κ/∂ω)` and `∂ω/∂k_x = −(∂κ/∂k_x)/(∂κ/∂ω)`.
pub fn group_velocity(p: &ModulationProfile, sol: &BlochSolution, j: usize, step: f64) -> Result<GroupVelocity, DispersionError> {
    if sol.axis != Axis::Z {
        return Err(DispersionError::Invalid("group velocity needs a bulk (axis Z) solution".into()));
    }
    velocity_from(sol, j, &neighbours(p, sol, step)?, step)
}

/// Forward/backward wavenumber sets of modes whose dominant harmonic lies
/// within `|n| <= central` (away from the truncation edges). Modes anchored
/// on a static harmonic carry no wave and are left out.
pub fn ladder_sets(sol: &BlochSolution, central: i32) -> (Vec<f64>, Vec<f64>) {
    let mut fwd = Vec::new();
    let mut bwd = Vec::new();
    for j in 0..sol.len() {
        let n = sol.dominant_harmonic(j);
        let is_static = sol.window.slot(n).is_some_and(|s| sol.static_slots.contains(&s));
        if n.abs() > central || is_static {
            continue;
        }
        match sol.classes[j] {
            Direction::Forward => fwd.push(sol.wavenumbers[j].re),
            Direction::Backward => bwd.push(sol.wavenumbers[j].re),
            Direction::Evanescent => {}
        }
    }
    (fwd, bwd)
}

/// Smallest pairwise distance in a set (infinite for fewer than two points).
pub fn min_pairwise_gap(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Largest `|Im κ|` over modes with dominant harmonic in `|n| <= central`.
fn max_imag(p: &ModulationProfile, omega: f64, window: HarmonicWindow, central: i32) -> Result<f64, DispersionError> {
    let sol = eigen_kappa_window(p, omega, 0.0, window)?;
    Ok((0..sol.len())
        .filter(|&j| sol.dominant_harmonic(j).abs() <= central)
        .map(|j| sol.wavenumbers[j].im.abs())
        .fold(0.0, f64::max))
}

/// Frequencies where forward harmonic `n` crosses backward harmonic `m` in the
/// unmodulated limit: candidates for band-gap centres.
pub fn crossing_frequencies(p: &ModulationProfile, range: (f64, f64), central: i32) -> Vec<f64> {
    let nr = p.index();
    let mut out = Vec::new();
    for n in -central..=central {
        for m in -central..=central {
            let w = (-((n + m) as f64) * p.omega_s * nr + (n - m) as f64 * p.kappa_s) / (2.0 * nr);
            if w > range.0 && w < range.1 && !out.iter().any(|&x: &f64| (x - w).abs() < 1e-12) {
                out.push(w);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// First frequency interval in `range` where a central Bloch wavenumber turns
/// complex (`|Im κ| > im_tol`), found by scanning the unmodulated crossings
/// plus a uniform grid and bisecting the edges.
pub fn first_band_gap(
    p: &ModulationProfile,
    range: (f64, f64),
    order: usize,
    im_tol: f64,
    scan_points: usize,
) -> Result<Option<(f64, f64)>, DispersionError> {
    let window = HarmonicWindow::symmetric(order);
    let central = (order / 2) as i32;
    let mut cands = crossing_frequencies(p, range, central);
    let n = scan_points.max(2);
    cands.extend((0..n).map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64));
    cands.sort_by(f64::total_cmp);
    cands.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let in_gap = |w: f64| max_imag(p, w, window, central).map(|x| x > im_tol);
    let mut prev_outside = None;
    for &w in &cands {
        if in_gap(w)? {
            // bisect lower edge from the last point known to be outside
            let mut lo_out = prev_outside.unwrap_or(range.0);
            let mut lo_in = w;
            for _ in 0..40 {
                let mid = 0.5 * (lo_out + lo_in);
                if in_gap(mid)? {
                    lo_in = mid;
                } else {
                    lo_out = mid;
                }
            }
            // march the upper edge forward then bisect
            let mut hi_in = w;
            let mut hi_out = w;
            let mut stepw = 1e-3 * (range.1 - range.0);
            loop {
                let probe = (hi_in + stepw).min(range.1);
                if !in_gap(probe)? {
                    hi_out = probe;
                    break;
                }
                hi_in = probe;
                if probe >= range.1 {
                    break;
                }
                stepw *= 1.5;
            }
            if hi_out > hi_in {
                for _ in 0..40 {
                    let mid = 0.5 * (hi_in + hi_out);
                    if in_gap(mid)? {
                        hi_in = mid;
                    } else {
                        hi_out = mid;
                    }
                }
            }
            return Ok(Some((lo_in, hi_in)));
        }
        prev_outside = Some(w);
    }
    Ok(None)
}
