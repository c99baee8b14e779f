use num_complex::Complex64 as C;

use super::config::{plan, Layout, SimConfig, SourceKind};
use super::pml::Cpml;
use super::FdtdError;
use crate::medium::{IncidentWave, ModulationProfile, SlabGeometry};
use crate::par::{self, Exec};

/// Analytic incident wave on the injection line.
#[derive(Debug, Clone, PartialEq)]
pub struct Injector {
    pub kind: SourceKind,
    pub omega: f64,
    pub amplitude: f64,
    /// Normal wavenumber satisfying the grid's discrete dispersion.
    pub k_x: f64,
    pub k_z: f64,
    /// `H_z / E_y` of the discrete plane wave.
    pub h_ratio: f64,
    pub x_source: f64,
    pub ramp_time: f64,
    pub z_center: f64,
    pub waist_z: f64,
}

impl Injector {
    pub fn ramp(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t >= self.ramp_time {
            1.0
        } else {
            0.5 * (1.0 - (std::f64::consts::PI * t / self.ramp_time).cos())
        }
    }

    fn envelope(&self, z: f64) -> f64 {
        match self.kind {
            SourceKind::GaussianBeam => (-((z - self.z_center) / self.waist_z).powi(2)).exp(),
            _ => 1.0,
        }
    }

    pub fn e_inc(&self, x: f64, z: f64, t: f64) -> C {
        let a = self.amplitude * self.ramp(t) * self.envelope(z);
        C::from_polar(a, self.k_x * (x - self.x_source) + self.k_z * z - self.omega * t)
    }

    pub fn h_inc(&self, x: f64, z: f64, t: f64) -> C {
        self.e_inc(x, z, t) * self.h_ratio
    }
}

/// Discrete normal wavenumber of a Yee plane wave, or `None` if the grid cannot carry it.
pub fn discrete_kx(omega: f64, k_z: f64, eps: f64, mu: f64, dx: f64, dz: f64, dt: f64) -> Option<f64> {
    let lhs = ((omega * dt / 2.0).sin() / dt).powi(2) * eps * mu;
    let sz = ((k_z * dz / 2.0).sin() / dz).powi(2);
    let s = (lhs - sz).sqrt() * dx;
    if !(lhs > sz) || s >= 1.0 {
        None
    } else {
        Some(2.0 / dx * s.asin())
    }
}

/// Row role of a node along `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Exterior,
    Interface,
    Slab,
}

pub struct SimState {
    pub layout: Layout,
    pub config: SimConfig,
    pub profile: ModulationProfile,
    pub geometry: SlabGeometry,
    pub wave: IncidentWave,
    pub injector: Option<Injector>,
    pub exec: Exec,
    /// Completed steps; `E` is at `t = step·Δt`, `H` at `(step − ½)·Δt`.
    pub step: usize,
    bloch: Option<C>,
    /// `D_y` on `E_y` nodes, `(nx + 1) × nodes_z`.
    d: Vec<C>,
    /// `B_x`, `(nx + 1) × nz`.
    bx: Vec<C>,
    /// `B_z`, `nx × nodes_z`.
    bz: Vec<C>,
    /// Absorbing-layer memories (`[x, z]` for `D`); only touched inside the layers.
    psi_d: Vec<[C; 2]>,
    psi_bx: Vec<C>,
    psi_bz: Vec<C>,
    /// Material at the current `E` time and `H` time.
    eps_now: EpsColumns,
    mu_now: MuColumns,
    ext: Exterior,
    cx_int: Cpml,
    cx_half: Cpml,
    cz_int: Cpml,
    cz_half: Cpml,
}

/// Inverse permittivity per `E_y` column at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsColumns {
    pub slab: Vec<f64>,
    pub interface: Vec<f64>,
}

/// Inverse permeability per column at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct MuColumns {
    pub x_slab: Vec<f64>,
    pub x_interface: Vec<f64>,
    pub z_slab: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Exterior {
    inv_eps: Vec<f64>,
    inv_mu_x: Vec<f64>,
    inv_mu_z: Vec<f64>,
}

pub fn build_sim(
    profile: &ModulationProfile,
    geometry: &SlabGeometry,
    wave: &IncidentWave,
    config: &SimConfig,
    exec: Exec,
) -> Result<SimState, FdtdError> {
    profile.validate().map_err(|e| FdtdError::Config {
        key: "profile",
        msg: e.to_string(),
    })?;
    let layout = plan(profile, geometry, wave, config)?;
    let ne = layout.nodes_z();
    let nz = layout.nz;
    let nx = layout.nx;
    let n_ext = geometry.exterior_index();
    let v_ext = 1.0 / n_ext;
    let k_z = wave.k_z(n_ext);
    let bloch = layout
        .periodic
        .then(|| C::from_polar(1.0, k_z * layout.lz));
    let injector = match config.source.kind {
        SourceKind::None => None,
        kind => {
            let k_x = discrete_kx(
                wave.omega_0,
                k_z,
                geometry.exterior_eps,
                geometry.exterior_mu,
                layout.dx,
                layout.dz,
                layout.dt,
            )
            .ok_or_else(|| FdtdError::Config {
                key: "cells_per_wavelength",
                msg: "incident wave is beyond the grid's propagation cutoff".into(),
            })?;
            let h_ratio = (layout.dt / layout.dx) * (k_x * layout.dx / 2.0).sin()
                / (wave.omega_0 * layout.dt / 2.0).sin()
                / geometry.exterior_mu;
            let lambda0 = 2.0 * std::f64::consts::PI / wave.omega_0;
            let sin_t = wave.theta.to_radians().sin();
            Some(Injector {
                kind,
                omega: wave.omega_0,
                amplitude: wave.amplitude,
                k_x,
                k_z,
                h_ratio,
                x_source: layout.source_i as f64 * layout.dx,
                ramp_time: layout.ramp_time,
                z_center: layout.primary_cells().1 as f64 * layout.dz / 2.0,
                waist_z: config.source.waist * lambda0 / sin_t,
            })
        }
    };
    let mk = |count, offset, cells, layers, delta| {
        Cpml::new(count, offset, cells, layers, delta, layout.dt, v_ext, wave.omega_0)
    };
    let cx_int = mk(nx + 1, 0.0, nx, layout.pml_x, layout.dx);
    let cx_half = mk(nx, 0.5, nx, layout.pml_x, layout.dx);
    let cz_int = mk(ne, 0.0, nz, layout.pml_z, layout.dz);
    let cz_half = mk(nz, 0.5, nz, layout.pml_z, layout.dz);
    let zero = C::new(0.0, 0.0);
    Ok(SimState {
        layout: layout.clone(),
        config: config.clone(),
        profile: *profile,
        geometry: *geometry,
        wave: *wave,
        injector,
        exec,
        step: 0,
        bloch,
        d: vec![zero; (nx + 1) * ne],
        bx: vec![zero; (nx + 1) * nz],
        bz: vec![zero; nx * ne],
        psi_d: vec![[zero; 2]; (nx + 1) * ne],
        psi_bx: vec![zero; (nx + 1) * nz],
        psi_bz: vec![zero; nx * ne],
        eps_now: eps_columns(profile, geometry, &layout, 0.0),
        mu_now: mu_columns(profile, geometry, &layout, -0.5 * layout.dt),
        ext: Exterior {
            inv_eps: vec![1.0 / geometry.exterior_eps; ne],
            inv_mu_x: vec![1.0 / geometry.exterior_mu; nz],
            inv_mu_z: vec![1.0 / geometry.exterior_mu; ne],
        },
        cx_int,
        cx_half,
        cz_int,
        cz_half,
    })
}

fn z_at(layout: &Layout, k: f64) -> f64 {
    (k - layout.pml_z as f64) * layout.dz
}

fn eps_columns(profile: &ModulationProfile, geometry: &SlabGeometry, layout: &Layout, t: f64) -> EpsColumns {
    let ne = layout.nodes_z();
    let mut c = EpsColumns {
        slab: Vec::with_capacity(ne),
        interface: Vec::with_capacity(ne),
    };
    for k in 0..ne {
        let (eps, _) = profile.sample(z_at(layout, k as f64), t);
        c.slab.push(1.0 / eps);
        c.interface.push(2.0 / (eps + geometry.exterior_eps));
    }
    c
}

fn mu_columns(profile: &ModulationProfile, geometry: &SlabGeometry, layout: &Layout, t: f64) -> MuColumns {
    let ne = layout.nodes_z();
    let mut c = MuColumns {
        x_slab: Vec::with_capacity(layout.nz),
        x_interface: Vec::with_capacity(layout.nz),
        z_slab: Vec::with_capacity(ne),
    };
    for k in 0..ne {
        c.z_slab.push(1.0 / profile.sample(z_at(layout, k as f64), t).1);
    }
    for k in 0..layout.nz {
        let (_, mu) = profile.sample(z_at(layout, k as f64 + 0.5), t);
        c.x_slab.push(1.0 / mu);
        c.x_interface.push(2.0 / (mu + geometry.exterior_mu));
    }
    c
}

fn eps_row<'a>(region: Region, ext: &'a Exterior, c: &'a EpsColumns) -> &'a [f64] {
    match region {
        Region::Exterior => &ext.inv_eps,
        Region::Interface => &c.interface,
        Region::Slab => &c.slab,
    }
}

fn mu_x_row<'a>(region: Region, ext: &'a Exterior, c: &'a MuColumns) -> &'a [f64] {
    match region {
        Region::Exterior => &ext.inv_mu_x,
        Region::Interface => &c.x_interface,
        Region::Slab => &c.x_slab,
    }
}

/// `B_z` row `i` sits at `x = (i + ½)Δx`, fully inside or outside the slab.
fn mu_z_row<'a>(i: usize, slab: (usize, usize), ext: &'a Exterior, c: &'a MuColumns) -> &'a [f64] {
    if i >= slab.0 && i < slab.1 {
        &c.z_slab
    } else {
        &ext.inv_mu_z
    }
}

impl SimState {
    pub fn time(&self) -> f64 {
        self.step as f64 * self.layout.dt
    }

    /// `z` of node `k` in the profile's frame (zero at the first primary node).
    pub fn z_node(&self, k: f64) -> f64 {
        z_at(&self.layout, k)
    }

    fn region(&self, i: usize) -> Region {
        let (a, b) = self.layout.slab_i;
        if i == a || i == b {
            Region::Interface
        } else if i > a && i < b {
            Region::Slab
        } else {
            Region::Exterior
        }
    }

    /// Inverse material columns at time `t`, evaluated from the analytic profile.
    pub fn material(&self, t: f64) -> (EpsColumns, MuColumns) {
        (
            eps_columns(&self.profile, &self.geometry, &self.layout, t),
            mu_columns(&self.profile, &self.geometry, &self.layout, t),
        )
    }

    pub fn e_field(&self, i: usize, k: usize) -> C {
        let ne = self.layout.nodes_z();
        self.d[i * ne + k] * eps_row(self.region(i), &self.ext, &self.eps_now)[k]
    }

    pub fn set_e_field(&mut self, i: usize, k: usize, value: C) {
        let ne = self.layout.nodes_z();
        let inv = eps_row(self.region(i), &self.ext, &self.eps_now)[k];
        self.d[i * ne + k] = value / inv;
    }

    fn hz(&self, i: usize, k: usize) -> C {
        let ne = self.layout.nodes_z();
        self.bz[i * ne + k] * mu_z_row(i, self.layout.slab_i, &self.ext, &self.mu_now)[k]
    }

    /// `H_z` averaged onto `E_y` node `(i, k)`.
    pub fn hz_at_node(&self, i: usize, k: usize) -> C {
        (self.hz(i - 1, k) + self.hz(i, k)) * 0.5
    }

    /// First non-finite field node, if any.
    pub fn find_non_finite(&self) -> Option<(usize, usize)> {
        let ne = self.layout.nodes_z();
        let bad = |c: &C| !(c.re.is_finite() && c.im.is_finite());
        if let Some(p) = self.d.iter().position(bad) {
            return Some((p / ne, p % ne));
        }
        if let Some(p) = self.bz.iter().position(bad) {
            return Some((p / ne, p % ne));
        }
        self.bx.iter().position(bad).map(|p| (p / self.layout.nz, p % self.layout.nz))
    }

    pub fn max_abs_e(&self) -> f64 {
        let ne = self.layout.nodes_z();
        (0..=self.layout.nx)
            .flat_map(|i| (0..ne).map(move |k| (i, k)))
            .map(|(i, k)| self.e_field(i, k).norm())
            .fold(0.0, f64::max)
    }

    /// Advance all fields by one time step.
    pub fn advance(&mut self) {
        let lay = &self.layout;
        let (dx, dz, dt) = (lay.dx, lay.dz, lay.dt);
        let (rdx, rdz) = (1.0 / dx, 1.0 / dz);
        let ne = lay.nodes_z();
        let nz = lay.nz;
        let nx = lay.nx;
        let t_n = self.step as f64 * dt;
        let t_h = t_n + 0.5 * dt;
        let t_e = t_n + dt;
        let periodic = lay.periodic;
        let z_layers = lay.pml_z > 0;
        let bloch = self.bloch.unwrap_or(C::new(1.0, 0.0));
        let inv_bloch = bloch.inv();
        let slab = lay.slab_i;
        let regions: Vec<Region> = (0..=nx).map(|i| self.region(i)).collect();
        let inj = self.injector.as_ref();
        let src = lay.source_i;
        let pml_z = lay.pml_z as f64;
        let ext = &self.ext;

        // magnetic half step, E at t_n
        {
            let d = &self.d;
            let eps = &self.eps_now;
            let cz = &self.cz_half;
            let regions = &regions;
            par::for_each_row_pair(self.exec, &mut self.bx, &mut self.psi_bx, nz, |i, row, psi| {
                let dr = &d[i * ne..(i + 1) * ne];
                let inv = eps_row(regions[i], ext, eps);
                for k in 0..nz {
                    let e = dr[k] * inv[k];
                    let next = if k + 1 < ne {
                        dr[k + 1] * inv[k + 1]
                    } else {
                        dr[0] * inv[0] * bloch
                    };
                    let mut de = (next - e) * rdz;
                    if z_layers {
                        psi[k] = psi[k] * cz.b[k] + de * cz.a[k];
                        de += psi[k];
                    }
                    row[k] += de * dt;
                }
            });
        }
        {
            let d = &self.d;
            let eps = &self.eps_now;
            let cx = &self.cx_half;
            let regions = &regions;
            let xs = src as f64 * dx;
            par::for_each_row_pair(self.exec, &mut self.bz, &mut self.psi_bz, ne, |i, row, psi| {
                let d0 = &d[i * ne..(i + 1) * ne];
                let d1 = &d[(i + 1) * ne..(i + 2) * ne];
                let inv0 = eps_row(regions[i], ext, eps);
                let inv1 = eps_row(regions[i + 1], ext, eps);
                let layer = cx.is_active(i);
                let feed = if i + 1 == src { inj } else { None };
                for k in 0..ne {
                    let mut de = (d1[k] * inv1[k] - d0[k] * inv0[k]) * rdx;
                    if let Some(inj) = feed {
                        de -= inj.e_inc(xs, (k as f64 - pml_z) * dz, t_n) * rdx;
                    }
                    if layer {
                        psi[k] = psi[k] * cx.b[i] + de * cx.a[i];
                        de += psi[k];
                    }
                    row[k] -= de * dt;
                }
            });
        }
        self.mu_now = mu_columns(&self.profile, &self.geometry, &self.layout, t_h);

        // electric half step, H at t_h
        {
            let bx = &self.bx;
            let bz = &self.bz;
            let mu = &self.mu_now;
            let cx = &self.cx_int;
            let cz = &self.cz_int;
            let regions = &regions;
            let xh = (src as f64 - 0.5) * dx;
            par::for_each_row_pair(self.exec, &mut self.d, &mut self.psi_d, ne, |i, row, psi| {
                if i == 0 || i == nx {
                    return;
                }
                let bxr = &bx[i * nz..(i + 1) * nz];
                let bz0 = &bz[(i - 1) * ne..i * ne];
                let bz1 = &bz[i * ne..(i + 1) * ne];
                let inv_x = mu_x_row(regions[i], ext, mu);
                let inv_z0 = mu_z_row(i - 1, slab, ext, mu);
                let inv_z1 = mu_z_row(i, slab, ext, mu);
                let layer = cx.is_active(i);
                let feed = if i == src { inj } else { None };
                let (k0, k1) = if periodic { (0, ne) } else { (1, ne - 1) };
                for k in k0..k1 {
                    let prev = if k == 0 {
                        bxr[nz - 1] * inv_x[nz - 1] * inv_bloch
                    } else {
                        bxr[k - 1] * inv_x[k - 1]
                    };
                    let mut dhx = (bxr[k] * inv_x[k] - prev) * rdz;
                    let mut dhz = (bz1[k] * inv_z1[k] - bz0[k] * inv_z0[k]) * rdx;
                    if let Some(inj) = feed {
                        dhz -= inj.h_inc(xh, (k as f64 - pml_z) * dz, t_h) * rdx;
                    }
                    let m = &mut psi[k];
                    if layer {
                        m[0] = m[0] * cx.b[i] + dhz * cx.a[i];
                        dhz += m[0];
                    }
                    if z_layers {
                        m[1] = m[1] * cz.b[k] + dhx * cz.a[k];
                        dhx += m[1];
                    }
                    row[k] += (dhx - dhz) * dt;
                }
            });
        }
        self.eps_now = eps_columns(&self.profile, &self.geometry, &self.layout, t_e);
        self.step += 1;
    }
}
