use serde::{Deserialize, Serialize};

use super::FdtdError;
use crate::medium::{IncidentWave, ModulationProfile, SlabGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    /// Plane wave with Bloch-periodic `z` boundaries spanning one modulation period.
    PlaneWave,
    /// Gaussian beam, absorbing layers on all four sides.
    GaussianBeam,
    /// No injection; fields evolve from whatever initial state is set.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceConfig {
    pub kind: SourceKind,
    /// Beam waist in free-space wavelengths of `ω_0`.
    pub waist: f64,
    /// Raised-cosine ramp length in periods of `ω_0`.
    pub ramp_cycles: f64,
    /// Total simulated time in periods of `ω_0`.
    pub total_cycles: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            kind: SourceKind::PlaneWave,
            waist: 3.0,
            ramp_cycles: 5.0,
            total_cycles: 80.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Cells per wavelength of the shortest analysed harmonic in the densest material.
    pub cells_per_wavelength: usize,
    /// Fraction of the 2-D stability limit.
    pub courant: f64,
    /// `(x, z)` extent of the primary grid in free-space wavelengths of `ω_0`;
    /// zero picks the smallest extent that fits the layout.
    pub domain: [f64; 2],
    pub pml_cells: usize,
    /// Highest `|n|` analysed; also sets the resolution rule.
    pub harmonics: usize,
    /// Free space between source line and slab (and slab and far edge), in wavelengths.
    pub gap: f64,
    /// Length of the Hann analysis window in modulation periods.
    pub analysis_periods: f64,
    /// Snapshots are kept over this many final modulation periods.
    pub frame_periods: f64,
    pub source: SourceConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            cells_per_wavelength: 40,
            courant: 0.5,
            domain: [0.0, 0.0],
            pml_cells: 10,
            harmonics: 2,
            gap: 0.5,
            analysis_periods: 16.0,
            frame_periods: 1.0,
            source: SourceConfig::default(),
        }
    }
}

/// Minimum analysis window.
pub const MIN_ANALYSIS_PERIODS: f64 = 8.0;

impl SimConfig {
    pub fn validate(&self) -> Result<(), FdtdError> {
        let bad = |key: &'static str, msg: String| Err(FdtdError::Config { key, msg });
        if self.cells_per_wavelength < 20 {
            return bad("cells_per_wavelength", format!("{} < 20", self.cells_per_wavelength));
        }
        if !(self.courant > 0.0 && self.courant <= 1.0) {
            return bad("courant", format!("{} outside (0, 1]", self.courant));
        }
        if self.domain.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return bad("domain", "extents must be finite and >= 0".into());
        }
        if self.pml_cells < 4 {
            return bad("pml_cells", format!("{} < 4", self.pml_cells));
        }
        if !(self.gap.is_finite() && self.gap >= 0.1) {
            return bad("gap", format!("{} < 0.1 wavelengths", self.gap));
        }
        if !(self.analysis_periods >= MIN_ANALYSIS_PERIODS) {
            return bad(
                "analysis_periods",
                format!("{} < {MIN_ANALYSIS_PERIODS}", self.analysis_periods),
            );
        }
        if !(self.frame_periods >= 0.0) {
            return bad("frame_periods", "must be >= 0".into());
        }
        let s = &self.source;
        if !(s.waist > 0.0) {
            return bad("source.waist", "must be > 0".into());
        }
        if !(s.ramp_cycles >= 0.0 && s.total_cycles >= 0.0) {
            return bad("source", "cycle counts must be >= 0".into());
        }
        Ok(())
    }
}

/// Resolved grid geometry. Indices count cells of the full grid including
/// absorbing layers; `E_y` nodes sit at integer positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub dx: f64,
    pub dz: f64,
    pub dt: f64,
    /// Number of cells along `x` (`E_y` nodes `0..=nx`).
    pub nx: usize,
    /// Cells along `z`; periodic grids have `nz` nodes, bounded ones `nz + 1`.
    pub nz: usize,
    pub periodic: bool,
    pub pml_x: usize,
    pub pml_z: usize,
    pub source_i: usize,
    pub reflect_i: usize,
    pub transmit_i: usize,
    pub slab_i: (usize, usize),
    pub wavelength_min: f64,
    pub lz: f64,
    pub steps: usize,
    pub ramp_time: f64,
    pub analysis_start: f64,
    pub frame_stride: usize,
    pub frame_start: usize,
}

impl Layout {
    pub fn nodes_z(&self) -> usize {
        if self.periodic {
            self.nz
        } else {
            self.nz + 1
        }
    }

    pub fn x(&self, i: f64) -> f64 {
        i * self.dx
    }

    /// `z` of node `k`, measured from the first node.
    pub fn z(&self, k: f64) -> f64 {
        k * self.dz
    }

    pub fn primary_cells(&self) -> (usize, usize) {
        (self.nx - 2 * self.pml_x, self.nz - 2 * self.pml_z)
    }
}

/// Shortest wavelength over analysed harmonics in the densest material.
pub fn shortest_wavelength(profile: &ModulationProfile, geometry: &SlabGeometry, wave: &IncidentWave, harmonics: usize) -> f64 {
    let n = if profile.is_static() { 0 } else { harmonics as i32 };
    let w_max = (-n..=n)
        .map(|m| (wave.omega_0 + m as f64 * profile.omega_s).abs())
        .fold(0.0, f64::max)
        .max(wave.omega_0);
    let dense = (profile.eps_avg * (1.0 + profile.delta_e) * profile.mu_avg * (1.0 + profile.delta_m))
        .sqrt()
        .max(geometry.exterior_index());
    2.0 * std::f64::consts::PI / (w_max * dense)
}

pub fn plan(profile: &ModulationProfile, geometry: &SlabGeometry, wave: &IncidentWave, cfg: &SimConfig) -> Result<Layout, FdtdError> {
    cfg.validate()?;
    let lambda0 = 2.0 * std::f64::consts::PI / wave.omega_0;
    let lmin = shortest_wavelength(profile, geometry, wave, cfg.harmonics);
    let target = lmin / cfg.cells_per_wavelength as f64;
    let d = geometry.thickness;
    let slab_cells = (d / target).ceil().max(1.0) as usize;
    let dx = d / slab_cells as f64;
    let gap_cells = ((cfg.gap * lambda0) / dx).ceil().max(4.0) as usize;
    let min_cells_x = 2 * gap_cells + slab_cells;
    let want_x = (cfg.domain[0] * lambda0 / dx).round() as usize;
    if cfg.domain[0] > 0.0 && want_x < min_cells_x {
        return Err(FdtdError::Config {
            key: "domain",
            msg: format!(
                "x extent {} wavelengths cannot hold the slab plus gaps ({:.3} wavelengths)",
                cfg.domain[0],
                min_cells_x as f64 * dx / lambda0
            ),
        });
    }
    let primary_x = want_x.max(min_cells_x);
    let extra = primary_x - min_cells_x;
    let pml_x = cfg.pml_cells;
    let front = pml_x + extra / 2 + gap_cells;
    let slab_i = (front, front + slab_cells);
    let source_i = front - gap_cells / 2;
    let reflect_i = (front - gap_cells + source_i) / 2;
    let transmit_i = slab_i.1 + gap_cells / 2;
    let nx = primary_x + 2 * pml_x;

    let periodic = cfg.source.kind == SourceKind::PlaneWave;
    let (nz, dz, pml_z, lz) = if periodic {
        let lz = if profile.kappa_s > 0.0 {
            2.0 * std::f64::consts::PI / profile.kappa_s
        } else {
            lambda0
        };
        let nz = (lz / target).ceil().max(4.0) as usize;
        (nz, lz / nz as f64, 0, lz)
    } else {
        let nzp = ((cfg.domain[1] * lambda0) / dx).round().max(8.0) as usize;
        let pml_z = cfg.pml_cells;
        (nzp + 2 * pml_z, dx, pml_z, nzp as f64 * dx)
    };
    let dt = cfg.courant * dx.min(dz) / std::f64::consts::SQRT_2;
    let period0 = lambda0;
    let total_time = cfg.source.total_cycles * period0;
    let steps = (total_time / dt).ceil() as usize;
    let ramp_time = cfg.source.ramp_cycles * period0;
    let ps = 2.0 * std::f64::consts::PI / profile.omega_s;
    let analysis_start = total_time - cfg.analysis_periods * ps;
    if steps > 0 && cfg.source.kind != SourceKind::None && analysis_start < ramp_time {
        return Err(FdtdError::Config {
            key: "source.total_cycles",
            msg: format!(
                "{} cycles leave no post-ramp window of {} modulation periods",
                cfg.source.total_cycles, cfg.analysis_periods
            ),
        });
    }
    let steps_per_period = ps / dt;
    let frame_stride = ((steps_per_period / 20.0).floor() as usize).max(1);
    let frame_start = steps.saturating_sub((cfg.frame_periods * steps_per_period).ceil() as usize);
    Ok(Layout {
        dx,
        dz,
        dt,
        nx,
        nz,
        periodic,
        pml_x,
        pml_z,
        source_i,
        reflect_i,
        transmit_i,
        slab_i,
        wavelength_min: lmin,
        lz,
        steps,
        ramp_time,
        analysis_start,
        frame_stride,
        frame_start,
    })
}
