use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use super::config::{Layout, SourceKind};
use super::grid::SimState;
use super::spectrum::{hann, Series};
use super::FdtdError;

/// Which probe line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    /// Between the absorbing layer and the injection line (scattered field only).
    Reflect,
    /// Behind the slab.
    Transmit,
}

/// Hann-weighted harmonic projections along one probe line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineSpectrum {
    pub plane: Plane,
    pub x: f64,
    pub node: usize,
    /// Per harmonic, per `z` node: complex `E_y` amplitude.
    pub e: Vec<Vec<C>>,
    /// Per harmonic, per `z` node: complex `H_z` amplitude on the `E_y` node.
    pub h: Vec<Vec<C>>,
    /// Time-averaged `+x` Poynting flux over all frequencies.
    pub flux: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Frame {
    pub step: usize,
    pub time: f64,
    pub nx: usize,
    pub nz: usize,
    /// `Re E_y` over the primary grid, row-major by `x`.
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldRecord {
    pub layout: Layout,
    pub harmonics: Vec<i32>,
    pub omegas: Vec<f64>,
    pub k_z: Vec<f64>,
    pub lines: Vec<LineSpectrum>,
    /// `E_y` and `H_z` at the centre of the transmission line, every step.
    pub probe_e: Vec<C>,
    pub probe_h: Vec<C>,
    pub frames: Vec<Frame>,
    /// Analytic incident flux per unit `z` length (plane-wave source).
    pub incident_flux: Option<f64>,
    pub max_abs_e: f64,
    pub warnings: Vec<String>,
    /// Source was on, so the harmonic projections are meaningful.
    pub analysed: bool,
}

impl FieldRecord {
    pub fn line(&self, plane: Plane) -> &LineSpectrum {
        self.lines.iter().find(|l| l.plane == plane).expect("both probe lines are always recorded")
    }

    pub fn probe_series(&self) -> Series {
        Series {
            t0: self.layout.dt,
            dt: self.layout.dt,
            values: self.probe_e.clone(),
            analytic: true,
        }
    }

    fn z_weight(&self) -> f64 {
        if self.layout.periodic {
            self.layout.dz / self.layout.lz
        } else {
            self.layout.dz
        }
    }

    fn z_range(&self) -> std::ops::Range<usize> {
        let l = &self.layout;
        if l.periodic {
            0..l.nz
        } else {
            l.pml_z..l.nz - l.pml_z + 1
        }
    }

    /// Per-harmonic time-averaged `+x` flux `½ Re(E_n H_n*)` through `plane`.
    pub fn harmonic_flux(&self, plane: Plane) -> Vec<f64> {
        let line = self.line(plane);
        let w = self.z_weight();
        (0..self.harmonics.len())
            .map(|h| {
                self.z_range()
                    .map(|k| 0.5 * (line.e[h][k] * line.h[h][k].conj()).re * w)
                    .sum()
            })
            .collect()
    }

    /// Space-time projection of `E_y` on `e^{i k_z,n z}` (periodic grids).
    pub fn harmonic_amplitudes(&self, plane: Plane) -> Vec<C> {
        let line = self.line(plane);
        let l = &self.layout;
        let nodes = self.z_range();
        let count = nodes.len() as f64;
        (0..self.harmonics.len())
            .map(|h| {
                nodes
                    .clone()
                    .map(|k| line.e[h][k] * C::from_polar(1.0, -self.k_z[h] * (k as f64 - l.pml_z as f64) * l.dz))
                    .sum::<C>()
                    / count
            })
            .collect()
    }
}

/// Time-averaged `+x` flux through `plane` (all frequencies).
pub fn flux(record: &FieldRecord, plane: Plane) -> f64 {
    record.line(plane).flux
}

struct LineAcc {
    node: usize,
    e: Vec<Vec<C>>,
    h: Vec<Vec<C>>,
    flux: f64,
    prev_h: Vec<C>,
}

/// Run the configured ramp plus steady state and collect probes.
pub fn run(state: &mut SimState) -> Result<FieldRecord, FdtdError> {
    let lay = state.layout.clone();
    let ne = lay.nodes_z();
    let order = if state.profile.is_static() { 0 } else { state.config.harmonics as i32 };
    let harmonics: Vec<i32> = (-order..=order).collect();
    let omegas: Vec<f64> = harmonics
        .iter()
        .map(|&n| state.wave.omega_0 + n as f64 * state.profile.omega_s)
        .collect();
    let k_z0 = state.injector.as_ref().map_or(0.0, |i| i.k_z);
    let k_z: Vec<f64> = harmonics.iter().map(|&n| k_z0 + n as f64 * state.profile.kappa_s).collect();
    let nh = harmonics.len();
    let mut accs: Vec<LineAcc> = [lay.reflect_i, lay.transmit_i]
        .iter()
        .map(|&node| LineAcc {
            node,
            e: vec![vec![C::new(0.0, 0.0); ne]; nh],
            h: vec![vec![C::new(0.0, 0.0); ne]; nh],
            flux: 0.0,
            prev_h: vec![C::new(0.0, 0.0); ne],
        })
        .collect();
    let window = lay.steps as f64 * lay.dt - lay.analysis_start;
    let (mut we, mut wh) = (0.0, 0.0);
    let mid = lay.nz / 2;
    let mut probe_e = Vec::with_capacity(lay.steps);
    let mut probe_h = Vec::with_capacity(lay.steps);
    let mut frames = Vec::new();
    let mut warnings = Vec::new();
    let mut max_abs_e: f64 = 0.0;
    let amp = state.wave.amplitude;
    let (px, pz) = lay.primary_cells();
    let snapshot = |s: &SimState| -> Frame {
        let mut values = Vec::with_capacity((px + 1) * (pz + 1));
        let k_hi = if lay.periodic { lay.nz } else { lay.nz - lay.pml_z + 1 };
        for i in lay.pml_x..=lay.nx - lay.pml_x {
            for k in lay.pml_z..k_hi {
                values.push(s.e_field(i, k).re as f32);
            }
        }
        Frame {
            step: s.step,
            time: s.time(),
            nx: lay.nx - 2 * lay.pml_x + 1,
            nz: k_hi - lay.pml_z,
            values,
        }
    };
    if lay.steps == 0 {
        frames.push(snapshot(state));
    }
    let analysed = state.injector.is_some();
    for n in 0..lay.steps {
        state.advance();
        let t_e = state.time();
        let t_h = t_e - 0.5 * lay.dt;
        let w_e = if analysed { hann(t_e, lay.analysis_start, window) } else { 0.0 };
        let w_h = if analysed { hann(t_h, lay.analysis_start, window) } else { 0.0 };
        we += w_e;
        wh += w_h;
        let ph_e: Vec<C> = omegas.iter().map(|&w| C::from_polar(w_e, w * t_e)).collect();
        let ph_h: Vec<C> = omegas.iter().map(|&w| C::from_polar(w_h, w * t_h)).collect();
        for acc in accs.iter_mut() {
            let i = acc.node;
            let mut line_flux = 0.0;
            for k in 0..ne {
                let e = state.e_field(i, k);
                let h = state.hz_at_node(i, k);
                if w_e > 0.0 {
                    // H straddles E in time; average the two half steps
                    let hc = (h + acc.prev_h[k]) * 0.5;
                    line_flux += (e * hc.conj()).re;
                }
                acc.prev_h[k] = h;
                if w_e > 0.0 || w_h > 0.0 {
                    for j in 0..nh {
                        acc.e[j][k] += e * ph_e[j];
                        acc.h[j][k] += h * ph_h[j];
                    }
                }
            }
            acc.flux += w_e * line_flux;
        }
        let pe = state.e_field(lay.transmit_i, mid);
        probe_e.push(pe);
        probe_h.push(state.hz_at_node(lay.transmit_i, mid));
        if n % 64 == 63 || n + 1 == lay.steps {
            if let Some((i, k)) = state.find_non_finite() {
                return Err(FdtdError::NonFinite { step: state.step, i, k });
            }
            max_abs_e = max_abs_e.max(state.max_abs_e());
        }
        if state.step >= lay.frame_start && (state.step - lay.frame_start).is_multiple_of(lay.frame_stride) {
            frames.push(snapshot(state));
        }
    }
    if analysed && amp > 0.0 && max_abs_e > 10.0 * amp {
        warnings.push(format!(
            "max |E_y| = {:.3} exceeds 10x the source amplitude (parametric gain?)",
            max_abs_e
        ));
    }
    let z_weight = if lay.periodic { lay.dz / lay.lz } else { lay.dz };
    let lines = accs
        .into_iter()
        .zip([super::record::Plane::Reflect, Plane::Transmit])
        .map(|(acc, plane)| {
            let norm = |v: Vec<Vec<C>>, w: f64| -> Vec<Vec<C>> {
                if w > 0.0 {
                    v.into_iter().map(|r| r.into_iter().map(|x| x / w).collect()).collect()
                } else {
                    v
                }
            };
            let flux = if we > 0.0 {
                // sum over z nodes inside the primary region only
                0.5 * acc.flux / we * z_weight
            } else {
                0.0
            };
            LineSpectrum {
                plane,
                x: acc.node as f64 * lay.dx,
                node: acc.node,
                e: norm(acc.e, we),
                h: norm(acc.h, wh),
                flux,
            }
        })
        .collect();
    let incident_flux = match &state.injector {
        Some(inj) if inj.kind == SourceKind::PlaneWave => {
            Some(0.5 * inj.amplitude * inj.amplitude * inj.h_ratio * (inj.k_x * lay.dx / 2.0).cos())
        }
        _ => None,
    };
    Ok(FieldRecord {
        layout: lay,
        harmonics,
        omegas,
        k_z,
        lines,
        probe_e,
        probe_h,
        frames,
        incident_flux,
        max_abs_e,
        warnings,
        analysed,
    })
}
