//! One function per command. Each writes its artifacts into a [`Sink`] and
//! returns headline numbers for the manifest and for sweep tables.

use serde::Serialize;
use serde_json::json;
use stm_core::dispersion::{
    band_structure, eigen_kappa, eigen_kappa_window, group_velocities, isofrequency, ladder_sets,
    min_pairwise_gap, BranchSweep, Direction, GroupVelocity, GV_STEP,
};
use stm_core::fdtd::{flux, simulate, spectrum, Plane};
use stm_core::medium::ModulationProfile;
use stm_core::scattering::{nonreciprocity, power_balance, scatter, ScatteringResult};
use stm_core::{par, Exec};

use crate::config::{Command, ConfigError, RunSpec};
use crate::output::{num, opt, pgm, Sink, Table, WriteError};
use crate::plot;

pub const BRANCH_HEADER: [&str; 7] = [
    "omega_over_omega_s",
    "kappa_over_kappa_s",
    "branch_id",
    "harmonic_n",
    "im_kappa",
    "vg_x",
    "vg_z",
];

pub const POWER_HEADER: [&str; 6] = ["n", "omega_n", "k_z_n", "propagating", "P_refl_n", "P_trans_n"];

pub const FDTD_HEADER: [&str; 9] = [
    "n",
    "omega_n",
    "k_z_n",
    "P_refl_n",
    "P_trans_n",
    "trans_re",
    "trans_im",
    "probe_re",
    "probe_im",
];

pub const PROBE_HEADER: [&str; 5] = ["t", "e_re", "e_im", "h_re", "h_im"];

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver error: {0}")]
    Solver(String),
    #[error(transparent)]
    Write(#[from] WriteError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Solver(_) | RunError::Write(_) => 2,
        }
    }
}

fn solver<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Solver(e.to_string())
}

/// Headline numbers plus anything the manifest should carry.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Outcome {
    pub summary: Vec<(String, f64)>,
    pub warnings: Vec<String>,
    pub condition: Option<f64>,
    pub details: serde_json::Value,
}

/// Column names of a command's summary, fixed so sweep tables line up.
pub fn summary_keys(command: Command) -> &'static [&'static str] {
    match command {
        Command::Band => &["points", "failures", "order"],
        Command::Isofreq => &["points", "failures", "order", "forward_gap", "backward_gap"],
        Command::Scatter => &["R", "T", "A", "order", "condition"],
        Command::Nonrecip => &["T_fwd", "T_bwd", "A_fwd", "A_bwd", "contrast", "order", "condition"],
        Command::Fdtd => &["R", "T", "A", "flux_reflect", "flux_transmit", "max_abs_e"],
        Command::Sweep => &["children", "failed"],
    }
}

fn summary(command: Command, values: &[f64]) -> Vec<(String, f64)> {
    summary_keys(command).iter().map(|k| k.to_string()).zip(values.iter().copied()).collect()
}

/// Wavenumber unit for normalized tables: `κ_s`, or `n ω_s` for time-only modulation.
pub fn kappa_unit(p: &ModulationProfile) -> f64 {
    if p.kappa_s != 0.0 {
        p.kappa_s.abs()
    } else {
        p.index() * p.omega_s
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Raw and ladder-shifted branch tables, plus `(κ_n, ω)` runs for plotting.
fn branch_tables(
    p: &ModulationProfile,
    sweep: &BranchSweep,
    omegas: &[f64],
    extra: Option<&[f64]>,
) -> (Table, Table, Vec<plot::Series>) {
    let mut header: Vec<&str> = BRANCH_HEADER.to_vec();
    if extra.is_some() {
        header.push("kx_over_kappa_s");
    }
    let mut raw = Table::new(&header);
    let mut ladder = Table::new(&header);
    let unit = kappa_unit(p);
    let mut fwd: std::collections::BTreeMap<usize, Vec<Vec<(f64, f64)>>> = Default::default();
    let mut bwd: std::collections::BTreeMap<usize, Vec<Vec<(f64, f64)>>> = Default::default();
    for (i, pts) in sweep.points.iter().enumerate() {
        let Some(pts) = pts else { continue };
        let w = omegas[i] / p.omega_s;
        for b in pts {
            let shifted = b.kappa.re + b.dominant_harmonic as f64 * p.kappa_s;
            let (vx, vz) = match b.group_velocity {
                Some([x, z]) => (num(x), num(z)),
                None => (String::new(), String::new()),
            };
            let row = |k: f64| {
                let mut r = vec![
                    num(w),
                    num(k / unit),
                    b.branch.to_string(),
                    b.dominant_harmonic.to_string(),
                    num(b.kappa.im / unit),
                    vx.clone(),
                    vz.clone(),
                ];
                if let Some(x) = extra {
                    r.push(num(x[i] / unit));
                }
                r
            };
            raw.push(row(b.kappa.re));
            ladder.push(row(shifted));
            let target = match b.class {
                Direction::Forward => &mut fwd,
                Direction::Backward => &mut bwd,
                Direction::Evanescent => continue,
            };
            let x = extra.map(|x| x[i] / unit).unwrap_or(shifted / unit);
            let y = if extra.is_some() { shifted / unit } else { w };
            let runs = target.entry(b.branch).or_default();
            // start a new run when the branch skipped grid points
            let contiguous = runs.last().and_then(|r| r.last()).is_some_and(|_| {
                i > 0 && sweep.points[i - 1].as_ref().is_some_and(|prev| {
                    prev.iter().any(|q| q.branch == b.branch && q.class == b.class)
                })
            });
            if !contiguous {
                runs.push(Vec::new());
            }
            runs.last_mut().unwrap().push((x, y));
        }
    }
    let series = vec![
        plot::Series {
            label: "forward".into(),
            runs: fwd.into_values().flatten().collect(),
        },
        plot::Series {
            label: "backward".into(),
            runs: bwd.into_values().flatten().collect(),
        },
    ];
    (raw, ladder, series)
}

pub fn band(spec: &RunSpec, sink: &mut Sink, exec: Exec) -> Result<Outcome, RunError> {
    let p = spec.profile()?;
    let b = &spec.band;
    let omegas: Vec<f64> = linspace(b.omega_min, b.omega_max, b.points).iter().map(|w| w * p.omega_s).collect();
    let mut sweep = band_structure(&p, &omegas, &spec.truncation(), exec).map_err(solver)?;
    if b.group_velocity {
        let window = sweep.window;
        let gv: Vec<Option<Vec<Option<GroupVelocity>>>> = par::map(exec, &omegas, |&w| {
            eigen_kappa_window(&p, w, 0.0, window).ok().map(|s| group_velocities(&p, &s, GV_STEP))
        });
        for (pts, g) in sweep.points.iter_mut().zip(gv) {
            if let (Some(pts), Some(g)) = (pts.as_mut(), g) {
                for (pt, v) in pts.iter_mut().zip(g) {
                    pt.group_velocity = v.map(|v| [v.vg_x, v.vg_z]);
                }
            }
        }
    }
    let (raw, ladder, series) = branch_tables(&p, &sweep, &omegas, None);
    sink.csv("band.csv", &raw)?;
    sink.csv("band_ladder.csv", &ladder)?;
    sink.json("band.json", &sweep)?;
    sink.text(
        "band.svg",
        &plot::lines("Band structure (k_x = 0)", "kappa_n / kappa_s", "omega / omega_s", &series),
    )?;
    let order = (sweep.window.len() - 1) / 2;
    Ok(Outcome {
        summary: summary(Command::Band, &[omegas.len() as f64, sweep.failures.len() as f64, order as f64]),
        warnings: sweep.warnings.clone(),
        condition: None,
        details: json!({ "kappa_unit": kappa_unit(&p), "failures": sweep.failures }),
    })
}

pub fn isofreq(spec: &RunSpec, sink: &mut Sink, exec: Exec) -> Result<Outcome, RunError> {
    let p = spec.profile()?;
    let w0 = spec.wave.omega_0;
    let i = &spec.isofreq;
    let kx = linspace(i.kx_min, i.kx_max, i.points);
    let iso = isofrequency(&p, w0, &kx, &spec.truncation(), exec).map_err(solver)?;
    let omegas = vec![w0; kx.len()];
    let (raw, ladder, series) = branch_tables(&p, &iso.sweep, &omegas, Some(&kx));
    sink.csv("isofreq.csv", &raw)?;
    sink.csv("isofreq_ladder.csv", &ladder)?;
    sink.json("isofreq.json", &iso)?;
    sink.text(
        "isofreq.svg",
        &plot::lines("Isofrequency contours", "k_x / kappa_s", "kappa_n / kappa_s", &series),
    )?;
    let sol = eigen_kappa(&p, w0, 0.0, &spec.truncation()).map_err(solver)?;
    let (f, b) = ladder_sets(&sol, 3);
    let unit = kappa_unit(&p);
    let order = (iso.sweep.window.len() - 1) / 2;
    let mut warnings = iso.sweep.warnings.clone();
    warnings.extend(sol.warnings.iter().cloned());
    Ok(Outcome {
        summary: summary(
            Command::Isofreq,
            &[
                kx.len() as f64,
                iso.sweep.failures.len() as f64,
                order as f64,
                min_pairwise_gap(&f) / unit,
                min_pairwise_gap(&b) / unit,
            ],
        ),
        warnings,
        condition: None,
        details: json!({ "kappa_unit": unit, "failures": iso.sweep.failures }),
    })
}

fn power_table(r: &ScatteringResult) -> Table {
    let mut t = Table::new(&POWER_HEADER);
    for (s, e) in r.lattice.entries.iter().enumerate() {
        t.push(vec![
            e.n.to_string(),
            num(e.omega_n),
            num(e.k_z_n),
            e.propagating.to_string(),
            num(r.p_refl[s] / r.p_inc),
            num(r.p_trans[s] / r.p_inc),
        ]);
    }
    t
}

pub fn scatter_cmd(spec: &RunSpec, sink: &mut Sink) -> Result<Outcome, RunError> {
    let (p, g, w) = (spec.profile()?, spec.geometry()?, spec.wave()?);
    let r = scatter(&p, &g, &w, &spec.truncation()).map_err(solver)?;
    let (pr, pt, a) = power_balance(&r);
    sink.json("scatter.json", &json!({ "config": spec, "result": r }))?;
    sink.csv("power.csv", &power_table(&r))?;
    let shown: Vec<usize> = (0..r.lattice.entries.len()).filter(|&s| r.lattice.entries[s].propagating).collect();
    let labels: Vec<String> = shown.iter().map(|&s| format!("n={}", r.lattice.entries[s].n)).collect();
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    sink.text(
        "scatter.svg",
        &plot::bars(
            "Harmonic power fractions",
            "P / P_inc",
            &label_refs,
            &[
                ("reflected", shown.iter().map(|&s| r.p_refl[s] / r.p_inc).collect()),
                ("transmitted", shown.iter().map(|&s| r.p_trans[s] / r.p_inc).collect()),
            ],
        ),
    )?;
    Ok(Outcome {
        summary: summary(Command::Scatter, &[pr / r.p_inc, pt / r.p_inc, a, r.order as f64, r.condition]),
        warnings: r.warnings.clone(),
        condition: Some(r.condition),
        details: json!({ "relative_residual": r.relative_residual }),
    })
}

pub fn nonrecip(spec: &RunSpec, sink: &mut Sink) -> Result<Outcome, RunError> {
    let (p, g) = (spec.profile()?, spec.geometry()?);
    spec.wave()?;
    let rep = nonreciprocity(&p, &g, spec.wave.omega_0, spec.wave.theta, &spec.truncation()).map_err(solver)?;
    sink.json("nonrecip.json", &json!({ "config": spec, "report": rep }))?;
    sink.csv("power_forward.csv", &power_table(&rep.forward))?;
    sink.csv("power_backward.csv", &power_table(&rep.backward))?;
    sink.text(
        "nonrecip.svg",
        &plot::bars(
            &format!("theta = {} vs {}", spec.wave.theta, 180.0 - spec.wave.theta),
            "fraction of incident power",
            &["A", "T", "R"],
            &[
                ("forward", vec![rep.a_forward, rep.t_forward, rep.r_forward]),
                ("backward", vec![rep.a_backward, rep.t_backward, rep.r_backward]),
            ],
        ),
    )?;
    let cond = rep.forward.condition.max(rep.backward.condition);
    let mut warnings = rep.forward.warnings.clone();
    warnings.extend(rep.backward.warnings.iter().filter(|w| !rep.forward.warnings.contains(w)).cloned());
    Ok(Outcome {
        summary: summary(
            Command::Nonrecip,
            &[
                rep.t_forward,
                rep.t_backward,
                rep.a_forward,
                rep.a_backward,
                rep.contrast,
                rep.order as f64,
                cond,
            ],
        ),
        warnings,
        condition: Some(cond),
        details: json!({ "condition_forward": rep.forward.condition, "condition_backward": rep.backward.condition }),
    })
}

pub fn fdtd(spec: &RunSpec, sink: &mut Sink, exec: Exec) -> Result<Outcome, RunError> {
    let (p, g, w) = (spec.profile()?, spec.geometry()?, spec.wave()?);
    let rec = simulate(&p, &g, &w, &spec.fdtd, exec).map_err(solver)?;
    let pinc = rec.incident_flux;
    let norm = pinc.unwrap_or(1.0);
    let (fr, ft) = (flux(&rec, Plane::Reflect), flux(&rec, Plane::Transmit));
    let hr = rec.harmonic_flux(Plane::Reflect);
    let ht = rec.harmonic_flux(Plane::Transmit);
    let amps = if rec.layout.periodic { Some(rec.harmonic_amplitudes(Plane::Transmit)) } else { None };
    let probe = if rec.analysed {
        spectrum(&rec.probe_series(), &rec.omegas, p.omega_s.max(f64::MIN_POSITIVE), spec.fdtd.analysis_periods).ok()
    } else {
        None
    };
    let mut t = Table::new(&FDTD_HEADER);
    for (j, n) in rec.harmonics.iter().enumerate() {
        t.push(vec![
            n.to_string(),
            num(rec.omegas[j]),
            num(rec.k_z[j]),
            num(-hr[j] / norm),
            num(ht[j] / norm),
            opt(amps.as_ref().map(|a| a[j].re)),
            opt(amps.as_ref().map(|a| a[j].im)),
            opt(probe.as_ref().map(|a| a[j].re)),
            opt(probe.as_ref().map(|a| a[j].im)),
        ]);
    }
    sink.csv("fdtd_harmonics.csv", &t)?;
    if spec.output.probe {
        let mut pt = Table::new(&PROBE_HEADER);
        let series = rec.probe_series();
        for (j, (e, h)) in rec.probe_e.iter().zip(&rec.probe_h).enumerate() {
            pt.push(vec![num(series.time(j)), num(e.re), num(e.im), num(h.re), num(h.im)]);
        }
        sink.csv("probe.csv", &pt)?;
    }
    let scale = rec
        .frames
        .iter()
        .flat_map(|f| f.values.iter())
        .fold(0.0f32, |m, v| if v.is_finite() { m.max(v.abs()) } else { m });
    if spec.output.frames {
        for (i, f) in rec.frames.iter().enumerate() {
            // rows run along z so the slab appears as a vertical band
            let mut img = vec![0.0f32; f.nx * f.nz];
            for x in 0..f.nx {
                for z in 0..f.nz {
                    img[(f.nz - 1 - z) * f.nx + x] = f.values[x * f.nz + z];
                }
            }
            sink.bytes(&format!("frames/frame_{i:04}.pgm"), &pgm(f.nx, f.nz, &img, scale))?;
        }
    }
    let (r, tt, a) = match pinc {
        Some(pi) => (-fr / pi, ft / pi, 1.0 - (ft - fr) / pi),
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    let details = json!({
        "layout": rec.layout,
        "incident_flux": pinc,
        "material_update": "D and B stepped, E = D/eps and H = B/mu at the exact half-step times",
        "pgm_mapping": {
            "rule": "signed-linear",
            "level": "floor(32767.5 * (1 + clamp(v / scale, -1, 1)) + 0.5)",
            "scale": scale,
            "zero_level": 32768,
            "orientation": "columns along x, rows along z (top row = largest z)",
            "frames": rec.frames.iter().map(|f| json!({"step": f.step, "time": f.time})).collect::<Vec<_>>(),
        },
    });
    sink.json("fdtd.json", &json!({ "config": spec, "record": details, "R": r, "T": tt, "A": a }))?;
    Ok(Outcome {
        summary: summary(Command::Fdtd, &[r, tt, a, fr, ft, rec.max_abs_e]),
        warnings: rec.warnings.clone(),
        condition: None,
        details,
    })
}

/// Dispatch one non-sweep command.
pub fn execute(spec: &RunSpec, sink: &mut Sink, exec: Exec) -> Result<Outcome, RunError> {
    match spec.command {
        Command::Band => band(spec, sink, exec),
        Command::Isofreq => isofreq(spec, sink, exec),
        Command::Scatter => scatter_cmd(spec, sink),
        Command::Nonrecip => nonrecip(spec, sink),
        Command::Fdtd => fdtd(spec, sink, exec),
        Command::Sweep => unreachable!("sweeps are dispatched by the runner"),
    }
}
