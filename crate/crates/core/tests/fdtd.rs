use num_complex::Complex64 as C;
use stm_core::fdtd::spectrum::{db, Series};
use stm_core::fdtd::*;
use stm_core::medium::{IncidentWave, ModulationProfile, SlabGeometry};
use stm_core::slab::static_slab;
use stm_core::Exec;

const TAU: f64 = 2.0 * std::f64::consts::PI;

fn vacuum() -> (ModulationProfile, SlabGeometry, IncidentWave) {
    (
        ModulationProfile::stat(1.0, 1.0).unwrap(),
        SlabGeometry::in_vacuum(1.0 * TAU).unwrap(),
        IncidentWave::new(1.0, 90.0, 1.0).unwrap(),
    )
}

#[test]
fn twenty_wavelength_domain_is_800_cells() {
    let (p, g, w) = vacuum();
    let cfg = SimConfig {
        domain: [20.0, 20.0],
        source: SourceConfig {
            kind: SourceKind::GaussianBeam,
            ..Default::default()
        },
        ..Default::default()
    };
    let lay = plan(&p, &g, &w, &cfg).unwrap();
    assert_eq!(lay.primary_cells(), (800, 800));
    assert!((lay.dx - TAU / 40.0).abs() < 1e-12);
}

#[test]
fn courant_above_one_is_rejected() {
    let (p, g, w) = vacuum();
    let cfg = SimConfig {
        courant: 1.1,
        ..Default::default()
    };
    match build_sim(&p, &g, &w, &cfg, Exec::Sequential) {
        Err(FdtdError::Config { key, .. }) => assert_eq!(key, "courant"),
        other => panic!("expected a config error, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn coarse_grid_is_rejected() {
    let (p, g, w) = vacuum();
    let cfg = SimConfig {
        cells_per_wavelength: 12,
        ..Default::default()
    };
    assert!(matches!(plan(&p, &g, &w, &cfg), Err(FdtdError::Config { key: "cells_per_wavelength", .. })));
}

#[test]
fn resolution_follows_highest_harmonic() {
    let p = ModulationProfile::new(2.0, 2.0, 0.1, 0.1, 0.5, 1.0, 0.0).unwrap();
    let g = SlabGeometry::in_vacuum(2.0).unwrap();
    let w = IncidentWave::new(1.0, 60.0, 1.0).unwrap();
    let cfg = SimConfig {
        harmonics: 3,
        ..Default::default()
    };
    let lay = plan(&p, &g, &w, &cfg).unwrap();
    // ω_3 = 2.5 in the densest material n = 2.2
    let lmin = TAU / (2.5 * 2.2);
    assert!((lay.wavelength_min - lmin).abs() < 1e-12);
    assert!(lay.dx <= lmin / 40.0 + 1e-12);
    assert!(lay.dz <= lmin / 40.0 + 1e-12);
}

#[test]
fn unmodulated_material_is_constant_in_time() {
    let p = ModulationProfile::stat(3.0, 1.5).unwrap();
    let g = SlabGeometry::in_vacuum(2.0).unwrap();
    let w = IncidentWave::new(1.0, 60.0, 1.0).unwrap();
    let s = build_sim(&p, &g, &w, &SimConfig::default(), Exec::Sequential).unwrap();
    assert_eq!(s.material(0.0), s.material(17.3 * s.layout.dt));
    let m = ModulationProfile::new(3.0, 1.5, 0.1, 0.0, 1.0, 0.5, 0.0).unwrap();
    let s = build_sim(&m, &g, &w, &SimConfig::default(), Exec::Sequential).unwrap();
    assert_ne!(s.material(0.0).0, s.material(1.0).0);
    assert_eq!(s.material(0.0).1, s.material(1.0).1);
}

/// Radius of the leading (positive) lobe of the ring along `+x`, from a parabolic fit.
fn ring_radius(s: &SimState, i0: usize, k0: usize) -> f64 {
    let row: Vec<f64> = (i0..s.layout.nx - s.layout.pml_x).map(|i| s.e_field(i, k0).re).collect();
    let j = (3..row.len() - 1)
        .max_by(|&a, &b| row[a].total_cmp(&row[b]))
        .unwrap();
    let (a, b, c) = (row[j - 1], row[j], row[j + 1]);
    let shift = 0.5 * (a - c) / (a - 2.0 * b + c);
    (j as f64 + shift) * s.layout.dx
}

#[test]
fn vacuum_pulse_expands_at_light_speed() {
    let (p, g, w) = vacuum();
    let cfg = SimConfig {
        cells_per_wavelength: 20,
        domain: [20.0, 20.0],
        courant: 1.0,
        source: SourceConfig {
            kind: SourceKind::None,
            total_cycles: 0.0,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut s = build_sim(&p, &g, &w, &cfg, Exec::Sequential).unwrap();
    let (i0, k0) = (s.layout.nx / 2, s.layout.nz / 2);
    let sigma = 3.0;
    for di in -12i64..=12 {
        for dk in -12i64..=12 {
            let r2 = (di * di + dk * dk) as f64;
            let (i, k) = ((i0 as i64 + di) as usize, (k0 as i64 + dk) as usize);
            s.set_e_field(i, k, C::new((-r2 / (2.0 * sigma * sigma)).exp(), 0.0));
        }
    }
    for _ in 0..100 {
        s.advance();
    }
    let r1 = ring_radius(&s, i0, k0);
    for _ in 0..100 {
        s.advance();
    }
    let r2 = ring_radius(&s, i0, k0);
    let speed = (r2 - r1) / (100.0 * s.layout.dt);
    assert!((speed - 1.0).abs() < 0.01, "front speed {speed}");
    assert!((r1 / s.time() * 2.0 - 1.0).abs() < 0.05, "radius {r1}");
}

#[test]
fn non_finite_field_aborts() {
    let p = ModulationProfile::stat(2.0, 1.0).unwrap();
    let g = SlabGeometry::in_vacuum(1.0).unwrap();
    let w = IncidentWave::new(1.0, 60.0, 1.0).unwrap();
    let cfg = SimConfig {
        cells_per_wavelength: 20,
        source: SourceConfig {
            total_cycles: 30.0,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut s = build_sim(&p, &g, &w, &cfg, Exec::Sequential).unwrap();
    let (i, k) = (s.layout.slab_i.0 + 2, 1);
    s.set_e_field(i, k, C::new(f64::NAN, 0.0));
    match run(&mut s) {
        Err(FdtdError::NonFinite { step, .. }) => assert!(step <= 64),
        other => panic!("expected abort, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn spectrum_recovers_synthetic_tones() {
    let dt = 0.01;
    let tones = [(1.0, 0.7, 0.3), (1.5, 0.2, -1.1), (2.0, 0.05, 2.0)];
    let values = (0..20_000).map(|j| {
        let t = j as f64 * dt;
        tones.iter().map(|&(w, a, ph)| a * (w * t + ph).cos()).sum::<f64>()
    });
    let s = Series::real(0.0, dt, values);
    let freqs: Vec<f64> = tones.iter().map(|t| t.0).collect();
    let amps = spectrum(&s, &freqs, 0.5, 12.0).unwrap();
    for (a, &(_, amp, ph)) in amps.iter().zip(&tones) {
        assert!((a.norm() - amp).abs() < 1e-4, "{a} vs {amp}");
        // cos(ωt + φ) is the real part of e^{-i(ωt + φ)}
        assert!((a.arg() + ph).abs() < 1e-3);
    }
    let off = spectrum(&s, &[1.25], 0.5, 12.0).unwrap()[0];
    assert!(db(off, amps[0]) < -60.0);
    assert!(matches!(spectrum(&s, &freqs, 0.5, 6.0), Err(FdtdError::Window { .. })));
    assert!(matches!(spectrum(&s, &freqs, 0.5, 1000.0), Err(FdtdError::Window { .. })));
}

#[test]
fn analytic_series_needs_no_factor_two() {
    let dt = 0.02;
    let s = Series {
        t0: 0.0,
        dt,
        values: (0..10_000).map(|j| C::from_polar(0.8, -1.3 * j as f64 * dt)).collect(),
        analytic: true,
    };
    let a = spectrum(&s, &[1.3, -1.3], 1.0, 16.0).unwrap();
    assert!((a[0].norm() - 0.8).abs() < 1e-6);
    assert!(a[1].norm() < 1e-4);
}

fn slab_run(theta: f64, eps: f64, d: f64) -> (FieldRecord, f64, f64) {
    let p = ModulationProfile::stat(eps, 1.0).unwrap();
    let g = SlabGeometry::in_vacuum(d).unwrap();
    let w = IncidentWave::new(1.0, theta, 1.0).unwrap();
    let cfg = SimConfig {
        source: SourceConfig {
            total_cycles: 40.0,
            ..Default::default()
        },
        ..Default::default()
    };
    let rec = simulate(&p, &g, &w, &cfg, Exec::Parallel).unwrap();
    let airy = static_slab(1.0, theta, eps, 1.0, d, 1.0, 1.0);
    (rec, airy.reflectance(), airy.transmittance())
}

#[test]
fn dielectric_slab_matches_closed_form() {
    for &(theta, eps, d) in &[(60.0, 4.0, 1.3), (125.0, 2.5, 2.0)] {
        let (rec, r, t) = slab_run(theta, eps, d);
        let pinc = rec.incident_flux.unwrap();
        let tf = rec.harmonic_flux(Plane::Transmit)[0] / pinc;
        let rf = -rec.harmonic_flux(Plane::Reflect)[0] / pinc;
        assert!((tf - t).abs() < 0.02 * t, "theta {theta}: T {tf} vs {t}");
        assert!((rf - r).abs() < 0.02 * r.max(0.05), "theta {theta}: R {rf} vs {r}");
        // all-frequency flux agrees with the single-tone projection
        let total = (flux(&rec, Plane::Transmit) - flux(&rec, Plane::Reflect)) / pinc;
        assert!((total - 1.0).abs() < 0.01, "flux balance {total}");
    }
}

#[test]
fn modulated_spectrum_is_harmonic() {
    let p = ModulationProfile::new(2.0, 2.0, 0.15, 0.15, 0.37, 0.9, 0.0).unwrap();
    let g = SlabGeometry::in_vacuum(1.5).unwrap();
    let w = IncidentWave::new(1.0, 70.0, 1.0).unwrap();
    let cfg = SimConfig {
        cells_per_wavelength: 24,
        harmonics: 2,
        analysis_periods: 10.0,
        source: SourceConfig {
            total_cycles: 60.0,
            ramp_cycles: 15.0,
            ..Default::default()
        },
        ..Default::default()
    };
    let rec = simulate(&p, &g, &w, &cfg, Exec::Parallel).unwrap();
    let series = rec.probe_series();
    let on: Vec<f64> = (-2..=2).map(|n| 1.0 + n as f64 * 0.37).collect();
    let off: Vec<f64> = (-3..=2).map(|n| 1.0 + (n as f64 + 0.5) * 0.37).collect();
    let peaks = spectrum(&series, &on, 0.37, 10.0).unwrap();
    let spurious = spectrum(&series, &off, 0.37, 10.0).unwrap();
    let main = peaks[2];
    assert!(peaks.iter().all(|a| a.norm() <= main.norm()));
    assert!(peaks[1].norm() > 1e-3 * main.norm(), "sidebands present");
    for (f, a) in off.iter().zip(&spurious) {
        assert!(db(*a, main) < -40.0, "bin {f}: {:.1} dB", db(*a, main));
    }
}
