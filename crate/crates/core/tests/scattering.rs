use num_complex::Complex64 as C;
use proptest::prelude::*;
use stm_core::dispersion::Truncation;
use stm_core::floquet::HarmonicWindow;
use stm_core::medium::{make_profile, IncidentWave, ModulationProfile, SlabGeometry};
use stm_core::scattering::*;

/// Characteristic-matrix (Abeles) TE reflectance/transmittance of a single layer in vacuum.
fn abeles(omega: f64, theta: f64, eps: f64, mu: f64, d: f64) -> (f64, f64) {
    let kz = omega * theta.to_radians().cos();
    let kx0 = omega * theta.to_radians().sin();
    let q = C::new(omega * omega * eps * mu - kz * kz, 0.0).sqrt();
    // tangential admittances k_x / (ω μ)
    let y0 = kx0 / omega;
    let y1 = q / (omega * mu);
    let delta = q * d;
    let (c, s) = (delta.cos(), delta.sin());
    let i = C::i();
    let (m11, m12, m21, m22) = (c, -i * s / y1, -i * y1 * s, c);
    let den = y0 * m11 + y0 * y0 * m12 + m21 + y0 * m22;
    let r = (y0 * m11 + y0 * y0 * m12 - m21 - y0 * m22) / den;
    let t = 2.0 * y0 / den;
    (r.norm_sqr(), t.norm_sqr())
}

fn wave(theta: f64) -> IncidentWave {
    IncidentWave::new(1.0, theta, 1.0).unwrap()
}

#[test]
fn static_slab_matches_characteristic_matrix() {
    let mut seed = 0x9e3779b97f4a7c15u64;
    let mut rnd = || {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (seed >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..100 {
        let (eps, mu) = (1.0 + 5.0 * rnd(), 0.5 + 2.0 * rnd());
        let d = 0.1 + 4.0 * rnd();
        let w = 0.3 + 1.5 * rnd();
        let th = 5.0 + 170.0 * rnd();
        if (th - 90.0).abs() < 1.0 {
            continue;
        }
        let p = ModulationProfile::stat(eps, mu).unwrap();
        let g = SlabGeometry::in_vacuum(d).unwrap();
        let r = scatter_window(&p, &g, &IncidentWave::new(w, th, 1.0).unwrap(), HarmonicWindow::symmetric(1)).unwrap();
        let (rr, tt) = abeles(w, th, eps, mu, d);
        assert!((r.reflected_fraction() - rr).abs() < 1e-8, "R eps {eps} d {d} th {th}");
        assert!((r.transmitted_fraction() - tt).abs() < 1e-8, "T eps {eps} d {d} th {th}");
    }
}

#[test]
fn static_quarter_wave_example() {
    // normal-equivalent incidence on a half-wave layer is fully transparent
    let g = SlabGeometry::in_vacuum(std::f64::consts::PI / 2.0).unwrap();
    let p = ModulationProfile::stat(4.0, 1.0).unwrap();
    let r = scatter_window(&p, &g, &IncidentWave::new(1.0, 90.0, 1.0).unwrap(), HarmonicWindow::symmetric(1)).unwrap();
    assert!(r.reflected_fraction() < 1e-20);
    assert!((r.transmitted_fraction() - 1.0).abs() < 1e-12);
}

#[test]
fn phase_matching_is_exact() {
    let p = make_profile(2.0, 2.0, 0.2, 0.2, 1.0, 2.605, 0.0).unwrap();
    let g = SlabGeometry::in_vacuum(6.0 * std::f64::consts::PI).unwrap();
    let w = wave(55.0);
    let l = harmonic_lattice(&w, &p, &g, 6);
    let kz0 = w.k_z(1.0);
    for e in &l.entries {
        assert_eq!(e.omega_n, 1.0 + e.n as f64 * 1.0);
        assert_eq!(e.k_z_n, kz0 + e.n as f64 * 2.605);
    }
    let r = scatter_window(&p, &g, &w, HarmonicWindow::symmetric(6)).unwrap();
    assert_eq!(r.lattice, l);
}

#[test]
fn static_harmonic_carries_no_flux() {
    let p = make_profile(2.0, 2.0, 0.2, 0.2, 1.0, 2.605, 0.0).unwrap();
    let g = SlabGeometry::in_vacuum(6.0 * std::f64::consts::PI).unwrap();
    let r = scatter_window(&p, &g, &wave(125.0), HarmonicWindow::symmetric(12)).unwrap();
    let s = r.slot(-1).unwrap();
    assert!(r.lattice.entries[s].is_static);
    assert_eq!((r.p_refl[s], r.p_trans[s]), (0.0, 0.0));
}

#[test]
fn evanescent_side_bands_carry_no_flux() {
    // above-cutoff κ_s: every sideband is evanescent in vacuum
    let p = make_profile(2.0, 2.0, 0.1, 0.1, 0.3, 5.0, 0.0).unwrap();
    let g = SlabGeometry::in_vacuum(1.0).unwrap();
    let r = scatter_window(&p, &g, &IncidentWave::new(1.0, 60.0, 1.0).unwrap(), HarmonicWindow::symmetric(4)).unwrap();
    for (s, e) in r.lattice.entries.iter().enumerate() {
        if e.n != 0 {
            assert!(!e.propagating);
            assert_eq!(r.p_trans[s], 0.0);
            assert_eq!(r.p_refl[s], 0.0);
        }
    }
    let (pr, pt, a) = power_balance(&r);
    assert_eq!(pr + pt, r.p_refl[r.slot(0).unwrap()] + r.p_trans[r.slot(0).unwrap()]);
    assert!((a - (1.0 - (pr + pt) / r.p_inc)).abs() < 1e-15);
}

#[test]
fn time_only_modulation_is_mirror_symmetric() {
    let p = make_profile(2.0, 1.5, 0.2, 0.1, 0.4, 0.0, 0.7).unwrap();
    let g = SlabGeometry::in_vacuum(2.3).unwrap();
    for th in [30.0, 55.0, 80.0] {
        let rep = nonreciprocity(&p, &g, 1.0, th, &Truncation::fixed(8)).unwrap();
        assert!(rep.contrast.abs() < 1e-8, "theta {th}: {}", rep.contrast);
        for (a, b) in rep.forward.transmission.iter().zip(&rep.backward.transmission) {
            assert!((a.norm() - b.norm()).abs() < 1e-8);
        }
    }
}

#[test]
fn unmodulated_slab_has_no_contrast() {
    let p = make_profile(2.0, 2.0, 0.0, 0.0, 1.0, 2.605, 0.0).unwrap();
    let g = SlabGeometry::in_vacuum(3.0).unwrap();
    let rep = nonreciprocity(&p, &g, 1.0, 55.0, &Truncation::fixed(4)).unwrap();
    assert!(rep.contrast.abs() < 1e-10);
    assert!(rep.a_forward.abs() < 1e-10);
}

#[test]
fn manley_rowe_action_is_conserved() {
    // lossless parametric slab with every sideband propagating or evanescent: the
    // outgoing action balances the incident one
    let p = make_profile(2.0, 2.0, 0.15, 0.1, 0.2, 0.1, 0.0).unwrap();
    let g = SlabGeometry::in_vacuum(3.0).unwrap();
    let r = scatter_window(&p, &g, &IncidentWave::new(1.0, 40.0, 1.0).unwrap(), HarmonicWindow::symmetric(10)).unwrap();
    assert!((r.action_balance() - 1.0).abs() < 1e-8, "{}", r.action_balance());
}

#[test]
fn matched_modulation_does_not_reflect_at_normal_incidence() {
    for ks in [0.3, 0.45] {
        for delta in [0.1, 0.25] {
            let p = make_profile(2.0, 2.0, delta, delta, 1.0, ks, 0.0).unwrap();
            let g = SlabGeometry::in_vacuum(4.0).unwrap();
            let r = scatter(&p, &g, &IncidentWave::new(0.6, 90.0, 1.0).unwrap(), &Truncation::default()).unwrap();
            assert!(r.reflected_fraction() < 1e-3, "ks {ks} delta {delta}: {}", r.reflected_fraction());
        }
    }
}

#[test]
fn reference_configuration_example() {
    let p = make_profile(2.0, 2.0, 0.2, 0.2, 1.0, 2.605, 0.0).unwrap();
    let g = SlabGeometry::in_vacuum(6.0 * std::f64::consts::PI).unwrap();
    let rep = nonreciprocity(&p, &g, 1.0, 55.0, &Truncation::default()).unwrap();
    assert!(rep.t_forward < 0.1, "{}", rep.t_forward);
    assert!(rep.t_backward > 0.9, "{}", rep.t_backward);
    assert!(rep.forward.condition < MAX_CONDITION);
}

fn margin(p: &ModulationProfile) -> f64 {
    let (lo, hi) = p.local_velocity_range();
    let vm = p.modulation_velocity();
    (lo / vm).max(vm / hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn static_energy_is_conserved(eps in 1.0f64..6.0, mu in 0.5f64..3.0, d in 0.1f64..5.0, w in 0.2f64..2.0, th in 5.0f64..175.0) {
        prop_assume!((th - 90.0).abs() > 1.0);
        let p = ModulationProfile::stat(eps, mu).unwrap();
        let g = SlabGeometry::in_vacuum(d).unwrap();
        let r = scatter_window(&p, &g, &IncidentWave::new(w, th, 1.0).unwrap(), HarmonicWindow::symmetric(2)).unwrap();
        let (_, _, a) = power_balance(&r);
        prop_assert!(a.abs() < 1e-10, "A = {}", a);
    }

    #[test]
    fn mirror_reciprocity_without_travel(e in 1.0f64..4.0, m in 0.5f64..3.0, de in 0.0f64..0.3, dm in 0.0f64..0.3, ws in 0.15f64..0.9, d in 0.5f64..3.0, th in 10.0f64..80.0) {
        let p = make_profile(e, m, de, dm, ws, 0.0, 0.0).unwrap();
        let g = SlabGeometry::in_vacuum(d).unwrap();
        let win = HarmonicWindow::symmetric(6);
        let w = IncidentWave::new(1.0 + 0.013, th, 1.0).unwrap();
        let f = scatter_window(&p, &g, &w, win);
        let b = scatter_window(&p, &g, &w.mirrored(), win);
        if let (Ok(f), Ok(b)) = (f, b) {
            for (x, y) in f.transmission.iter().zip(&b.transmission) {
                prop_assert!((x.norm() - y.norm()).abs() < 1e-8 * (1.0 + x.norm()));
            }
        }
    }

    #[test]
    fn headline_amplitudes_converge(e in 1.0f64..4.0, m in 1.0f64..4.0, delta in 0.0f64..0.3, ks in 0.1f64..3.0, d in 0.5f64..3.0, th in 10.0f64..170.0, n in 12usize..16) {
        prop_assume!((th - 90.0).abs() > 5.0);
        let p = make_profile(e, m, delta, delta, 1.0, ks, 0.0).unwrap();
        prop_assume!(p.sonic_detuning() >= 0.1 && margin(&p) >= 1.3);
        let g = SlabGeometry::in_vacuum(d).unwrap();
        let w = IncidentWave::new(0.77, th, 1.0).unwrap();
        let a = scatter_window(&p, &g, &w, HarmonicWindow::symmetric(n));
        let b = scatter_window(&p, &g, &w, HarmonicWindow::symmetric(n + 4));
        if let (Ok(a), Ok(b)) = (a, b) {
            let (sa, sb) = (a.slot(0).unwrap(), b.slot(0).unwrap());
            prop_assert!((a.reflection[sa] - b.reflection[sb]).norm() < 1e-6);
            prop_assert!((a.transmission[sa] - b.transmission[sb]).norm() < 1e-6);
        }
    }
}
