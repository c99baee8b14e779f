use proptest::prelude::*;
use stm_core::medium::*;

const TAU: f64 = 2.0 * std::f64::consts::PI;

#[test]
fn profile_examples() {
    let vac = make_profile(1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0).unwrap();
    assert!(vac.is_static());
    assert!(matches!(
        make_profile(1.0, 1.0, 1.2, 0.0, 1.0, 1.0, 0.0),
        Err(MediumError::OutOfRange { field: "delta_e", .. })
    ));
    let dual = make_profile(2.0, 2.0, 0.2, 0.2, 1.0, 0.8, 0.0).unwrap();
    assert!(dual.is_impedance_matched());
    for bad in [
        make_profile(0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0),
        make_profile(1.0, -1.0, 0.0, 0.0, 1.0, 1.0, 0.0),
        make_profile(1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0),
        make_profile(1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0),
        make_profile(1.0, 1.0, 0.0, 0.0, 1.0, -0.1, 0.0),
        make_profile(1.0, 1.0, 0.0, 0.0, 1.0, 1.0, f64::NAN),
    ] {
        assert!(bad.is_err());
    }
}

#[test]
fn sample_examples() {
    let p = make_profile(2.0, 1.0, 0.5, 0.0, 1.3, 0.7, 0.0).unwrap();
    assert_eq!(sample_material(&p, 0.0, 0.0).0, 3.0);
    let (eps, mu) = sample_material(&p, 0.0, std::f64::consts::PI / (2.0 * 1.3));
    assert!((eps - 2.0).abs() < 1e-15);
    assert_eq!(mu, 1.0);
    let s = make_profile(2.5, 1.5, 0.0, 0.0, 1.0, 0.4, 0.3).unwrap();
    for (z, t) in [(0.0, 0.0), (1.7, -3.0), (100.0, 42.0)] {
        assert_eq!(sample_material(&s, z, t), (2.5, 1.5));
    }
}

#[test]
fn geometry_and_wave_validation() {
    assert!(SlabGeometry::new(0.0, 1.0, 1.0).is_err());
    assert!(SlabGeometry::new(1.0, 0.0, 1.0).is_err());
    assert!(IncidentWave::new(1.0, 0.0, 1.0).is_err());
    assert!(IncidentWave::new(1.0, 180.0, 1.0).is_err());
    assert!(IncidentWave::new(-1.0, 30.0, 1.0).is_err());
    let w = IncidentWave::new(1.0, 55.0, 1.0).unwrap();
    assert!((w.k_z(1.0) - 0.573_576_436_351_046).abs() < 1e-12);
    assert!((w.k_x(1.0) - 0.819_152_044_288_992).abs() < 1e-12);
    let m = w.mirrored();
    assert_eq!(m.theta, 125.0);
    assert!((m.k_z(1.0) + w.k_z(1.0)).abs() < 1e-15);
    assert!((m.k_x(1.0) - w.k_x(1.0)).abs() < 1e-15);
}

fn profiles() -> impl Strategy<Value = ModulationProfile> {
    (
        0.2f64..8.0,
        0.2f64..8.0,
        0.0f64..0.99,
        0.0f64..0.99,
        0.1f64..5.0,
        0.05f64..5.0,
        -TAU..TAU,
    )
        .prop_map(|(e, m, de, dm, ws, ks, phi)| make_profile(e, m, de, dm, ws, ks, phi).unwrap())
}

proptest! {
    #[test]
    fn periodic_in_space_and_time(p in profiles(), z in -50.0f64..50.0, t in -50.0f64..50.0, a in -3i32..4, b in -3i32..4) {
        let (e0, m0) = sample_material(&p, z, t);
        let z1 = z + a as f64 * TAU / p.kappa_s;
        let t1 = t + b as f64 * TAU / p.omega_s;
        let (e1, m1) = sample_material(&p, z1, t1);
        let scale = 1.0 + z.abs().max(z1.abs()) * p.kappa_s + t.abs().max(t1.abs()) * p.omega_s;
        prop_assert!((e1 - e0).abs() <= 1e-13 * scale * p.eps_avg);
        prop_assert!((m1 - m0).abs() <= 1e-13 * scale * p.mu_avg);
    }

    #[test]
    fn material_stays_positive(p in profiles(), z in -1e3f64..1e3, t in -1e3f64..1e3) {
        let (e, m) = sample_material(&p, z, t);
        prop_assert!(e > 0.0 && m > 0.0);
        prop_assert!(e <= p.eps_avg * (1.0 + p.delta_e) * (1.0 + 1e-15));
        prop_assert!(m >= p.mu_avg * (1.0 - p.delta_m) * (1.0 - 1e-15));
    }

    #[test]
    fn rigid_traveling_wave(p in profiles(), z in -20.0f64..20.0, t in -20.0f64..20.0, tau in -20.0f64..20.0) {
        let v = p.modulation_velocity();
        let (e0, m0) = sample_material(&p, z, t);
        let (e1, m1) = sample_material(&p, z + v * tau, t + tau);
        let scale = 1.0 + (z.abs() + v * tau.abs()) * p.kappa_s + (t.abs() + tau.abs()) * p.omega_s;
        prop_assert!((e1 - e0).abs() <= 1e-13 * scale * p.eps_avg);
        prop_assert!((m1 - m0).abs() <= 1e-13 * scale * p.mu_avg);
    }
}
