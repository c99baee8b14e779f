use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stm_core::dispersion::{band_structure, Truncation};
use stm_core::fdtd::{build_sim, SimConfig, SourceKind};
use stm_core::medium::{make_profile, IncidentWave, SlabGeometry};
use stm_core::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn band_sweep(c: &mut Criterion) {
    let p = make_profile(2.0, 2.0, 0.2, 0.2, 1.0, 2.605, 0.0).unwrap();
    let grid: Vec<f64> = (0..32).map(|i| 0.05 + 0.06 * i as f64).collect();
    let trunc = Truncation::fixed(12);
    let mut g = c.benchmark_group("band_sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| band_structure(&p, &grid, &trunc, exec).unwrap())
        });
    }
    g.finish();
}

fn fdtd_steps(c: &mut Criterion) {
    let p = make_profile(2.0, 2.0, 0.2, 0.2, 1.0, 2.605, 0.0).unwrap();
    let geom = SlabGeometry::in_vacuum(6.0 * std::f64::consts::PI).unwrap();
    let wave = IncidentWave::new(1.0, 125.0, 1.0).unwrap();
    let mut cfg = SimConfig {
        cells_per_wavelength: 20,
        ..SimConfig::default()
    };
    cfg.source.kind = SourceKind::PlaneWave;
    let mut g = c.benchmark_group("fdtd_100_steps");
    g.sample_size(10);
    for (name, exec) in MODES {
        let mut state = build_sim(&p, &geom, &wave, &cfg, exec).unwrap();
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                for _ in 0..100 {
                    state.advance();
                }
            })
        });
    }
    g.finish();
}

criterion_group!(benches, band_sweep, fdtd_steps);
criterion_main!(benches);
