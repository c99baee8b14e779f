//! Time-domain solver on a Yee grid (TE: `E_y`, `H_x`, `H_z`).
//!
//! Complex fields are advanced so the real part is the physical solution and
//! harmonic projections come out single-sided. Plane-wave runs use one
//! modulation period in `z` with a Bloch phase and CPML in `x`; beam runs use
//! CPML on every side. The material is updated in `D`/`B` form every step.

pub mod config;
pub mod grid;
pub mod pml;
pub mod record;
pub mod spectrum;

pub use config::{plan, Layout, SimConfig, SourceConfig, SourceKind, MIN_ANALYSIS_PERIODS};
pub use grid::{build_sim, discrete_kx, EpsColumns, MuColumns, SimState};
pub use record::{flux, run, FieldRecord, Frame, LineSpectrum, Plane};
pub use spectrum::{spectrum, Series};

#[derive(Debug, thiserror::Error)]
pub enum FdtdError {
    #[error("invalid fdtd setting `{key}`: {msg}")]
    Config { key: &'static str, msg: String },
    #[error("non-finite field at step {step}, node ({i}, {k})")]
    NonFinite { step: usize, i: usize, k: usize },
    #[error("analysis window of {available:.2} modulation periods is shorter than the required {required}")]
    Window { available: f64, required: f64 },
}

use crate::medium::{IncidentWave, ModulationProfile, SlabGeometry};
use crate::par::Exec;

/// Build and run in one go.
pub fn simulate(
    profile: &ModulationProfile,
    geometry: &SlabGeometry,
    wave: &IncidentWave,
    config: &SimConfig,
    exec: Exec,
) -> Result<FieldRecord, FdtdError> {
    let mut state = build_sim(profile, geometry, wave, config, exec)?;
    run(&mut state)
}
