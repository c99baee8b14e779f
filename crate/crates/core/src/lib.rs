//! Simulation toolkit for space-time-modulated media.
//!
//! * [`medium`]: modulation profile, slab geometry, incident wave.
//! * [`dispersion`]: bulk Floquet band structure, isofrequency contours, group velocity.
//! * [`scattering`]: mode-matching solution of a modulated slab under oblique TE incidence.
//! * [`fdtd`]: independent 2-D Yee-grid time-domain solver with time-varying ε and μ.
//! * [`slab`]: closed-form static slab reflection/transmission.

pub mod dispersion;
pub mod fdtd;
pub mod floquet;
pub mod linalg;
pub mod medium;
pub mod par;
pub mod scattering;
pub mod slab;

pub use par::Exec;
