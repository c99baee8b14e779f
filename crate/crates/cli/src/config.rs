//! Run configuration: one TOML file with a section per solver module.
//!
//! Every section has defaults, so an empty file is a valid `nonrecip` run on
//! the reference configuration. Unknown keys are rejected.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use stm_core::dispersion::Truncation;
use stm_core::fdtd::SimConfig;
use stm_core::medium::{IncidentWave, MediumError, ModulationProfile, SlabGeometry};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Band,
    Isofreq,
    Scatter,
    Fdtd,
    Nonrecip,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Band => "band",
            Command::Isofreq => "isofreq",
            Command::Scatter => "scatter",
            Command::Fdtd => "fdtd",
            Command::Nonrecip => "nonrecip",
            Command::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("`{key}`: {msg}")]
    Invalid { key: String, msg: String },
}

fn invalid(key: impl Into<String>, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    pub eps_avg: f64,
    pub mu_avg: f64,
    pub delta_e: f64,
    pub delta_m: f64,
    pub omega_s: f64,
    pub kappa_s: f64,
    pub phi: f64,
}

impl Default for ProfileSection {
    fn default() -> Self {
        Self {
            eps_avg: 2.0,
            mu_avg: 2.0,
            delta_e: 0.2,
            delta_m: 0.2,
            omega_s: 1.0,
            kappa_s: 2.605,
            phi: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub thickness: f64,
    pub exterior_eps: f64,
    pub exterior_mu: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            thickness: 6.0 * std::f64::consts::PI,
            exterior_eps: 1.0,
            exterior_mu: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveSection {
    pub omega_0: f64,
    /// Degrees from `+z`.
    pub theta: f64,
    pub amplitude: f64,
}

impl Default for WaveSection {
    fn default() -> Self {
        Self {
            omega_0: 1.0,
            theta: 55.0,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub order: usize,
    pub auto: bool,
    pub cap: usize,
    pub tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let t = Truncation::default();
        Self {
            order: t.order,
            auto: t.auto,
            cap: t.cap,
            tol: t.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandSection {
    /// Frequency range in units of `ω_s`.
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    pub group_velocity: bool,
}

impl Default for BandSection {
    fn default() -> Self {
        Self {
            omega_min: 0.05,
            omega_max: 2.0,
            points: 40,
            group_velocity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsofreqSection {
    pub kx_min: f64,
    pub kx_max: f64,
    pub points: usize,
}

impl Default for IsofreqSection {
    fn default() -> Self {
        Self {
            kx_min: -0.8,
            kx_max: 0.8,
            points: 17,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Command run for every sweep point.
    pub command: Command,
    /// Dotted key of a numeric setting, e.g. `wave.theta`.
    pub parameter: String,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            command: Command::Scatter,
            parameter: "wave.theta".into(),
            start: 5.0,
            stop: 175.0,
            steps: 35,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    /// Write FDTD field snapshots as PGM.
    pub frames: bool,
    /// Write the per-step FDTD probe series.
    pub probe: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            frames: true,
            probe: true,
        }
    }
}

/// Fully resolved run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default = "default_command")]
    pub command: Command,
    #[serde(default)]
    pub profile: ProfileSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub wave: WaveSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub band: BandSection,
    #[serde(default)]
    pub isofreq: IsofreqSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub fdtd: SimConfig,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_command() -> Command {
    Command::Nonrecip
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            command: default_command(),
            profile: Default::default(),
            geometry: Default::default(),
            wave: Default::default(),
            solver: Default::default(),
            band: Default::default(),
            isofreq: Default::default(),
            sweep: Default::default(),
            fdtd: Default::default(),
            output: Default::default(),
        }
    }
}

fn medium(section: &str, e: MediumError) -> ConfigError {
    match e {
        MediumError::OutOfRange { field, value, rule } => {
            invalid(format!("{section}.{field}"), format!("{value} is out of range: {rule}"))
        }
    }
}

impl RunSpec {
    pub fn profile(&self) -> Result<ModulationProfile, ConfigError> {
        let p = &self.profile;
        ModulationProfile::new(p.eps_avg, p.mu_avg, p.delta_e, p.delta_m, p.omega_s, p.kappa_s, p.phi)
            .map_err(|e| medium("profile", e))
    }

    pub fn geometry(&self) -> Result<SlabGeometry, ConfigError> {
        let g = &self.geometry;
        SlabGeometry::new(g.thickness, g.exterior_eps, g.exterior_mu).map_err(|e| medium("geometry", e))
    }

    pub fn wave(&self) -> Result<IncidentWave, ConfigError> {
        let w = &self.wave;
        IncidentWave::new(w.omega_0, w.theta, w.amplitude).map_err(|e| medium("wave", e))
    }

    pub fn truncation(&self) -> Truncation {
        let s = &self.solver;
        Truncation {
            order: s.order,
            auto: s.auto,
            cap: s.cap,
            tol: s.tol,
        }
    }

    /// Range checks that need more than one field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.profile()?;
        self.geometry()?;
        self.wave()?;
        let s = &self.solver;
        if s.order < 1 {
            return Err(invalid("solver.order", "must be >= 1"));
        }
        if s.cap < s.order {
            return Err(invalid("solver.cap", format!("{} < solver.order = {}", s.cap, s.order)));
        }
        if !(s.tol > 0.0 && s.tol.is_finite()) {
            return Err(invalid("solver.tol", "must be > 0"));
        }
        let b = &self.band;
        if !(b.omega_min > 0.0 && b.omega_max > b.omega_min && b.omega_max.is_finite()) {
            return Err(invalid("band.omega_max", "need 0 < band.omega_min < band.omega_max"));
        }
        if b.points < 2 {
            return Err(invalid("band.points", "must be >= 2"));
        }
        let i = &self.isofreq;
        if !(i.kx_max > i.kx_min && i.kx_min.is_finite() && i.kx_max.is_finite()) {
            return Err(invalid("isofreq.kx_max", "need isofreq.kx_min < isofreq.kx_max"));
        }
        if i.points < 2 {
            return Err(invalid("isofreq.points", "must be >= 2"));
        }
        self.fdtd.validate().map_err(|e| match e {
            stm_core::fdtd::FdtdError::Config { key, msg } => invalid(format!("fdtd.{key}"), msg),
            other => invalid("fdtd", other.to_string()),
        })?;
        if self.command == Command::Sweep {
            let w = &self.sweep;
            if w.command == Command::Sweep {
                return Err(invalid("sweep.command", "a sweep cannot run sweeps"));
            }
            if w.steps < 1 {
                return Err(invalid("sweep.steps", "must be >= 1"));
            }
            if !(w.start.is_finite() && w.stop.is_finite()) {
                return Err(invalid("sweep.start", "range must be finite"));
            }
            self.sweep_values()
                .iter()
                .try_for_each(|&v| self.with_parameter(&w.parameter, v).map(|_| ()))?;
        }
        Ok(())
    }

    /// Inclusive, evenly spaced sweep values.
    pub fn sweep_values(&self) -> Vec<f64> {
        let w = &self.sweep;
        if w.steps == 1 {
            return vec![w.start];
        }
        (0..w.steps)
            .map(|i| w.start + (w.stop - w.start) * i as f64 / (w.steps - 1) as f64)
            .collect()
    }

    /// Copy with the numeric setting at dotted `key` replaced by `value`.
    pub fn with_parameter(&self, key: &str, value: f64) -> Result<RunSpec, ConfigError> {
        let mut root = toml::Value::try_from(self).map_err(|e| invalid(key, e.to_string()))?;
        let mut slot = &mut root;
        for part in key.split('.') {
            slot = slot
                .get_mut(part)
                .ok_or_else(|| invalid(key, "no such setting"))?;
        }
        *slot = match slot {
            toml::Value::Float(_) => toml::Value::Float(value),
            toml::Value::Integer(_) => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(invalid(key, format!("{value} is not a non-negative integer")));
                }
                toml::Value::Integer(value as i64)
            }
            _ => return Err(invalid(key, "is not a numeric setting")),
        };
        let spec: RunSpec = root.try_into().map_err(|e: toml::de::Error| invalid(key, e.message().to_string()))?;
        spec.profile()?;
        spec.geometry()?;
        spec.wave()?;
        Ok(spec)
    }

    /// Child specs of a sweep, one per value.
    pub fn children(&self) -> Result<Vec<(f64, RunSpec)>, ConfigError> {
        self.sweep_values()
            .into_iter()
            .map(|v| {
                let mut child = self.with_parameter(&self.sweep.parameter, v)?;
                child.command = self.sweep.command;
                Ok((v, child))
            })
            .collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run spec is always representable as TOML")
    }
}

/// Parse a TOML configuration, or the `config` echo of a JSON manifest.
pub fn parse_str(text: &str, path: &str, json: bool) -> Result<RunSpec, ConfigError> {
    let spec: RunSpec = if json {
        let manifest: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse { path: path.into(), msg: e.to_string() })?;
        let config = manifest.get("config").cloned().ok_or_else(|| ConfigError::Parse {
            path: path.into(),
            msg: "manifest has no `config` entry".into(),
        })?;
        serde_path_to_error::deserialize(config).map_err(|e| key_error(path, e.path().to_string(), e.inner().to_string()))?
    } else {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Parse { path: path.into(), msg: e.to_string() })?;
        serde_path_to_error::deserialize(de).map_err(|e| key_error(path, e.path().to_string(), e.inner().to_string()))?
    };
    spec.validate()?;
    Ok(spec)
}

fn key_error(path: &str, key: String, msg: String) -> ConfigError {
    if key.is_empty() || key == "." {
        ConfigError::Parse { path: path.into(), msg }
    } else {
        ConfigError::Invalid { key, msg }
    }
}

/// Read and validate a configuration file (`.json` files are read as manifests).
pub fn parse_config(path: &Path) -> Result<RunSpec, ConfigError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: shown.clone(), source })?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    parse_str(&text, &shown, json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_fills_defaults() {
        let s = parse_str("command = \"band\"\n[profile]\ndelta_e = 0.3\n", "t.toml", false).unwrap();
        assert_eq!(s.command, Command::Band);
        assert_eq!(s.profile.delta_e, 0.3);
        assert_eq!(s.profile.delta_m, 0.2);
        assert_eq!(s.solver.cap, 40);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_str("[profile]\ndeltae = 0.2\n", "t.toml", false).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("deltae"), "{msg}");
    }

    #[test]
    fn range_violation_names_key_path() {
        let e = parse_str("[wave]\ntheta = 190.0\n", "t.toml", false).unwrap_err();
        assert!(e.to_string().contains("wave.theta"), "{e}");
        let e = parse_str("[fdtd]\ncells_per_wavelength = 10\n", "t.toml", false).unwrap_err();
        assert!(e.to_string().contains("fdtd.cells_per_wavelength"), "{e}");
    }

    #[test]
    fn sweep_children() {
        let s = parse_str(
            "command = \"sweep\"\n[sweep]\ncommand = \"scatter\"\nparameter = \"wave.theta\"\nstart = 5.0\nstop = 175.0\nsteps = 35\n",
            "t.toml",
            false,
        )
        .unwrap();
        let c = s.children().unwrap();
        assert_eq!(c.len(), 35);
        assert_eq!(c[0].0, 5.0);
        assert_eq!(c[34].1.wave.theta, 175.0);
        assert!((c[1].1.wave.theta - 10.0).abs() < 1e-12);
        assert!(c.iter().all(|(_, r)| r.command == Command::Scatter));
    }

    #[test]
    fn sweep_rejects_bad_parameter() {
        let bad = "command = \"sweep\"\n[sweep]\nparameter = \"wave.nothing\"\n";
        assert!(parse_str(bad, "t.toml", false).unwrap_err().to_string().contains("wave.nothing"));
        let int = "command = \"sweep\"\n[sweep]\nparameter = \"solver.order\"\nstart = 4.0\nstop = 5.0\nsteps = 3\n";
        assert!(parse_str(int, "t.toml", false).is_err());
    }

    #[test]
    fn toml_round_trip_is_exact() {
        let mut s = RunSpec::default();
        s.wave.theta = 0.1 + 0.2;
        let back = parse_str(&s.to_toml(), "t.toml", false).unwrap();
        assert_eq!(back, s);
    }
}
