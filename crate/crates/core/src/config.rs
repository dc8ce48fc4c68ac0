//! Run configuration: a strict TOML (or JSON) document shared by every
//! subcommand.
//!
//! Every section is optional and defaults to the reference trap. Unknown keys
//! are rejected so that typos cannot silently fall back to defaults.
//!
//! ```toml
//! output_dir = "out"
//! seed = 0
//!
//! [drive]
//! i_trap_a = 0.25
//! xi = 2.2
//! frequency_hz = 150.0
//!
//! [bias]              # either targets ...
//! b0_t = 5.6e-3
//! b0_gradient_t_per_m = 0.066
//! # i_top_a = ...    # ... or both coil currents
//!
//! [sweep]
//! axis = "omega_drive"
//! grid = [100.0, 125.0, 150.0, 175.0, 200.0]
//! modes = ["x", "y", "z"]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{default_dt, equilibrium_gradient, SimConfig, TrapFields};
use crate::magnetostatics::{BiasParams, DriveParams, TrapGeometry, DEFAULT_XI};
use crate::secular::MagnetSpec;
use crate::sweep::SweepSection;

/// Bias field at the trap center used when no bias is configured (T).
pub const DEFAULT_B0: f64 = 5.6e-3;
/// Default trap-loop current amplitude (A).
pub const DEFAULT_I_TRAP: f64 = 0.25;
/// Default drive frequency Ω/(2π) (Hz).
pub const DEFAULT_DRIVE_HZ: f64 = 150.0;
/// Name of the provenance file written into every output directory.
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}: unsupported config format (expected .toml or .json)")]
    Format(PathBuf),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid(e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSection {
    pub i_trap_a: f64,
    pub xi: f64,
    /// Ω/(2π).
    pub frequency_hz: f64,
    pub phase_rad: f64,
}

impl Default for DriveSection {
    fn default() -> Self {
        Self {
            i_trap_a: DEFAULT_I_TRAP,
            xi: DEFAULT_XI,
            frequency_hz: DEFAULT_DRIVE_HZ,
            phase_rad: 0.0,
        }
    }
}

impl DriveSection {
    pub fn params(&self) -> DriveParams {
        DriveParams {
            i_trap: self.i_trap_a,
            xi: self.xi,
            omega_drive: 2.0 * std::f64::consts::PI * self.frequency_hz,
            phase: self.phase_rad,
        }
    }
}

/// Bias coils, given either as target field values at the center or as currents.
///
/// With nothing set the targets are `B₀ = 5.6 mT` and the gradient that
/// balances gravity for the configured magnet.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BiasSection {
    pub b0_t: Option<f64>,
    pub b0_gradient_t_per_m: Option<f64>,
    pub i_top_a: Option<f64>,
    pub i_bottom_a: Option<f64>,
}

impl BiasSection {
    fn uses_currents(&self) -> bool {
        self.i_top_a.is_some() || self.i_bottom_a.is_some()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let targets = self.b0_t.is_some() || self.b0_gradient_t_per_m.is_some();
        if self.uses_currents() && targets {
            return Err(invalid(
                "BiasSection: give either coil currents or field targets, not both",
            ));
        }
        if self.i_top_a.is_some() != self.i_bottom_a.is_some() {
            return Err(invalid(
                "BiasSection: i_top_a and i_bottom_a must be given together",
            ));
        }
        for (name, v) in [
            ("b0_t", self.b0_t),
            ("b0_gradient_t_per_m", self.b0_gradient_t_per_m),
            ("i_top_a", self.i_top_a),
            ("i_bottom_a", self.i_bottom_a),
        ] {
            if matches!(v, Some(x) if !x.is_finite()) {
                return Err(invalid(format!("BiasSection.{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Fills in default targets; currents are left untouched.
    pub fn resolved(&self, magnet: &MagnetSpec) -> Self {
        if self.uses_currents() {
            return *self;
        }
        Self {
            b0_t: Some(self.b0_t.unwrap_or(DEFAULT_B0)),
            b0_gradient_t_per_m: Some(
                self.b0_gradient_t_per_m
                    .unwrap_or_else(|| equilibrium_gradient(magnet)),
            ),
            ..*self
        }
    }

    pub fn params(
        &self,
        geom: &TrapGeometry,
        magnet: &MagnetSpec,
    ) -> Result<BiasParams, ConfigError> {
        let r = self.resolved(magnet);
        match (r.i_top_a, r.i_bottom_a) {
            (Some(i_top), Some(i_bottom)) => Ok(BiasParams { i_top, i_bottom }),
            _ => BiasParams::from_targets(
                geom,
                r.b0_t.unwrap_or(DEFAULT_B0),
                r.b0_gradient_t_per_m.unwrap_or_default(),
            )
            .map_err(invalid),
        }
    }
}

/// Gaussian read-out noise added to simulated traces before spectral analysis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSection {
    pub position_noise_m: f64,
    pub angle_noise_rad: f64,
}

impl DetectionSection {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.position_noise_m >= 0.0 && self.angle_noise_rad >= 0.0)
            || !(self.position_noise_m.is_finite() && self.angle_noise_rad.is_finite())
        {
            return Err(invalid(
                "DetectionSection noise levels must be finite and >= 0",
            ));
        }
        Ok(())
    }

    pub fn is_silent(&self) -> bool {
        self.position_noise_m == 0.0 && self.angle_noise_rad == 0.0
    }
}

/// Everything needed to run one operating point.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Setup {
    pub geometry: TrapGeometry,
    pub magnet: MagnetSpec,
    pub drive: DriveSection,
    pub bias: BiasSection,
    pub simulation: SimConfig,
    pub detection: DetectionSection,
    pub seed: u64,
}

impl Setup {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.geometry.validate().map_err(invalid)?;
        self.magnet.validate().map_err(invalid)?;
        let drive = self.drive.params();
        drive.validate().map_err(invalid)?;
        self.bias.validate()?;
        self.detection.validate()?;
        self.simulation.validate().map_err(invalid)?;
        if let Some(dt) = self.simulation.dt_s {
            let dt_max = default_dt(drive.omega_drive);
            if dt > dt_max * (1.0 + 1e-12) {
                return Err(invalid(format!(
                    "SimConfig.dt_s = {dt} exceeds a hundredth of the drive period ({dt_max})"
                )));
            }
        }
        Ok(())
    }

    /// Copy with default bias targets written out explicitly.
    pub fn resolved(&self) -> Self {
        Self {
            bias: self.bias.resolved(&self.magnet),
            ..self.clone()
        }
    }

    pub fn trap_fields(&self) -> Result<TrapFields, ConfigError> {
        Ok(TrapFields::new(
            self.geometry,
            self.drive.params(),
            self.bias.params(&self.geometry, &self.magnet)?,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub seed: u64,
    pub geometry: TrapGeometry,
    pub magnet: MagnetSpec,
    pub drive: DriveSection,
    pub bias: BiasSection,
    pub simulation: SimConfig,
    pub detection: DetectionSection,
    pub sweep: Option<SweepSection>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_setup(&Setup::default(), None, PathBuf::from("out"))
    }
}

impl RunConfig {
    pub fn from_setup(setup: &Setup, sweep: Option<SweepSection>, output_dir: PathBuf) -> Self {
        Self {
            output_dir,
            seed: setup.seed,
            geometry: setup.geometry,
            magnet: setup.magnet,
            drive: setup.drive,
            bias: setup.bias,
            simulation: setup.simulation,
            detection: setup.detection,
            sweep,
        }
    }

    pub fn setup(&self) -> Setup {
        Setup {
            geometry: self.geometry,
            magnet: self.magnet,
            drive: self.drive,
            bias: self.bias,
            simulation: self.simulation,
            detection: self.detection,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.setup().validate()?;
        if let Some(sweep) = &self.sweep {
            sweep.plan(self.setup()).validate().map_err(invalid)?;
        }
        Ok(())
    }

    /// Copy with every default that depends on other sections filled in.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.bias = self.bias.resolved(&self.magnet);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Writes `config.resolved.json` into `dir`.
    pub fn write_resolved(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(RESOLVED_CONFIG_FILE);
        std::fs::write(&path, self.resolved().to_json() + "\n")?;
        Ok(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigFormat {
    Toml,
    Json,
}

impl ConfigFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "toml" => Some(Self::Toml),
            "json" => Some(Self::Json),
            _ => None,
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config_str(
    text: &str,
    format: ConfigFormat,
    origin: &Path,
) -> Result<RunConfig, ConfigError> {
    let parse_err = |message: String| ConfigError::Parse {
        path: origin.to_path_buf(),
        message,
    };
    let cfg: RunConfig = match format {
        ConfigFormat::Toml => toml::from_str(text).map_err(|e| parse_err(e.to_string()))?,
        ConfigFormat::Json if text.trim().is_empty() => RunConfig::default(),
        ConfigFormat::Json => serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Reads, parses and validates the file at `path` (format by extension).
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let format =
        ConfigFormat::from_path(path).ok_or_else(|| ConfigError::Format(path.to_path_buf()))?;
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, format, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnetostatics::{HELMHOLTZ_TURNS, INNER_RADIUS, OUTER_RADIUS};

    fn toml(text: &str) -> Result<RunConfig, ConfigError> {
        parse_config_str(text, ConfigFormat::Toml, Path::new("test.toml"))
    }

    #[test]
    fn empty_document_is_the_reference_trap() {
        let cfg = toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.geometry.inner_loop.radius, INNER_RADIUS);
        assert_eq!(cfg.geometry.outer_loop.radius, OUTER_RADIUS);
        assert_eq!(cfg.geometry.top_coil.radius, 10e-3);
        assert_eq!(cfg.geometry.top_coil.turns, HELMHOLTZ_TURNS);
        assert_eq!(cfg.magnet, MagnetSpec::default());
        assert_eq!(cfg.drive.xi, 2.2);
        assert!(cfg.sweep.is_none());
    }

    #[test]
    fn negative_radius_names_the_invariant() {
        let err = toml("[geometry.inner_loop]\nradius_m = -1.0\naxial_offset_m = 0.0\nturns = 1\n")
            .unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
        assert!(err.to_string().contains("LoopGeometry.radius"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_context() {
        let err = toml("[geometry]\ncoil_radiusss = 1.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, ConfigError::Parse { .. }));
        assert!(
            msg.contains("coil_radiusss") && msg.contains("line"),
            "{msg}"
        );
        assert!(toml("frequency = 3\n").is_err());
    }

    #[test]
    fn bias_must_be_targets_or_currents() {
        assert!(toml("[bias]\ni_top_a = 1.0\n").is_err());
        assert!(toml("[bias]\ni_top_a = 1.0\ni_bottom_a = 0.5\nb0_t = 0.01\n").is_err());
        let cfg = toml("[bias]\ni_top_a = 1.0\ni_bottom_a = 0.5\n").unwrap();
        let p = cfg.bias.params(&cfg.geometry, &cfg.magnet).unwrap();
        assert_eq!((p.i_top, p.i_bottom), (1.0, 0.5));
    }

    #[test]
    fn resolved_bias_targets() {
        let cfg = RunConfig::default().resolved();
        assert_eq!(cfg.bias.b0_t, Some(DEFAULT_B0));
        let g = cfg.bias.b0_gradient_t_per_m.unwrap();
        assert!((g - 0.0656).abs() < 1e-3, "{g}");
    }

    #[test]
    fn timestep_above_drive_limit_is_rejected() {
        let err = toml("[drive]\nfrequency_hz = 150.0\n[simulation]\ndt_s = 1e-3\n").unwrap_err();
        assert!(err.to_string().contains("dt_s"));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut cfg = toml("seed = 7\n[drive]\nfrequency_hz = 137.123456789\n").unwrap();
        cfg.simulation.offset_force_n = [0.0, 1.0 / 3.0 * 1e-8, 0.0];
        let text = cfg.resolved().to_json();
        let back = parse_config_str(&text, ConfigFormat::Json, Path::new("x.json")).unwrap();
        assert_eq!(back, cfg.resolved());
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(
            ConfigFormat::from_path(Path::new("a.TOML")),
            Some(ConfigFormat::Toml)
        );
        assert_eq!(
            ConfigFormat::from_path(Path::new("a.json")),
            Some(ConfigFormat::Json)
        );
        assert!(parse_config(Path::new("a.yaml")).is_err());
    }
}
