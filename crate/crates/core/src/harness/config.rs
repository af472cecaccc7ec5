//! TOML run configuration with strict keys and full defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dg::{BoundarySpec, InitialCondition, SolverConfig};
use crate::error::GeometryError;
use crate::geometry::{Severity, VesselGeometry};
use crate::model::PhysicalParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config value `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Reference radius selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeometrySpec {
    /// Benchmark stenosis of the top-level severity.
    Stenosis {
        r_max: f64,
        r_min: f64,
    },
    Straight {
        length: f64,
        radius: f64,
    },
    /// Two-column CSV `z,r0`.
    Table {
        path: PathBuf,
    },
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec::Stenosis {
            r_max: 0.18,
            r_min: 0.1394,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write one CSV per record.
    pub records: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            records: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessConfig {
    pub n_r: usize,
    pub n_z: usize,
    pub collocation_points: usize,
    /// Axial velocity scale, cm/s; zero selects the inlet plateau velocity.
    pub u_z_scale: f64,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self {
            n_r: 33,
            n_z: 74,
            collocation_points: 64,
            u_z_scale: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub degrees: Vec<usize>,
    pub n_list: Vec<usize>,
    /// Final time of the pulse problem, s.
    pub t_end: f64,
    /// Relative pulse amplitude.
    pub amplitude: f64,
    /// Pulse width, cm.
    pub width: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            degrees: vec![1, 2],
            n_list: vec![100, 200, 400, 800],
            t_end: 1.5e-3,
            amplitude: 0.01,
            width: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub severity: Severity,
    pub geometry: GeometrySpec,
    pub physics: PhysicalParams,
    pub solver: SolverConfig,
    pub boundary: BoundarySpec,
    pub initial: InitialCondition,
    pub output: OutputConfig,
    pub postprocess: PostprocessConfig,
    pub convergence: ConvergenceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            severity: Severity::S50,
            geometry: GeometrySpec::default(),
            physics: PhysicalParams::default(),
            solver: SolverConfig::default(),
            boundary: BoundarySpec::default(),
            initial: InitialCondition::default(),
            output: OutputConfig::default(),
            postprocess: PostprocessConfig::default(),
            convergence: ConvergenceConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses and validates TOML text; relative table paths resolve against `base`.
    pub fn from_toml_str(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if let (Some(base), GeometrySpec::Table { path }) = (base, &mut cfg.geometry) {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every invariant that can be checked without running.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.physics.validate().map_err(|e| match e {
            crate::error::ModelError::InvalidParameter { name, reason } => invalid(format!("physics.{name}"), reason),
            other => invalid("physics", other.to_string()),
        })?;
        self.solver.validate().map_err(|e| match e {
            crate::error::SolverError::InvalidSetting { name, reason } => invalid(format!("solver.{name}"), reason),
            other => invalid("solver", other.to_string()),
        })?;
        if let GeometrySpec::Table { path } = &self.geometry {
            if !path.is_file() {
                return Err(invalid("geometry.path", format!("{} does not exist", path.display())));
            }
        }
        let pp = &self.postprocess;
        if pp.n_r < 2 || pp.n_z < 2 {
            return Err(invalid("postprocess", "grid needs at least 2 x 2 points"));
        }
        if pp.collocation_points < 16 {
            return Err(invalid("postprocess.collocation_points", "must be at least 16"));
        }
        if !(pp.u_z_scale >= 0.0) {
            return Err(invalid("postprocess.u_z_scale", "must be non-negative"));
        }
        let cv = &self.convergence;
        if cv.n_list.len() < 3 {
            return Err(invalid("convergence.n_list", "need at least 3 mesh sizes"));
        }
        if !(cv.t_end >= 0.0 && cv.width > 0.0 && cv.amplitude > -1.0) {
            return Err(invalid(
                "convergence",
                "t_end >= 0, width > 0 and amplitude > -1 required",
            ));
        }
        self.geometry().map_err(|e| invalid("geometry", e.to_string()))?;
        Ok(())
    }

    pub fn geometry(&self) -> Result<VesselGeometry, GeometryError> {
        match &self.geometry {
            GeometrySpec::Stenosis { r_max, r_min } => VesselGeometry::stenosis(self.severity, *r_max, *r_min),
            GeometrySpec::Straight { length, radius } => VesselGeometry::straight(*length, *radius),
            GeometrySpec::Table { path } => VesselGeometry::from_csv(path),
        }
    }

    /// TOML with every default written out.
    pub fn effective_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// SHA-256 of the effective configuration, hex.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.effective_toml().as_bytes()))
    }

    /// Plateau inlet velocity, used as the default axial velocity scale.
    pub fn inlet_velocity(&self) -> Option<f64> {
        match self.boundary.inlet {
            crate::dg::InletCondition::Velocity(w) => Some(w.velocity),
            crate::dg::InletCondition::NonReflecting => None,
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    RunConfig::from_toml_str(&text, path.parent())
}
