//! System parameter file.
//!
//! A TOML document with a schema version and one table per system:
//!
//! ```toml
//! version = 1
//!
//! [systems.pendulum]
//! dt = 0.05                      # s
//! noise_variance = 0.05          # state units²
//! control_bounds = [[-1.5, 1.5]] # actuator units, per control dimension
//! region_of_interest = [[-3.14159, 3.14159], [-8.0, 8.0]]
//! initial_state = [0.0, 0.0]
//! steps = 150                    # default budget N
//! horizon = 15                   # default planning horizon M
//!
//! [systems.pendulum.physics]
//! model = "pendulum"             # pendulum | two_link | cart_pole
//! mass = 1.0                     # kg
//! length = 1.0                   # m
//! damping = 0.1                  # N·m·s/rad
//! gravity = 9.81                 # m/s²
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DynamicalSystem, Physics, SystemSpec};
use crate::bounds::BoxBounds;
use crate::error::{Error, Result};

/// The versioned in-repo parameter file.
pub const DEFAULT_SYSTEMS_TOML: &str = include_str!("../../config/systems.toml");

pub const SYSTEMS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemEntry {
    pub dt: f64,
    pub noise_variance: f64,
    pub control_bounds: BoxBounds,
    pub region_of_interest: BoxBounds,
    pub initial_state: Vec<f64>,
    pub steps: usize,
    pub horizon: usize,
    #[serde(default = "one")]
    pub substeps: usize,
    pub physics: Physics,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemsFile {
    pub version: u32,
    pub systems: BTreeMap<String, SystemEntry>,
}

impl SystemsFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: SystemsFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if file.version != SYSTEMS_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported systems file version {} (expected {SYSTEMS_SCHEMA_VERSION})",
                file.version
            )));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn default_file() -> Result<Self> {
        Self::parse(DEFAULT_SYSTEMS_TOML)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.systems.keys().map(String::as_str)
    }

    pub fn entry(&self, name: &str) -> Result<&SystemEntry> {
        self.systems.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown system `{name}`; known systems: {}",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    pub fn build(&self, name: &str) -> Result<DynamicalSystem> {
        let e = self.entry(name)?;
        let (state_dim, control_dim) = e.physics.dims();
        let spec = SystemSpec {
            name: name.to_string(),
            state_dim,
            control_dim,
            control_bounds: e.control_bounds.clone(),
            dt: e.dt,
            noise_variance: e.noise_variance,
            region_of_interest: e.region_of_interest.clone(),
            initial_state: e.initial_state.clone(),
        };
        Ok(DynamicalSystem::new(spec, e.physics.clone())?.with_substeps(e.substeps))
    }

    pub fn build_all(&self) -> Result<Vec<DynamicalSystem>> {
        self.names().map(|n| self.build(n)).collect()
    }
}
