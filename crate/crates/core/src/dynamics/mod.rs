//! Simulated ground-truth plants `x_{k+1} = f(x_k, u_k)`, `y = x + ε`.
//!
//! Each system integrates an analytic continuous-time model with fixed-step
//! RK4 over one sampling period. Physical constants, bounds and the region
//! of interest come from the system parameter file (see [`config`]).

pub mod config;
mod physics;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::BoxBounds;
use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::trajopt::ControlSequence;

pub use config::{SystemEntry, SystemsFile, DEFAULT_SYSTEMS_TOML};
pub use physics::Physics;

/// Static description of a benchmark plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub name: String,
    pub state_dim: usize,
    pub control_dim: usize,
    pub control_bounds: BoxBounds,
    /// Sampling period in seconds.
    pub dt: f64,
    /// Observation noise variance σ_ε² per state dimension.
    pub noise_variance: f64,
    pub region_of_interest: BoxBounds,
    /// A stable equilibrium; every trial starts here.
    pub initial_state: Vec<f64>,
}

impl SystemSpec {
    pub fn input_dim(&self) -> usize {
        self.state_dim + self.control_dim
    }

    pub fn validate(&self) -> Result<()> {
        ensure_len("control bounds", self.control_dim, self.control_bounds.dim())?;
        ensure_len("region of interest", self.state_dim, self.region_of_interest.dim())?;
        ensure_len("initial state", self.state_dim, self.initial_state.len())?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be nonnegative, got {}",
                self.noise_variance
            )));
        }
        if !self.region_of_interest.contains(&self.initial_state) {
            return Err(Error::InvalidArgument(format!(
                "initial state of `{}` lies outside its region of interest",
                self.name
            )));
        }
        Ok(())
    }
}

/// A plant: its spec plus the equations of motion.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalSystem {
    spec: SystemSpec,
    physics: Physics,
    substeps: usize,
}

impl DynamicalSystem {
    pub fn new(spec: SystemSpec, physics: Physics) -> Result<Self> {
        spec.validate()?;
        let (dx, du) = physics.dims();
        ensure_len("state dimension for physics model", dx, spec.state_dim)?;
        ensure_len("control dimension for physics model", du, spec.control_dim)?;
        physics.validate()?;
        Ok(Self {
            spec,
            physics,
            substeps: 1,
        })
    }

    /// Split each sampling period into `n` RK4 steps.
    pub fn with_substeps(mut self, n: usize) -> Self {
        self.substeps = n.max(1);
        self
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn physics(&self) -> &Physics {
        &self.physics
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    /// Deterministic one-step transition.
    pub fn true_step(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        ensure_len("state", self.spec.state_dim, x.len())?;
        ensure_len("control", self.spec.control_dim, u.len())?;
        ensure_finite("true_step state", x)?;
        if !self.spec.control_bounds.contains(u) {
            return Err(Error::InvalidArgument(format!(
                "control {u:?} outside the bounds of `{}`",
                self.spec.name
            )));
        }
        let h = self.spec.dt / self.substeps as f64;
        let mut state = x.to_vec();
        for _ in 0..self.substeps {
            state = self.rk4(&state, u, h);
        }
        if state.iter().all(|v| v.is_finite()) {
            Ok(state)
        } else {
            Err(Error::Divergence {
                system: self.spec.name.clone(),
                step: 0,
            })
        }
    }

    fn rk4(&self, x: &[f64], u: &[f64], h: f64) -> Vec<f64> {
        let n = x.len();
        let f = |s: &[f64]| {
            let mut d = vec![0.0; n];
            self.physics.derivative(s, u, &mut d);
            d
        };
        let axpy = |a: &[f64], k: &[f64], c: f64| -> Vec<f64> { a.iter().zip(k).map(|(x, k)| x + c * k).collect() };
        let k1 = f(x);
        let k2 = f(&axpy(x, &k1, 0.5 * h));
        let k3 = f(&axpy(x, &k2, 0.5 * h));
        let k4 = f(&axpy(x, &k3, h));
        (0..n)
            .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    }

    /// Noisy full-state measurement `x + ε`, `ε ~ N(0, σ_ε² I)`.
    pub fn observe<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Vec<f64> {
        let sd = self.spec.noise_variance.sqrt();
        x.iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(rng);
                v + sd * z
            })
            .collect()
    }

    /// Apply `controls` from `x0`, observing after every step.
    pub fn rollout<R: Rng + ?Sized>(&self, x0: &[f64], controls: &ControlSequence, rng: &mut R) -> Result<Trajectory> {
        ensure_len("control dimension", self.spec.control_dim, controls.control_dim())?;
        let mut traj = Trajectory::default();
        let mut x = x0.to_vec();
        for (k, u) in controls.iter().enumerate() {
            let next = self.true_step(&x, u).map_err(|e| e.at_step(k))?;
            let y = self.observe(&next, rng);
            traj.records.push(TrajectoryRecord {
                step: k,
                state: x,
                control: u.to_vec(),
                observation: y,
                next_state: next.clone(),
            });
            x = next;
        }
        Ok(traj)
    }

    /// Mechanical energy, for systems where it is defined.
    pub fn energy(&self, x: &[f64]) -> Option<f64> {
        self.physics.energy(x)
    }
}

impl Error {
    pub(crate) fn at_step(self, k: usize) -> Self {
        match self {
            Error::Divergence { system, .. } => Error::Divergence { system, step: k },
            other => other,
        }
    }
}

/// One applied transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub state: Vec<f64>,
    pub control: Vec<f64>,
    /// Noisy measurement of `next_state`.
    pub observation: Vec<f64>,
    pub next_state: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Visited true states, `x_0` through the final state.
    pub fn states(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = self.records.iter().map(|r| r.state.clone()).collect();
        if let Some(last) = self.records.last() {
            out.push(last.next_state.clone());
        }
        out
    }

    /// Consecutive step indices and admissible controls.
    pub fn is_consistent(&self, bounds: &BoxBounds) -> bool {
        self.records.windows(2).all(|w| w[1].step == w[0].step + 1)
            && self.records.iter().all(|r| bounds.contains(&r.control))
    }
}
