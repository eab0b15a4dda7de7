use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equations of motion. States are ordered positions first, then
/// velocities; angles are in radians, measured from the hanging-down rest
/// position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum Physics {
    /// Damped torque-driven pendulum, state `(θ, θ̇)`, control torque (N·m).
    Pendulum {
        /// kg
        mass: f64,
        /// m
        length: f64,
        /// viscous joint damping, N·m·s/rad
        damping: f64,
        /// m/s²
        gravity: f64,
    },
    /// Planar two-link arm with torque control, state `(q1, q2, q̇1, q̇2)`.
    /// With zero gravity (a horizontal arm) every rest configuration is an
    /// equilibrium.
    TwoLink {
        mass1: f64,
        mass2: f64,
        length1: f64,
        /// distance from joint to the link's center of mass, m
        com1: f64,
        com2: f64,
        /// link inertia about its center of mass, kg·m²
        inertia1: f64,
        inertia2: f64,
        damping1: f64,
        damping2: f64,
        gravity: f64,
    },
    /// Cart with a hanging point-mass pendulum, state `(p, φ, ṗ, φ̇)`,
    /// control horizontal force on the cart (N).
    CartPole {
        cart_mass: f64,
        pole_mass: f64,
        pole_length: f64,
        /// N·s/m
        cart_damping: f64,
        /// N·m·s/rad
        pole_damping: f64,
        gravity: f64,
    },
}

impl Physics {
    /// `(state_dim, control_dim)`
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Physics::Pendulum { .. } => (2, 1),
            Physics::TwoLink { .. } => (4, 2),
            Physics::CartPole { .. } => (4, 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (positive, nonnegative): (Vec<f64>, Vec<f64>) = match *self {
            Physics::Pendulum {
                mass,
                length,
                damping,
                gravity,
            } => (vec![mass, length], vec![damping, gravity]),
            Physics::TwoLink {
                mass1,
                mass2,
                length1,
                com1,
                com2,
                inertia1,
                inertia2,
                damping1,
                damping2,
                gravity,
            } => (
                vec![mass1, mass2, length1, com1, com2],
                vec![inertia1, inertia2, damping1, damping2, gravity],
            ),
            Physics::CartPole {
                cart_mass,
                pole_mass,
                pole_length,
                cart_damping,
                pole_damping,
                gravity,
            } => (
                vec![cart_mass, pole_mass, pole_length],
                vec![cart_damping, pole_damping, gravity],
            ),
        };
        if positive.iter().all(|v| v.is_finite() && *v > 0.0) && nonnegative.iter().all(|v| v.is_finite() && *v >= 0.0)
        {
            Ok(())
        } else {
            Err(Error::Config(format!("physical constants out of range in {self:?}")))
        }
    }

    /// Time derivative of the state.
    pub fn derivative(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        match *self {
            Physics::Pendulum {
                mass,
                length,
                damping,
                gravity,
            } => {
                let (theta, omega) = (x[0], x[1]);
                dx[0] = omega;
                dx[1] = (u[0] - damping * omega - mass * gravity * length * theta.sin()) / (mass * length * length);
            }
            Physics::TwoLink {
                mass1,
                mass2,
                length1,
                com1,
                com2,
                inertia1,
                inertia2,
                damping1,
                damping2,
                gravity,
            } => {
                let (q1, q2, w1, w2) = (x[0], x[1], x[2], x[3]);
                let (s2, c2) = q2.sin_cos();
                let h = mass2 * length1 * com2;
                let m11 = mass1 * com1 * com1
                    + inertia1
                    + mass2 * (length1 * length1 + com2 * com2 + 2.0 * length1 * com2 * c2)
                    + inertia2;
                let m12 = mass2 * (com2 * com2 + length1 * com2 * c2) + inertia2;
                let m22 = mass2 * com2 * com2 + inertia2;
                // Coriolis/centrifugal terms
                let c1 = -h * s2 * (2.0 * w1 * w2 + w2 * w2);
                let cc2 = h * s2 * w1 * w1;
                // gravity acting along -y with angles measured from hanging down
                let g1 = gravity * ((mass1 * com1 + mass2 * length1) * q1.sin() + mass2 * com2 * (q1 + q2).sin());
                let g2 = gravity * mass2 * com2 * (q1 + q2).sin();
                let r1 = u[0] - c1 - g1 - damping1 * w1;
                let r2 = u[1] - cc2 - g2 - damping2 * w2;
                let det = m11 * m22 - m12 * m12;
                dx[0] = w1;
                dx[1] = w2;
                dx[2] = (m22 * r1 - m12 * r2) / det;
                dx[3] = (m11 * r2 - m12 * r1) / det;
            }
            Physics::CartPole {
                cart_mass,
                pole_mass,
                pole_length,
                cart_damping,
                pole_damping,
                gravity,
            } => {
                let (phi, v, w) = (x[1], x[2], x[3]);
                let (s, c) = phi.sin_cos();
                let ml = pole_mass * pole_length;
                let a11 = cart_mass + pole_mass;
                let a12 = ml * c;
                let a22 = ml * pole_length;
                let b1 = u[0] - cart_damping * v + ml * w * w * s;
                let b2 = -ml * gravity * s - pole_damping * w;
                let det = a11 * a22 - a12 * a12;
                dx[0] = v;
                dx[1] = w;
                dx[2] = (a22 * b1 - a12 * b2) / det;
                dx[3] = (a11 * b2 - a12 * b1) / det;
            }
        }
    }

    /// Kinetic plus potential energy.
    pub fn energy(&self, x: &[f64]) -> Option<f64> {
        match *self {
            Physics::Pendulum {
                mass, length, gravity, ..
            } => Some(0.5 * mass * length * length * x[1] * x[1] + mass * gravity * length * (1.0 - x[0].cos())),
            Physics::CartPole {
                cart_mass,
                pole_mass,
                pole_length,
                gravity,
                ..
            } => {
                let (phi, v, w) = (x[1], x[2], x[3]);
                let l = pole_length;
                let kinetic = 0.5 * (cart_mass + pole_mass) * v * v
                    + pole_mass * l * v * w * phi.cos()
                    + 0.5 * pole_mass * l * l * w * w;
                Some(kinetic + pole_mass * gravity * l * (1.0 - phi.cos()))
            }
            Physics::TwoLink { .. } => None,
        }
    }
}
