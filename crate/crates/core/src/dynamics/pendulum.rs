use nalgebra::{dvector, DVector};
use serde::{Deserialize, Serialize};

use super::ContinuousSystem;
use crate::error::{Error, Result};

/// Damped, torque-driven pendulum; angle measured from the upright position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PendulumParams {
    /// kg
    pub mass: f64,
    /// m
    pub length: f64,
    /// N m s / rad
    pub damping: f64,
    /// m / s^2
    pub gravity: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            length: 1.0,
            damping: 0.1,
            gravity: 9.81,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mass > 0.0
            && self.length > 0.0
            && self.gravity > 0.0
            && self.damping >= 0.0
            && [self.mass, self.length, self.gravity, self.damping]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::ModelConfiguration(format!("invalid pendulum parameters {self:?}")))
        }
    }

    pub fn inertia(&self) -> f64 {
        self.mass * self.length * self.length
    }
}

/// State `[phi, omega]`, input torque `u`.
#[derive(Debug, Clone, Default)]
pub struct Pendulum {
    pub params: PendulumParams,
}

impl Pendulum {
    pub fn new(params: PendulumParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    /// Kinetic plus potential energy (potential is maximal upright).
    pub fn energy(&self, x: &DVector<f64>) -> f64 {
        let p = &self.params;
        0.5 * p.inertia() * x[1] * x[1] + p.mass * p.gravity * p.length * x[0].cos()
    }
}

impl ContinuousSystem for Pendulum {
    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let p = &self.params;
        let (phi, omega) = (x[0], x[1]);
        let inertia = p.inertia();
        dvector![
            omega,
            p.gravity / p.length * phi.sin() - p.damping / inertia * omega + u[0] / inertia
        ]
    }

    fn name(&self) -> &str {
        "pendulum"
    }

    fn parameters(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("mass", self.params.mass),
            ("length", self.params.length),
            ("damping", self.params.damping),
            ("gravity", self.params.gravity),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::simulate;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn vector_field_values() {
        let p = Pendulum::default();
        assert_eq!(p.derivative(&dvector![0.0, 0.0], &dvector![0.0]), dvector![0.0, 0.0]);
        let f = p.derivative(&dvector![FRAC_PI_2, 0.0], &dvector![0.0]);
        assert_eq!(f[0], 0.0);
        assert!((f[1] - 9.81).abs() < 1e-15);
        let f = p.derivative(&dvector![FRAC_PI_4, 1.0], &dvector![2.0]);
        assert_eq!(f[0], 1.0);
        assert!((f[1] - (9.81 * FRAC_PI_4.sin() - 0.1 + 2.0)).abs() < 1e-14);
        assert!((f[1] - 8.8368).abs() < 1e-4);
    }

    #[test]
    fn equilibria_are_preserved() {
        let p = Pendulum::default();
        let inputs = vec![dvector![0.0]; 100];
        let up = simulate(&p, &dvector![0.0, 0.0], &inputs, 0.01).unwrap();
        assert!(up.states.iter().all(|x| x[0] == 0.0 && x[1] == 0.0));
        let down = simulate(&p, &dvector![PI, 0.0], &inputs, 0.01).unwrap();
        let last = down.states.last().unwrap();
        // sin(pi) is 1.2e-16 in floating point, so the downward rest drifts at round-off level
        assert!((last[0] - PI).abs() < 1e-12 && last[1].abs() < 1e-12);
    }

    #[test]
    fn undamped_energy_is_conserved() {
        let p = Pendulum::new(PendulumParams {
            damping: 0.0,
            ..Default::default()
        })
        .unwrap();
        let x0 = dvector![2.5, 0.3];
        let tr = simulate(&p, &x0, &vec![dvector![0.0]; 1000], 0.01).unwrap();
        let e0 = p.energy(&x0);
        let drift = tr
            .states
            .iter()
            .map(|x| (p.energy(x) - e0).abs())
            .fold(0.0, f64::max);
        assert!(drift / e0.abs() < 1e-6, "relative drift {}", drift / e0.abs());
    }

    #[test]
    fn rejects_bad_params() {
        let bad = PendulumParams {
            length: 0.0,
            ..Default::default()
        };
        assert!(matches!(Pendulum::new(bad), Err(Error::ModelConfiguration(_))));
    }
}
