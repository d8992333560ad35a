//! Two-wheeled inverted pendulum robot on a flat floor.
//!
//! Generalized coordinates `q = [s, phi, chi]` (travelled distance, body tilt
//! from upright, yaw) and state `x = [s', phi', chi', s, phi, chi]`. Inputs are
//! the two wheel torques, applied between body and wheel.
//!
//! `M(q) q'' + C(q, q') q' + D q' + G(q) = B u` with, writing
//! `m_0 = m_b + 2 m_w + 2 J / r^2`, `k = I_xx + m_b L^2 - I_zz`,
//!
//! ```text
//! M = [ m_0            m_b L cos(phi)   0                                        ]
//!     [ m_b L cos(phi) I_yy + m_b L^2   0                                        ]
//!     [ 0              0                I_zz + 2K + (m_w + J/r^2) d^2/2 + k sin^2 ]
//!
//! C = [ 0                    -m_b L phi' sin   -m_b L chi' sin ]
//!     [ 0                     0                -k chi' sin cos ]
//!     [ m_b L chi' sin        k chi' sin cos    k phi' sin cos ]
//!
//! D = c [ 2/r^2  -2/r  0          ]     G = [0, -m_b g L sin(phi), 0]'
//!       [ -2/r    2    0          ]
//!       [ 0       0    d^2/(2r^2) ]     B = [ 1/r, 1/r; -1, -1; -d/(2r), d/(2r) ]
//! ```
//!
//! `J` and `K` are the wheel inertias about the axle and about a diameter,
//! `d` the track width. The Coriolis matrix is the Christoffel form of `M`
//! plus the skew pair coupling `s` and `chi` through the body lean, so
//! `q'(M'/2 - C)q' = 0`.

use nalgebra::{dvector, DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::ContinuousSystem;
use crate::error::{Error, Result};

pub const ROBOT_STATE_NAMES: [&str; 6] = ["s_dot", "phi_dot", "chi_dot", "s", "phi", "chi"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotParams {
    pub wheel_radius: f64,
    pub wheel_mass: f64,
    pub body_mass: f64,
    /// Height of the body centre of mass above the wheel axle.
    pub com_height: f64,
    pub track_width: f64,
    /// Body inertia about the axle direction through its centre of mass.
    pub body_pitch_inertia: f64,
    pub body_roll_inertia: f64,
    pub body_yaw_inertia: f64,
    pub wheel_spin_inertia: f64,
    pub wheel_diameter_inertia: f64,
    /// Viscous friction between each wheel and the body.
    pub friction: f64,
    pub gravity: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        // body as a 0.1 x 0.2 x 0.3 m cuboid, wheels as uniform disks
        let (depth, width, height) = (0.1, 0.2, 0.3);
        let body_mass = 1.2;
        let wheel_mass = 0.2;
        let r = 0.05;
        Self {
            wheel_radius: r,
            wheel_mass,
            body_mass,
            com_height: 0.15,
            track_width: 0.2,
            body_pitch_inertia: body_mass * (depth * depth + height * height) / 12.0,
            body_roll_inertia: body_mass * (width * width + height * height) / 12.0,
            body_yaw_inertia: body_mass * (width * width + depth * depth) / 12.0,
            wheel_spin_inertia: 0.5 * wheel_mass * r * r,
            wheel_diameter_inertia: 0.25 * wheel_mass * r * r,
            friction: 0.01,
            gravity: 9.81,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Robot {
    pub params: RobotParams,
}

impl Robot {
    pub fn new(params: RobotParams) -> Result<Self> {
        let positive = [
            params.wheel_radius,
            params.body_mass,
            params.com_height,
            params.track_width,
            params.gravity,
        ];
        let non_negative = [
            params.wheel_mass,
            params.body_pitch_inertia,
            params.body_roll_inertia,
            params.body_yaw_inertia,
            params.wheel_spin_inertia,
            params.wheel_diameter_inertia,
            params.friction,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite()))
            || non_negative.iter().any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return Err(Error::ModelConfiguration(format!("invalid robot parameters {params:?}")));
        }
        let robot = Self { params };
        // M must stay positive definite over the admissible tilt range
        for i in 0..=180 {
            let phi = -1.5 + i as f64 * (3.0 / 180.0);
            if robot.mass_matrix(phi).cholesky().is_none() {
                return Err(Error::ModelConfiguration(format!(
                    "mass matrix is singular at tilt {phi:.3}"
                )));
            }
        }
        Ok(robot)
    }

    fn lean_inertia(&self) -> f64 {
        let p = &self.params;
        p.body_roll_inertia + p.body_mass * p.com_height * p.com_height - p.body_yaw_inertia
    }

    pub fn mass_matrix(&self, phi: f64) -> Matrix3<f64> {
        let p = &self.params;
        let r2 = p.wheel_radius * p.wheel_radius;
        let m0 = p.body_mass + 2.0 * p.wheel_mass + 2.0 * p.wheel_spin_inertia / r2;
        let coupling = p.body_mass * p.com_height * phi.cos();
        let pitch = p.body_pitch_inertia + p.body_mass * p.com_height * p.com_height;
        let yaw = p.body_yaw_inertia
            + 2.0 * p.wheel_diameter_inertia
            + (p.wheel_mass + p.wheel_spin_inertia / r2) * p.track_width * p.track_width / 2.0
            + self.lean_inertia() * phi.sin().powi(2);
        Matrix3::new(m0, coupling, 0.0, coupling, pitch, 0.0, 0.0, 0.0, yaw)
    }

    pub fn coriolis_matrix(&self, phi: f64, rates: &Vector3<f64>) -> Matrix3<f64> {
        let p = &self.params;
        let (sin, cos) = phi.sin_cos();
        let ml = p.body_mass * p.com_height;
        let k = self.lean_inertia();
        let (phi_dot, chi_dot) = (rates[1], rates[2]);
        Matrix3::new(
            0.0,
            -ml * phi_dot * sin,
            -ml * chi_dot * sin,
            0.0,
            0.0,
            -k * chi_dot * sin * cos,
            ml * chi_dot * sin,
            k * chi_dot * sin * cos,
            k * phi_dot * sin * cos,
        )
    }

    pub fn damping_matrix(&self) -> Matrix3<f64> {
        let p = &self.params;
        let r = p.wheel_radius;
        let d = p.track_width;
        Matrix3::new(
            2.0 / (r * r),
            -2.0 / r,
            0.0,
            -2.0 / r,
            2.0,
            0.0,
            0.0,
            0.0,
            d * d / (2.0 * r * r),
        ) * p.friction
    }

    pub fn gravity_vector(&self, phi: f64) -> Vector3<f64> {
        let p = &self.params;
        Vector3::new(0.0, -p.body_mass * p.gravity * p.com_height * phi.sin(), 0.0)
    }

    pub fn input_matrix(&self) -> DMatrix<f64> {
        let p = &self.params;
        let r = p.wheel_radius;
        let half = p.track_width / (2.0 * r);
        DMatrix::from_row_slice(3, 2, &[1.0 / r, 1.0 / r, -1.0, -1.0, -half, half])
    }

    /// Total mechanical energy (kinetic plus gravitational).
    pub fn energy(&self, x: &DVector<f64>) -> f64 {
        let rates = Vector3::new(x[0], x[1], x[2]);
        let m = self.mass_matrix(x[4]);
        let p = &self.params;
        0.5 * rates.dot(&(m * rates)) + p.body_mass * p.gravity * p.com_height * x[4].cos()
    }
}

impl Default for Robot {
    fn default() -> Self {
        Self::new(RobotParams::default()).expect("default robot parameters are valid")
    }
}

impl ContinuousSystem for Robot {
    fn state_dim(&self) -> usize {
        6
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let rates = Vector3::new(x[0], x[1], x[2]);
        let phi = x[4];
        let b = self.input_matrix();
        let torque = Vector3::new(
            b[(0, 0)] * u[0] + b[(0, 1)] * u[1],
            b[(1, 0)] * u[0] + b[(1, 1)] * u[1],
            b[(2, 0)] * u[0] + b[(2, 1)] * u[1],
        );
        let rhs = torque
            - self.coriolis_matrix(phi, &rates) * rates
            - self.damping_matrix() * rates
            - self.gravity_vector(phi);
        let acc = match self.mass_matrix(phi).cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => Vector3::repeat(f64::NAN),
        };
        dvector![acc[0], acc[1], acc[2], x[0], x[1], x[2]]
    }

    fn name(&self) -> &str {
        "robot"
    }

    fn parameters(&self) -> Vec<(&'static str, f64)> {
        let p = &self.params;
        vec![
            ("wheel_radius", p.wheel_radius),
            ("wheel_mass", p.wheel_mass),
            ("body_mass", p.body_mass),
            ("com_height", p.com_height),
            ("track_width", p.track_width),
            ("body_pitch_inertia", p.body_pitch_inertia),
            ("body_roll_inertia", p.body_roll_inertia),
            ("body_yaw_inertia", p.body_yaw_inertia),
            ("wheel_spin_inertia", p.wheel_spin_inertia),
            ("wheel_diameter_inertia", p.wheel_diameter_inertia),
            ("friction", p.friction),
            ("gravity", p.gravity),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::simulate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn upright_rest_is_equilibrium() {
        let r = Robot::default();
        let f = r.derivative(&DVector::zeros(6), &DVector::zeros(2));
        assert_eq!(f, DVector::zeros(6));
    }

    #[test]
    fn invariant_to_distance_and_yaw() {
        let r = Robot::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mut x = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
            let u = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let f0 = r.derivative(&x, &u);
            x[3] += rng.random_range(-100.0..100.0);
            x[5] += rng.random_range(-10.0..10.0);
            assert_eq!(f0, r.derivative(&x, &u));
        }
    }

    #[test]
    fn small_tilt_matches_linearized_gravity() {
        let r = Robot::default();
        let phi = 0.01;
        let mut x = DVector::zeros(6);
        x[4] = phi;
        let f = r.derivative(&x, &DVector::zeros(2));
        // M(0) q'' = [0, m_b g L phi, 0]
        let p = r.params;
        let lin = r
            .mass_matrix(0.0)
            .try_inverse()
            .unwrap()
            * Vector3::new(0.0, p.body_mass * p.gravity * p.com_height * phi, 0.0);
        assert!(((f[0] - lin[0]) / lin[0]).abs() < 0.01);
        assert!(((f[1] - lin[1]) / lin[1]).abs() < 0.01);
        assert!(f[1] > 0.0, "upright must be unstable");
    }

    #[test]
    fn coriolis_is_energy_consistent() {
        let r = Robot::new(RobotParams {
            friction: 0.0,
            ..Default::default()
        })
        .unwrap();
        let x0 = dvector![0.3, -0.5, 1.0, 0.0, 0.2, 0.0];
        let tr = simulate(&r, &x0, &vec![DVector::zeros(2); 50], 0.001).unwrap();
        let e0 = r.energy(&x0);
        for x in &tr.states {
            assert!((r.energy(x) - e0).abs() < 1e-8 * e0.abs().max(1.0));
        }
    }

    #[test]
    fn mass_matrix_symmetric_positive_definite() {
        let r = Robot::default();
        for phi in [-1.5, -0.7, 0.0, 0.4, 1.5] {
            let m = r.mass_matrix(phi);
            assert_eq!(m, m.transpose());
            assert!(m.cholesky().is_some());
        }
    }

    #[test]
    fn degenerate_parameters_rejected() {
        let bad = RobotParams {
            body_mass: 0.0,
            ..Default::default()
        };
        assert!(matches!(Robot::new(bad), Err(Error::ModelConfiguration(_))));
    }
}
