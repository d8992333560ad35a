//! Continuous-time benchmark systems, fixed-step RK4 integration and local
//! linearization.

mod linearize;
mod pendulum;
mod rk4;
mod robot;
mod trajectory;

use nalgebra::{DMatrix, DVector};

pub use linearize::{jacobians, local_linearization, zoh_discretize, Linearization};
pub use pendulum::{Pendulum, PendulumParams};
pub use rk4::{rk4_step, simulate, DEFAULT_STEP};
pub use robot::{Robot, RobotParams, ROBOT_STATE_NAMES};
pub use trajectory::Trajectory;

/// A controlled vector field `x' = f(x, u)`.
pub trait ContinuousSystem: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    fn name(&self) -> &str {
        "system"
    }

    /// Named physical parameters, for reports.
    fn parameters(&self) -> Vec<(&'static str, f64)> {
        Vec::new()
    }
}

/// `x' = F x + G u`
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(f: DMatrix<f64>, g: DMatrix<f64>) -> crate::Result<Self> {
        if !f.is_square() || g.nrows() != f.nrows() {
            return Err(crate::Error::Dimension(format!(
                "linear system F {:?}, G {:?}",
                f.shape(),
                g.shape()
            )));
        }
        Ok(Self { f, g })
    }
}

impl ContinuousSystem for LinearSystem {
    fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    fn input_dim(&self) -> usize {
        self.g.ncols()
    }

    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.f * x + &self.g * u
    }

    fn name(&self) -> &str {
        "linear"
    }
}
