use nalgebra::DVector;

use super::{ContinuousSystem, Trajectory};
use crate::error::{Error, Result};

/// Integration step used by all experiments, in seconds.
pub const DEFAULT_STEP: f64 = 0.01;

/// One classical Runge–Kutta step with the input held constant.
pub fn rk4_step<S: ContinuousSystem + ?Sized>(
    sys: &S,
    x: &DVector<f64>,
    u: &DVector<f64>,
    h: f64,
) -> Result<DVector<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("rk4 step must be positive, got {h}")));
    }
    let k1 = sys.derivative(x, u);
    let k2 = sys.derivative(&(x + &k1 * (0.5 * h)), u);
    let k3 = sys.derivative(&(x + &k2 * (0.5 * h)), u);
    let k4 = sys.derivative(&(x + &k3 * h), u);
    let next = x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::Divergence { step: 0, time: 0.0 })
    }
}

/// Roll out `sys` under a zero-order-hold input sequence.
pub fn simulate<S: ContinuousSystem + ?Sized>(
    sys: &S,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
    h: f64,
) -> Result<Trajectory> {
    if inputs.is_empty() {
        return Err(Error::InvalidInput("simulate needs at least one input".into()));
    }
    if x0.len() != sys.state_dim() {
        return Err(Error::Dimension(format!(
            "initial state has {} entries, system has {}",
            x0.len(),
            sys.state_dim()
        )));
    }
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(x0.clone());
    for (k, u) in inputs.iter().enumerate() {
        if u.len() != sys.input_dim() {
            return Err(Error::Dimension(format!("input {k} has {} entries", u.len())));
        }
        let next = rk4_step(sys, &states[k], u, h).map_err(|e| match e {
            Error::Divergence { .. } => Error::Divergence {
                step: k,
                time: k as f64 * h,
            },
            other => other,
        })?;
        states.push(next);
    }
    Trajectory::new(h, states, inputs.to_vec())
}
