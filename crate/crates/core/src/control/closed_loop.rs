use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lqr::LqrController;
use super::mpc::Mpc;
use super::reference::ReferenceSpec;
use crate::dynamics::{rk4_step, ContinuousSystem, Trajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum StepStatus {
    Ok,
    Solved { iterations: usize, residual: f64 },
}

impl fmt::Display for StepStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepStatus::Ok => f.write_str("ok"),
            StepStatus::Solved { iterations, .. } => write!(f, "qp-{iterations}"),
        }
    }
}

/// A state-feedback law evaluated once per sampling period.
pub trait Controller {
    fn input_dim(&self) -> usize;
    fn control(&mut self, t: f64, x: &DVector<f64>) -> Result<(DVector<f64>, StepStatus)>;
    /// Reference in effect at `t`, for the record.
    fn reference(&self, _t: f64) -> Option<DVector<f64>> {
        None
    }
}

/// Always outputs zero.
#[derive(Debug, Clone, Copy)]
pub struct ZeroController {
    pub inputs: usize,
}

impl Controller for ZeroController {
    fn input_dim(&self) -> usize {
        self.inputs
    }
    fn control(&mut self, _t: f64, _x: &DVector<f64>) -> Result<(DVector<f64>, StepStatus)> {
        Ok((DVector::zeros(self.inputs), StepStatus::Ok))
    }
}

impl Controller for LqrController {
    fn input_dim(&self) -> usize {
        self.predictor.input_dim()
    }
    fn control(&mut self, _t: f64, x: &DVector<f64>) -> Result<(DVector<f64>, StepStatus)> {
        Ok((self.input(x), StepStatus::Ok))
    }
}

/// MPC with a time-varying reference and a shifted warm start.
#[derive(Debug, Clone)]
pub struct MpcController {
    pub mpc: Mpc,
    pub reference: ReferenceSpec,
    warm: Option<DVector<f64>>,
}

impl MpcController {
    pub fn new(mpc: Mpc, reference: ReferenceSpec) -> Self {
        Self {
            mpc,
            reference,
            warm: None,
        }
    }
}

impl Controller for MpcController {
    fn input_dim(&self) -> usize {
        self.mpc.predictor.input_dim()
    }
    fn control(&mut self, t: f64, x: &DVector<f64>) -> Result<(DVector<f64>, StepStatus)> {
        let refs = self
            .reference
            .window(t, self.mpc.predictor.dt, self.mpc.spec.horizon, self.mpc.output_dim());
        let sol = self.mpc.solve(x, &refs, self.warm.as_ref())?;
        self.warm = Some(Mpc::shifted(&sol));
        Ok((
            sol.first().clone(),
            StepStatus::Solved {
                iterations: sol.iterations,
                residual: sol.residual,
            },
        ))
    }
    fn reference(&self, t: f64) -> Option<DVector<f64>> {
        Some(self.reference.at(t, self.mpc.output_dim()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FailureCriteria {
    /// The run is truncated once `||x||` exceeds this.
    pub max_norm: f64,
    /// `(state, limit)`: failure when `|x[state]| > limit`.
    pub angle_limit: Option<(usize, f64)>,
}

impl Default for FailureCriteria {
    fn default() -> Self {
        Self {
            max_norm: 1e6,
            angle_limit: None,
        }
    }
}

impl FailureCriteria {
    pub fn robot() -> Self {
        Self {
            max_norm: 1e6,
            angle_limit: Some((4, std::f64::consts::FRAC_PI_2)),
        }
    }

    fn check(&self, x: &DVector<f64>) -> Option<String> {
        if !x.iter().all(|v| v.is_finite()) {
            return Some("non-finite state".into());
        }
        if x.norm() > self.max_norm {
            return Some(format!("state norm exceeded {:e}", self.max_norm));
        }
        if let Some((i, lim)) = self.angle_limit {
            if x[i].abs() > lim {
                return Some(format!("|x[{i}]| exceeded {lim:.4}"));
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub step: usize,
    pub time: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopResult {
    pub trajectory: Trajectory,
    pub status: Vec<StepStatus>,
    pub references: Vec<Option<DVector<f64>>>,
    /// Set when the run was cut short.
    pub failure: Option<Failure>,
    pub requested_steps: usize,
}

impl ClosedLoopResult {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none() && self.trajectory.len() == self.requested_steps
    }

    /// `sum_k x_k' Q_x x_k + u_k' R u_k` over the applied steps; infinite for
    /// a failed run.
    pub fn quadratic_cost(&self, q_x: &DMatrix<f64>, r: &DMatrix<f64>) -> f64 {
        if self.failed() {
            return f64::INFINITY;
        }
        let t = &self.trajectory;
        (0..t.len())
            .map(|k| {
                let x = &t.states[k];
                let u = &t.inputs[k];
                (x.transpose() * q_x * x)[(0, 0)] + (u.transpose() * r * u)[(0, 0)]
            })
            .sum()
    }

    /// True when the run completed and `||x|| < tol` for every sample with
    /// `t >= T - window_s`.
    pub fn settles(&self, tol: f64, window_s: f64) -> bool {
        if !self.completed() {
            return false;
        }
        let t = &self.trajectory;
        let end = t.len() as f64 * t.dt;
        t.states
            .iter()
            .enumerate()
            .filter(|(k, _)| *k as f64 * t.dt >= end - window_s - 1e-9)
            .all(|(_, x)| x.norm() < tol)
    }

    /// Trajectory CSV plus a `status` column (empty on the terminal row).
    pub fn to_csv(&self) -> String {
        let csv = self.trajectory.to_csv();
        let mut out = String::with_capacity(csv.len() + 8 * self.status.len());
        for (i, line) in csv.lines().enumerate() {
            out.push_str(line);
            out.push(',');
            if i == 0 {
                out.push_str("status");
            } else if let Some(s) = self.status.get(i - 1) {
                out.push_str(&s.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Swing-up criterion: `||x|| < 0.05` over the final second.
pub fn swing_up_success(result: &ClosedLoopResult) -> bool {
    result.settles(0.05, 1.0)
}

/// Simulate `controller` on `plant` for `duration` seconds from `x0`,
/// holding each input over one RK4 step of length `dt`.
pub fn run_closed_loop<S: ContinuousSystem + ?Sized, C: Controller + ?Sized>(
    plant: &S,
    controller: &mut C,
    x0: &DVector<f64>,
    duration: f64,
    dt: f64,
    criteria: &FailureCriteria,
) -> Result<ClosedLoopResult> {
    if x0.len() != plant.state_dim() || controller.input_dim() != plant.input_dim() {
        return Err(Error::Dimension("controller, plant and initial state disagree".into()));
    }
    if !(dt > 0.0) || !(duration >= 0.0) {
        return Err(Error::InvalidInput("closed loop needs dt > 0 and duration >= 0".into()));
    }
    let steps = (duration / dt).round() as usize;
    let mut states = vec![x0.clone()];
    let mut inputs = Vec::with_capacity(steps);
    let mut status = Vec::with_capacity(steps);
    let mut references = Vec::with_capacity(steps + 1);
    let mut failure = criteria.check(x0).map(|reason| Failure {
        step: 0,
        time: 0.0,
        reason,
    });

    let mut k = 0;
    while failure.is_none() && k < steps {
        let t = k as f64 * dt;
        let x = states.last().expect("nonempty").clone();
        references.push(controller.reference(t));
        let (u, st) = match controller.control(t, &x) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(Failure {
                    step: k,
                    time: t,
                    reason: format!("controller: {e}"),
                });
                break;
            }
        };
        match rk4_step(plant, &x, &u, dt) {
            Ok(next) => {
                inputs.push(u);
                status.push(st);
                failure = criteria.check(&next).map(|reason| Failure {
                    step: k + 1,
                    time: (k + 1) as f64 * dt,
                    reason,
                });
                states.push(next);
            }
            Err(_) => {
                failure = Some(Failure {
                    step: k + 1,
                    time: (k + 1) as f64 * dt,
                    reason: "integration diverged".into(),
                });
                break;
            }
        }
        k += 1;
    }
    references.truncate(inputs.len());
    references.push(controller.reference(inputs.len() as f64 * dt));
    Ok(ClosedLoopResult {
        trajectory: Trajectory {
            dt,
            states,
            inputs,
        },
        status,
        references,
        failure,
        requested_steps: steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Pendulum;
    use nalgebra::dvector;
    use std::f64::consts::PI;

    #[test]
    fn zero_control_stays_at_bottom() {
        let p = Pendulum::default();
        let mut c = ZeroController { inputs: 1 };
        let r = run_closed_loop(&p, &mut c, &dvector![PI, 0.0], 5.0, 0.01, &FailureCriteria::default()).unwrap();
        assert!(r.completed());
        assert_eq!(r.trajectory.len(), 500);
        let last = r.trajectory.states.last().unwrap();
        assert!((last[0] - PI).abs() < 1e-9 && last[1].abs() < 1e-9);
        assert!(!swing_up_success(&r));
    }

    #[test]
    fn angle_limit_truncates() {
        let p = Pendulum::default();
        let mut c = ZeroController { inputs: 1 };
        let crit = FailureCriteria {
            max_norm: 1e6,
            angle_limit: Some((0, 0.5)),
        };
        let r = run_closed_loop(&p, &mut c, &dvector![0.1, 0.0], 5.0, 0.01, &crit).unwrap();
        assert!(r.failed());
        assert!(r.trajectory.len() < 500);
        assert_eq!(r.quadratic_cost(&DMatrix::identity(2, 2), &DMatrix::identity(1, 1)), f64::INFINITY);
        let csv = r.to_csv();
        assert!(csv.starts_with("t,x1,x2,u1,status"));
        assert_eq!(csv.lines().count(), r.trajectory.len() + 2);
    }
}
