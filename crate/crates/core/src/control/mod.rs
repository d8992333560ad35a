//! LQR and MPC on lifted predictors, and closed-loop simulation against the
//! nonlinear plant.

mod closed_loop;
mod lqr;
mod mpc;
mod reference;

pub use closed_loop::{
    run_closed_loop, swing_up_success, ClosedLoopResult, Controller, Failure, FailureCriteria, MpcController,
    StepStatus, ZeroController,
};
pub use lqr::{lqr_gain, LqrController, LqrSpec, LqrWeights};
pub use mpc::{mpc_step, Mpc, MpcSolution, MpcSpec};
pub use reference::{ReferenceSpec, SineComponent};
