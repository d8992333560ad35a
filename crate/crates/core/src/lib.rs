//! Lifted linear predictors identified by extended dynamic mode decomposition,
//! with LQR and MPC synthesis and two benchmark plants (a torque-driven
//! pendulum and a two-wheeled balancing robot).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod datagen;
pub mod dynamics;
pub mod edmd;
pub mod error;
pub mod experiments;
pub mod io;
pub mod lifting;
pub mod metrics;
pub mod numerics;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
