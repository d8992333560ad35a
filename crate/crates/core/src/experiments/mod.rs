//! End-to-end experiments on the two benchmark plants.

mod arms;
mod config;
mod output;
mod pendulum;
mod robot;
mod tasks;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

pub use arms::{
    fit_and_score, lqr_swing_up, prediction_comparison_csv, score, ArmSummary, ControlOutcome, MetricSummary,
    ScoredPredictor,
};
pub use config::{
    overlay, ClosedLoopSpec, ExperimentConfig, LiftingComparisonSpec, PendulumSetup, RobotSetup, SplitSpec,
    SystemKind, DEFAULT_SEED,
};
pub use output::{content_hash, trajectories_csv, Manifest, OutputSink};
pub use pendulum::{
    local_predictor, pendulum_baseline, pendulum_data, pendulum_pathology_data, pendulum_pathology_data_majority,
    pendulum_pathology_lifting, DictionaryCheck, PathologyDataMajority, PathologyDataReport,
    PathologyLiftingReport, PendulumBaselineReport, PendulumData, SchemeArm, LARGE_DICTIONARIES,
};
pub use robot::{
    mpc_run, robot_baseline, robot_data, robot_local_predictor, robot_pathology_coupling, CouplingRun,
    CouplingScores, RobotBaselineReport, RobotCouplingReport, RobotData, INVARIANT_STATES,
};

pub use tasks::{collect_task, eval_task, fit_task, lqr_task, mpc_task, Format, TaskOutcome};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentName {
    PendulumBaseline,
    PendulumPathologyData,
    PendulumPathologyLifting,
    RobotBaseline,
    RobotPathologyCoupling,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 5] = [
        ExperimentName::PendulumBaseline,
        ExperimentName::PendulumPathologyData,
        ExperimentName::PendulumPathologyLifting,
        ExperimentName::RobotBaseline,
        ExperimentName::RobotPathologyCoupling,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::PendulumBaseline => "pendulum-baseline",
            ExperimentName::PendulumPathologyData => "pendulum-pathology-data",
            ExperimentName::PendulumPathologyLifting => "pendulum-pathology-lifting",
            ExperimentName::RobotBaseline => "robot-baseline",
            ExperimentName::RobotPathologyCoupling => "robot-pathology-coupling",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Self::ALL.iter().map(|e| e.as_str()).collect();
                Error::Config(format!("unknown experiment `{s}` (known: {})", known.join(", ")))
            })
    }
}

/// What an experiment run produced.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutcome {
    pub experiment: String,
    /// Whether the expected qualitative outcome was observed.
    pub reproduced: bool,
    pub report: serde_json::Value,
    pub manifest: Manifest,
}

/// Run an experiment, writing its outputs and manifest under `out` if given.
pub fn run_experiment(name: ExperimentName, cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ExperimentOutcome> {
    let mut sink = OutputSink::new(out);
    let (reproduced, report) = match name {
        ExperimentName::PendulumBaseline => {
            let r = pendulum_baseline(cfg, &mut sink)?;
            (r.reproduced(), serde_json::to_value(&r)?)
        }
        ExperimentName::PendulumPathologyData => {
            let r = pendulum_pathology_data(cfg, &mut sink)?;
            (r.reproduced(), serde_json::to_value(&r)?)
        }
        ExperimentName::PendulumPathologyLifting => {
            let r = pendulum_pathology_lifting(cfg, &mut sink)?;
            (r.reproduced(), serde_json::to_value(&r)?)
        }
        ExperimentName::RobotBaseline => {
            let r = robot_baseline(cfg, &mut sink)?;
            (r.reproduced(), serde_json::to_value(&r)?)
        }
        ExperimentName::RobotPathologyCoupling => {
            let r = robot_pathology_coupling(cfg, &mut sink)?;
            (r.reproduced(), serde_json::to_value(&r)?)
        }
    };
    let manifest = match name {
        ExperimentName::RobotBaseline | ExperimentName::RobotPathologyCoupling => {
            robot::finish_robot(sink, name.as_str(), cfg)?
        }
        _ => pendulum::finish_pendulum(sink, name.as_str(), cfg)?,
    };
    Ok(ExperimentOutcome {
        experiment: name.to_string(),
        reproduced,
        report,
        manifest,
    })
}
