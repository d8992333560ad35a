//! Balancing robot: MPC on the reduced map against the local predictor, and
//! the non-physical coupling of a map that keeps distance and yaw.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arms::{fit_and_score, score, ArmSummary, ControlOutcome, ScoredPredictor};
use super::config::{ExperimentConfig, RobotSetup};
use super::output::{trajectories_csv, Manifest, OutputSink};
use crate::control::{run_closed_loop, ClosedLoopResult, Mpc, MpcController};
use crate::datagen::{collect, split};
use crate::dynamics::{local_linearization, Robot, Trajectory, ROBOT_STATE_NAMES};
use crate::edmd::{coupling_report, CouplingReport, LiftedLinearPredictor};
use crate::error::Result;

/// Distance and yaw: states the dynamics do not depend on.
pub const INVARIANT_STATES: [usize; 2] = [3, 5];

pub struct RobotData {
    pub train: Vec<Trajectory>,
    pub eval: Vec<Trajectory>,
}

pub fn robot_data(setup: &RobotSetup) -> Result<RobotData> {
    let robot = Robot::new(setup.params)?;
    let trajs = collect(&robot, &setup.excitation)?;
    let (train, eval) = split(trajs, setup.split.eval_count, setup.split_seed())?;
    Ok(RobotData { train, eval })
}

pub fn robot_local_predictor(setup: &RobotSetup) -> Result<LiftedLinearPredictor> {
    let robot = Robot::new(setup.params)?;
    Ok(local_linearization(&robot, &DVector::zeros(6), &DVector::zeros(2), setup.closed_loop.dt)?.predictor)
}

/// MPC tracking run from `x0`. Success means the run completed without the
/// robot falling over or the controller failing.
pub fn mpc_run(setup: &RobotSetup, predictor: &LiftedLinearPredictor, x0: &DVector<f64>) -> Result<ControlOutcome> {
    let robot = Robot::new(setup.params)?;
    let mpc = match Mpc::new(predictor.clone(), setup.mpc.clone()) {
        Ok(m) => m,
        Err(e) => return Ok(ControlOutcome::design_failed(format!("mpc design: {e}"))),
    };
    let mut controller = MpcController::new(mpc, setup.closed_loop.reference.clone());
    let result = run_closed_loop(
        &robot,
        &mut controller,
        x0,
        setup.closed_loop.duration,
        setup.closed_loop.dt,
        &setup.closed_loop.failure,
    )?;
    let success = result.completed();
    let cost = success.then(|| tracking_cost(setup, &result));
    Ok(ControlOutcome {
        success,
        cost,
        failure: result
            .failure
            .as_ref()
            .map(|f| format!("{} at t = {:.2} s", f.reason, f.time)),
        result: Some(result),
    })
}

/// Weighted squared tracking error plus input effort over the run.
fn tracking_cost(setup: &RobotSetup, r: &ClosedLoopResult) -> f64 {
    let spec = &setup.mpc;
    let m = spec.outputs.len();
    let t = &r.trajectory;
    (0..t.len())
        .map(|k| {
            let target = setup.closed_loop.reference.at(k as f64 * t.dt, m);
            let e: f64 = (0..m)
                .map(|i| spec.q_diag[i] * (t.states[k][spec.outputs[i]] - target[i]).powi(2))
                .sum();
            let u: f64 = t.inputs[k].iter().zip(&spec.r_diag).map(|(u, r)| r * u * u).sum();
            e + u
        })
        .sum()
}

fn inputs_within_bounds(setup: &RobotSetup, r: &ClosedLoopResult) -> bool {
    r.trajectory.inputs.iter().all(|u| {
        u.iter()
            .enumerate()
            .all(|(j, &v)| setup.mpc.u_min[j] <= v && v <= setup.mpc.u_max[j])
    })
}

fn initial_state(setup: &RobotSetup, s0: Option<f64>) -> DVector<f64> {
    let mut x0 = DVector::from_column_slice(&setup.closed_loop.x0);
    if let Some(s) = s0 {
        x0[3] = s;
    }
    x0
}

fn state_labels(pred: &LiftedLinearPredictor) -> Vec<String> {
    let names: Vec<&str> = ROBOT_STATE_NAMES.to_vec();
    pred.map.observables().iter().map(|o| o.label(&names)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotBaselineReport {
    pub train_trajectories: usize,
    pub eval_trajectories: usize,
    pub llp: ArmSummary,
    pub local: ArmSummary,
    /// `(local - llp) / local` on the horizon prediction error.
    pub prediction_improvement: f64,
    pub inputs_within_bounds: bool,
}

impl RobotBaselineReport {
    pub fn reproduced(&self) -> bool {
        self.llp.metrics.prediction < self.local.metrics.prediction && self.llp.success && self.inputs_within_bounds
    }
}

pub fn robot_baseline(cfg: &ExperimentConfig, sink: &mut OutputSink) -> Result<RobotBaselineReport> {
    let setup = RobotSetup::resolve(cfg)?;
    let data = robot_data(&setup)?;
    let (llp, local) = rayon::join(
        || fit_and_score("llp", &setup.dictionary, &data.train, &data.eval, &setup.fit, &setup.metrics),
        || score("local", robot_local_predictor(&setup)?, None, &data.eval, &setup.metrics),
    );
    let (llp, local) = (llp?, local?);
    let x0 = initial_state(&setup, None);
    let (llp_ctl, local_ctl) = rayon::join(
        || mpc_run(&setup, &llp.predictor, &x0),
        || mpc_run(&setup, &local.predictor, &x0),
    );
    let (llp_ctl, local_ctl) = (llp_ctl?, local_ctl?);

    let within = [&llp_ctl, &local_ctl]
        .iter()
        .filter_map(|c| c.result.as_ref())
        .all(|r| inputs_within_bounds(&setup, r));
    let lp = local.evaluation.prediction;
    let report = RobotBaselineReport {
        train_trajectories: data.train.len(),
        eval_trajectories: data.eval.len(),
        llp: llp_ctl.summary(&llp),
        local: local_ctl.summary(&local),
        prediction_improvement: (lp - llp.evaluation.prediction) / lp,
        inputs_within_bounds: within,
    };

    sink.write("training_trajectories.csv", &trajectories_csv(&data.train))?;
    for (s, c) in [(&llp, &llp_ctl), (&local, &local_ctl)] {
        if let Some(r) = &c.result {
            sink.write(&format!("closed_loop_{}.csv", s.name), &r.to_csv())?;
        }
        sink.write(&format!("predictor_{}.json", s.name), &s.predictor.to_json()?)?;
    }
    let mut metrics = format!("{}\n", crate::metrics::EvaluationReport::CSV_HEADER);
    for s in [&local, &llp] {
        metrics.push_str(&s.evaluation.csv_row("robot-baseline", &s.name));
        metrics.push('\n');
    }
    sink.write("metrics.csv", &metrics)?;
    sink.write_json("report.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRun {
    pub predictor: String,
    pub initial_distance: f64,
    pub success: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingScores {
    pub local: f64,
    pub full_state: f64,
    pub reduced: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotCouplingReport {
    pub runs: Vec<CouplingRun>,
    pub scores: CouplingScores,
}

impl RobotCouplingReport {
    pub fn run(&self, predictor: &str, s0: f64) -> Option<&CouplingRun> {
        self.runs
            .iter()
            .find(|r| r.predictor == predictor && r.initial_distance == s0)
    }

    /// Full-state map works from the origin only; the reduced map works from
    /// every distance; full-state coupling is at least ten times the local one.
    pub fn reproduced(&self) -> bool {
        let ok = |p: &str, s: f64| self.run(p, s).map(|r| r.success);
        let distances: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| r.predictor == "full_state")
            .map(|r| r.initial_distance)
            .collect();
        let origin_ok = ok("full_state", 0.0) == Some(true);
        let far_fails = distances
            .iter()
            .filter(|&&s| s != 0.0)
            .all(|&s| ok("full_state", s) == Some(false));
        let reduced_ok = self.runs.iter().filter(|r| r.predictor == "reduced").all(|r| r.success);
        origin_ok
            && far_fails
            && reduced_ok
            && self.scores.full_state > 0.0
            && self.scores.full_state >= 10.0 * self.scores.local
    }
}

pub fn robot_pathology_coupling(cfg: &ExperimentConfig, sink: &mut OutputSink) -> Result<RobotCouplingReport> {
    let setup = RobotSetup::resolve(cfg)?;
    let data = robot_data(&setup)?;
    let fitted: Vec<ScoredPredictor> = [("full_state", &setup.full_dictionary), ("reduced", &setup.dictionary)]
        .par_iter()
        .map(|(name, d)| fit_and_score(name, d, &data.train, &data.eval, &setup.fit, &setup.metrics))
        .collect::<Result<_>>()?;
    let local = robot_local_predictor(&setup)?;

    let jobs: Vec<(usize, f64)> = (0..fitted.len())
        .flat_map(|i| setup.closed_loop.initial_distances.iter().map(move |&s| (i, s)))
        .collect();
    let outcomes: Vec<ControlOutcome> = jobs
        .par_iter()
        .map(|&(i, s)| mpc_run(&setup, &fitted[i].predictor, &initial_state(&setup, Some(s))))
        .collect::<Result<_>>()?;

    let local_c = coupling_report(&local, &INVARIANT_STATES)?;
    let full_c = coupling_report(&fitted[0].predictor, &INVARIANT_STATES)?;
    let reduced_c = coupling_report(&fitted[1].predictor, &INVARIANT_STATES)?;
    let runs = jobs
        .iter()
        .zip(&outcomes)
        .map(|(&(i, s), o)| CouplingRun {
            predictor: fitted[i].name.clone(),
            initial_distance: s,
            success: o.success,
            failure: o.failure.clone(),
        })
        .collect();
    let report = RobotCouplingReport {
        runs,
        scores: CouplingScores {
            local: local_c.score,
            full_state: full_c.score,
            reduced: reduced_c.score,
        },
    };

    let heat = |c: &CouplingReport, p: &LiftedLinearPredictor| c.heatmap_csv(&state_labels(p));
    sink.write("heatmap_A_local.csv", &heat(&local_c, &local))?;
    sink.write("heatmap_A_full_state.csv", &heat(&full_c, &fitted[0].predictor))?;
    sink.write("heatmap_A_reduced.csv", &heat(&reduced_c, &fitted[1].predictor))?;
    for (&(i, s), o) in jobs.iter().zip(&outcomes) {
        if let Some(r) = &o.result {
            sink.write(&format!("closed_loop_{}_s0_{s}.csv", fitted[i].name), &r.to_csv())?;
        }
    }
    for f in &fitted {
        sink.write(&format!("predictor_{}.json", f.name), &f.predictor.to_json()?)?;
    }
    sink.write_json("report.json", &report)?;
    Ok(report)
}

pub(crate) fn finish_robot(sink: OutputSink, name: &str, cfg: &ExperimentConfig) -> Result<Manifest> {
    let setup = RobotSetup::resolve(cfg)?;
    sink.finish(name, setup.seed, &setup)
}
