//! Pieces shared by the experiments: fitting one predictor, scoring it and
//! closing the loop with it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::{run_closed_loop, swing_up_success, ClosedLoopResult, LqrController, LqrSpec, LqrWeights};
use crate::datagen::assemble;
use crate::dynamics::{ContinuousSystem, Trajectory};
use crate::edmd::{fit_with, predict_llp, FitOptions, FitReport, LiftedLinearPredictor};
use crate::error::Result;
use crate::lifting::{make_dictionary, DictionarySpec};
use crate::metrics::{evaluate, EvaluationReport, MetricSpec};

use super::config::ClosedLoopSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub projected: f64,
    pub lifted: f64,
    pub prediction: f64,
    pub horizon: usize,
    pub scaled: bool,
}

impl From<&EvaluationReport> for MetricSummary {
    fn from(r: &EvaluationReport) -> Self {
        Self {
            projected: r.projected,
            lifted: r.lifted,
            prediction: r.prediction,
            horizon: r.horizon,
            scaled: r.scaling.is_some(),
        }
    }
}

/// One predictor in a comparison, and how its controller fared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub name: String,
    pub lifted_dim: usize,
    pub metrics: MetricSummary,
    pub fit: Option<FitReport>,
    pub success: bool,
    /// Accumulated quadratic cost on the true states; absent for failed runs.
    pub cost: Option<f64>,
    pub failure: Option<String>,
}

/// A fitted or linearized predictor together with its evaluation.
#[derive(Debug, Clone)]
pub struct ScoredPredictor {
    pub name: String,
    pub predictor: LiftedLinearPredictor,
    pub fit: Option<FitReport>,
    pub evaluation: EvaluationReport,
}

pub fn fit_and_score(
    name: &str,
    dictionary: &DictionarySpec,
    train: &[Trajectory],
    eval: &[Trajectory],
    fit: &FitOptions,
    metrics: &MetricSpec,
) -> Result<ScoredPredictor> {
    let map = make_dictionary(dictionary)?;
    let ds = assemble(train, &map)?;
    let (predictor, report) = fit_with(&ds, fit)?;
    drop(ds);
    score(name, predictor, Some(report), eval, metrics)
}

pub fn score(
    name: &str,
    predictor: LiftedLinearPredictor,
    fit: Option<FitReport>,
    eval: &[Trajectory],
    metrics: &MetricSpec,
) -> Result<ScoredPredictor> {
    let eval_ds = assemble(eval, &predictor.map)?;
    let evaluation = evaluate(&predictor, &eval_ds, eval, metrics)?;
    Ok(ScoredPredictor {
        name: name.to_string(),
        predictor,
        fit,
        evaluation,
    })
}

/// Result of driving the plant with a controller built on one predictor.
#[derive(Debug, Clone)]
pub struct ControlOutcome {
    pub success: bool,
    pub cost: Option<f64>,
    pub failure: Option<String>,
    pub result: Option<ClosedLoopResult>,
}

impl ControlOutcome {
    pub fn design_failed(reason: String) -> Self {
        Self {
            success: false,
            cost: None,
            failure: Some(reason),
            result: None,
        }
    }

    pub fn summary(&self, scored: &ScoredPredictor) -> ArmSummary {
        ArmSummary {
            name: scored.name.clone(),
            lifted_dim: scored.predictor.lifted_dim(),
            metrics: MetricSummary::from(&scored.evaluation),
            fit: scored.fit.clone(),
            success: self.success,
            cost: self.cost,
            failure: self.failure.clone(),
        }
    }
}

pub fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(v))
}

/// LQR swing-up with state weights on the original coordinates.
pub fn lqr_swing_up<S: ContinuousSystem + ?Sized>(
    plant: &S,
    predictor: &LiftedLinearPredictor,
    weights: &LqrWeights,
    closed_loop: &ClosedLoopSpec,
) -> Result<ControlOutcome> {
    let spec = LqrSpec::from_weights(predictor, weights)?;
    let mut controller = match LqrController::design(predictor.clone(), &spec, None) {
        Ok(c) => c,
        Err(e) => return Ok(ControlOutcome::design_failed(format!("lqr design: {e}"))),
    };
    let x0 = DVector::from_column_slice(&closed_loop.x0);
    let result = run_closed_loop(
        plant,
        &mut controller,
        &x0,
        closed_loop.duration,
        closed_loop.dt,
        &closed_loop.failure,
    )?;
    let success = swing_up_success(&result);
    let cost = result.completed().then(|| result.quadratic_cost(&diag(&weights.q_diag), &diag(&weights.r_diag)));
    Ok(ControlOutcome {
        success,
        cost,
        failure: result
            .failure
            .as_ref()
            .map(|f| format!("{} at t = {:.2} s", f.reason, f.time))
            .or_else(|| (!success).then(|| "did not settle at the upright position".to_string())),
        result: Some(result),
    })
}

/// Rollouts of several predictors against one recorded trajectory.
pub fn prediction_comparison_csv(traj: &Trajectory, predictors: &[&ScoredPredictor], horizon: usize) -> Result<String> {
    let horizon = horizon.min(traj.len());
    let n = traj.state_dim();
    let mut header = String::from("t");
    for i in 1..=n {
        header.push_str(&format!(",x{i}"));
    }
    let mut rollouts = Vec::with_capacity(predictors.len());
    for p in predictors {
        for i in 1..=n {
            header.push_str(&format!(",{}_x{i}", p.name));
        }
        rollouts.push(predict_llp(&p.predictor, &traj.states[0], &traj.inputs[..horizon])?);
    }
    let mut out = header;
    out.push('\n');
    for k in 0..=horizon {
        out.push_str(&format!("{}", traj.time(k)));
        for v in traj.states[k].iter() {
            out.push_str(&format!(",{v}"));
        }
        for r in &rollouts {
            for v in r[k].iter() {
                out.push_str(&format!(",{v}"));
            }
        }
        out.push('\n');
    }
    Ok(out)
}
