//! Predictor quality metrics.

mod scaling;

pub use scaling::{ScalingMode, StateScaling};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::datagen::SnapshotDataset;
use crate::dynamics::Trajectory;
use crate::edmd::{predict_llp, LiftedLinearPredictor};
use crate::error::{Error, Result};

/// Pairwise (cascade) summation; the reduction order depends only on the length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        pairwise_sum(values) / values.len() as f64
    }
}

fn check_dataset(pred: &LiftedLinearPredictor, ds: &SnapshotDataset) -> Result<()> {
    if pred.map != ds.map || pred.input_dim() != ds.input_dim() {
        return Err(Error::Dimension("predictor and dataset use different lifting maps or inputs".into()));
    }
    Ok(())
}

/// Which states enter a metric, and how they are scaled. The scaling is
/// indexed by full state.
#[derive(Debug, Clone)]
pub struct StateView<'a> {
    pub states: Option<&'a [usize]>,
    pub scaling: Option<&'a StateScaling>,
}

impl<'a> StateView<'a> {
    pub const RAW: StateView<'static> = StateView {
        states: None,
        scaling: None,
    };

    fn error_vector(&self, truth: &DVector<f64>, estimate: &DVector<f64>) -> DVector<f64> {
        let d = truth - estimate;
        let d = match self.scaling {
            Some(s) => s.apply_delta(&d),
            None => d,
        };
        match self.states {
            Some(idx) => DVector::from_iterator(idx.len(), idx.iter().map(|&i| d[i])),
            None => d,
        }
    }
}

/// Per-snapshot one-step errors `||x+ - C (A Psi(x) + B u)||`.
pub fn projected_errors(pred: &LiftedLinearPredictor, ds: &SnapshotDataset, view: &StateView) -> Result<Vec<f64>> {
    check_dataset(pred, ds)?;
    let z_next = &pred.a * &ds.x_lift + &pred.b * &ds.u;
    let x_hat = &pred.c * z_next;
    Ok((0..ds.len())
        .map(|j| {
            view.error_vector(&ds.x_next.column(j).clone_owned(), &x_hat.column(j).clone_owned())
                .norm()
        })
        .collect())
}

/// Mean one-step error on the original states.
pub fn projected_error(pred: &LiftedLinearPredictor, ds: &SnapshotDataset, view: &StateView) -> Result<f64> {
    Ok(mean(&projected_errors(pred, ds, view)?))
}

/// Per-snapshot lifted errors `||Psi(x+) - (A Psi(x) + B u)||`.
pub fn lifted_errors(pred: &LiftedLinearPredictor, ds: &SnapshotDataset) -> Result<Vec<f64>> {
    check_dataset(pred, ds)?;
    let resid = &ds.y_lift - &pred.a * &ds.x_lift - &pred.b * &ds.u;
    Ok(resid.column_iter().map(|c| c.norm()).collect())
}

/// Mean one-step error on the full lifted state. Lifted coordinates are
/// never rescaled.
pub fn lifted_error(pred: &LiftedLinearPredictor, ds: &SnapshotDataset) -> Result<f64> {
    Ok(mean(&lifted_errors(pred, ds)?))
}

/// Horizon-summed squared rollout error of each trajectory.
pub fn prediction_errors(
    pred: &LiftedLinearPredictor,
    trajs: &[Trajectory],
    horizon: usize,
    view: &StateView,
) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::InvalidInput("prediction horizon must be at least 1".into()));
    }
    trajs
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.len() < horizon {
                return Err(Error::InvalidInput(format!(
                    "evaluation trajectory {i} has {} steps, horizon is {horizon}",
                    t.len()
                )));
            }
            let x_hat = predict_llp(pred, &t.states[0], &t.inputs[..horizon])?;
            let terms: Vec<f64> = (1..=horizon)
                .map(|k| view.error_vector(&t.states[k], &x_hat[k]).norm_squared())
                .collect();
            Ok(pairwise_sum(&terms))
        })
        .collect()
}

/// Mean over trajectories of the horizon-summed squared rollout error.
pub fn prediction_error(
    pred: &LiftedLinearPredictor,
    trajs: &[Trajectory],
    horizon: usize,
    view: &StateView,
) -> Result<f64> {
    if trajs.is_empty() {
        return Err(Error::InvalidInput("prediction error needs at least one trajectory".into()));
    }
    Ok(mean(&prediction_errors(pred, trajs, horizon, view)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricSpec {
    /// Rollout horizon in steps.
    pub horizon: usize,
    pub scaling: ScalingMode,
    /// Restrict the state-space metrics to these states.
    pub states: Option<Vec<usize>>,
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self {
            horizon: 50,
            scaling: ScalingMode::UnitInterval,
            states: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub projected: f64,
    pub lifted: f64,
    pub prediction: f64,
    pub horizon: usize,
    /// `None` when metrics use raw states.
    pub scaling: Option<StateScaling>,
    pub states: Option<Vec<usize>>,
    pub per_trajectory_prediction: Vec<f64>,
}

impl EvaluationReport {
    pub const CSV_HEADER: &'static str = "experiment,dictionary,eps_projected,eps_lifted,eps_prediction,horizon";

    pub fn csv_row(&self, experiment: &str, dictionary: &str) -> String {
        format!(
            "{experiment},{dictionary},{},{},{},{}",
            self.projected, self.lifted, self.prediction, self.horizon
        )
    }
}

/// Resolve the scaling for an evaluation set.
pub fn resolve_scaling(mode: &ScalingMode, eval: &[Trajectory]) -> Result<Option<StateScaling>> {
    match mode {
        ScalingMode::Raw => Ok(None),
        ScalingMode::UnitInterval => StateScaling::fit_trajectories(eval).map(Some),
        ScalingMode::Custom { offset, scale } => StateScaling::custom(offset.clone(), scale.clone()).map(Some),
    }
}

/// All three metrics of `pred` on an evaluation set. `ds` must be the
/// evaluation trajectories assembled with the predictor's own map.
pub fn evaluate(
    pred: &LiftedLinearPredictor,
    ds: &SnapshotDataset,
    eval: &[Trajectory],
    spec: &MetricSpec,
) -> Result<EvaluationReport> {
    let scaling = resolve_scaling(&spec.scaling, eval)?;
    if let Some(s) = &scaling {
        if s.dim() != pred.state_dim() {
            return Err(Error::Dimension("scaling dimension differs from the state dimension".into()));
        }
    }
    let view = StateView {
        states: spec.states.as_deref(),
        scaling: scaling.as_ref(),
    };
    if let Some(idx) = view.states {
        if idx.iter().any(|&i| i >= pred.state_dim()) {
            return Err(Error::InvalidInput("metric state index out of range".into()));
        }
    }
    let per_traj = prediction_errors(pred, eval, spec.horizon, &view)?;
    let report = EvaluationReport {
        projected: projected_error(pred, ds, &view)?,
        lifted: lifted_error(pred, ds)?,
        prediction: mean(&per_traj),
        horizon: spec.horizon,
        scaling,
        states: spec.states.clone(),
        per_trajectory_prediction: per_traj,
    };
    if ![report.projected, report.lifted, report.prediction]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0)
    {
        return Err(Error::NonConvergence {
            what: "metric evaluation (non-finite error)",
            iterations: 0,
            residual: f64::INFINITY,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::assemble;
    use crate::lifting::{make_dictionary, DictionarySpec};
    use nalgebra::{dmatrix, dvector, DMatrix};

    fn scalar_predictor(a: f64) -> LiftedLinearPredictor {
        let map = make_dictionary(&DictionarySpec::identity(1)).unwrap();
        LiftedLinearPredictor::new(dmatrix![a], dmatrix![1.0], dmatrix![1.0], map, 0.01).unwrap()
    }

    fn traj(states: &[f64], inputs: &[f64]) -> Trajectory {
        Trajectory::new(
            0.01,
            states.iter().map(|&v| dvector![v]).collect(),
            inputs.iter().map(|&v| dvector![v]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_snapshot_error() {
        let p = scalar_predictor(1.0);
        let ds = assemble(&[traj(&[1.0, 1.5], &[0.0])], &p.map).unwrap();
        assert!((projected_error(&p, &ds, &StateView::RAW).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mean_of_two_snapshots() {
        let p = scalar_predictor(1.0);
        let ds = assemble(&[traj(&[0.0, 1.0], &[0.0]), traj(&[0.0, -3.0], &[0.0])], &p.map).unwrap();
        assert!((projected_error(&p, &ds, &StateView::RAW).unwrap() - 2.0).abs() < 1e-15);
        assert!((lifted_error(&p, &ds).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn one_step_prediction_error_is_squared() {
        let p = scalar_predictor(1.0);
        let e = 0.3;
        let t = traj(&[1.0, 1.0 + e], &[0.0]);
        let v = prediction_error(&p, &[t], 1, &StateView::RAW).unwrap();
        assert!((v - e * e).abs() < 1e-15);
    }

    #[test]
    fn short_trajectory_is_named() {
        let p = scalar_predictor(1.0);
        let t = traj(&[1.0, 1.0], &[0.0]);
        match prediction_error(&p, &[t.clone(), t], 2, &StateView::RAW) {
            Err(Error::InvalidInput(msg)) => assert!(msg.contains("trajectory 0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lifted_error_matches_residual_columns() {
        let map = make_dictionary(&DictionarySpec::sine(2, 0)).unwrap();
        let a = DMatrix::from_fn(3, 3, |i, j| 0.1 * (i as f64 + 1.0) - 0.05 * j as f64);
        let b = dmatrix![0.0; 1.0; 0.3];
        let c = map.selector().unwrap();
        let p = LiftedLinearPredictor::new(a, b, c, map.clone(), 0.01).unwrap();
        let t = Trajectory::new(
            0.01,
            vec![dvector![0.1, 0.2], dvector![0.3, -0.1], dvector![1.0, 0.0]],
            vec![dvector![1.0], dvector![-0.5]],
        )
        .unwrap();
        let ds = assemble(&[t], &map).unwrap();
        let resid = &ds.y_lift - &p.a * &ds.x_lift - &p.b * &ds.u;
        let direct = (resid.column(0).norm() + resid.column(1).norm()) / 2.0;
        assert!((lifted_error(&p, &ds).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
    }

    #[test]
    fn subset_view_ignores_other_states() {
        let view = StateView {
            states: Some(&[1]),
            scaling: None,
        };
        let e = view.error_vector(&dvector![10.0, 2.0], &dvector![0.0, 1.0]);
        assert_eq!(e, dvector![1.0]);
    }
}
