use nalgebra::DMatrix;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::lifting::LiftingMap;

/// Column-stacked snapshot pairs: column `j` is `(x_j, u_j, x_j+)` and its lifts.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotDataset {
    pub x: DMatrix<f64>,
    pub x_next: DMatrix<f64>,
    pub x_lift: DMatrix<f64>,
    pub y_lift: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub map: LiftingMap,
    pub dt: f64,
}

impl SnapshotDataset {
    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    pub fn state_dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn lifted_dim(&self) -> usize {
        self.x_lift.nrows()
    }

    /// Reorder columns; `order[j]` is the source column of output column `j`.
    pub fn permute_columns(&self, order: &[usize]) -> Self {
        let pick = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), order.len(), |i, j| m[(i, order[j])]);
        Self {
            x: pick(&self.x),
            x_next: pick(&self.x_next),
            x_lift: pick(&self.x_lift),
            y_lift: pick(&self.y_lift),
            u: pick(&self.u),
            map: self.map.clone(),
            dt: self.dt,
        }
    }
}

/// Stack every transition of every trajectory into snapshot matrices.
pub fn assemble(trajs: &[Trajectory], map: &LiftingMap) -> Result<SnapshotDataset> {
    let first = trajs
        .iter()
        .find(|t| !t.is_empty())
        .ok_or_else(|| Error::InvalidInput("assemble needs at least one non-empty trajectory".into()))?;
    let (n, p, dt) = (first.state_dim(), first.input_dim(), first.dt);
    if n != map.state_dim() {
        return Err(Error::Dimension(format!(
            "trajectories have {n} states, lifting map expects {}",
            map.state_dim()
        )));
    }
    for (i, t) in trajs.iter().enumerate().filter(|(_, t)| !t.is_empty()) {
        if t.state_dim() != n || t.input_dim() != p || (t.dt - dt).abs() > 1e-12 {
            return Err(Error::Dimension(format!(
                "trajectory {i} has (n, p, dt) = ({}, {}, {}), expected ({n}, {p}, {dt})",
                t.state_dim(),
                t.input_dim(),
                t.dt
            )));
        }
    }
    let total: usize = trajs.iter().map(|t| t.len()).sum();
    let mut x = DMatrix::zeros(n, total);
    let mut x_next = DMatrix::zeros(n, total);
    let mut u = DMatrix::zeros(p, total);
    let mut col = 0;
    for t in trajs {
        for k in 0..t.len() {
            x.set_column(col, &t.states[k]);
            x_next.set_column(col, &t.states[k + 1]);
            u.set_column(col, &t.inputs[k]);
            col += 1;
        }
    }
    let x_lift = map.lift_columns(&x);
    let y_lift = map.lift_columns(&x_next);
    Ok(SnapshotDataset {
        x,
        x_next,
        x_lift,
        y_lift,
        u,
        map: map.clone(),
        dt,
    })
}
