use nalgebra::DMatrix;
use serde::Serialize;

use super::predictor::LiftedLinearPredictor;
use crate::error::{Error, Result};

/// Magnitudes of `A` in the columns of states the dynamics must not depend on.
#[derive(Debug, Clone, Serialize)]
pub struct CouplingReport {
    /// Lifted-state positions of the invariant states present in the map.
    pub columns: Vec<usize>,
    /// `(row, column, |A|)` for every checked entry.
    pub entries: Vec<(usize, usize, f64)>,
    /// Largest checked magnitude; `0` when no invariant state is lifted.
    pub score: f64,
    /// Full `|A|` for heatmaps.
    pub magnitudes: DMatrix<f64>,
}

impl CouplingReport {
    pub fn heatmap_csv(&self, labels: &[String]) -> String {
        let mut out = String::from("row\\col");
        for l in labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for i in 0..self.magnitudes.nrows() {
            out.push_str(labels.get(i).map(String::as_str).unwrap_or("?"));
            for j in 0..self.magnitudes.ncols() {
                out.push_str(&format!(",{}", self.magnitudes[(i, j)]));
            }
            out.push('\n');
        }
        out
    }
}

/// Checks every row of each invariant-state column except the state's own
/// (integrator) row.
pub fn coupling_report(pred: &LiftedLinearPredictor, invariant_states: &[usize]) -> Result<CouplingReport> {
    let n = pred.state_dim();
    if let Some(&bad) = invariant_states.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidInput(format!(
            "invariant state {bad} out of range for {n} states"
        )));
    }
    let magnitudes = pred.a.abs();
    let columns: Vec<usize> = invariant_states
        .iter()
        .filter_map(|&s| pred.map.coordinate_row(s))
        .collect();
    let mut entries = Vec::new();
    for &col in &columns {
        for row in (0..magnitudes.nrows()).filter(|&r| r != col) {
            entries.push((row, col, magnitudes[(row, col)]));
        }
    }
    let score = entries.iter().map(|e| e.2).fold(0.0, f64::max);
    Ok(CouplingReport {
        columns,
        entries,
        score,
        magnitudes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::assemble;
    use crate::dynamics::{local_linearization, Robot, RobotParams};
    use crate::lifting::{make_dictionary, DictionarySpec};
    use nalgebra::DVector;

    fn robot_local() -> LiftedLinearPredictor {
        let robot = Robot::new(RobotParams::default()).unwrap();
        local_linearization(&robot, &DVector::zeros(6), &DVector::zeros(2), 0.01)
            .unwrap()
            .predictor
    }

    #[test]
    fn local_robot_model_has_no_coupling() {
        let r = coupling_report(&robot_local(), &[3, 5]).unwrap();
        assert_eq!(r.columns, vec![3, 5]);
        assert!(r.score < 1e-8);
    }

    #[test]
    fn reduced_map_is_vacuously_clean() {
        let local = robot_local();
        let map = make_dictionary(&DictionarySpec::robot_velocity_sine()).unwrap();
        let n = map.lifted_dim();
        let trajs = vec![crate::dynamics::simulate(
            &Robot::new(RobotParams::default()).unwrap(),
            &DVector::zeros(6),
            &vec![DVector::from_element(2, 0.01); 5],
            0.01,
        )
        .unwrap()];
        let ds = assemble(&trajs, &map).unwrap();
        let pred = LiftedLinearPredictor::new(
            DMatrix::identity(n, n),
            DMatrix::zeros(n, 2),
            DMatrix::zeros(6, n),
            ds.map,
            local.dt,
        )
        .unwrap();
        let r = coupling_report(&pred, &[3, 5]).unwrap();
        assert!(r.columns.is_empty());
        assert_eq!(r.score, 0.0);
    }

    #[test]
    fn own_row_is_excluded() {
        let mut p = robot_local();
        p.a[(3, 3)] = 5.0;
        assert!(coupling_report(&p, &[3]).unwrap().score < 1e-8);
        p.a[(0, 3)] = 0.25;
        assert_eq!(coupling_report(&p, &[3]).unwrap().score, 0.25);
    }

    #[test]
    fn out_of_range_index() {
        assert!(coupling_report(&robot_local(), &[6]).is_err());
    }

    #[test]
    fn heatmap_has_one_row_per_lifted_state() {
        let r = coupling_report(&robot_local(), &[3, 5]).unwrap();
        let labels: Vec<String> = (0..6).map(|i| format!("x{i}")).collect();
        let csv = r.heatmap_csv(&labels);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], "row\\col,x0,x1,x2,x3,x4,x5");
        assert_eq!(lines[1].split(',').count(), 7);
    }
}
