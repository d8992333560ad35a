//! Observable dictionaries and the lifting map `z = Psi(x)`.

mod dictionary;
mod observable;

pub use dictionary::{make_dictionary, DictionaryKind, DictionarySpec};
pub use observable::{gaussian_rbf, monomial, tps_rbf, Observable};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ordered list of observables mapping `R^n -> R^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftingMap {
    observables: Vec<Observable>,
    state_dim: usize,
    /// `coordinate_rows[i]` is the position of the coordinate observable for
    /// state `i`, when present.
    coordinate_rows: Vec<Option<usize>>,
    spec: DictionarySpec,
}

impl LiftingMap {
    pub fn new(state_dim: usize, observables: Vec<Observable>, spec: DictionarySpec) -> Result<Self> {
        if observables.is_empty() {
            return Err(Error::Config("lifting map needs at least one observable".into()));
        }
        let mut coordinate_rows = vec![None; state_dim];
        for (pos, obs) in observables.iter().enumerate() {
            obs.validate()?;
            let idx = obs.state_index();
            if idx >= state_dim {
                return Err(Error::Dimension(format!(
                    "observable {pos} reads state {idx} of a {state_dim}-state system"
                )));
            }
            if let Observable::Coordinate { index } = obs {
                coordinate_rows[*index].get_or_insert(pos);
            }
        }
        Ok(Self {
            observables,
            state_dim,
            coordinate_rows,
            spec,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn lifted_dim(&self) -> usize {
        self.observables.len()
    }

    pub fn observables(&self) -> &[Observable] {
        &self.observables
    }

    pub fn spec(&self) -> &DictionarySpec {
        &self.spec
    }

    /// Lifted-state position of the coordinate observable for `state`.
    pub fn coordinate_row(&self, state: usize) -> Option<usize> {
        self.coordinate_rows.get(state).copied().flatten()
    }

    /// States that appear verbatim as observables.
    pub fn coordinate_states(&self) -> Vec<usize> {
        (0..self.state_dim)
            .filter(|&i| self.coordinate_rows[i].is_some())
            .collect()
    }

    pub fn has_all_coordinates(&self) -> bool {
        self.coordinate_rows.iter().all(Option::is_some)
    }

    /// `C` picking the coordinate observables, if every state is present.
    pub fn selector(&self) -> Option<DMatrix<f64>> {
        if !self.has_all_coordinates() {
            return None;
        }
        let mut c = DMatrix::zeros(self.state_dim, self.lifted_dim());
        for (i, row) in self.coordinate_rows.iter().enumerate() {
            c[(i, row.expect("checked above"))] = 1.0;
        }
        Some(c)
    }

    pub fn lift(&self, x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.state_dim);
        DVector::from_iterator(
            self.observables.len(),
            self.observables.iter().map(|o| o.eval(x)),
        )
    }

    pub fn try_lift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.state_dim {
            return Err(Error::Dimension(format!(
                "lift expects {} states, got {}",
                self.state_dim,
                x.len()
            )));
        }
        Ok(self.lift(x))
    }

    /// Lift every column of `states` (`n x K` to `N x K`).
    pub fn lift_columns(&self, states: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.lifted_dim(), states.ncols());
        for (j, col) in states.column_iter().enumerate() {
            let x = col.clone_owned();
            for (i, o) in self.observables.iter().enumerate() {
                out[(i, j)] = o.eval(&x);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn pendulum_sine() -> LiftingMap {
        make_dictionary(&DictionarySpec::sine(2, 0)).unwrap()
    }

    #[test]
    fn sine_map_values() {
        let m = pendulum_sine();
        assert_eq!(m.lift(&dvector![FRAC_PI_2, 0.0]), dvector![FRAC_PI_2, 0.0, 1.0]);
        let z = m.lift(&dvector![PI, 0.0]);
        assert_eq!(&z.as_slice()[..2], &[PI, 0.0]);
        assert!(z[2].abs() < 1e-15);
    }

    #[test]
    fn robot_velocity_map_at_zero_tilt() {
        let m = make_dictionary(&DictionarySpec::robot_velocity_sine()).unwrap();
        let x = dvector![0.4, -0.2, 0.7, 12.0, 0.0, 3.0];
        assert_eq!(m.lift(&x), dvector![0.4, -0.2, 0.7, 0.0, 0.0]);
        assert!(!m.has_all_coordinates());
        assert_eq!(m.coordinate_states(), vec![0, 1, 2, 4]);
        assert!(m.selector().is_none());
    }

    #[test]
    fn selector_returns_state() {
        let m = pendulum_sine();
        let c = m.selector().unwrap();
        let x = dvector![0.3, -1.2];
        assert_eq!(&c * m.lift(&x), x);
    }

    #[test]
    fn rejects_out_of_range_observable() {
        let r = LiftingMap::new(
            1,
            vec![Observable::Coordinate { index: 1 }],
            DictionarySpec::identity(1),
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
        assert!(pendulum_sine().try_lift(&dvector![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn coordinates_project_back_exactly(phi in -10.0f64..10.0, omega in -10.0f64..10.0, seed in 0u64..50) {
            for kind in [DictionaryKind::Tps, DictionaryKind::Poly, DictionaryKind::Gauss, DictionaryKind::Sine] {
                let mut spec = DictionarySpec::pendulum(kind, 20);
                spec.seed = seed;
                let m = make_dictionary(&spec).unwrap();
                let x = dvector![phi, omega];
                let z = m.lift(&x);
                prop_assert_eq!(z[m.coordinate_row(0).unwrap()], phi);
                prop_assert_eq!(z[m.coordinate_row(1).unwrap()], omega);
                prop_assert_eq!(m.lift(&x), z);
            }
        }
    }
}
