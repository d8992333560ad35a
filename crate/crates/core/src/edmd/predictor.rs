use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lifting::LiftingMap;
use crate::numerics::ensure_finite;

/// `z0 = Psi(x0)`, `z+ = A z + B u`, `x_hat = C z`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedLinearPredictor {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub map: LiftingMap,
    /// Sampling period in seconds.
    pub dt: f64,
}

impl LiftedLinearPredictor {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        map: LiftingMap,
        dt: f64,
    ) -> Result<Self> {
        let big_n = map.lifted_dim();
        let n = map.state_dim();
        if a.shape() != (big_n, big_n) || b.nrows() != big_n || c.shape() != (n, big_n) {
            return Err(Error::Dimension(format!(
                "predictor A {:?}, B {:?}, C {:?} for N = {big_n}, n = {n}",
                a.shape(),
                b.shape(),
                c.shape()
            )));
        }
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        ensure_finite(&c, "C")?;
        Ok(Self { a, b, c, map, dt })
    }

    pub fn state_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn lifted_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn lift(&self, x: &DVector<f64>) -> DVector<f64> {
        self.map.lift(x)
    }

    pub fn step(&self, z: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * z + &self.b * u
    }

    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.c * z
    }
}

/// Common access for rollouts: a linear drift plus an input term.
pub trait LiftedModel {
    fn lifting(&self) -> &LiftingMap;
    fn drift(&self) -> &DMatrix<f64>;
    fn output(&self) -> &DMatrix<f64>;
    fn input_dim(&self) -> usize;
    fn input_term(&self, z: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;
}

impl LiftedModel for LiftedLinearPredictor {
    fn lifting(&self) -> &LiftingMap {
        &self.map
    }
    fn drift(&self) -> &DMatrix<f64> {
        &self.a
    }
    fn output(&self) -> &DMatrix<f64> {
        &self.c
    }
    fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    fn input_term(&self, _z: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.b * u
    }
}

fn check_rollout<M: LiftedModel + ?Sized>(
    model: &M,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
) -> Result<()> {
    if x0.len() != model.lifting().state_dim() {
        return Err(Error::Dimension(format!(
            "initial state has {} entries, predictor expects {}",
            x0.len(),
            model.lifting().state_dim()
        )));
    }
    if let Some((k, u)) = inputs.iter().enumerate().find(|(_, u)| u.len() != model.input_dim()) {
        return Err(Error::Dimension(format!("input {k} has {} entries", u.len())));
    }
    Ok(())
}

fn rollout<M: LiftedModel + ?Sized>(
    model: &M,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
    relift: bool,
) -> Result<Vec<DVector<f64>>> {
    check_rollout(model, x0, inputs)?;
    let c = model.output();
    let mut z = model.lifting().lift(x0);
    let mut out = Vec::with_capacity(inputs.len() + 1);
    out.push(c * &z);
    for u in inputs {
        let drift_state = if relift {
            model.lifting().lift(&(c * &z))
        } else {
            z.clone()
        };
        z = model.drift() * drift_state + model.input_term(&z, u);
        out.push(c * &z);
    }
    Ok(out)
}

/// Predicted states `x_hat_0 .. x_hat_Np`, lifting only the initial state.
pub fn predict_llp(
    pred: &LiftedLinearPredictor,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    rollout(pred, x0, inputs, false)
}

/// Bilinear rollout `z+ = A z + (B z) u`.
pub fn predict_bilinear<M: LiftedModel + ?Sized>(
    pred: &M,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    rollout(pred, x0, inputs, false)
}

/// Project-and-lift rollout: `z~ = Psi(C z)`, `z+ = A z~ + input_term(z, u)`.
///
/// For a [`super::BilinearPredictor`] the input term is `(B z) u`; for a
/// linear predictor it is `B u`.
pub fn predict_project_and_lift<M: LiftedModel + ?Sized>(
    pred: &M,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    rollout(pred, x0, inputs, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{local_linearization, simulate, LinearSystem};
    use crate::edmd::fit;
    use crate::lifting::{make_dictionary, DictionarySpec};
    use crate::testing::{dvec, linear_dataset, pendulum_sine_dataset, stable_pair};
    use nalgebra::dmatrix;

    fn inputs(p: usize, len: usize) -> Vec<DVector<f64>> {
        (0..len)
            .map(|k| DVector::from_fn(p, |j, _| ((k + 3 * j) as f64 * 0.37).sin()))
            .collect()
    }

    #[test]
    fn zero_dynamics_hold_the_state() {
        let map = make_dictionary(&DictionarySpec::sine(2, 0)).unwrap();
        let c = map.selector().unwrap();
        let pred = LiftedLinearPredictor::new(DMatrix::identity(3, 3), DMatrix::zeros(3, 1), c, map, 0.01).unwrap();
        let x0 = dvec(&[0.4, -0.2]);
        for x in predict_llp(&pred, &x0, &inputs(1, 20)).unwrap() {
            assert_eq!(x, x0);
        }
    }

    #[test]
    fn local_linearization_of_linear_system_matches_simulation() {
        let sys = LinearSystem::new(dmatrix![0.0, 1.0; -2.0, -0.3], dmatrix![0.0; 1.0]).unwrap();
        let lin = local_linearization(&sys, &DVector::zeros(2), &DVector::zeros(1), 0.01).unwrap();
        let u = inputs(1, 100);
        let x0 = dvec(&[1.0, 0.0]);
        let sim = simulate(&sys, &x0, &u, 0.01).unwrap();
        let pred = predict_llp(&lin.predictor, &x0, &u).unwrap();
        for (a, b) in sim.states.iter().zip(&pred) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn recovered_predictor_matches_generator() {
        let (a0, b0) = stable_pair(4, 2, 7);
        let pred = fit(&linear_dataset(&a0, &b0, 500, 8)).unwrap();
        let u = inputs(2, 50);
        let mut x = dvec(&[1.0, -1.0, 0.5, 0.2]);
        let rollout = predict_llp(&pred, &x, &u).unwrap();
        for (k, uk) in u.iter().enumerate() {
            x = &a0 * &x + &b0 * uk;
            assert!((&x - &rollout[k + 1]).norm() < 1e-6);
        }
    }

    #[test]
    fn project_and_lift_is_plain_rollout_for_coordinates() {
        let (a0, b0) = stable_pair(3, 1, 2);
        let pred = fit(&linear_dataset(&a0, &b0, 100, 3)).unwrap();
        let u = inputs(1, 30);
        let x0 = dvec(&[0.1, 0.2, 0.3]);
        let a = predict_llp(&pred, &x0, &u).unwrap();
        let b = predict_project_and_lift(&pred, &x0, &u).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn project_and_lift_differs_for_sine_map() {
        let pred = fit(&pendulum_sine_dataset(20, 1)).unwrap();
        let u = inputs(1, 50);
        let x0 = dvec(&[2.5, 0.0]);
        let a = predict_llp(&pred, &x0, &u).unwrap();
        let b = predict_project_and_lift(&pred, &x0, &u).unwrap();
        assert!((&a[1] - &b[1]).norm() < 1e-12);
        assert!((&a[50] - &b[50]).norm() > 1e-6);
    }

    #[test]
    fn rejects_bad_dimensions() {
        let map = make_dictionary(&DictionarySpec::identity(2)).unwrap();
        assert!(matches!(
            LiftedLinearPredictor::new(DMatrix::identity(3, 3), DMatrix::zeros(3, 1), DMatrix::zeros(2, 3), map.clone(), 0.01),
            Err(Error::Dimension(_))
        ));
        let pred = LiftedLinearPredictor::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 1), DMatrix::identity(2, 2), map, 0.01).unwrap();
        assert!(predict_llp(&pred, &dvec(&[1.0]), &inputs(1, 2)).is_err());
        assert!(predict_llp(&pred, &dvec(&[1.0, 0.0]), &inputs(2, 2)).is_err());
    }
}
