use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::edmd::LiftedLinearPredictor;
use crate::error::{Error, Result};
use crate::numerics::{solve_dare, DEFAULT_DARE_MAX_ITER, DEFAULT_DARE_TOL};

/// Lifted-space LQR weights for `z'Qz + u'Ru + 2 z'Su`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrSpec {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

/// Diagonal weights on the original states, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LqrWeights {
    pub q_diag: Vec<f64>,
    pub r_diag: Vec<f64>,
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self {
            q_diag: vec![10.0, 1.0],
            r_diag: vec![0.1],
        }
    }
}

impl LqrSpec {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>, s: DMatrix<f64>) -> Result<Self> {
        let n = q.nrows();
        let p = r.nrows();
        if !q.is_square() || !r.is_square() || s.shape() != (n, p) {
            return Err(Error::Dimension(format!(
                "lqr Q {:?}, R {:?}, S {:?}",
                q.shape(),
                r.shape(),
                s.shape()
            )));
        }
        let sym = |m: &DMatrix<f64>| (m - m.transpose()).amax() <= 1e-10 * (1.0 + m.amax());
        if !sym(&q) || !sym(&r) {
            return Err(Error::InvalidInput("lqr Q and R must be symmetric".into()));
        }
        if q.symmetric_eigenvalues().min() < -1e-10 * (1.0 + q.amax()) {
            return Err(Error::InvalidInput("lqr Q must be positive semidefinite".into()));
        }
        if r.clone().cholesky().is_none() {
            return Err(Error::InvalidInput("lqr R must be positive definite".into()));
        }
        Ok(Self { q, r, s })
    }

    /// `Q = C' Q_x C`: penalize the original states only.
    pub fn output_weighted(pred: &LiftedLinearPredictor, q_x: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<Self> {
        if q_x.shape() != (pred.state_dim(), pred.state_dim()) || r.shape() != (pred.input_dim(), pred.input_dim()) {
            return Err(Error::Dimension("state or input weight has the wrong size".into()));
        }
        let mut q = pred.c.transpose() * q_x * &pred.c;
        let qt = q.transpose();
        q = (q + qt) * 0.5;
        Self::new(q, r.clone(), DMatrix::zeros(pred.lifted_dim(), pred.input_dim()))
    }

    pub fn from_weights(pred: &LiftedLinearPredictor, w: &LqrWeights) -> Result<Self> {
        let q_x = DMatrix::from_diagonal(&DVector::from_column_slice(&w.q_diag));
        let r = DMatrix::from_diagonal(&DVector::from_column_slice(&w.r_diag));
        Self::output_weighted(pred, &q_x, &r)
    }
}

/// Feedback gain `K` of `u = -K z` from the DARE on `(A, B)`.
pub fn lqr_gain(pred: &LiftedLinearPredictor, spec: &LqrSpec) -> Result<DMatrix<f64>> {
    if spec.q.nrows() != pred.lifted_dim() || spec.r.nrows() != pred.input_dim() {
        return Err(Error::Dimension("lqr weights do not match the predictor".into()));
    }
    Ok(solve_dare(
        &pred.a,
        &pred.b,
        &spec.q,
        &spec.r,
        &spec.s,
        DEFAULT_DARE_TOL,
        DEFAULT_DARE_MAX_ITER,
    )?
    .k)
}

/// `u = -K (Psi(x) - Psi(x_ref))`.
#[derive(Debug, Clone)]
pub struct LqrController {
    pub predictor: LiftedLinearPredictor,
    pub gain: DMatrix<f64>,
    z_ref: DVector<f64>,
}

impl LqrController {
    pub fn new(predictor: LiftedLinearPredictor, gain: DMatrix<f64>, x_ref: Option<&DVector<f64>>) -> Result<Self> {
        if gain.shape() != (predictor.input_dim(), predictor.lifted_dim()) {
            return Err(Error::Dimension("lqr gain shape does not match the predictor".into()));
        }
        let z_ref = match x_ref {
            Some(x) => predictor.map.try_lift(x)?,
            None => DVector::zeros(predictor.lifted_dim()),
        };
        Ok(Self {
            predictor,
            gain,
            z_ref,
        })
    }

    pub fn design(predictor: LiftedLinearPredictor, spec: &LqrSpec, x_ref: Option<&DVector<f64>>) -> Result<Self> {
        let gain = lqr_gain(&predictor, spec)?;
        Self::new(predictor, gain, x_ref)
    }

    pub fn input(&self, x: &DVector<f64>) -> DVector<f64> {
        -(&self.gain * (self.predictor.lift(x) - &self.z_ref))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifting::{make_dictionary, DictionarySpec};
    use nalgebra::{dmatrix, dvector};

    fn scalar(a: f64, b: f64) -> LiftedLinearPredictor {
        let map = make_dictionary(&DictionarySpec::identity(1)).unwrap();
        LiftedLinearPredictor::new(dmatrix![a], dmatrix![b], dmatrix![1.0], map, 0.01).unwrap()
    }

    #[test]
    fn golden_ratio_gain() {
        let p = scalar(1.0, 1.0);
        let spec = LqrSpec::new(dmatrix![1.0], dmatrix![1.0], dmatrix![0.0]).unwrap();
        let k = lqr_gain(&p, &spec).unwrap();
        assert!((k[(0, 0)] - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn law_is_linear_and_vanishes_at_reference() {
        let p = scalar(1.0, 1.0);
        let spec = LqrSpec::new(dmatrix![1.0], dmatrix![1.0], dmatrix![0.0]).unwrap();
        let c = LqrController::design(p.clone(), &spec, None).unwrap();
        assert_eq!(c.input(&dvector![0.0])[0], 0.0);
        let t = LqrController::design(p, &spec, Some(&dvector![0.7])).unwrap();
        assert_eq!(t.input(&dvector![0.7])[0], 0.0);
    }

    #[test]
    fn output_weighting_zeroes_extra_observables() {
        let map = make_dictionary(&DictionarySpec::sine(2, 0)).unwrap();
        let c = map.selector().unwrap();
        let p = LiftedLinearPredictor::new(
            DMatrix::identity(3, 3),
            dmatrix![0.0; 1.0; 0.0],
            c,
            map,
            0.01,
        )
        .unwrap();
        let spec = LqrSpec::output_weighted(&p, &dmatrix![10.0, 0.0; 0.0, 1.0], &dmatrix![0.1]).unwrap();
        assert_eq!(spec.q, dmatrix![10.0, 0.0, 0.0; 0.0, 1.0, 0.0; 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_indefinite_weights() {
        assert!(LqrSpec::new(dmatrix![-1.0], dmatrix![1.0], dmatrix![0.0]).is_err());
        assert!(LqrSpec::new(dmatrix![1.0], dmatrix![0.0], dmatrix![0.0]).is_err());
    }
}
