use nalgebra::{DMatrix, DVector};

use super::ContinuousSystem;
use crate::edmd::LiftedLinearPredictor;
use crate::error::{Error, Result};
use crate::lifting::{make_dictionary, DictionarySpec};

/// Tolerance on `||f(x_eq, u_eq)||` for the point to count as an equilibrium.
const EQUILIBRIUM_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Linearization {
    /// Discrete-time local predictor with identity lifting (`C = I`).
    pub predictor: LiftedLinearPredictor,
    /// Continuous-time Jacobians `(df/dx, df/du)`.
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    /// `||f(x_eq, u_eq)||`; the affine term it represents is dropped.
    pub equilibrium_residual: f64,
    pub warning: Option<String>,
}

fn fd_step(v: f64) -> f64 {
    1e-6 * (1.0 + v.abs())
}

/// Central-difference Jacobians of `f` at `(x, u)`.
pub fn jacobians<S: ContinuousSystem + ?Sized>(
    sys: &S,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = sys.state_dim();
    let p = sys.input_dim();
    let mut f = DMatrix::zeros(n, n);
    let mut g = DMatrix::zeros(n, p);
    for i in 0..n {
        let h = fd_step(x[i]);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let col = (sys.derivative(&xp, u) - sys.derivative(&xm, u)) / (2.0 * h);
        f.set_column(i, &col);
    }
    for j in 0..p {
        let h = fd_step(u[j]);
        let mut up = u.clone();
        let mut um = u.clone();
        up[j] += h;
        um[j] -= h;
        let col = (sys.derivative(x, &up) - sys.derivative(x, &um)) / (2.0 * h);
        g.set_column(j, &col);
    }
    (f, g)
}

/// Exact zero-order-hold discretization, via `exp([[F, G], [0, 0]] h)`.
pub fn zoh_discretize(f: &DMatrix<f64>, g: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = f.nrows();
    let p = g.ncols();
    let mut aug = DMatrix::zeros(n + p, n + p);
    aug.view_mut((0, 0), (n, n)).copy_from(&(f * h));
    aug.view_mut((0, n), (n, p)).copy_from(&(g * h));
    let e = aug.exp();
    (
        e.view((0, 0), (n, n)).clone_owned(),
        e.view((0, n), (n, p)).clone_owned(),
    )
}

/// Local predictor about `(x_eq, u_eq)` sampled at `h`.
pub fn local_linearization<S: ContinuousSystem + ?Sized>(
    sys: &S,
    x_eq: &DVector<f64>,
    u_eq: &DVector<f64>,
    h: f64,
) -> Result<Linearization> {
    if x_eq.len() != sys.state_dim() || u_eq.len() != sys.input_dim() {
        return Err(Error::Dimension("linearization point has wrong dimensions".into()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("sampling period must be positive, got {h}")));
    }
    let residual = sys.derivative(x_eq, u_eq).norm();
    let warning = (residual > EQUILIBRIUM_TOL).then(|| {
        format!("linearization point is not an equilibrium (|f| = {residual:.3e}); affine term dropped")
    });
    let (f, g) = jacobians(sys, x_eq, u_eq);
    let (a, b) = zoh_discretize(&f, &g, h);
    let n = sys.state_dim();
    let map = make_dictionary(&DictionarySpec::identity(n))?;
    let predictor = LiftedLinearPredictor::new(a, b, DMatrix::identity(n, n), map, h)?;
    Ok(Linearization {
        predictor,
        f,
        g,
        equilibrium_residual: residual,
        warning,
    })
}
