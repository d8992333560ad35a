use nalgebra::{DMatrix, DVector};

use super::fit::FitOptions;
use super::predictor::LiftedModel;
use crate::datagen::SnapshotDataset;
use crate::error::{Error, Result};
use crate::lifting::LiftingMap;
use crate::numerics::pseudoinverse;

/// `z+ = A z + sum_j u_j B_j z`, `x_hat = C z`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearPredictor {
    pub a: DMatrix<f64>,
    /// One `N x N` slice per input channel.
    pub b: Vec<DMatrix<f64>>,
    pub c: DMatrix<f64>,
    pub map: LiftingMap,
    pub dt: f64,
}

impl LiftedModel for BilinearPredictor {
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
        self.b.len()
    }
    fn input_term(&self, z: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut acc = DVector::zeros(z.len());
        for (bj, uj) in self.b.iter().zip(u.iter()) {
            acc += bj * z * *uj;
        }
        acc
    }
}

/// Least squares over the regressor `[z; z (x) u]` (Kronecker order, `z_i u_j`
/// at row `N + i p + j`).
pub fn fit_bilinear(ds: &SnapshotDataset) -> Result<BilinearPredictor> {
    fit_bilinear_with(ds, &FitOptions::default())
}

pub fn fit_bilinear_with(ds: &SnapshotDataset, opts: &FitOptions) -> Result<BilinearPredictor> {
    if ds.is_empty() {
        return Err(Error::InvalidInput("fit needs at least one snapshot".into()));
    }
    let big_n = ds.lifted_dim();
    let p = ds.input_dim();
    let nd = ds.len();
    let mut g = DMatrix::zeros(big_n + big_n * p, nd);
    g.rows_mut(0, big_n).copy_from(&ds.x_lift);
    for col in 0..nd {
        for i in 0..big_n {
            for j in 0..p {
                g[(big_n + i * p + j, col)] = ds.x_lift[(i, col)] * ds.u[(j, col)];
            }
        }
    }
    let g_t = g.transpose();
    let mut gram = &g * &g_t;
    for i in 0..gram.nrows() {
        gram[(i, i)] += opts.ridge;
    }
    let w = &ds.y_lift * g_t * pseudoinverse(&gram, opts.rank_tol)?;
    let a = w.columns(0, big_n).clone_owned();
    let b = (0..p)
        .map(|j| DMatrix::from_fn(big_n, big_n, |r, i| w[(r, big_n + i * p + j)]))
        .collect();
    let c = match ds.map.selector() {
        Some(sel) => sel,
        None => {
            let xt = ds.x_lift.transpose();
            &ds.x * &xt * pseudoinverse(&(&ds.x_lift * &xt), opts.rank_tol)?
        }
    };
    Ok(BilinearPredictor {
        a,
        b,
        c,
        map: ds.map.clone(),
        dt: ds.dt,
    })
}

/// Number of regressor rows for `N` lifted states and `p` inputs.
pub fn bilinear_regressor_dim(lifted: usize, inputs: usize) -> usize {
    lifted + lifted * inputs
}
