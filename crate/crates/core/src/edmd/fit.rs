use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::predictor::LiftedLinearPredictor;
use crate::datagen::SnapshotDataset;
use crate::error::{Error, Result};
use crate::numerics::{numerical_rank, pseudoinverse, DEFAULT_RANK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Relative singular-value cutoff of the pseudoinverse.
    pub rank_tol: f64,
    /// Tikhonov term added to the regressor Gram matrix.
    pub ridge: f64,
    /// Scale regressor rows to unit norm before the pseudoinverse; the fitted
    /// matrices are mapped back afterwards.
    pub equilibrate: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            ridge: 0.0,
            equilibrate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub snapshots: usize,
    pub regressor_dim: usize,
    pub rank: usize,
    pub rank_deficient: bool,
    /// `||Y_lift - A X_lift - B U||_F`
    pub residual_fro: f64,
    /// `C` taken as the coordinate selector rather than fitted.
    pub c_from_selector: bool,
}

/// Identify `(A, B, C)` with the default options.
pub fn fit(ds: &SnapshotDataset) -> Result<LiftedLinearPredictor> {
    fit_with(ds, &FitOptions::default()).map(|(p, _)| p)
}

/// `W = T G' (G G')^+` for targets `T` and regressor `G`.
fn regress(
    targets: &DMatrix<f64>,
    regressor: &DMatrix<f64>,
    opts: &FitOptions,
) -> Result<(DMatrix<f64>, usize)> {
    let rows = regressor.nrows();
    let weights: Vec<f64> = if opts.equilibrate {
        regressor
            .row_iter()
            .map(|r| {
                let n = r.norm();
                if n > 0.0 { 1.0 / n } else { 1.0 }
            })
            .collect()
    } else {
        vec![1.0; rows]
    };
    let mut g = regressor.clone();
    for (i, w) in weights.iter().enumerate() {
        g.row_mut(i).scale_mut(*w);
    }
    let g_t = g.transpose();
    let mut gram = &g * &g_t;
    if opts.ridge > 0.0 {
        for i in 0..rows {
            gram[(i, i)] += opts.ridge;
        }
    }
    let rank = numerical_rank(&gram, opts.rank_tol);
    let mut w = targets * g_t * pseudoinverse(&gram, opts.rank_tol)?;
    for (j, s) in weights.iter().enumerate() {
        w.column_mut(j).scale_mut(*s);
    }
    Ok((w, rank))
}

/// Least-squares `(A, B)` from `[A B] = Y_lift [X_lift; U]' ([X_lift; U][X_lift; U]')^+`.
///
/// `C` is the coordinate selector when the lifting map contains every state,
/// and otherwise the least-squares solution of `min ||X - C X_lift||_F`.
pub fn fit_with(ds: &SnapshotDataset, opts: &FitOptions) -> Result<(LiftedLinearPredictor, FitReport)> {
    if ds.is_empty() {
        return Err(Error::InvalidInput("fit needs at least one snapshot".into()));
    }
    let big_n = ds.lifted_dim();
    let p = ds.input_dim();
    let nd = ds.len();

    let mut regressor = DMatrix::zeros(big_n + p, nd);
    regressor.rows_mut(0, big_n).copy_from(&ds.x_lift);
    regressor.rows_mut(big_n, p).copy_from(&ds.u);

    let (ab, rank) = regress(&ds.y_lift, &regressor, opts)?;
    let a = ab.columns(0, big_n).clone_owned();
    let b = ab.columns(big_n, p).clone_owned();

    let (c, c_from_selector) = match ds.map.selector() {
        Some(sel) => (sel, true),
        None => (regress(&ds.x, &ds.x_lift, opts)?.0, false),
    };

    let residual_fro = (&ds.y_lift - &a * &ds.x_lift - &b * &ds.u).norm();
    let report = FitReport {
        snapshots: nd,
        regressor_dim: big_n + p,
        rank,
        rank_deficient: rank < big_n + p,
        residual_fro,
        c_from_selector,
    };
    let pred = LiftedLinearPredictor::new(a, b, c, ds.map.clone(), ds.dt)?;
    Ok((pred, report))
}
