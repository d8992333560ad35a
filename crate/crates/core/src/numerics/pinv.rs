use nalgebra::{DMatrix, Dyn, SVD};

use crate::error::{Error, Result};

/// Relative singular-value cutoff used when none is given.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

pub(crate) fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} contains non-finite entries")))
    }
}

/// Convergence tolerances tried in turn. With the tightest one the
/// bidiagonal iteration can settle on a wrong decomposition for some
/// rank-deficient inputs, so every attempt is checked by reconstruction.
const SVD_EPS: [f64; 4] = [f64::EPSILON, 1e-14, 1e-13, 1e-12];

/// SVD whose factors reproduce `m` to working precision.
pub(crate) fn checked_svd(m: &DMatrix<f64>) -> Result<SVD<f64, Dyn, Dyn>> {
    let scale = m.norm();
    let tol = 1e-12 * scale * (m.nrows().max(m.ncols()) as f64).sqrt();
    let mut worst = 0.0f64;
    for eps in SVD_EPS {
        let Some(svd) = m.clone().try_svd(true, true, eps, 0) else {
            continue;
        };
        let (Some(u), Some(v_t)) = (&svd.u, &svd.v_t) else {
            continue;
        };
        let err = (u * DMatrix::from_diagonal(&svd.singular_values) * v_t - m).norm();
        if err <= tol {
            return Ok(svd);
        }
        worst = worst.max(err);
    }
    Err(Error::NonConvergence {
        what: "svd (reconstruction check)",
        iterations: SVD_EPS.len(),
        residual: worst / scale.max(f64::MIN_POSITIVE),
    })
}

/// Moore–Penrose pseudoinverse through the SVD.
///
/// Singular values at or below `rank_tol * sigma_max` are treated as zero.
pub fn pseudoinverse(m: &DMatrix<f64>, rank_tol: f64) -> Result<DMatrix<f64>> {
    ensure_finite(m, "pseudoinverse input")?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(DMatrix::zeros(cols, rows));
    }
    let svd = checked_svd(m)?;
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let sigma_max = svd.singular_values.max();
    if sigma_max == 0.0 {
        return Ok(DMatrix::zeros(cols, rows));
    }
    let cutoff = rank_tol * sigma_max;

    // V * diag(1/s) * U^T over the retained singular triplets
    let mut v_scaled = v_t.transpose();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let inv = if s > cutoff { 1.0 / s } else { 0.0 };
        v_scaled.column_mut(k).scale_mut(inv);
    }
    let out = v_scaled * u.transpose();
    ensure_finite(&out, "pseudoinverse result")?;
    Ok(out)
}

/// Number of singular values above the relative cutoff.
pub fn numerical_rank(m: &DMatrix<f64>, rank_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = match checked_svd(m) {
        Ok(svd) => svd.singular_values,
        Err(_) => m.clone().singular_values(),
    };
    let cutoff = rank_tol * sv.max();
    sv.iter().filter(|&&s| s > cutoff).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn identity_is_its_own_pinv() {
        let i = DMatrix::<f64>::identity(3, 3);
        let p = pseudoinverse(&i, DEFAULT_RANK_TOL).unwrap();
        assert!((p - i).norm() < 1e-14);
    }

    #[test]
    fn rank_deficient_diagonal() {
        let d = dmatrix![1.0, 0.0; 0.0, 0.0];
        let p = pseudoinverse(&d, DEFAULT_RANK_TOL).unwrap();
        assert!((p - d).norm() < 1e-14);
    }

    #[test]
    fn row_vector() {
        // A^+ = A^T (A A^T)^-1 = [1, 2]^T / 5
        let r = dmatrix![1.0, 2.0];
        let p = pseudoinverse(&r, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(p.shape(), (2, 1));
        assert!((p[(0, 0)] - 0.2).abs() < 1e-14);
        assert!((p[(1, 0)] - 0.4).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix() {
        let z = DMatrix::<f64>::zeros(2, 3);
        let p = pseudoinverse(&z, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(p.shape(), (3, 2));
        assert_eq!(p.norm(), 0.0);
    }

    #[test]
    fn rejects_nan() {
        let m = dmatrix![1.0, f64::NAN];
        assert!(matches!(pseudoinverse(&m, DEFAULT_RANK_TOL), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rank_deficient_tall_product() {
        // default bidiagonal tolerance mis-deflates this rank-2 matrix
        let a = DMatrix::from_vec(
            6,
            3,
            vec![
                -6.370190835048901, -5.302524989394453, -28.302798548549884, 9.03327256338023,
                -59.40737941267963, 22.859202915010847, -7.988725301432769, 5.339685641729901,
                -18.397676287095187, -4.813890091269187, -66.82661939890961, 32.8333360797855,
                -6.8246985259122575, 59.94916939917459, 63.262363702647335, -78.68486059814742,
                -21.633576230152393, 47.29518685506858,
            ],
        );
        let p = pseudoinverse(&a, DEFAULT_RANK_TOL).unwrap();
        assert!((&a * &p * &a - &a).norm() < 1e-10);
        assert_eq!(numerical_rank(&a, DEFAULT_RANK_TOL), 2);
    }

    #[test]
    fn rank_counts_truncation() {
        let m = dmatrix![1.0, 2.0; 2.0, 4.0; 3.0, 6.0];
        assert_eq!(numerical_rank(&m, DEFAULT_RANK_TOL), 1);
    }
}
