//! Discrete-time algebraic Riccati equation.
//!
//! Solves `A'PA - P - (A'PB + S)(R + B'PB)^-1 (B'PA + S') + Q = 0` for the
//! stabilizing `P` and returns the associated state-feedback gain.

use nalgebra::DMatrix;

use super::pinv::ensure_finite;
use crate::error::{Error, Result};

pub const DEFAULT_DARE_TOL: f64 = 1e-10;
pub const DEFAULT_DARE_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DareMethod {
    /// Structure-preserving doubling: squares the Riccati map each sweep.
    Doubling,
    /// Plain iteration of the Riccati map from `P = Q`.
    FixedPoint,
}

#[derive(Debug, Clone)]
pub struct DareSolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub iterations: usize,
    /// `||residual||_F / (1 + ||P||_F + ||A'PA||_F + ||Q||_F)`
    pub residual: f64,
}

/// Riccati residual for a candidate `P`, in Frobenius norm.
pub fn dare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let bt_p = b.transpose() * p;
    let gram = r + &bt_p * b;
    let cross = &bt_p * a + s.transpose();
    let Some(gram_inv) = gram.try_inverse() else {
        return f64::INFINITY;
    };
    let res = a.transpose() * p * a - p - cross.transpose() * gram_inv * &cross + q;
    res.norm()
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn check_dims(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> Result<()> {
    let n = a.nrows();
    let m = b.ncols();
    let ok = a.is_square()
        && b.nrows() == n
        && q.shape() == (n, n)
        && r.shape() == (m, m)
        && s.shape() == (n, m);
    if !ok {
        return Err(Error::Dimension(format!(
            "dare: A {:?}, B {:?}, Q {:?}, R {:?}, S {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape(),
            s.shape()
        )));
    }
    for (m, name) in [(a, "A"), (b, "B"), (q, "Q"), (r, "R"), (s, "S")] {
        ensure_finite(m, name)?;
    }
    Ok(())
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Solve the DARE with the default method (doubling).
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DareSolution> {
    solve_dare_with(a, b, q, r, s, tol, max_iter, DareMethod::Doubling)
}

#[allow(clippy::too_many_arguments)]
pub fn solve_dare_with(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
    method: DareMethod,
) -> Result<DareSolution> {
    check_dims(a, b, q, r, s)?;
    let r_inv = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("dare: R must be positive definite".into()))?
        .inverse();

    // Eliminate the cross term: A_bar = A - B R^-1 S', Q_bar = Q - S R^-1 S'.
    let a_bar = a - b * &r_inv * s.transpose();
    let mut q_bar = q - s * &r_inv * s.transpose();
    symmetrize(&mut q_bar);

    let (mut p, iterations) = match method {
        DareMethod::Doubling => doubling(&a_bar, b, &q_bar, &r_inv, tol, max_iter)?,
        DareMethod::FixedPoint => fixed_point(&a_bar, b, &q_bar, r, tol, max_iter)?,
    };
    symmetrize(&mut p);
    ensure_finite(&p, "dare solution")?;

    let mut k = feedback_gain(a, b, r, s, &p)?;
    let mut residual = relative_residual(a, b, q, r, s, &p);
    for _ in 0..NEWTON_STEPS {
        if residual < tol * 1e-2 {
            break;
        }
        let Some(next) = newton_step(a, b, q, s, &p, &k) else {
            break;
        };
        let next_k = feedback_gain(a, b, r, s, &next)?;
        let next_res = relative_residual(a, b, q, r, s, &next);
        if !(next_res < residual) {
            break;
        }
        (p, k, residual) = (next, next_k, next_res);
    }
    if !(residual < tol) {
        return Err(Error::NonConvergence {
            what: "dare",
            iterations,
            residual,
        });
    }
    let rho = spectral_radius(&(a - b * &k));
    if !(rho < 1.0) {
        return Err(Error::NonConvergence {
            what: "dare (no stabilizing solution; closed-loop spectral radius reported)",
            iterations,
            residual: rho,
        });
    }
    Ok(DareSolution {
        p,
        k,
        iterations,
        residual,
    })
}

/// Newton refinements applied after the main iteration.
const NEWTON_STEPS: usize = 4;

fn feedback_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let bt_p = b.transpose() * p;
    let gram = r + &bt_p * b;
    Ok(gram
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("dare: R + B'PB is singular".into()))?
        * (&bt_p * a + s.transpose()))
}

fn relative_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let scale = 1.0 + p.norm() + (a.transpose() * p * a).norm() + q.norm();
    dare_residual(a, b, q, r, s, p) / scale
}

/// One Newton step: `P + X` with `X - Acl' X Acl = Ric(P)`, the Stein
/// equation solved by Smith doubling. `None` if `Acl` is not stable.
fn newton_step(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    s: &DMatrix<f64>,
    p: &DMatrix<f64>,
    k: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let bt_p = b.transpose() * p;
    let cross = &bt_p * a + s.transpose();
    let ric = a.transpose() * p * a - p - cross.transpose() * k + q;
    let mut acl = a - b * k;
    if spectral_radius(&acl) >= 1.0 {
        return None;
    }
    let mut x = ric;
    for _ in 0..64 {
        let dx = acl.transpose() * &x * &acl;
        x += &dx;
        acl = &acl * &acl;
        if dx.norm() <= f64::EPSILON * x.norm() || acl.norm() < 1e-300 {
            break;
        }
    }
    let mut next = p + x;
    symmetrize(&mut next);
    next.iter().all(|v| v.is_finite()).then_some(next)
}

fn doubling(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r_inv: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DMatrix<f64>, usize)> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut ak = a.clone();
    let mut gk = b * r_inv * b.transpose();
    let mut hk = q.clone();
    symmetrize(&mut gk);

    let mut last = f64::INFINITY;
    for it in 1..=max_iter {
        let w = &eye + &gk * &hk;
        let w_lu = w.lu();
        // W^-1 A and W^-1 G
        let wa = w_lu.solve(&ak).ok_or(Error::NonConvergence {
            what: "dare doubling (I + GH singular)",
            iterations: it,
            residual: last,
        })?;
        let wg = w_lu.solve(&gk).ok_or(Error::NonConvergence {
            what: "dare doubling (I + GH singular)",
            iterations: it,
            residual: last,
        })?;
        let a_next = &ak * &wa;
        let mut g_next = &gk + &ak * &wg * ak.transpose();
        let mut h_next = &hk + ak.transpose() * &hk * &wa;
        symmetrize(&mut g_next);
        symmetrize(&mut h_next);

        let change = (&h_next - &hk).norm() / (1.0 + h_next.norm());
        if !change.is_finite() {
            return Err(Error::NonConvergence {
                what: "dare doubling (diverged)",
                iterations: it,
                residual: change,
            });
        }
        ak = a_next;
        gk = g_next;
        hk = h_next;
        last = change;
        if change < tol * 1e-3 || (change < tol && ak.norm() < 1e-12) {
            return Ok((hk, it));
        }
        if ak.norm() == 0.0 {
            return Ok((hk, it));
        }
    }
    // Doubling can stall just above the cutoff in finite precision; accept the
    // iterate and let the residual check decide.
    Ok((hk, max_iter))
}

fn fixed_point(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DMatrix<f64>, usize)> {
    let mut p = q.clone();
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        let bt_p = b.transpose() * &p;
        let gram = r + &bt_p * b;
        let gain = gram
            .cholesky()
            .ok_or_else(|| Error::InvalidInput("dare: R + B'PB lost definiteness".into()))?
            .solve(&(&bt_p * a));
        let mut next = a.transpose() * &p * a - a.transpose() * bt_p.transpose() * gain + q;
        symmetrize(&mut next);
        change = (&next - &p).norm() / (1.0 + next.norm());
        p = next;
        if !change.is_finite() {
            break;
        }
        if change < tol * 1e-3 {
            return Ok((p, it));
        }
    }
    Err(Error::NonConvergence {
        what: "dare fixed-point",
        iterations: max_iter,
        residual: change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn golden_ratio_fixture() {
        let one = scalar(1.0);
        let sol = solve_dare(&one, &one, &one, &one, &scalar(0.0), 1e-10, 1000).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((sol.p[(0, 0)] - phi).abs() < 1e-10);
        assert!((sol.k[(0, 0)] - (phi - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn deadbeat_fixture() {
        let sol = solve_dare(
            &scalar(0.0),
            &scalar(1.0),
            &scalar(1.0),
            &scalar(1.0),
            &scalar(0.0),
            1e-10,
            1000,
        )
        .unwrap();
        assert!((sol.p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(sol.k[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn methods_agree_with_cross_term() {
        let a = dmatrix![1.1, 0.2; 0.0, 0.9];
        let b = dmatrix![0.0; 1.0];
        let q = dmatrix![2.0, 0.0; 0.0, 1.0];
        let r = dmatrix![0.5];
        let s = dmatrix![0.1; 0.05];
        let d = solve_dare_with(&a, &b, &q, &r, &s, 1e-10, 100_000, DareMethod::Doubling).unwrap();
        let f =
            solve_dare_with(&a, &b, &q, &r, &s, 1e-10, 100_000, DareMethod::FixedPoint).unwrap();
        assert!((&d.p - &f.p).norm() < 1e-8);
        assert!((&d.k - &f.k).norm() < 1e-8);
        assert!(spectral_radius(&(&a - &b * &d.k)) < 1.0);
    }

    #[test]
    fn unstabilizable_pair_is_rejected() {
        // unstable mode with no input authority
        let a = dmatrix![1.5, 0.0; 0.0, 0.5];
        let b = dmatrix![0.0; 1.0];
        let q = DMatrix::identity(2, 2);
        let r = dmatrix![1.0];
        let s = DMatrix::zeros(2, 1);
        assert!(matches!(
            solve_dare(&a, &b, &q, &r, &s, 1e-10, 200),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::zeros(3, 1);
        let r = dmatrix![1.0];
        let s = DMatrix::zeros(2, 1);
        assert!(matches!(
            solve_dare(&a, &b, &a, &r, &s, 1e-10, 10),
            Err(Error::Dimension(_))
        ));
    }
}
