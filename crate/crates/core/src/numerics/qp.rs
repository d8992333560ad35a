//! Box-constrained convex quadratic programs
//!
//! `min 1/2 x'Hx + g'x  s.t.  lower <= x <= upper`
//!
//! Solved by ADMM on the splitting `x = z, z in box` with a cached Cholesky
//! factor of `H + rho I`. Every few sweeps the active set read off the box
//! iterate is used to solve the reduced equality-constrained problem exactly;
//! the polished point is accepted once its projected-gradient residual is
//! below tolerance.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::pinv::ensure_finite;
use crate::error::{Error, Result};

pub const DEFAULT_QP_TOL: f64 = 1e-8;
pub const DEFAULT_QP_MAX_ITER: usize = 20_000;

const POLISH_EVERY: usize = 10;

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl QpProblem {
    pub fn new(
        hessian: DMatrix<f64>,
        linear: DVector<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Result<Self> {
        let n = linear.len();
        if hessian.shape() != (n, n) || lower.len() != n || upper.len() != n {
            return Err(Error::Dimension(format!(
                "qp: H {:?}, g {}, bounds {}/{}",
                hessian.shape(),
                n,
                lower.len(),
                upper.len()
            )));
        }
        ensure_finite(&hessian, "qp hessian")?;
        if linear.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("qp linear term is not finite".into()));
        }
        let asym = (&hessian - hessian.transpose()).amax();
        if asym > 1e-10 * (1.0 + hessian.amax()) {
            return Err(Error::InvalidInput(format!("qp hessian not symmetric ({asym:.2e})")));
        }
        check_bounds(&lower, &upper)?;
        Ok(Self {
            hessian,
            linear,
            lower,
            upper,
        })
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x)
    }

    pub fn is_feasible(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol)
    }

    /// `||x - clip(x - (Hx + g))||_inf`
    pub fn kkt_residual(&self, x: &DVector<f64>) -> f64 {
        let grad = &self.hessian * x + &self.linear;
        projected_gradient_residual(x, &grad, &self.lower, &self.upper)
    }
}

fn check_bounds(lower: &DVector<f64>, upper: &DVector<f64>) -> Result<()> {
    for (i, (&l, &u)) in lower.iter().zip(upper.iter()).enumerate() {
        if l.is_nan() || u.is_nan() || l > u {
            return Err(Error::InvalidInput(format!("qp bound {i}: lower {l} > upper {u}")));
        }
    }
    Ok(())
}

fn clip(v: f64, l: f64, u: f64) -> f64 {
    v.max(l).min(u)
}

fn projected_gradient_residual(
    x: &DVector<f64>,
    grad: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let step = clip(x[i] - grad[i], lower[i], upper[i]);
        worst = worst.max((x[i] - step).abs());
    }
    worst
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Box QP solver with the Hessian and bounds fixed, so the factorization is
/// reused across right-hand sides (receding-horizon MPC solves).
#[derive(Debug, Clone)]
pub struct BoxQpSolver {
    hessian: DMatrix<f64>,
    lower: DVector<f64>,
    upper: DVector<f64>,
    rho: f64,
    factor: Cholesky<f64, Dyn>,
}

impl BoxQpSolver {
    pub fn new(hessian: DMatrix<f64>, lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        let n = hessian.nrows();
        let probe = QpProblem::new(hessian, DVector::zeros(n), lower, upper)?;
        let scale = if n == 0 {
            1.0
        } else {
            probe.hessian.diagonal().iter().map(|v| v.abs()).sum::<f64>() / n as f64
        };
        let rho = (0.1 * scale).max(1e-6);
        let shifted = &probe.hessian + DMatrix::identity(n, n) * rho;
        let factor = shifted
            .cholesky()
            .ok_or_else(|| Error::InvalidInput("qp hessian is not positive semidefinite".into()))?;
        Ok(Self {
            hessian: probe.hessian,
            lower: probe.lower,
            upper: probe.upper,
            rho,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            v.len(),
            (0..v.len()).map(|i| clip(v[i], self.lower[i], self.upper[i])),
        )
    }

    fn residual(&self, x: &DVector<f64>, g: &DVector<f64>) -> f64 {
        let grad = &self.hessian * x + g;
        projected_gradient_residual(x, &grad, &self.lower, &self.upper)
    }

    /// Solve the reduced system with the variables in `fixed` pinned to their
    /// bound. Returns `None` when the free block is singular or the result
    /// leaves the box.
    fn polish(&self, g: &DVector<f64>, pinned: &[Option<f64>]) -> Option<DVector<f64>> {
        let n = self.dim();
        let free: Vec<usize> = (0..n).filter(|&i| pinned[i].is_none()).collect();
        let mut x = DVector::from_iterator(n, pinned.iter().map(|p| p.unwrap_or(0.0)));
        if !free.is_empty() {
            let nf = free.len();
            let mut h_ff = DMatrix::zeros(nf, nf);
            let mut rhs = DVector::zeros(nf);
            for (a, &i) in free.iter().enumerate() {
                let mut acc = -g[i];
                for j in 0..n {
                    if pinned[j].is_some() {
                        acc -= self.hessian[(i, j)] * x[j];
                    }
                }
                rhs[a] = acc;
                for (b, &j) in free.iter().enumerate() {
                    h_ff[(a, b)] = self.hessian[(i, j)];
                }
            }
            let sol = h_ff.cholesky()?.solve(&rhs);
            for (a, &i) in free.iter().enumerate() {
                x[i] = sol[a];
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(self.project(&x))
    }

    fn pinned_from(&self, z: &DVector<f64>, y: &DVector<f64>) -> Vec<Option<f64>> {
        (0..self.dim())
            .map(|i| {
                let (l, u) = (self.lower[i], self.upper[i]);
                if l == u || (z[i] <= l && y[i] <= 0.0) {
                    Some(l)
                } else if z[i] >= u && y[i] >= 0.0 {
                    Some(u)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Solve `min 0.5 x'Hx + g'x` over the box. Stops once the projected
    /// gradient residual drops below `tol * (1 + ||g||_inf)`.
    pub fn solve(
        &self,
        g: &DVector<f64>,
        warm_start: Option<&DVector<f64>>,
        tol: f64,
        max_iter: usize,
    ) -> Result<QpSolution> {
        let n = self.dim();
        if g.len() != n {
            return Err(Error::Dimension(format!("qp linear term {} vs {}", g.len(), n)));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("qp linear term is not finite".into()));
        }
        if n == 0 {
            return Ok(QpSolution {
                x: DVector::zeros(0),
                iterations: 0,
                residual: 0.0,
            });
        }

        let stop = tol * (1.0 + g.amax());
        let mut z = match warm_start {
            Some(w) if w.len() == n => self.project(w),
            _ => self.project(&DVector::zeros(n)),
        };
        // scaled dual
        let mut y = DVector::zeros(n);
        let mut best = z.clone();
        let mut best_res = self.residual(&z, g);
        if best_res < stop {
            return Ok(QpSolution {
                x: z,
                iterations: 0,
                residual: best_res,
            });
        }

        for it in 1..=max_iter {
            let rhs = (&z - &y) * self.rho - g;
            let x = self.factor.solve(&rhs);
            let z_next = self.project(&(&x + &y));
            y += &x - &z_next;
            z = z_next;

            if it % POLISH_EVERY == 0 || it == 1 {
                let res = self.residual(&z, g);
                if res < best_res {
                    best_res = res;
                    best.copy_from(&z);
                }
                if let Some(p) = self.polish(g, &self.pinned_from(&z, &y)) {
                    let pres = self.residual(&p, g);
                    if pres < best_res {
                        best_res = pres;
                        best = p;
                    }
                }
                if best_res < stop {
                    return Ok(QpSolution {
                        x: best,
                        iterations: it,
                        residual: best_res,
                    });
                }
            }
        }
        Err(Error::NonConvergence {
            what: "box qp",
            iterations: max_iter,
            residual: best_res,
        })
    }
}

pub fn solve_qp(problem: &QpProblem, tol: f64, max_iter: usize) -> Result<QpSolution> {
    let solver = BoxQpSolver::new(
        problem.hessian.clone(),
        problem.lower.clone(),
        problem.upper.clone(),
    )?;
    solver.solve(&problem.linear, None, tol, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn solve(h: DMatrix<f64>, g: DVector<f64>, l: DVector<f64>, u: DVector<f64>) -> DVector<f64> {
        let p = QpProblem::new(h, g, l, u).unwrap();
        solve_qp(&p, DEFAULT_QP_TOL, DEFAULT_QP_MAX_ITER).unwrap().x
    }

    #[test]
    fn interior_minimum() {
        let x = solve(
            DMatrix::identity(3, 3),
            DVector::zeros(3),
            DVector::from_element(3, -1.0),
            DVector::from_element(3, 1.0),
        );
        assert!(x.amax() < 1e-12);
    }

    #[test]
    fn scalar_clipped_at_upper_bound() {
        let x = solve(dmatrix![1.0], dvector![-4.0], dvector![-1.0], dvector![1.0]);
        // 1-D grid oracle over the box
        let f = |v: f64| 0.5 * v * v - 4.0 * v;
        let grid_best = (0..=2000)
            .map(|i| -1.0 + i as f64 * 1e-3)
            .min_by(|a, b| f(*a).partial_cmp(&f(*b)).unwrap())
            .unwrap();
        assert!((grid_best - 1.0).abs() < 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn separable_closed_form() {
        let x = solve(
            DMatrix::identity(2, 2),
            dvector![-1.0, -1.0],
            dvector![0.0, 0.0],
            dvector![2.0, 2.0],
        );
        assert!((x - dvector![1.0, 1.0]).amax() < 1e-10);
    }

    #[test]
    fn infinite_bounds_are_unconstrained() {
        let h = dmatrix![2.0, 0.5; 0.5, 1.0];
        let g = dvector![1.0, -1.0];
        let inf = DVector::from_element(2, f64::INFINITY);
        let x = solve(h.clone(), g.clone(), -inf.clone(), inf);
        let exact = h.lu().solve(&(-g)).unwrap();
        assert!((x - exact).amax() < 1e-10);
    }

    #[test]
    fn equal_bounds_pin_the_variable() {
        let x = solve(
            DMatrix::identity(2, 2),
            dvector![-3.0, 0.5],
            dvector![0.25, -1.0],
            dvector![0.25, 1.0],
        );
        assert_eq!(x[0], 0.25);
        assert!((x[1] + 0.5).abs() < 1e-10);
    }

    #[test]
    fn rejects_inverted_bounds() {
        let r = QpProblem::new(dmatrix![1.0], dvector![0.0], dvector![1.0], dvector![0.0]);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_asymmetric_hessian() {
        let r = QpProblem::new(
            dmatrix![1.0, 0.3; 0.0, 1.0],
            dvector![0.0, 0.0],
            dvector![-1.0, -1.0],
            dvector![1.0, 1.0],
        );
        assert!(r.is_err());
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let p = QpProblem::new(
            dmatrix![1.0, 0.99; 0.99, 1.0],
            dvector![-5.0, 3.0],
            dvector![-1.0, -1.0],
            dvector![1.0, 1.0],
        )
        .unwrap();
        match solve_qp(&p, 0.0, 3) {
            Err(Error::NonConvergence { residual, .. }) => assert!(residual.is_finite()),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
