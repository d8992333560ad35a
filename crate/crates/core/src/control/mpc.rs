use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::edmd::LiftedLinearPredictor;
use crate::error::{Error, Result};
use crate::numerics::{BoxQpSolver, DEFAULT_QP_MAX_ITER, DEFAULT_QP_TOL};

/// Receding-horizon tracking of selected states through a lifted predictor.
///
/// Weights are diagonal and live in the output space spanned by `outputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcSpec {
    pub horizon: usize,
    /// Tracked states; the reference has one entry per listed state.
    pub outputs: Vec<usize>,
    pub q_diag: Vec<f64>,
    pub q_terminal_diag: Vec<f64>,
    pub r_diag: Vec<f64>,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    /// Soft bounds on the lifted state.
    pub z_min: Option<Vec<f64>>,
    pub z_max: Option<Vec<f64>>,
    /// Quadratic penalty on lifted-state bound violation.
    pub soft_penalty: f64,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
}

impl Default for MpcSpec {
    fn default() -> Self {
        Self::robot()
    }
}

impl MpcSpec {
    /// Robot tracking on `[s_dot, phi_dot, chi_dot, phi]`.
    pub fn robot() -> Self {
        let q = vec![5.0, 1.0, 5.0, 20.0];
        Self {
            horizon: 50,
            outputs: vec![0, 1, 2, 4],
            q_terminal_diag: q.iter().map(|v| 10.0 * v).collect(),
            q_diag: q,
            r_diag: vec![0.1, 0.1],
            u_min: vec![-5.0, -5.0],
            u_max: vec![5.0, 5.0],
            z_min: None,
            z_max: None,
            soft_penalty: 1e6,
            qp_tol: DEFAULT_QP_TOL,
            qp_max_iter: DEFAULT_QP_MAX_ITER,
        }
    }

    pub fn validate(&self, n: usize, big_n: usize, p: usize) -> Result<()> {
        let m = self.outputs.len();
        if self.horizon == 0 {
            return Err(Error::Config("mpc horizon must be at least 1".into()));
        }
        if self.outputs.iter().any(|&i| i >= n) {
            return Err(Error::Config("mpc output index out of range".into()));
        }
        if self.q_diag.len() != m || self.q_terminal_diag.len() != m {
            return Err(Error::Config("mpc state weights must have one entry per output".into()));
        }
        if self.r_diag.len() != p || self.u_min.len() != p || self.u_max.len() != p {
            return Err(Error::Config("mpc input weights and bounds must have one entry per input".into()));
        }
        if self.q_diag.iter().chain(&self.q_terminal_diag).any(|v| !(*v >= 0.0)) || self.r_diag.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("mpc needs Q >= 0 and R > 0".into()));
        }
        if self.u_min.iter().zip(&self.u_max).any(|(l, u)| !(l <= u)) {
            return Err(Error::Config("mpc input bounds inverted".into()));
        }
        for b in [&self.z_min, &self.z_max].into_iter().flatten() {
            if b.len() != big_n {
                return Err(Error::Config("mpc lifted-state bounds must have one entry per observable".into()));
            }
        }
        if let (Some(lo), Some(hi)) = (&self.z_min, &self.z_max) {
            if lo.iter().zip(hi).any(|(l, u)| !(l <= u)) {
                return Err(Error::Config("mpc lifted-state bounds inverted".into()));
            }
        }
        if !(self.soft_penalty > 0.0) {
            return Err(Error::Config("mpc soft penalty must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MpcSolution {
    /// Optimal input sequence `u_0 .. u_{Np-1}`.
    pub inputs: Vec<DVector<f64>>,
    pub iterations: usize,
    pub residual: f64,
    /// Lifted-state bound entries that ended up penalized.
    pub softened: usize,
}

impl MpcSolution {
    pub fn first(&self) -> &DVector<f64> {
        &self.inputs[0]
    }

    pub fn stacked(&self) -> DVector<f64> {
        let p = self.inputs[0].len();
        DVector::from_fn(p * self.inputs.len(), |i, _| self.inputs[i / p][i % p])
    }
}

/// Condensed QP over `U = [u_0; ..; u_{Np-1}]`: predicted outputs are
/// `Y = Phi z0 + Gamma U` and the cost is
/// `sum_k e_k' Q e_k + e_Np' Q_N e_Np + u_k' R u_k` with `e_k = r_k - C_o z_k`.
#[derive(Debug, Clone)]
pub struct Mpc {
    pub predictor: LiftedLinearPredictor,
    pub spec: MpcSpec,
    c_out: DMatrix<f64>,
    phi: DMatrix<f64>,
    gamma_t_q: DMatrix<f64>,
    hessian: DMatrix<f64>,
    solver: BoxQpSolver,
    lifted: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

fn stacked_bounds(b: &[f64], horizon: usize) -> DVector<f64> {
    let p = b.len();
    DVector::from_fn(p * horizon, |i, _| b[i % p])
}

impl Mpc {
    pub fn new(predictor: LiftedLinearPredictor, spec: MpcSpec) -> Result<Self> {
        let (n, big_n, p) = (predictor.state_dim(), predictor.lifted_dim(), predictor.input_dim());
        spec.validate(n, big_n, p)?;
        let np = spec.horizon;
        let m = spec.outputs.len();

        // Tracked coordinates present in the map are read off exactly.
        let mut c_out = DMatrix::zeros(m, big_n);
        for (r, &state) in spec.outputs.iter().enumerate() {
            match predictor.map.coordinate_row(state) {
                Some(row) => c_out[(r, row)] = 1.0,
                None => c_out.set_row(r, &predictor.c.row(state)),
            }
        }

        // Lifted prediction: z_k = A^k z0 + sum_j A^(k-1-j) B u_j.
        let want_lifted = spec.z_min.is_some() || spec.z_max.is_some();
        let mut phi = DMatrix::zeros(m * np, big_n);
        let mut gamma = DMatrix::zeros(m * np, p * np);
        let mut phi_z = DMatrix::zeros(if want_lifted { big_n * np } else { 0 }, big_n);
        let mut gamma_z = DMatrix::zeros(if want_lifted { big_n * np } else { 0 }, p * np);
        // a_pow_b[d] = A^d B
        let mut a_pow_b = Vec::with_capacity(np);
        let mut ab = predictor.b.clone();
        for _ in 0..np {
            a_pow_b.push(ab.clone());
            ab = &predictor.a * ab;
        }
        let mut a_pow = predictor.a.clone();
        for k in 1..=np {
            phi.view_mut(((k - 1) * m, 0), (m, big_n)).copy_from(&(&c_out * &a_pow));
            if want_lifted {
                phi_z.view_mut(((k - 1) * big_n, 0), (big_n, big_n)).copy_from(&a_pow);
            }
            for j in 0..k {
                let blk = &a_pow_b[k - 1 - j];
                gamma.view_mut(((k - 1) * m, j * p), (m, p)).copy_from(&(&c_out * blk));
                if want_lifted {
                    gamma_z.view_mut(((k - 1) * big_n, j * p), (big_n, p)).copy_from(blk);
                }
            }
            a_pow = &predictor.a * a_pow;
        }

        let q_bar = DVector::from_fn(m * np, |i, _| {
            let (k, r) = (i / m, i % m);
            if k + 1 == np {
                spec.q_terminal_diag[r]
            } else {
                spec.q_diag[r]
            }
        });
        let mut gamma_t_q = gamma.transpose();
        for (col, w) in q_bar.iter().enumerate() {
            gamma_t_q.column_mut(col).scale_mut(*w);
        }
        let mut hessian = &gamma_t_q * &gamma;
        for i in 0..p * np {
            hessian[(i, i)] += spec.r_diag[i % p];
        }
        let hessian = (&hessian + hessian.transpose()) * 0.5;
        if hessian.iter().any(|v| !v.is_finite()) {
            return Err(Error::ModelConfiguration(
                "mpc prediction matrices overflow; the predictor is too unstable for this horizon".into(),
            ));
        }
        let solver = BoxQpSolver::new(
            hessian.clone(),
            stacked_bounds(&spec.u_min, np),
            stacked_bounds(&spec.u_max, np),
        )?;
        Ok(Self {
            predictor,
            spec,
            c_out,
            phi,
            gamma_t_q,
            hessian,
            solver,
            lifted: want_lifted.then_some((phi_z, gamma_z)),
        })
    }

    pub fn output_dim(&self) -> usize {
        self.spec.outputs.len()
    }

    /// Output map actually used for the tracked states.
    pub fn output_matrix(&self) -> &DMatrix<f64> {
        &self.c_out
    }

    fn stacked_reference(&self, refs: &[DVector<f64>]) -> Result<DVector<f64>> {
        let m = self.output_dim();
        let np = self.spec.horizon;
        if refs.is_empty() {
            return Ok(DVector::zeros(m * np));
        }
        if let Some(r) = refs.iter().find(|r| r.len() != m) {
            return Err(Error::Dimension(format!("reference has {} entries, expected {m}", r.len())));
        }
        Ok(DVector::from_fn(m * np, |i, _| {
            let k = (i / m).min(refs.len() - 1);
            refs[k][i % m]
        }))
    }

    /// Solve the horizon problem from `x_now`. `refs[k]` is the target for
    /// step `k + 1`; a short list is padded with its last entry.
    pub fn solve(
        &self,
        x_now: &DVector<f64>,
        refs: &[DVector<f64>],
        warm_start: Option<&DVector<f64>>,
    ) -> Result<MpcSolution> {
        if x_now.len() != self.predictor.state_dim() {
            return Err(Error::Dimension("mpc state has the wrong dimension".into()));
        }
        let z0 = self.predictor.map.try_lift(x_now)?;
        let r_bar = self.stacked_reference(refs)?;
        let g = &self.gamma_t_q * (&self.phi * &z0 - r_bar);
        let mut sol = self
            .solver
            .solve(&g, warm_start, self.spec.qp_tol, self.spec.qp_max_iter)?;
        let mut softened = 0;

        if let Some((phi_z, gamma_z)) = &self.lifted {
            let big_n = self.predictor.lifted_dim();
            let free_z = phi_z * &z0;
            let mut penalized: Vec<Option<f64>> = vec![None; free_z.len()];
            for _round in 0..10 {
                let z = &free_z + gamma_z * &sol.x;
                let mut added = false;
                for i in 0..z.len() {
                    if penalized[i].is_some() {
                        continue;
                    }
                    let j = i % big_n;
                    let lo = self.spec.z_min.as_ref().map_or(f64::NEG_INFINITY, |b| b[j]);
                    let hi = self.spec.z_max.as_ref().map_or(f64::INFINITY, |b| b[j]);
                    if z[i] < lo - 1e-9 {
                        penalized[i] = Some(lo);
                        added = true;
                    } else if z[i] > hi + 1e-9 {
                        penalized[i] = Some(hi);
                        added = true;
                    }
                }
                if !added {
                    break;
                }
                let mut h = self.hessian.clone();
                let mut g_soft = g.clone();
                for (i, b) in penalized.iter().enumerate() {
                    if let Some(b) = b {
                        let row = gamma_z.row(i);
                        h += row.transpose() * row * self.spec.soft_penalty;
                        g_soft += row.transpose() * ((free_z[i] - b) * self.spec.soft_penalty);
                    }
                }
                let solver = BoxQpSolver::new(h, self.solver.lower().clone(), self.solver.upper().clone())?;
                sol = solver.solve(&g_soft, Some(&sol.x), self.spec.qp_tol, self.spec.qp_max_iter)?;
                softened = penalized.iter().filter(|b| b.is_some()).count();
            }
        }

        let p = self.predictor.input_dim();
        let inputs = (0..self.spec.horizon)
            .map(|k| {
                DVector::from_fn(p, |j, _| {
                    sol.x[k * p + j].clamp(self.spec.u_min[j], self.spec.u_max[j])
                })
            })
            .collect();
        Ok(MpcSolution {
            inputs,
            iterations: sol.iterations,
            residual: sol.residual,
            softened,
        })
    }

    /// Warm start for the next call: the previous plan shifted by one step.
    pub fn shifted(solution: &MpcSolution) -> DVector<f64> {
        let mut seq: Vec<DVector<f64>> = solution.inputs[1..].to_vec();
        seq.push(solution.inputs.last().expect("nonempty plan").clone());
        let p = seq[0].len();
        DVector::from_fn(p * seq.len(), |i, _| seq[i / p][i % p])
    }
}

/// First input of the optimal plan from `x_now`.
pub fn mpc_step(mpc: &Mpc, x_now: &DVector<f64>, refs: &[DVector<f64>]) -> Result<DVector<f64>> {
    Ok(mpc.solve(x_now, refs, None)?.first().clone())
}
