//! Property checks shared by the property suite and the acceptance run.
#![allow(dead_code)]

use std::sync::OnceLock;

use liftkit::control::{Mpc, MpcSpec};
use liftkit::datagen::{assemble, collect, ExcitationSpec, SnapshotDataset};
use liftkit::dynamics::{Pendulum, PendulumParams, Trajectory};
use liftkit::edmd::{fit, LiftedLinearPredictor};
use liftkit::lifting::{make_dictionary, DictionarySpec};
use liftkit::metrics::{lifted_error, prediction_error, projected_error, StateView};
use liftkit::numerics::{pseudoinverse, solve_qp, QpProblem, DEFAULT_RANK_TOL};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

pub type Check = Result<(), TestCaseError>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

pub fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-10.0..10.0f64, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

/// Random matrices, a third of them rank deficient by construction.
pub fn any_matrix() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..7, 1usize..7, 1usize..7, any::<bool>()).prop_flat_map(|(m, n, k, low_rank)| {
        if low_rank && k < m.min(n) {
            (matrix(m, k), matrix(k, n)).prop_map(|(a, b)| a * b).boxed()
        } else {
            matrix(m, n).boxed()
        }
    })
}

pub fn check_moore_penrose(a: &DMatrix<f64>) -> Check {
    let p = pseudoinverse(a, DEFAULT_RANK_TOL).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let scale = 1.0 + a.norm() * p.norm();
    let tol = 1e-9 * scale * scale;
    let ap = a * &p;
    let pa = &p * a;
    ensure((&ap * a - a).norm() <= tol * (1.0 + a.norm()), || "A A+ A != A".into())?;
    ensure((&pa * &p - &p).norm() <= tol * (1.0 + p.norm()), || "A+ A A+ != A+".into())?;
    ensure((&ap - ap.transpose()).norm() <= tol, || "A A+ not symmetric".into())?;
    ensure((&pa - pa.transpose()).norm() <= tol, || "A+ A not symmetric".into())
}

#[derive(Debug, Clone)]
pub struct QpCase {
    pub problem: QpProblem,
    pub probes: Vec<DVector<f64>>,
}

pub fn qp_case() -> impl Strategy<Value = QpCase> {
    (1usize..7).prop_flat_map(|n| {
        (
            matrix(n, n),
            proptest::collection::vec(-20.0..20.0f64, n),
            proptest::collection::vec((-5.0..5.0f64, 0.0..5.0f64), n),
            proptest::collection::vec(proptest::collection::vec(0.0..1.0f64, n), 50),
        )
            .prop_map(move |(m, g, bounds, probes)| {
                let mut h = m.transpose() * &m / 10.0;
                for i in 0..n {
                    h[(i, i)] += 1e-3;
                }
                let h = (&h + h.transpose()) * 0.5;
                let lower = DVector::from_iterator(n, bounds.iter().map(|b| b.0));
                let upper = DVector::from_iterator(n, bounds.iter().map(|b| b.0 + b.1));
                let probes = probes
                    .iter()
                    .map(|t| DVector::from_fn(n, |i, _| lower[i] + t[i] * (upper[i] - lower[i])))
                    .collect();
                QpCase {
                    problem: QpProblem::new(h, DVector::from_vec(g), lower, upper).unwrap(),
                    probes,
                }
            })
    })
}

/// Feasible, KKT-stationary, and no worse than any sampled feasible point.
pub fn check_qp(case: &QpCase) -> Check {
    let p = &case.problem;
    let sol = solve_qp(p, 1e-10, 20_000).map_err(|e| TestCaseError::fail(e.to_string()))?;
    ensure(p.is_feasible(&sol.x, 0.0), || format!("infeasible {}", sol.x))?;
    let scale = 1.0 + p.linear.amax() + p.hessian.amax();
    ensure(p.kkt_residual(&sol.x) <= 1e-7 * scale, || {
        format!("kkt residual {:e}", p.kkt_residual(&sol.x))
    })?;
    let f = p.objective(&sol.x);
    for probe in &case.probes {
        let fp = p.objective(probe);
        ensure(f <= fp + 1e-8 * (1.0 + fp.abs()), || format!("probe beats solution: {fp} < {f}"))?;
    }
    Ok(())
}

pub struct PendulumFixture {
    pub trajectories: Vec<Trajectory>,
    pub dataset: SnapshotDataset,
    pub predictor: LiftedLinearPredictor,
}

pub fn pendulum_fixture() -> &'static PendulumFixture {
    static FIXTURE: OnceLock<PendulumFixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let plant = Pendulum::new(PendulumParams::default()).unwrap();
        let spec = ExcitationSpec {
            count: 60,
            seed: 21,
            ..ExcitationSpec::pendulum_closed_loop()
        };
        let trajectories = collect(&plant, &spec).unwrap();
        let map = make_dictionary(&DictionarySpec::sine(2, 0)).unwrap();
        let dataset = assemble(&trajectories, &map).unwrap();
        let predictor = fit(&dataset).unwrap();
        PendulumFixture {
            trajectories,
            dataset,
            predictor,
        }
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

/// `order` is a permutation seed: snapshots and trajectories are reordered by it.
pub fn check_metric_order_invariance(shift: usize, reverse: bool) -> Check {
    let fx = pendulum_fixture();
    let nd = fx.dataset.len();
    let mut order: Vec<usize> = (0..nd).collect();
    if reverse {
        order.reverse();
    }
    order.rotate_left(shift % nd);
    let ds2 = fx.dataset.permute_columns(&order);
    let mut trajs2 = fx.trajectories.clone();
    if reverse {
        trajs2.reverse();
    }
    let len = trajs2.len();
    trajs2.rotate_left(shift % len);
    let view = StateView::RAW;
    let p = &fx.predictor;
    let a = projected_error(p, &fx.dataset, &view).unwrap();
    let b = projected_error(p, &ds2, &view).unwrap();
    ensure(close(a, b), || format!("projected {a} vs {b}"))?;
    let a = lifted_error(p, &fx.dataset).unwrap();
    let b = lifted_error(p, &ds2).unwrap();
    ensure(close(a, b), || format!("lifted {a} vs {b}"))?;
    let a = prediction_error(p, &fx.trajectories, 25, &view).unwrap();
    let b = prediction_error(p, &trajs2, 25, &view).unwrap();
    ensure(close(a, b), || format!("prediction {a} vs {b}"))
}

pub fn check_prediction_monotone(h1: usize, h2: usize) -> Check {
    let (lo, hi) = (h1.min(h2), h1.max(h2));
    let fx = pendulum_fixture();
    let view = StateView::RAW;
    let a = prediction_error(&fx.predictor, &fx.trajectories, lo, &view).unwrap();
    let b = prediction_error(&fx.predictor, &fx.trajectories, hi, &view).unwrap();
    ensure(a <= b, || format!("eps_prediction({lo}) = {a} > eps_prediction({hi}) = {b}"))
}

pub fn check_dataset_determinism(seed: u64) -> Check {
    let plant = Pendulum::new(PendulumParams::default()).unwrap();
    let spec = ExcitationSpec {
        count: 4,
        seed,
        ..ExcitationSpec::pendulum_closed_loop()
    };
    let a = collect(&plant, &spec).unwrap();
    let b = collect(&plant, &spec).unwrap();
    ensure(a == b, || format!("seed {seed} gave different data"))?;
    let other = collect(&plant, &ExcitationSpec { seed: seed ^ 1, ..spec }).unwrap();
    ensure(a != other, || format!("seeds {seed} and {} agree", seed ^ 1))
}

/// Scalar integrator `z+ = z + b u` with random bounds and state.
pub fn check_mpc_bounds(z0: f64, b: f64, lo: f64, width: f64, horizon: usize) -> Check {
    let map = make_dictionary(&DictionarySpec::identity(1)).unwrap();
    let pred = LiftedLinearPredictor::new(
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, b),
        DMatrix::from_element(1, 1, 1.0),
        map,
        0.01,
    )
    .unwrap();
    let hi = lo + width;
    let spec = MpcSpec {
        horizon,
        outputs: vec![0],
        q_diag: vec![1.0],
        q_terminal_diag: vec![1.0],
        r_diag: vec![1e-3],
        u_min: vec![lo],
        u_max: vec![hi],
        ..MpcSpec::robot()
    };
    let mpc = Mpc::new(pred, spec).unwrap();
    let sol = mpc
        .solve(&DVector::from_element(1, z0), &[DVector::zeros(1)], None)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    for u in &sol.inputs {
        ensure(lo <= u[0] && u[0] <= hi, || format!("u = {} outside [{lo}, {hi}]", u[0]))?;
    }
    Ok(())
}

pub fn check_json_round_trip(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64) -> Check {
    let map = make_dictionary(&DictionarySpec::sine(2, 0)).unwrap();
    let c = map.selector().unwrap();
    let pred = LiftedLinearPredictor::new(a.clone(), b.clone(), c, map, dt).unwrap();
    let back = LiftedLinearPredictor::from_json(&pred.to_json().unwrap()).unwrap();
    ensure(back == pred, || "round trip changed the predictor".into())?;
    ensure(
        back.a.iter().zip(pred.a.iter()).all(|(x, y)| x.to_bits() == y.to_bits()),
        || "A not bit-identical".into(),
    )
}

/// Finite doubles across the whole exponent range.
pub fn wide_f64() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1.0..1.0f64,
        (-300i32..300, -1.0..1.0f64).prop_map(|(e, m)| m * 10f64.powi(e)),
        Just(0.0),
        Just(f64::MIN_POSITIVE),
        Just(-f64::MAX),
    ]
}

pub fn wide_matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(wide_f64(), rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}
