//! Fixtures shared by unit tests.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datagen::{assemble, collect, ExcitationSpec, SnapshotDataset};
use crate::dynamics::{Pendulum, PendulumParams, Trajectory};
use crate::lifting::{make_dictionary, DictionarySpec};

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Random `(A, B)` with spectral radius about 0.9.
pub fn stable_pair(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = gaussian_matrix(&mut rng, n, n);
    let rho = crate::numerics::spectral_radius(&a);
    a *= 0.9 / rho;
    (a, gaussian_matrix(&mut rng, n, p))
}

/// `nd` snapshots of `x+ = A x + B u` under identity lifting.
pub fn linear_dataset(a: &DMatrix<f64>, b: &DMatrix<f64>, nd: usize, seed: u64) -> SnapshotDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian_matrix(&mut rng, a.nrows(), nd);
    let u = gaussian_matrix(&mut rng, b.ncols(), nd);
    let x_next = a * &x + b * &u;
    SnapshotDataset {
        x_lift: x.clone(),
        y_lift: x_next.clone(),
        x,
        x_next,
        u,
        map: make_dictionary(&DictionarySpec::identity(a.nrows())).unwrap(),
        dt: 0.01,
    }
}

/// Closed-loop pendulum data, `count` trajectories of 0.5 s.
pub fn pendulum_trajectories(count: usize, seed: u64) -> Vec<Trajectory> {
    let plant = Pendulum::new(PendulumParams::default()).unwrap();
    let spec = ExcitationSpec {
        count,
        seed,
        ..ExcitationSpec::pendulum_closed_loop()
    };
    collect(&plant, &spec).unwrap()
}

pub fn pendulum_sine_dataset(count: usize, seed: u64) -> SnapshotDataset {
    let map = make_dictionary(&DictionarySpec::sine(2, 0)).unwrap();
    assemble(&pendulum_trajectories(count, seed), &map).unwrap()
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
