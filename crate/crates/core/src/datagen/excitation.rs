use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::seed::derive_seed;
use crate::dynamics::{local_linearization, rk4_step, ContinuousSystem, Trajectory, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::numerics::{solve_dare, DEFAULT_DARE_MAX_ITER, DEFAULT_DARE_TOL};

/// Redraws allowed per trajectory before collection gives up.
pub const MAX_REDRAWS: u64 = 10;

/// Norm beyond which a trajectory counts as divergent.
const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialScheme {
    /// `phi0 ~ pi + U(-0.3, 0.3)`
    NearStable,
    /// `phi0 ~ U(-0.3, 0.3)`
    NearUnstable,
    /// `phi0 ~ U(-pi, pi)`
    UniformAngle,
}

impl InitialScheme {
    pub const ALL: [InitialScheme; 3] = [
        InitialScheme::NearStable,
        InitialScheme::NearUnstable,
        InitialScheme::UniformAngle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            InitialScheme::NearStable => "near-stable",
            InitialScheme::NearUnstable => "near-unstable",
            InitialScheme::UniformAngle => "uniform-angle",
        }
    }

    /// Pendulum state `[phi0, omega0]` with `omega0 ~ U(-1, 1)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let phi = match self {
            InitialScheme::NearStable => PI + rng.random_range(-0.3..=0.3),
            InitialScheme::NearUnstable => rng.random_range(-0.3..=0.3),
            InitialScheme::UniformAngle => rng.random_range(-PI..PI),
        };
        let omega = rng.random_range(-1.0..=1.0);
        DVector::from_vec(vec![phi, omega])
    }
}

/// One pendulum initial state drawn from `scheme` with its own seed.
pub fn initial_state_sampler(scheme: InitialScheme, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "initial-state"));
    scheme.sample(&mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialDistribution {
    Pendulum { scheme: InitialScheme },
    /// Independent uniform draws per state; equal bounds pin a state.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl InitialDistribution {
    fn dim(&self) -> usize {
        match self {
            InitialDistribution::Pendulum { .. } => 2,
            InitialDistribution::Box { lower, .. } => lower.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let InitialDistribution::Box { lower, upper } = self {
            if lower.len() != upper.len() {
                return Err(Error::Config("initial box bounds differ in length".into()));
            }
            if lower.iter().zip(upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
                return Err(Error::Config("initial box needs finite lower <= upper".into()));
            }
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match self {
            InitialDistribution::Pendulum { scheme } => scheme.sample(rng),
            InitialDistribution::Box { lower, upper } => DVector::from_iterator(
                lower.len(),
                lower.iter().zip(upper).map(|(&l, &u)| if l == u { l } else { rng.random_range(l..=u) }),
            ),
        }
    }
}

/// `r(t) = A sin(2 pi f t)` on one state, with `A` drawn per trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinusoidReference {
    pub state: usize,
    pub frequency_hz: f64,
    pub amplitude_range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExcitationMode {
    /// `u = -k_p x[state_index] + w`, `k_p ~ U(gain_range)`.
    ProportionalFeedback { state_index: usize, gain_range: [f64; 2] },
    /// `u = -K (x - r)[modeled_states] + w` with `K` from an LQR on the local
    /// linearization at the origin restricted to `modeled_states`.
    LqrFeedback {
        q_diag: Vec<f64>,
        r_diag: Vec<f64>,
        modeled_states: Vec<usize>,
        references: Vec<SinusoidReference>,
    },
    /// `u = w`
    OpenLoopRandom,
}

/// Zero-order-hold noise `w`, each held value `~ U(-amplitude, amplitude)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Perturbation {
    pub amplitude: f64,
    pub hold_steps: usize,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            amplitude: 2.0,
            hold_steps: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExcitationSpec {
    pub mode: ExcitationMode,
    pub perturbation: Perturbation,
    pub initial: InitialDistribution,
    /// Trajectory length in seconds; must be a multiple of `dt`.
    pub length_s: f64,
    pub count: usize,
    pub seed: u64,
    pub dt: f64,
}

impl Default for ExcitationSpec {
    fn default() -> Self {
        Self::pendulum_closed_loop()
    }
}

impl ExcitationSpec {
    /// Perturbed proportional feedback from random states: 2100 trajectories
    /// of 0.5 s.
    pub fn pendulum_closed_loop() -> Self {
        Self {
            mode: ExcitationMode::ProportionalFeedback {
                state_index: 0,
                gain_range: [10.0, 200.0],
            },
            perturbation: Perturbation::default(),
            initial: InitialDistribution::Box {
                lower: vec![-PI - 0.3, -1.0],
                upper: vec![PI + 0.3, 1.0],
            },
            length_s: 0.5,
            count: 2100,
            seed: 0,
            dt: DEFAULT_STEP,
        }
    }

    /// Random open-loop input from one of the three pendulum schemes.
    pub fn pendulum_open_loop(scheme: InitialScheme) -> Self {
        Self {
            mode: ExcitationMode::OpenLoopRandom,
            initial: InitialDistribution::Pendulum { scheme },
            ..Self::pendulum_closed_loop()
        }
    }

    /// LQR-stabilized robot with sinusoidal speed and yaw-rate references.
    pub fn robot_closed_loop() -> Self {
        Self {
            mode: ExcitationMode::LqrFeedback {
                q_diag: vec![1.0, 1.0, 1.0, 10.0],
                r_diag: vec![1.0, 1.0],
                modeled_states: vec![0, 1, 2, 4],
                references: vec![
                    SinusoidReference {
                        state: 0,
                        frequency_hz: 0.5,
                        amplitude_range: [0.0, 1.0],
                    },
                    SinusoidReference {
                        state: 2,
                        frequency_hz: 0.3,
                        amplitude_range: [0.0, 1.0],
                    },
                ],
            },
            perturbation: Perturbation {
                amplitude: 0.1,
                hold_steps: 5,
            },
            initial: InitialDistribution::Box {
                lower: vec![0.0, 0.0, 0.0, -2.0, -0.11, -PI],
                upper: vec![0.0, 0.0, 0.0, 2.0, 0.11, PI],
            },
            length_s: 1.0,
            count: 2000,
            seed: 0,
            dt: DEFAULT_STEP,
        }
    }

    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !(self.length_s > 0.0) {
            return Err(Error::Config("trajectory length and step must be positive".into()));
        }
        let ratio = self.length_s / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) || steps < 1.0 {
            return Err(Error::Config(format!(
                "trajectory length {} s is not a positive multiple of {} s",
                self.length_s, self.dt
            )));
        }
        Ok(steps as usize)
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("trajectory count must be positive".into()));
        }
        self.steps()?;
        self.initial.validate()?;
        if self.initial.dim() != n {
            return Err(Error::Config(format!(
                "initial distribution has {} states, system has {n}",
                self.initial.dim()
            )));
        }
        if !(self.perturbation.amplitude >= 0.0) || self.perturbation.hold_steps == 0 {
            return Err(Error::Config("perturbation needs amplitude >= 0 and hold_steps >= 1".into()));
        }
        match &self.mode {
            ExcitationMode::ProportionalFeedback { state_index, gain_range } => {
                if *state_index >= n || !(gain_range[0] <= gain_range[1]) {
                    return Err(Error::Config("invalid proportional feedback settings".into()));
                }
            }
            ExcitationMode::LqrFeedback {
                q_diag,
                r_diag,
                modeled_states,
                references,
            } => {
                if q_diag.len() != modeled_states.len() || r_diag.len() != p {
                    return Err(Error::Config("LQR weight lengths do not match the modeled states / inputs".into()));
                }
                if modeled_states.iter().any(|&i| i >= n) || references.iter().any(|r| r.state >= n) {
                    return Err(Error::Config("LQR excitation state index out of range".into()));
                }
                if references.iter().any(|r| !(r.amplitude_range[0] <= r.amplitude_range[1])) {
                    return Err(Error::Config("reference amplitude range inverted".into()));
                }
            }
            ExcitationMode::OpenLoopRandom => {}
        }
        Ok(())
    }
}

/// The control law of one trajectory, after its random draws.
enum Law {
    Proportional { index: usize, gain: f64 },
    Lqr {
        gain: DMatrix<f64>,
        modeled: Vec<usize>,
        refs: Vec<(usize, f64, f64)>,
    },
    Open,
}

impl Law {
    fn feedback(&self, x: &DVector<f64>, t: f64, p: usize) -> DVector<f64> {
        match self {
            Law::Proportional { index, gain } => DVector::from_element(p, -gain * x[*index]),
            Law::Lqr { gain, modeled, refs } => {
                let mut target = DVector::zeros(x.len());
                for &(state, freq, amp) in refs {
                    target[state] = amp * (2.0 * PI * freq * t).sin();
                }
                let err = DVector::from_iterator(modeled.len(), modeled.iter().map(|&i| x[i] - target[i]));
                -(gain * err)
            }
            Law::Open => DVector::zeros(p),
        }
    }
}

/// LQR gain on the origin linearization restricted to `modeled` states.
pub fn reduced_lqr_gain<S: ContinuousSystem + ?Sized>(
    sys: &S,
    modeled: &[usize],
    q_diag: &[f64],
    r_diag: &[f64],
    dt: f64,
) -> Result<DMatrix<f64>> {
    let n = sys.state_dim();
    let p = sys.input_dim();
    let lin = local_linearization(sys, &DVector::zeros(n), &DVector::zeros(p), dt)?;
    let m = modeled.len();
    let a = DMatrix::from_fn(m, m, |i, j| lin.predictor.a[(modeled[i], modeled[j])]);
    let b = DMatrix::from_fn(m, p, |i, j| lin.predictor.b[(modeled[i], j)]);
    let q = DMatrix::from_diagonal(&DVector::from_column_slice(q_diag));
    let r = DMatrix::from_diagonal(&DVector::from_column_slice(r_diag));
    let s = DMatrix::zeros(m, p);
    Ok(solve_dare(&a, &b, &q, &r, &s, DEFAULT_DARE_TOL, DEFAULT_DARE_MAX_ITER)?.k)
}

fn run_one<S: ContinuousSystem + ?Sized>(
    sys: &S,
    spec: &ExcitationSpec,
    steps: usize,
    lqr_gain: Option<&DMatrix<f64>>,
    rng: &mut ChaCha8Rng,
) -> Option<Trajectory> {
    let p = sys.input_dim();
    let x0 = spec.initial.sample(rng);
    let law = match &spec.mode {
        ExcitationMode::ProportionalFeedback { state_index, gain_range } => Law::Proportional {
            index: *state_index,
            gain: if gain_range[0] == gain_range[1] {
                gain_range[0]
            } else {
                rng.random_range(gain_range[0]..=gain_range[1])
            },
        },
        ExcitationMode::LqrFeedback {
            modeled_states,
            references,
            ..
        } => Law::Lqr {
            gain: lqr_gain.expect("gain computed for lqr mode").clone(),
            modeled: modeled_states.clone(),
            refs: references
                .iter()
                .map(|r| {
                    let [lo, hi] = r.amplitude_range;
                    let amp = if lo == hi { lo } else { rng.random_range(lo..=hi) };
                    (r.state, r.frequency_hz, amp)
                })
                .collect(),
        },
        ExcitationMode::OpenLoopRandom => Law::Open,
    };

    let amp = spec.perturbation.amplitude;
    let mut noise = DVector::zeros(p);
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps);
    let mut x = x0;
    for k in 0..steps {
        if k % spec.perturbation.hold_steps == 0 {
            noise = DVector::from_fn(p, |_, _| if amp > 0.0 { rng.random_range(-amp..=amp) } else { 0.0 });
        }
        let u = law.feedback(&x, k as f64 * spec.dt, p) + &noise;
        let next = rk4_step(sys, &x, &u, spec.dt).ok()?;
        if next.norm() > DIVERGENCE_NORM {
            return None;
        }
        states.push(x);
        inputs.push(u);
        x = next;
    }
    states.push(x);
    Trajectory::new(spec.dt, states, inputs).ok()
}

/// Generate `spec.count` trajectories. Trajectory `i`, attempt `a` draws from
/// its own ChaCha stream `(i << 8) | a`, so the result does not depend on
/// scheduling.
pub fn collect<S: ContinuousSystem + ?Sized>(sys: &S, spec: &ExcitationSpec) -> Result<Vec<Trajectory>> {
    spec.validate(sys.state_dim(), sys.input_dim())?;
    let steps = spec.steps()?;
    let gain = match &spec.mode {
        ExcitationMode::LqrFeedback {
            q_diag,
            r_diag,
            modeled_states,
            ..
        } => Some(reduced_lqr_gain(sys, modeled_states, q_diag, r_diag, spec.dt)?),
        _ => None,
    };
    let base = derive_seed(spec.seed, "collect");
    (0..spec.count as u64)
        .into_par_iter()
        .map(|i| {
            for attempt in 0..=MAX_REDRAWS {
                let mut rng = ChaCha8Rng::seed_from_u64(base);
                rng.set_stream((i << 8) | attempt);
                if let Some(t) = run_one(sys, spec, steps, gain.as_ref(), &mut rng) {
                    return Ok(t);
                }
            }
            Err(Error::NonConvergence {
                what: "trajectory collection (every redraw diverged)",
                iterations: MAX_REDRAWS as usize + 1,
                residual: f64::INFINITY,
            })
        })
        .collect()
}

/// Deterministic shuffled split; both parts keep the original relative order.
pub fn split(trajs: Vec<Trajectory>, eval_count: usize, seed: u64) -> Result<(Vec<Trajectory>, Vec<Trajectory>)> {
    if eval_count > 0 && eval_count >= trajs.len() {
        return Err(Error::InvalidInput(format!(
            "eval_count {eval_count} must be below the trajectory count {}",
            trajs.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "split"));
    let mut order: Vec<usize> = (0..trajs.len()).collect();
    // Fisher-Yates with explicit draws, so the permutation is pinned to the RNG.
    for i in (1..order.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
    let mut is_eval = vec![false; trajs.len()];
    for &i in &order[..eval_count] {
        is_eval[i] = true;
    }
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for (t, e) in trajs.into_iter().zip(is_eval) {
        if e {
            eval.push(t);
        } else {
            train.push(t);
        }
    }
    Ok((train, eval))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Pendulum, Robot};

    fn small(count: usize) -> ExcitationSpec {
        ExcitationSpec {
            count,
            ..ExcitationSpec::pendulum_closed_loop()
        }
    }

    #[test]
    fn proportional_collection_shapes() {
        let trajs = collect(&Pendulum::default(), &small(20)).unwrap();
        assert_eq!(trajs.len(), 20);
        assert!(trajs.iter().all(|t| t.len() == 50 && t.is_finite()));
    }

    #[test]
    fn repeated_seed_is_bitwise_identical() {
        let a = collect(&Pendulum::default(), &small(30)).unwrap();
        let b = collect(&Pendulum::default(), &small(30)).unwrap();
        assert_eq!(a, b);
        let mut other = small(30);
        other.seed = 1;
        assert_ne!(a, collect(&Pendulum::default(), &other).unwrap());
    }

    #[test]
    fn prefix_of_larger_collection_matches() {
        let a = collect(&Pendulum::default(), &small(10)).unwrap();
        let b = collect(&Pendulum::default(), &small(25)).unwrap();
        assert_eq!(a[..], b[..10]);
    }

    #[test]
    fn perturbation_is_held() {
        let spec = ExcitationSpec {
            count: 3,
            ..ExcitationSpec::pendulum_open_loop(InitialScheme::NearStable)
        };
        for t in collect(&Pendulum::default(), &spec).unwrap() {
            for k in 0..t.len() {
                let held = &t.inputs[k - k % 5];
                assert_eq!(&t.inputs[k], held);
                assert!(t.inputs[k][0].abs() <= 2.0);
            }
        }
    }

    #[test]
    fn schemes_respect_their_ranges() {
        for seed in 0..200 {
            let s = initial_state_sampler(InitialScheme::NearStable, seed);
            assert!((s[0] - PI).abs() <= 0.3 && s[1].abs() <= 1.0);
            let u = initial_state_sampler(InitialScheme::NearUnstable, seed);
            assert!(u[0].abs() <= 0.3 && u[1].abs() <= 1.0);
            let w = initial_state_sampler(InitialScheme::UniformAngle, seed);
            assert!(w[0].abs() <= PI);
        }
    }

    #[test]
    fn uniform_scheme_mean_is_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mean: f64 = (0..n).map(|_| InitialScheme::UniformAngle.sample(&mut rng)[0]).sum::<f64>() / n as f64;
        // std of the mean is pi / sqrt(3 n) ~ 0.018
        assert!(mean.abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn robot_lqr_collection_stays_upright() {
        let spec = ExcitationSpec {
            count: 8,
            ..ExcitationSpec::robot_closed_loop()
        };
        let trajs = collect(&Robot::default(), &spec).unwrap();
        assert_eq!(trajs.len(), 8);
        for t in &trajs {
            assert_eq!(t.len(), 100);
            assert!(t.states.iter().all(|x| x[4].abs() < 1.0));
        }
    }

    #[test]
    fn invalid_specs_are_config_errors() {
        let mut s = small(0);
        assert!(matches!(collect(&Pendulum::default(), &s), Err(Error::Config(_))));
        s.count = 1;
        s.length_s = 0.505;
        assert!(matches!(collect(&Pendulum::default(), &s), Err(Error::Config(_))));
    }

    #[test]
    fn split_sizes() {
        let trajs = collect(&Pendulum::default(), &small(40)).unwrap();
        let (tr, ev) = split(trajs.clone(), 10, 3).unwrap();
        assert_eq!((tr.len(), ev.len()), (30, 10));
        let (tr2, ev2) = split(trajs.clone(), 10, 3).unwrap();
        assert_eq!(tr, tr2);
        assert_eq!(ev, ev2);
        let (all, none) = split(trajs.clone(), 0, 3).unwrap();
        assert_eq!((all.len(), none.len()), (40, 0));
        assert!(split(trajs, 40, 3).is_err());
    }
}
