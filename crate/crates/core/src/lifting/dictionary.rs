use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LiftingMap, Observable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DictionaryKind {
    /// Coordinates only.
    Identity,
    /// Coordinates plus `sin` of the angle state.
    Sine,
    /// Coordinates plus thin-plate-spline RBFs of the angle.
    Tps,
    /// Coordinates plus monomials `angle^0 .. angle^(count-1)`.
    Poly,
    /// Coordinates plus Gaussian RBFs of the angle.
    Gauss,
    /// Coordinates plus an explicit observable list.
    Custom,
}

impl DictionaryKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DictionaryKind::Identity => "identity",
            DictionaryKind::Sine => "sine",
            DictionaryKind::Tps => "tps",
            DictionaryKind::Poly => "poly",
            DictionaryKind::Gauss => "gauss",
            DictionaryKind::Custom => "custom",
        }
    }
}

impl fmt::Display for DictionaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DictionaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "identity" => DictionaryKind::Identity,
            "sine" => DictionaryKind::Sine,
            "tps" => DictionaryKind::Tps,
            "poly" => DictionaryKind::Poly,
            "gauss" => DictionaryKind::Gauss,
            "custom" => DictionaryKind::Custom,
            other => return Err(Error::Config(format!("unknown dictionary kind `{other}`"))),
        })
    }
}

/// Serializable description of a lifting map. Random parameters are drawn
/// from `seed`, so this value alone reproduces the map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DictionarySpec {
    pub kind: DictionaryKind,
    pub state_dim: usize,
    /// States included verbatim, in this order. `None` means all of them.
    pub coordinates: Option<Vec<usize>>,
    /// State the extra observables act on.
    pub angle_index: usize,
    /// Number of extra observables for `tps`, `poly` and `gauss`.
    pub count: usize,
    pub seed: u64,
    /// Range for RBF centers.
    pub center_range: [f64; 2],
    /// Range for Gaussian widths.
    pub width_range: [f64; 2],
    /// Extra observables for `custom`.
    pub observables: Vec<Observable>,
}

impl Default for DictionarySpec {
    fn default() -> Self {
        Self {
            kind: DictionaryKind::Sine,
            state_dim: 2,
            coordinates: None,
            angle_index: 0,
            count: 100,
            seed: 0,
            center_range: [-PI, PI],
            width_range: [0.2, 1.5],
            observables: Vec::new(),
        }
    }
}

impl DictionarySpec {
    pub fn identity(state_dim: usize) -> Self {
        Self {
            kind: DictionaryKind::Identity,
            state_dim,
            count: 0,
            ..Default::default()
        }
    }

    pub fn sine(state_dim: usize, angle_index: usize) -> Self {
        Self {
            kind: DictionaryKind::Sine,
            state_dim,
            angle_index,
            count: 1,
            ..Default::default()
        }
    }

    /// Pendulum dictionary: `[phi, omega]` followed by `count` extras in `phi`.
    pub fn pendulum(kind: DictionaryKind, count: usize) -> Self {
        Self {
            kind,
            state_dim: 2,
            angle_index: 0,
            count,
            ..Default::default()
        }
    }

    /// `[s', phi', chi', phi, sin(phi)]`: distance and yaw left out.
    pub fn robot_velocity_sine() -> Self {
        Self {
            coordinates: Some(vec![0, 1, 2, 4]),
            ..Self::sine(6, 4)
        }
    }

    /// `[s', phi', chi', s, phi, chi, sin(phi)]`
    pub fn robot_full_sine() -> Self {
        Self::sine(6, 4)
    }

    pub fn coordinate_list(&self) -> Vec<usize> {
        self.coordinates
            .clone()
            .unwrap_or_else(|| (0..self.state_dim).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("dictionary `{}`: {msg}", self.kind)));
        if self.state_dim == 0 {
            return bad("state_dim must be positive".into());
        }
        if let Some(i) = self.coordinate_list().iter().find(|&&i| i >= self.state_dim) {
            return bad(format!("coordinate {i} out of range"));
        }
        let extras = matches!(
            self.kind,
            DictionaryKind::Sine | DictionaryKind::Tps | DictionaryKind::Poly | DictionaryKind::Gauss
        );
        if extras && self.angle_index >= self.state_dim {
            return bad(format!("angle_index {} out of range", self.angle_index));
        }
        if matches!(
            self.kind,
            DictionaryKind::Tps | DictionaryKind::Poly | DictionaryKind::Gauss
        ) && self.count == 0
        {
            return bad("count must be positive".into());
        }
        let [c0, c1] = self.center_range;
        if !(c0.is_finite() && c1.is_finite() && c0 < c1) {
            return bad(format!("center_range {:?} is not an interval", self.center_range));
        }
        let [w0, w1] = self.width_range;
        if !(w0 > 0.0 && w1.is_finite() && w0 < w1) {
            return bad(format!("width_range {:?} must be positive", self.width_range));
        }
        Ok(())
    }
}

/// Build the lifting map described by `spec`. Deterministic in `spec`.
pub fn make_dictionary(spec: &DictionarySpec) -> Result<LiftingMap> {
    spec.validate()?;
    let mut observables: Vec<Observable> = spec
        .coordinate_list()
        .into_iter()
        .map(|index| Observable::Coordinate { index })
        .collect();
    let angle = spec.angle_index;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let [c0, c1] = spec.center_range;
    let [w0, w1] = spec.width_range;
    match spec.kind {
        DictionaryKind::Identity => {}
        DictionaryKind::Sine => observables.push(Observable::Sine { index: angle }),
        DictionaryKind::Tps => observables.extend((0..spec.count).map(|_| Observable::Tps {
            index: angle,
            center: rng.random_range(c0..c1),
        })),
        DictionaryKind::Poly => observables.extend((1..=spec.count).map(|degree| {
            Observable::Monomial {
                index: angle,
                degree: degree as u32,
            }
        })),
        DictionaryKind::Gauss => {
            observables.extend((0..spec.count).map(|_| {
                let center = rng.random_range(c0..c1);
                let width = rng.random_range(w0..w1);
                Observable::Gaussian {
                    index: angle,
                    center,
                    width,
                }
            }))
        }
        DictionaryKind::Custom => observables.extend(spec.observables.iter().copied()),
    }
    LiftingMap::new(spec.state_dim, observables, spec.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_pendulum_has_three_observables() {
        let m = make_dictionary(&DictionarySpec::sine(2, 0)).unwrap();
        assert_eq!(m.lifted_dim(), 3);
        assert_eq!(m.observables()[2], Observable::Sine { index: 0 });
    }

    #[test]
    fn hundred_extras_give_102() {
        for kind in [DictionaryKind::Tps, DictionaryKind::Poly, DictionaryKind::Gauss] {
            let m = make_dictionary(&DictionarySpec::pendulum(kind, 100)).unwrap();
            assert_eq!(m.lifted_dim(), 102, "{kind}");
            assert_eq!(m.coordinate_states(), vec![0, 1]);
            assert_eq!(m.coordinate_row(0), Some(0));
            assert_eq!(m.coordinate_row(1), Some(1));
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let mut spec = DictionarySpec::pendulum(DictionaryKind::Gauss, 100);
        spec.seed = 11;
        let a = make_dictionary(&spec).unwrap();
        let b = make_dictionary(&spec).unwrap();
        assert_eq!(a, b);
        spec.seed = 12;
        assert_ne!(make_dictionary(&spec).unwrap(), a);
    }

    #[test]
    fn random_parameters_stay_in_range() {
        let mut spec = DictionarySpec::pendulum(DictionaryKind::Gauss, 500);
        spec.seed = 3;
        for o in make_dictionary(&spec).unwrap().observables() {
            if let Observable::Gaussian { center, width, .. } = *o {
                assert!((-PI..PI).contains(&center));
                assert!((0.2..1.5).contains(&width));
            }
        }
    }

    #[test]
    fn poly_degrees_start_at_constant() {
        let m = make_dictionary(&DictionarySpec::pendulum(DictionaryKind::Poly, 4)).unwrap();
        let z = m.lift(&nalgebra::dvector![2.0, 5.0]);
        assert_eq!(z.as_slice(), &[2.0, 5.0, 1.0, 2.0, 4.0, 8.0]);
    }

    #[test]
    fn unknown_kind_is_config_error() {
        assert!(matches!("bogus".parse::<DictionaryKind>(), Err(Error::Config(_))));
        let r: std::result::Result<DictionarySpec, _> = toml::from_str("kind = \"fourier\"");
        assert!(r.is_err());
    }

    #[test]
    fn spec_from_partial_toml_uses_defaults() {
        let spec: DictionarySpec = toml::from_str("kind = \"tps\"\nseed = 4").unwrap();
        assert_eq!(spec.count, 100);
        assert_eq!(spec.state_dim, 2);
        assert_eq!(spec.center_range, [-PI, PI]);
    }

    #[test]
    fn invalid_ranges_rejected() {
        let spec = DictionarySpec {
            kind: DictionaryKind::Gauss,
            width_range: [0.0, 1.0],
            ..Default::default()
        };
        assert!(matches!(make_dictionary(&spec), Err(Error::Config(_))));
    }
}
