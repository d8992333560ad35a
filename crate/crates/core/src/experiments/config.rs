//! Experiment configuration.
//!
//! A config file holds optional sections. Each experiment starts from its
//! own defaults and overlays whatever the file provides, key by key, so a
//! section may be partial. The resolved settings are echoed in the manifest.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::control::{FailureCriteria, LqrWeights, MpcSpec, ReferenceSpec, SineComponent};
use crate::datagen::{derive_seed, ExcitationSpec};
use crate::dynamics::{PendulumParams, RobotParams, DEFAULT_STEP};
use crate::edmd::FitOptions;
use crate::error::{Error, Result};
use crate::lifting::DictionarySpec;
use crate::metrics::{MetricSpec, ScalingMode};

pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Pendulum,
    Robot,
}

/// Raw config file contents. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub system: Option<SystemKind>,
    pub out: Option<PathBuf>,
    pub pendulum: Option<Value>,
    pub robot: Option<Value>,
    pub dictionary: Option<Value>,
    pub excitation: Option<Value>,
    pub split: Option<Value>,
    pub fit: Option<Value>,
    pub lqr: Option<Value>,
    pub mpc: Option<Value>,
    pub metrics: Option<Value>,
    pub closed_loop: Option<Value>,
    pub lifting: Option<Value>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// `.json` files are read as JSON, everything else as TOML.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read `{}`: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }
}

/// Recursively merge `patch` into `base`. Objects merge key by key; a patch
/// that switches an enum `kind` replaces the whole object.
fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            let kind_changed = matches!((b.get("kind"), p.get("kind")), (Some(x), Some(y)) if x != y);
            if kind_changed {
                *b = p.clone();
                return;
            }
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, p) => *slot = p.clone(),
    }
}

/// First key of `patch` with no counterpart in `resolved`, as a dotted path.
fn unknown_key(patch: &Value, resolved: &Value, prefix: &str) -> Option<String> {
    let (Value::Object(p), Value::Object(r)) = (patch, resolved) else {
        return None;
    };
    p.iter().find_map(|(k, v)| {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match r.get(k) {
            None => Some(path),
            Some(rv) => unknown_key(v, rv, &path),
        }
    })
}

/// Overlay an optional config section on a default value. Keys the target
/// type does not know are rejected.
pub fn overlay<T: Serialize + DeserializeOwned>(default: T, patch: Option<&Value>, section: &str) -> Result<T> {
    let Some(patch) = patch else {
        return Ok(default);
    };
    let mut base = serde_json::to_value(&default)?;
    merge(&mut base, patch);
    let value: T = serde_json::from_value(base).map_err(|e| Error::Config(format!("section `{section}`: {e}")))?;
    if let Some(key) = unknown_key(patch, &serde_json::to_value(&value)?, "") {
        return Err(Error::Config(format!("section `{section}`: unknown field `{key}`")));
    }
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub eval_count: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { eval_count: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClosedLoopSpec {
    pub duration: f64,
    pub dt: f64,
    pub x0: Vec<f64>,
    pub reference: ReferenceSpec,
    /// Initial travelled distances compared by the coupling experiment.
    pub initial_distances: Vec<f64>,
    pub failure: FailureCriteria,
}

impl Default for ClosedLoopSpec {
    fn default() -> Self {
        Self::pendulum()
    }
}

impl ClosedLoopSpec {
    /// Swing-up from the downward position for 5 s.
    pub fn pendulum() -> Self {
        Self {
            duration: 5.0,
            dt: DEFAULT_STEP,
            x0: vec![PI, 0.0],
            reference: ReferenceSpec::Zero,
            initial_distances: Vec::new(),
            failure: FailureCriteria::default(),
        }
    }

    /// 10 s of speed and yaw-rate tracking from rest.
    pub fn robot() -> Self {
        Self {
            duration: 10.0,
            dt: DEFAULT_STEP,
            x0: vec![0.0; 6],
            reference: ReferenceSpec::Sinusoid {
                components: vec![
                    SineComponent {
                        channel: 0,
                        amplitude: 0.5,
                        frequency_hz: 0.2,
                        phase: 0.0,
                        offset: 0.0,
                    },
                    SineComponent {
                        channel: 2,
                        amplitude: 0.5,
                        frequency_hz: 0.1,
                        phase: 0.0,
                        offset: 0.0,
                    },
                ],
            },
            initial_distances: vec![0.0, 100.0],
            failure: FailureCriteria::robot(),
        }
    }
}

/// Extra-observable settings for the dictionary comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiftingComparisonSpec {
    pub count: usize,
    pub center_range: [f64; 2],
    pub width_range: [f64; 2],
    /// Fit options for the large dictionaries.
    pub fit: FitOptions,
}

impl Default for LiftingComparisonSpec {
    fn default() -> Self {
        let d = DictionarySpec::default();
        Self {
            count: 100,
            center_range: d.center_range,
            width_range: d.width_range,
            fit: FitOptions::default(),
        }
    }
}

/// Resolved pendulum settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendulumSetup {
    pub seed: u64,
    pub params: PendulumParams,
    pub excitation: ExcitationSpec,
    pub split: SplitSpec,
    pub dictionary: DictionarySpec,
    pub fit: FitOptions,
    pub lqr: LqrWeights,
    pub metrics: MetricSpec,
    pub closed_loop: ClosedLoopSpec,
    pub lifting: LiftingComparisonSpec,
}

impl PendulumSetup {
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self> {
        let seed = cfg.master_seed();
        let mut excitation = overlay(ExcitationSpec::pendulum_closed_loop(), cfg.excitation.as_ref(), "excitation")?;
        excitation.seed = derive_seed(seed, "pendulum/collect");
        let mut dictionary = overlay(DictionarySpec::sine(2, 0), cfg.dictionary.as_ref(), "dictionary")?;
        dictionary.seed = derive_seed(seed, "pendulum/dictionary");
        Ok(Self {
            seed,
            params: overlay(PendulumParams::default(), cfg.pendulum.as_ref(), "pendulum")?,
            excitation,
            split: overlay(SplitSpec { eval_count: 100 }, cfg.split.as_ref(), "split")?,
            dictionary,
            fit: overlay(FitOptions::default(), cfg.fit.as_ref(), "fit")?,
            lqr: overlay(LqrWeights::default(), cfg.lqr.as_ref(), "lqr")?,
            metrics: overlay(MetricSpec::default(), cfg.metrics.as_ref(), "metrics")?,
            closed_loop: overlay(ClosedLoopSpec::pendulum(), cfg.closed_loop.as_ref(), "closed_loop")?,
            lifting: overlay(LiftingComparisonSpec::default(), cfg.lifting.as_ref(), "lifting")?,
        })
    }

    pub fn split_seed(&self) -> u64 {
        derive_seed(self.seed, "pendulum/split")
    }
}

/// Resolved robot settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSetup {
    pub seed: u64,
    pub params: RobotParams,
    pub excitation: ExcitationSpec,
    pub split: SplitSpec,
    /// Map without distance and yaw.
    pub dictionary: DictionarySpec,
    /// Map with every state.
    pub full_dictionary: DictionarySpec,
    pub fit: FitOptions,
    pub mpc: MpcSpec,
    pub metrics: MetricSpec,
    pub closed_loop: ClosedLoopSpec,
}

impl RobotSetup {
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self> {
        let seed = cfg.master_seed();
        let mut excitation = overlay(ExcitationSpec::robot_closed_loop(), cfg.excitation.as_ref(), "excitation")?;
        excitation.seed = derive_seed(seed, "robot/collect");
        let dictionary = overlay(DictionarySpec::robot_velocity_sine(), cfg.dictionary.as_ref(), "dictionary")?;
        let metrics = MetricSpec {
            horizon: 50,
            scaling: ScalingMode::UnitInterval,
            states: Some(vec![0, 1, 2, 4]),
        };
        Ok(Self {
            seed,
            params: overlay(RobotParams::default(), cfg.robot.as_ref(), "robot")?,
            excitation,
            split: overlay(SplitSpec { eval_count: 1000 }, cfg.split.as_ref(), "split")?,
            dictionary,
            full_dictionary: DictionarySpec::robot_full_sine(),
            fit: overlay(FitOptions::default(), cfg.fit.as_ref(), "fit")?,
            mpc: overlay(MpcSpec::robot(), cfg.mpc.as_ref(), "mpc")?,
            metrics: overlay(metrics, cfg.metrics.as_ref(), "metrics")?,
            closed_loop: overlay(ClosedLoopSpec::robot(), cfg.closed_loop.as_ref(), "closed_loop")?,
        })
    }

    pub fn split_seed(&self) -> u64 {
        derive_seed(self.seed, "robot/split")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::ExcitationMode;

    #[test]
    fn nested_typo_is_rejected() {
        let patch = serde_json::json!({ "perturbation": { "amplitud": 1.0 } });
        match overlay(ExcitationSpec::robot_closed_loop(), Some(&patch), "excitation") {
            Err(Error::Config(msg)) => assert!(msg.contains("perturbation.amplitud"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_config_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        let s = PendulumSetup::resolve(&cfg).unwrap();
        assert_eq!(s.excitation.count, 2100);
        assert_eq!(s.split.eval_count, 100);
        assert_eq!(s.lqr.q_diag, vec![10.0, 1.0]);
        let r = RobotSetup::resolve(&cfg).unwrap();
        assert_eq!(r.excitation.count, 2000);
        assert_eq!(r.split.eval_count, 1000);
        assert_eq!(r.mpc.horizon, 50);
    }

    #[test]
    fn partial_sections_overlay_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "seed = 9\n[excitation]\ncount = 30\n[excitation.perturbation]\namplitude = 1.0\n[lqr]\nr_diag = [1.0]\n",
        )
        .unwrap();
        let s = PendulumSetup::resolve(&cfg).unwrap();
        assert_eq!(s.excitation.count, 30);
        assert_eq!(s.excitation.perturbation.amplitude, 1.0);
        assert_eq!(s.excitation.perturbation.hold_steps, 5);
        assert_eq!(s.excitation.length_s, 0.5);
        assert_eq!(s.lqr.q_diag, vec![10.0, 1.0]);
        assert_eq!(s.lqr.r_diag, vec![1.0]);
        assert_eq!(s.seed, 9);
    }

    #[test]
    fn switching_mode_kind_replaces_the_variant() {
        let cfg = ExperimentConfig::from_toml_str("[excitation.mode]\nkind = \"open-loop-random\"\n").unwrap();
        let s = PendulumSetup::resolve(&cfg).unwrap();
        assert_eq!(s.excitation.mode, ExcitationMode::OpenLoopRandom);
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(matches!(ExperimentConfig::from_toml_str("bogus = 1"), Err(Error::Config(_))));
        let cfg = ExperimentConfig::from_toml_str("[excitation]\ncount = \"many\"\n").unwrap();
        assert!(matches!(PendulumSetup::resolve(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn seeds_fan_out_by_label() {
        let a = PendulumSetup::resolve(&ExperimentConfig::default()).unwrap();
        let b = PendulumSetup::resolve(&ExperimentConfig {
            seed: Some(1),
            ..Default::default()
        })
        .unwrap();
        assert_ne!(a.excitation.seed, b.excitation.seed);
        assert_ne!(a.excitation.seed, a.dictionary.seed);
    }
}
