use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// `offset + amplitude * sin(2 pi f t + phase)` on one reference channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineComponent {
    pub channel: usize,
    pub amplitude: f64,
    pub frequency_hz: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub offset: f64,
}

/// Reference trajectory in the controller's output space.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReferenceSpec {
    #[default]
    Zero,
    Constant { values: Vec<f64> },
    /// Channels without a component stay at zero.
    Sinusoid { components: Vec<SineComponent> },
}

impl ReferenceSpec {
    pub fn at(&self, t: f64, dim: usize) -> DVector<f64> {
        match self {
            ReferenceSpec::Zero => DVector::zeros(dim),
            ReferenceSpec::Constant { values } => DVector::from_fn(dim, |i, _| values.get(i).copied().unwrap_or(0.0)),
            ReferenceSpec::Sinusoid { components } => {
                let mut r = DVector::zeros(dim);
                for c in components.iter().filter(|c| c.channel < dim) {
                    r[c.channel] += c.offset + c.amplitude * (2.0 * PI * c.frequency_hz * t + c.phase).sin();
                }
                r
            }
        }
    }

    /// Targets for times `t0 + dt, .., t0 + horizon dt`.
    pub fn window(&self, t0: f64, dt: f64, horizon: usize, dim: usize) -> Vec<DVector<f64>> {
        (1..=horizon).map(|k| self.at(t0 + k as f64 * dt, dim)).collect()
    }
}
