use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `r^2 log r` with `r = |phi - center|`, continuous extension `0` at `r = 0`.
pub fn tps_rbf(center: f64, phi: f64) -> f64 {
    let r = (phi - center).abs();
    if r == 0.0 {
        0.0
    } else {
        r * r * r.ln()
    }
}

/// `exp(-(phi - center)^2 / (2 width^2))`
pub fn gaussian_rbf(center: f64, width: f64, phi: f64) -> Result<f64> {
    if !(width > 0.0) {
        return Err(Error::InvalidInput(format!("gaussian width must be positive, got {width}")));
    }
    Ok(gaussian_unchecked(center, width, phi))
}

fn gaussian_unchecked(center: f64, width: f64, phi: f64) -> f64 {
    let d = phi - center;
    (-(d * d) / (2.0 * width * width)).exp()
}

/// The `degree`-th polynomial basis function, `phi^(degree - 1)`.
pub fn monomial(degree: u32, phi: f64) -> f64 {
    assert!(degree >= 1, "monomial degrees start at 1");
    phi.powi(degree as i32 - 1)
}

/// A scalar function of one state coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Observable {
    Coordinate { index: usize },
    Sine { index: usize },
    /// `degree` counts from 1; the value is `x^(degree-1)`.
    Monomial { index: usize, degree: u32 },
    Tps { index: usize, center: f64 },
    Gaussian { index: usize, center: f64, width: f64 },
}

impl Observable {
    pub fn state_index(&self) -> usize {
        match *self {
            Observable::Coordinate { index }
            | Observable::Sine { index }
            | Observable::Monomial { index, .. }
            | Observable::Tps { index, .. }
            | Observable::Gaussian { index, .. } => index,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Observable::Monomial { degree, .. } if degree < 1 => {
                Err(Error::InvalidInput("monomial degree must be at least 1".into()))
            }
            Observable::Tps { center, .. } if !center.is_finite() => {
                Err(Error::InvalidInput("tps center must be finite".into()))
            }
            Observable::Gaussian { center, width, .. } if !(width > 0.0) || !center.is_finite() => {
                Err(Error::InvalidInput(format!(
                    "gaussian observable needs a finite center and positive width (got {center}, {width})"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        let v = x[self.state_index()];
        match *self {
            Observable::Coordinate { .. } => v,
            Observable::Sine { .. } => v.sin(),
            Observable::Monomial { degree, .. } => monomial(degree, v),
            Observable::Tps { center, .. } => tps_rbf(center, v),
            Observable::Gaussian { center, width, .. } => gaussian_unchecked(center, width, v),
        }
    }

    pub fn label(&self, state_names: &[&str]) -> String {
        let name = |i: usize| {
            state_names
                .get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("x{}", i + 1))
        };
        match *self {
            Observable::Coordinate { index } => name(index),
            Observable::Sine { index } => format!("sin({})", name(index)),
            Observable::Monomial { index, degree } => format!("{}^{}", name(index), degree - 1),
            Observable::Tps { index, center } => format!("tps({};{center:.4})", name(index)),
            Observable::Gaussian { index, center, width } => {
                format!("gauss({};{center:.4},{width:.4})", name(index))
            }
        }
    }
}
