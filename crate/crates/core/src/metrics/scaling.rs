use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

/// Per-state affine map `x_scaled = (x - offset) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateScaling {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum ScalingMode {
    /// Map each state's observed range onto `[-1, 1]`.
    #[default]
    UnitInterval,
    Custom { offset: Vec<f64>, scale: Vec<f64> },
    Raw,
}

impl StateScaling {
    pub fn identity(n: usize) -> Self {
        Self {
            offset: vec![0.0; n],
            scale: vec![1.0; n],
        }
    }

    pub fn custom(offset: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if offset.len() != scale.len() {
            return Err(Error::Dimension("scaling offset and scale differ in length".into()));
        }
        if scale.iter().any(|s| !(s.is_finite() && *s != 0.0)) || offset.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidInput("scaling needs finite offsets and finite nonzero scales".into()));
        }
        Ok(Self { offset, scale })
    }

    /// Unit-interval scaling from per-state minima and maxima. A state with
    /// zero range keeps scale 1 and is centered on its value.
    pub fn from_ranges(min: &[f64], max: &[f64]) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::Dimension("range bounds differ in length".into()));
        }
        let mut offset = Vec::with_capacity(min.len());
        let mut scale = Vec::with_capacity(min.len());
        for (&lo, &hi) in min.iter().zip(max) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidInput(format!("state range [{lo}, {hi}] is not finite")));
            }
            let half = 0.5 * (hi - lo);
            if half > 0.0 {
                offset.push(lo + half);
                scale.push(half);
            } else {
                offset.push(lo);
                scale.push(1.0);
            }
        }
        Ok(Self { offset, scale })
    }

    /// Unit-interval scaling over the columns of `samples`.
    pub fn fit_columns(samples: &DMatrix<f64>) -> Result<Self> {
        if samples.ncols() == 0 {
            return Err(Error::InvalidInput("cannot scale an empty sample set".into()));
        }
        let min: Vec<f64> = samples.row_iter().map(|r| r.min()).collect();
        let max: Vec<f64> = samples.row_iter().map(|r| r.max()).collect();
        Self::from_ranges(&min, &max)
    }

    /// Unit-interval scaling over every state of every trajectory.
    pub fn fit_trajectories(trajs: &[Trajectory]) -> Result<Self> {
        let n = trajs
            .first()
            .ok_or_else(|| Error::InvalidInput("cannot scale an empty trajectory set".into()))?
            .state_dim();
        let mut min = vec![f64::INFINITY; n];
        let mut max = vec![f64::NEG_INFINITY; n];
        for x in trajs.iter().flat_map(|t| &t.states) {
            if x.len() != n {
                return Err(Error::Dimension("trajectories disagree on the state dimension".into()));
            }
            for i in 0..n {
                min[i] = min[i].min(x[i]);
                max[i] = max[i].max(x[i]);
            }
        }
        Self::from_ranges(&min, &max)
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| (x[i] - self.offset[i]) / self.scale[i])
    }

    pub fn invert(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| x[i] * self.scale[i] + self.offset[i])
    }

    /// Scale a difference of two states; the offset cancels.
    pub fn apply_delta(&self, d: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(d.len(), |i, _| d[i] / self.scale[i])
    }

    pub fn apply_trajectory(&self, t: &Trajectory) -> Trajectory {
        Trajectory {
            dt: t.dt,
            states: t.states.iter().map(|x| self.apply(x)).collect(),
            inputs: t.inputs.clone(),
        }
    }

    /// Restrict to a subset of states, in the given order.
    pub fn select(&self, states: &[usize]) -> Self {
        Self {
            offset: states.iter().map(|&i| self.offset[i]).collect(),
            scale: states.iter().map(|&i| self.scale[i]).collect(),
        }
    }
}
