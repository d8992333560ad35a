use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// States `x_0..x_L` and inputs `u_0..u_{L-1}` sampled every `dt` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(dt: f64, states: Vec<DVector<f64>>, inputs: Vec<DVector<f64>>) -> Result<Self> {
        if states.len() != inputs.len() + 1 {
            return Err(Error::Dimension(format!(
                "trajectory has {} states for {} inputs",
                states.len(),
                inputs.len()
            )));
        }
        if let (Some(first), Some(u0)) = (states.first(), inputs.first()) {
            let (n, p) = (first.len(), u0.len());
            if states.iter().any(|x| x.len() != n) || inputs.iter().any(|u| u.len() != p) {
                return Err(Error::Dimension("ragged trajectory".into()));
            }
        }
        Ok(Self { dt, states, inputs })
    }

    /// Number of steps `L` (transitions).
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, |x| x.len())
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, |u| u.len())
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn is_finite(&self) -> bool {
        self.states
            .iter()
            .chain(self.inputs.iter())
            .all(|v| v.iter().all(|e| e.is_finite()))
    }

    pub fn csv_header(n: usize, p: usize) -> String {
        let mut h = String::from("t");
        for i in 1..=n {
            let _ = write!(h, ",x{i}");
        }
        for j in 1..=p {
            let _ = write!(h, ",u{j}");
        }
        h
    }

    /// One row per state sample; the terminal row leaves the input cells empty.
    pub fn to_csv(&self) -> String {
        let (n, p) = (self.state_dim(), self.input_dim());
        let mut out = Self::csv_header(n, p);
        out.push('\n');
        for (k, x) in self.states.iter().enumerate() {
            let _ = write!(out, "{}", self.time(k));
            for v in x.iter() {
                let _ = write!(out, ",{v}");
            }
            for j in 0..p {
                match self.inputs.get(k) {
                    Some(u) => {
                        let _ = write!(out, ",{}", u[j]);
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, n: usize, p: usize) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header.trim() != Self::csv_header(n, p) {
            return Err(Error::InvalidInput(format!("unexpected trajectory header `{header}`")));
        }
        let mut times = Vec::new();
        let mut states = Vec::new();
        let mut inputs = Vec::new();
        for (row, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 1 + n + p {
                return Err(Error::InvalidInput(format!("row {row}: {} cells", cells.len())));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("row {row}: `{s}`: {e}")))
            };
            times.push(parse(cells[0])?);
            let x: Result<Vec<f64>> = cells[1..=n].iter().map(|c| parse(c)).collect();
            states.push(DVector::from_vec(x?));
            if cells[1 + n..].iter().all(|c| c.trim().is_empty()) {
                continue;
            }
            let u: Result<Vec<f64>> = cells[1 + n..].iter().map(|c| parse(c)).collect();
            inputs.push(DVector::from_vec(u?));
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        Self::new(dt, states, inputs)
    }
}
