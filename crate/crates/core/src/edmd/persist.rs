use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::predictor::LiftedLinearPredictor;
use crate::error::{Error, Result};
use crate::lifting::{make_dictionary, DictionarySpec};

/// Row-major matrix as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixRecord {
    fn from(m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)])
            .collect();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl MatrixRecord {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::InvalidInput(format!(
                "matrix record {}x{} carries {} values",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

/// JSON layout of a persisted predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorFile {
    pub state_dim: usize,
    pub input_dim: usize,
    pub lifted_dim: usize,
    pub sampling_period: f64,
    pub dictionary: DictionarySpec,
    pub a: MatrixRecord,
    pub b: MatrixRecord,
    pub c: MatrixRecord,
}

impl From<&LiftedLinearPredictor> for PredictorFile {
    fn from(p: &LiftedLinearPredictor) -> Self {
        Self {
            state_dim: p.state_dim(),
            input_dim: p.input_dim(),
            lifted_dim: p.lifted_dim(),
            sampling_period: p.dt,
            dictionary: p.map.spec().clone(),
            a: (&p.a).into(),
            b: (&p.b).into(),
            c: (&p.c).into(),
        }
    }
}

impl PredictorFile {
    pub fn into_predictor(self) -> Result<LiftedLinearPredictor> {
        let map = make_dictionary(&self.dictionary)?;
        if map.lifted_dim() != self.lifted_dim || map.state_dim() != self.state_dim {
            return Err(Error::Dimension(format!(
                "dictionary rebuilds N = {}, n = {}; file says N = {}, n = {}",
                map.lifted_dim(),
                map.state_dim(),
                self.lifted_dim,
                self.state_dim
            )));
        }
        let b = self.b.to_matrix()?;
        if b.ncols() != self.input_dim {
            return Err(Error::Dimension("B columns disagree with input_dim".into()));
        }
        LiftedLinearPredictor::new(
            self.a.to_matrix()?,
            b,
            self.c.to_matrix()?,
            map,
            self.sampling_period,
        )
    }
}

impl LiftedLinearPredictor {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PredictorFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<PredictorFile>(text)?.into_predictor()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::assemble;
    use crate::edmd::fit;
    use crate::lifting::DictionaryKind;
    use crate::testing::pendulum_trajectories;

    #[test]
    fn round_trip_is_bit_exact() {
        let trajs = pendulum_trajectories(10, 3);
        for spec in [DictionarySpec::sine(2, 0), DictionarySpec::pendulum(DictionaryKind::Tps, 10)] {
            let map = make_dictionary(&spec).unwrap();
            let pred = fit(&assemble(&trajs, &map).unwrap()).unwrap();
            let back = LiftedLinearPredictor::from_json(&pred.to_json().unwrap()).unwrap();
            assert_eq!(back, pred);
        }
    }

    #[test]
    fn save_and_load() {
        let map = make_dictionary(&DictionarySpec::sine(2, 0)).unwrap();
        let pred = fit(&assemble(&pendulum_trajectories(5, 1), &map).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        pred.save(&path).unwrap();
        assert_eq!(LiftedLinearPredictor::load(&path).unwrap(), pred);
    }

    #[test]
    fn short_matrix_record_is_rejected() {
        let rec = MatrixRecord {
            rows: 2,
            cols: 2,
            data: vec![1.0; 3],
        };
        assert!(rec.to_matrix().is_err());
    }

    #[test]
    fn rows_are_stored_first() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(MatrixRecord::from(&m).data, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn dictionary_mismatch_is_rejected() {
        let map = make_dictionary(&DictionarySpec::sine(2, 0)).unwrap();
        let pred = fit(&assemble(&pendulum_trajectories(5, 1), &map).unwrap()).unwrap();
        let mut file = PredictorFile::from(&pred);
        file.lifted_dim = 7;
        assert!(matches!(file.into_predictor(), Err(Error::Dimension(_))));
    }
}
