//! EDMD identification of lifted linear predictors and their rollouts.

mod bilinear;
mod coupling;
mod fit;
mod persist;
mod predictor;

pub use bilinear::{bilinear_regressor_dim, fit_bilinear, fit_bilinear_with, BilinearPredictor};
pub use coupling::{coupling_report, CouplingReport};
pub use fit::{fit, fit_with, FitOptions, FitReport};
pub use persist::{MatrixRecord, PredictorFile};
pub use predictor::{
    predict_bilinear, predict_llp, predict_project_and_lift, LiftedLinearPredictor, LiftedModel,
};
