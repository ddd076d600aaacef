//! Independent checks of constructed solutions: Reynolds and weak-form
//! residuals, inductive bounds, branch separation, ensemble statistics,
//! coming down from infinity and ergodic averages.

mod bounds;
mod branch;
mod coming;
mod ergodic;
mod report;
mod residual;
mod stats;

pub use bounds::{bound_sample, check_bounds, BoundReport, BoundSample, Verdict};
pub use branch::{branch_separation, SeparationReport};
pub use coming::{coming_down_check, ComingDownReport, Samples};
pub use ergodic::{ergodic_average, ErgodicReport, Functional};
pub use report::{write_csv, write_text, Record};
pub use residual::{halving_passes, level_forcing, reynolds_residual, weak_residual, ReynoldsReport, WeakResidual, REYNOLDS_TOLERANCE};
pub use stats::{chi_squared_exponential, gaussianity_test, ChiSquaredReport, GaussianityReport};

use thiserror::Error;

use crate::spectral::SpectralError;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("{0}")]
    Data(String),
    #[error("time {t} outside the trajectory [0, {horizon}]")]
    Horizon { t: f64, horizon: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}
