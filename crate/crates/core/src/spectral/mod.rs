//! Band-limited harmonic analysis on the 2-torus.

mod fft;
mod field;
pub mod io;
mod multiplier;
mod norms;
mod ops;
mod profile;

pub use fft::{forward_transform, forward_transform_to, good_size, inverse_transform, product_size, PhysField};
pub use field::{FourierGrid, SpectralField};
pub use multiplier::{
    apply_multiplier, derivative, fractional_laplacian, project_leq, project_leq_with, riesz, riesz_odd, Multiplier, Symmetry,
};
pub use norms::{
    besov_norm, besov_norm_with, block_sup_norms, linf_norm, linf_norm_os, lp_block, lp_norm_os, sup_grid_size, x_norm, x_norm_os,
    LPPartition,
};
pub use ops::{
    clamp_support, commutator, gradient, inverse_div, inverse_laplacian, perp_gradient, perp_velocity, pointwise, pointwise_on, product,
    quadratic_size,
};
pub use profile::CutoffProfile;

pub use norms::l2_norm;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("size mismatch: expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("grid too small: need at least {needed} points per side, got {got}")]
    GridTooSmall { needed: usize, got: usize },
    #[error("{0} requires a mean-free field")]
    NotMeanFree(String),
    #[error("symbol breaks reality at k = ({k1}, {k2})")]
    NonRealSymbol { k1: i64, k2: i64 },
    #[error("coefficients are not Hermitian at k = ({k1}, {k2}) (defect {defect:e})")]
    NotHermitian { k1: i64, k2: i64, defect: f64 },
    #[error("nonzero coefficient at |k| = {measured} beyond declared support {declared}")]
    SupportViolation { declared: f64, measured: f64 },
    #[error("truncating from K = {from} to K = {to} would drop nonzero modes")]
    Truncation { from: usize, to: usize },
    #[error("axis must be 1 or 2, got {0}")]
    BadAxis(u8),
    #[error("malformed snapshot: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
