//! Spatial white noise, forcing `zeta = Lambda^alpha xi`, random initial data and
//! empirical regularity estimates.
//!
//! Random draws are tied to lattice sites: the generator for mode `k` is ChaCha20
//! keyed by the seed with stream number `site_id(k)`, so raising the truncation
//! `K` never changes the draws of modes already present.

use std::f64::consts::PI;
use std::path::PathBuf;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::spectral::{self, block_sup_norms, LPPartition, Multiplier, SpectralError, SpectralField};

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("forcing exponent alpha = {0} is outside the admissible range alpha < 1")]
    AlphaTooLarge(f64),
    #[error("initial-condition exponent eta = {0} must exceed 1/2")]
    EtaTooSmall(f64),
    #[error("white noise needs K >= 1")]
    EmptyTruncation,
    #[error("regularity estimate needs at least {needed} complete nonzero blocks, found {found}")]
    TooFewBlocks { found: usize, needed: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Truncated white noise with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSample {
    pub field: SpectralField,
    pub seed: u64,
    pub truncation: usize,
}

/// Where the forcing comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ForcingSource {
    WhiteNoise { seed: u64, truncation: usize },
    File(PathBuf),
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForcingSpec {
    pub source: ForcingSource,
    pub alpha: f64,
    /// Regularity margin: the forcing is expected in `B^{-2+kappa}_{inf,inf}`.
    pub kappa: f64,
    /// Multiplies the loaded or sampled field (1 for the plain noise).
    pub scale: f64,
}

impl ForcingSpec {
    /// Loads or samples the underlying `xi` (before `Lambda^alpha`).
    pub fn resolve_xi(&self, truncation: usize) -> Result<SpectralField, NoiseError> {
        let xi = match &self.source {
            ForcingSource::WhiteNoise { seed, truncation: k } => sample_white_noise((*k).max(truncation), *seed)?.field,
            ForcingSource::File(p) => spectral::io::load(p)?,
            ForcingSource::Zero => SpectralField::zeros(truncation),
        };
        if !xi.is_mean_free() {
            return Err(SpectralError::NotMeanFree("forcing".into()).into());
        }
        Ok(xi.scale(self.scale))
    }
}

/// Distinct stream domains so that noise and initial data never share draws.
const DOMAIN_NOISE: u64 = 0;
const DOMAIN_THETA0: u64 = 1 << 63;

fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

/// Injective label of a lattice site, used as the ChaCha stream number.
pub fn site_id(k1: i64, k2: i64) -> u64 {
    (zigzag(k1) & 0x7fff_ffff) << 32 | (zigzag(k2) & 0xffff_ffff)
}

/// Standard complex Gaussian `(X + iY)/sqrt(2)` for one site.
fn site_gaussian(seed: u64, domain: u64, k1: i64, k2: i64) -> Complex64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(domain | site_id(k1, k2));
    let x: f64 = StandardNormal.sample(&mut rng);
    let y: f64 = StandardNormal.sample(&mut rng);
    Complex64::new(x, y) * std::f64::consts::FRAC_1_SQRT_2
}

/// Half-lattice representatives carry the independent draws: `k1 > 0`, or `k1 = 0, k2 > 0`.
#[inline]
pub fn is_representative(k1: i64, k2: i64) -> bool {
    k1 > 0 || (k1 == 0 && k2 > 0)
}

fn hermitian_from_sites(k: usize, mut draw: impl FnMut(i64, i64) -> Complex64) -> SpectralField {
    SpectralField::from_fn(k, |k1, k2| {
        if k1 == 0 && k2 == 0 {
            Complex64::new(0.0, 0.0)
        } else if is_representative(k1, k2) {
            draw(k1, k2)
        } else {
            draw(-k1, -k2).conj()
        }
    })
}

/// White noise truncated to the box `|k_i| <= K`:
/// `E[xi(k) xi(k')] = (2 pi)^-2 1_{k = -k'}`, `xi(0) = 0`.
pub fn sample_white_noise(k: usize, seed: u64) -> Result<NoiseSample, NoiseError> {
    if k == 0 {
        return Err(NoiseError::EmptyTruncation);
    }
    let amp = 1.0 / (2.0 * PI);
    let field = hermitian_from_sites(k, |a, b| site_gaussian(seed, DOMAIN_NOISE, a, b) * amp);
    Ok(NoiseSample { field, seed, truncation: k })
}

/// `zeta = Lambda^alpha xi`.
pub fn make_forcing(xi: &NoiseSample, alpha: f64) -> Result<SpectralField, NoiseError> {
    forcing_from_field(&xi.field, alpha)
}

pub fn forcing_from_field(xi: &SpectralField, alpha: f64) -> Result<SpectralField, NoiseError> {
    if alpha >= 1.0 || alpha.is_nan() {
        return Err(NoiseError::AlphaTooLarge(alpha));
    }
    Ok(Multiplier::FracLaplacian(alpha).apply(xi)?)
}

/// Default decay margin of random initial data.
pub const DEFAULT_EPSILON: f64 = 0.1;

/// Random mean-free data with `theta0(k) = |k|^{-eta-1-eps} (X + iY)/sqrt 2` for `0 < |k| <= K0`.
pub fn sample_initial_condition(eta: f64, k0: usize, seed: u64) -> Result<SpectralField, NoiseError> {
    sample_initial_condition_eps(eta, k0, seed, DEFAULT_EPSILON)
}

pub fn sample_initial_condition_eps(eta: f64, k0: usize, seed: u64, eps: f64) -> Result<SpectralField, NoiseError> {
    if eta <= 0.5 || eta.is_nan() {
        return Err(NoiseError::EtaTooSmall(eta));
    }
    let r0 = k0 as f64;
    let f = hermitian_from_sites(k0, |a, b| {
        let r = ((a * a + b * b) as f64).sqrt();
        if r > r0 {
            Complex64::new(0.0, 0.0)
        } else {
            site_gaussian(seed, DOMAIN_THETA0, a, b) * r.powf(-eta - 1.0 - eps)
        }
    });
    Ok(f)
}

/// Result of a dyadic slope fit.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularityEstimate {
    /// `-slope` of `log2 ||Delta_j f||_inf` against `j`.
    pub exponent: f64,
    pub blocks: Vec<(i32, f64)>,
}

/// Minimum number of blocks used in the slope fit.
pub const MIN_BLOCKS: usize = 4;

/// Estimates the Besov-Hoelder exponent of `f` from blocks `j >= 0` lying entirely
/// inside the coefficient box (`2^{j+1} <= K`).
pub fn estimate_regularity(f: &SpectralField) -> Result<f64, NoiseError> {
    Ok(estimate_regularity_detail(f)?.exponent)
}

pub fn estimate_regularity_detail(f: &SpectralField) -> Result<RegularityEstimate, NoiseError> {
    let k = f.max_freq() as f64;
    let blocks: Vec<(i32, f64)> = block_sup_norms(f, LPPartition::default(), 4.0)
        .into_iter()
        .filter(|&(j, v)| j >= 0 && 2f64.powi(j + 1) <= k && v > 0.0)
        .collect();
    if blocks.len() < MIN_BLOCKS {
        return Err(NoiseError::TooFewBlocks {
            found: blocks.len(),
            needed: MIN_BLOCKS,
        });
    }
    let n = blocks.len() as f64;
    let mx = blocks.iter().map(|b| b.0 as f64).sum::<f64>() / n;
    let my = blocks.iter().map(|b| b.1.log2()).sum::<f64>() / n;
    let sxy: f64 = blocks.iter().map(|b| (b.0 as f64 - mx) * (b.1.log2() - my)).sum();
    let sxx: f64 = blocks.iter().map(|b| (b.0 as f64 - mx).powi(2)).sum();
    Ok(RegularityEstimate {
        exponent: -sxy / sxx,
        blocks,
    })
}

/// `sup_j 2^{j s} ||Delta_j f||_inf`, the `B^s_{inf,inf}` (Hoelder-Zygmund) norm.
pub fn holder_norm(f: &SpectralField, s: f64) -> f64 {
    spectral::besov_norm_with(f, s, f64::INFINITY, f64::INFINITY, LPPartition::default(), 2.0)
}
