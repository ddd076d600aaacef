//! Littlewood-Paley blocks, Besov norms, sup norms and the X-norm.

use super::fft::{good_size, inverse_transform};
use super::multiplier::Multiplier;
use super::profile::CutoffProfile;
use super::{FourierGrid, SpectralError, SpectralField};

/// Dyadic partition of unity built from a cutoff profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct LPPartition {
    pub profile: CutoffProfile,
}

impl LPPartition {
    pub fn new(profile: CutoffProfile) -> Self {
        LPPartition { profile }
    }

    /// `rho_j(|k|)`.
    pub fn weight(&self, j: i32, r: f64) -> f64 {
        self.profile.block_weight(j, r)
    }

    /// `Delta_j f`.
    pub fn block(&self, f: &SpectralField, j: i32) -> SpectralField {
        let b = Multiplier::Block(j, self.profile).apply(f).expect("blocks are total");
        let r = b.support_radius().ceil() as usize;
        if r < b.max_freq() {
            b.truncated(r)
        } else {
            b
        }
    }

    /// Blocks `-1 ..= J` with `J` the last block that can be nonzero.
    pub fn blocks(&self, f: &SpectralField) -> Vec<(i32, SpectralField)> {
        let last = CutoffProfile::last_block(f.support_radius());
        (-1..=last).map(|j| (j, self.block(f, j))).collect()
    }
}

/// `Delta_j f` with the default partition.
pub fn lp_block(f: &SpectralField, j: i32) -> SpectralField {
    LPPartition::default().block(f, j)
}

/// Grid size for sup-norm sampling of a field with coefficient box `k`.
pub fn sup_grid_size(k: usize, oversample: f64) -> usize {
    let base = 2 * k + 2;
    good_size(((oversample.max(1.0)) * base as f64).ceil() as usize)
}

/// The same field on the smallest box containing its declared support.
pub(crate) fn tight(f: &SpectralField) -> std::borrow::Cow<'_, SpectralField> {
    let r = f.support_radius().ceil() as usize;
    if r < f.max_freq() {
        std::borrow::Cow::Owned(f.truncated(r))
    } else {
        std::borrow::Cow::Borrowed(f)
    }
}

/// Max of `|f|` over an oversampled grid. A lower bound on the true sup with
/// relative error `O(K / (oversample * N))`.
pub fn linf_norm_os(f: &SpectralField, oversample: f64) -> f64 {
    let f = tight(f);
    if f.max_freq() == 0 {
        return f.mean().abs();
    }
    let n = sup_grid_size(f.max_freq(), oversample);
    inverse_transform(&f, n).expect("sup grid is large enough").max_abs()
}

/// Sup norm with the default oversampling factor.
pub fn linf_norm(f: &SpectralField) -> f64 {
    linf_norm_os(f, FourierGrid::DEFAULT_OVERSAMPLE)
}

pub fn l2_norm(f: &SpectralField) -> f64 {
    f.l2_norm()
}

/// `L^p` norm. `p = 2` uses Parseval; `p = inf` the oversampled max; other `p` the
/// grid quadrature on the oversampled grid.
pub fn lp_norm_os(f: &SpectralField, p: f64, oversample: f64) -> f64 {
    if p.is_infinite() {
        return linf_norm_os(f, oversample);
    }
    if p == 2.0 {
        return f.l2_norm();
    }
    let f = tight(f);
    let n = sup_grid_size(f.max_freq(), oversample);
    let vals = inverse_transform(&f, n).expect("grid is large enough");
    let area = 4.0 * std::f64::consts::PI.powi(2) / (n * n) as f64;
    let s: f64 = vals.data.iter().map(|v| v.abs().powf(p)).sum();
    (area * s).powf(1.0 / p)
}

/// `||f||_{B^alpha_{p,q}} = (sum_{j >= -1} 2^{j alpha q} ||Delta_j f||_p^q)^{1/q}`,
/// `q = inf` meaning the supremum.
pub fn besov_norm_with(f: &SpectralField, alpha: f64, p: f64, q: f64, part: LPPartition, oversample: f64) -> f64 {
    let terms = part
        .blocks(f)
        .into_iter()
        .map(|(j, b)| 2f64.powf(j as f64 * alpha) * lp_norm_os(&b, p, oversample));
    if q.is_infinite() {
        terms.fold(0.0, f64::max)
    } else {
        terms.map(|t| t.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

pub fn besov_norm(f: &SpectralField, alpha: f64, p: f64, q: f64) -> f64 {
    besov_norm_with(f, alpha, p, q, LPPartition::default(), FourierGrid::DEFAULT_OVERSAMPLE)
}

/// Sup norms of all blocks, `(j, ||Delta_j f||_inf)`.
pub fn block_sup_norms(f: &SpectralField, part: LPPartition, oversample: f64) -> Vec<(i32, f64)> {
    part.blocks(f)
        .into_iter()
        .map(|(j, b)| (j, linf_norm_os(&b, oversample)))
        .collect()
}

/// `||q||_X = ||q||_inf + ||R^o_1 q||_inf + ||R^o_2 q||_inf`.
pub fn x_norm_os(q: &SpectralField, oversample: f64) -> Result<f64, SpectralError> {
    if !q.is_mean_free() {
        return Err(SpectralError::NotMeanFree("x_norm".into()));
    }
    let a = linf_norm_os(q, oversample);
    let b = linf_norm_os(&Multiplier::RieszOdd(1).apply(q)?, oversample);
    let c = linf_norm_os(&Multiplier::RieszOdd(2).apply(q)?, oversample);
    Ok(a + b + c)
}

pub fn x_norm(q: &SpectralField) -> Result<f64, SpectralError> {
    x_norm_os(q, FourierGrid::DEFAULT_OVERSAMPLE)
}
