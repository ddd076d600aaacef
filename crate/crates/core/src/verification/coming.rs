//! Uniform bound after time `T` across runs with scaled inputs.

use std::sync::Arc;

use crate::spectral::{besov_norm_with, LPPartition, SpectralField};

use super::VerifyError;

/// Samples of `theta` along one run: `(t, theta(t))`.
pub type Samples = Vec<(f64, Arc<SpectralField>)>;

#[derive(Clone, Debug, PartialEq)]
pub struct ComingDownReport {
    pub from: f64,
    pub delta: f64,
    pub eps: f64,
    /// `sup_{t >= from} ||theta(t)||_{B^{-1/2-delta}_{inf,1}}` per run.
    pub per_run: Vec<f64>,
    /// Maximum over runs.
    pub sup_norm: f64,
    pub within_eps: bool,
    /// Largest coefficient difference against the first run after `from`.
    pub max_discrepancy: f64,
    /// Every later run equals the first bit for bit after `from`.
    pub bitwise_equal: bool,
    pub passed: bool,
}

/// Checks `sup_{t >= from} ||theta||_{B^{-1/2-delta}_{inf,1}} <= eps` for all
/// runs. With `expect_coincide` the post-`from` fields must also agree across
/// runs to roundoff (relative `1e-12`).
pub fn coming_down_check(
    runs: &[Samples],
    from: f64,
    delta: f64,
    eps: f64,
    expect_coincide: bool,
    oversample: f64,
) -> Result<ComingDownReport, VerifyError> {
    if runs.is_empty() {
        return Err(VerifyError::Data("no runs".into()));
    }
    let late: Vec<Vec<&(f64, Arc<SpectralField>)>> = runs.iter().map(|r| r.iter().filter(|(t, _)| *t >= from).collect()).collect();
    if late[0].is_empty() {
        return Err(VerifyError::Data(format!("no samples at t >= {from}")));
    }
    let part = LPPartition::default();
    let mut per_run = Vec::with_capacity(runs.len());
    for r in &late {
        let mut sup = 0.0f64;
        let mut prev: Option<(*const SpectralField, f64)> = None;
        for (_, f) in r {
            let v = match prev {
                Some((p, v)) if p == Arc::as_ptr(f) => v,
                _ => besov_norm_with(f, -0.5 - delta, f64::INFINITY, 1.0, part, oversample),
            };
            prev = Some((Arc::as_ptr(f), v));
            sup = sup.max(v);
        }
        per_run.push(sup);
    }
    let mut max_discrepancy = 0.0f64;
    let mut bitwise_equal = true;
    let mut scale = 0.0f64;
    for r in &late[1..] {
        if r.len() != late[0].len() || r.iter().zip(&late[0]).any(|(a, b)| a.0 != b.0) {
            return Err(VerifyError::Data("runs are sampled at different times".into()));
        }
        for (a, b) in r.iter().zip(&late[0]) {
            max_discrepancy = max_discrepancy.max(a.1.max_abs_diff(&b.1));
            scale = scale.max(b.1.max_abs());
            bitwise_equal &= a.1 == b.1;
        }
    }
    let sup_norm = per_run.iter().copied().fold(0.0, f64::max);
    let within_eps = sup_norm <= eps;
    let coincide = max_discrepancy <= 1e-12 * scale.max(1.0);
    Ok(ComingDownReport {
        from,
        delta,
        eps,
        per_run,
        sup_norm,
        within_eps,
        max_discrepancy,
        bitwise_equal,
        passed: within_eps && (!expect_coincide || coincide),
    })
}
