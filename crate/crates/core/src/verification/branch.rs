//! Separation of two runs that differ in their branch signature.

use std::f64::consts::PI;

use crate::engine::ParamSchedule;
use crate::spectral::{inverse_transform, sup_grid_size, SpectralField};

use super::VerifyError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparationReport {
    /// First level at which the signatures differ (`None` when they agree).
    pub flip_level: Option<usize>,
    pub t: f64,
    /// `||f^1(t) - f^2(t)||_{L^2}` by Parseval.
    pub distance: f64,
    /// The same distance by quadrature on a physical grid.
    pub distance_phys: f64,
    /// `pi sqrt((C0 - 1) 32 r_{n-1} / (5 lambda_n))`.
    pub leading: f64,
    /// `sum_{k=n}^{N-1} sqrt(r_k / lambda_{k+1})` over the computed levels.
    pub tail_sum: f64,
    /// `||(f^1 - f^2) - (f^1_{<=n} - f^2_{<=n})||_{L^2}`, the part of the
    /// distance created after the flip level.
    pub measured_tail: f64,
    pub passed: bool,
}

fn phys_l2(f: &SpectralField) -> Result<f64, VerifyError> {
    let k = f.support_radius().ceil() as usize;
    let f = f.truncated(k.min(f.max_freq()));
    if f.max_freq() == 0 {
        return Ok(2.0 * PI * f.mean().abs());
    }
    let n = sup_grid_size(f.max_freq(), 1.0);
    let v = inverse_transform(&f, n)?;
    let area = 4.0 * PI * PI / (n * n) as f64;
    Ok((area * v.data.iter().map(|x| x * x).sum::<f64>()).sqrt())
}

/// Compares the final potentials `f1`, `f2` of two runs at time `t`.
///
/// `flip_level` is the first level where the signatures differ and `at_flip`
/// the two runs' potentials at that level (same time), used for the measured
/// tail; without them the tail is taken as zero. `levels` is the top level of
/// both runs.
pub fn branch_separation(
    f1: &SpectralField,
    f2: &SpectralField,
    p: &ParamSchedule,
    flip_level: Option<usize>,
    levels: usize,
    at_flip: Option<(&SpectralField, &SpectralField)>,
    t: f64,
) -> Result<SeparationReport, VerifyError> {
    let diff = f1.sub(f2);
    let distance = diff.l2_norm();
    let distance_phys = phys_l2(&diff)?;
    let Some(n) = flip_level else {
        return Ok(SeparationReport {
            flip_level,
            t,
            distance,
            distance_phys,
            leading: 0.0,
            tail_sum: 0.0,
            measured_tail: 0.0,
            passed: distance == 0.0,
        });
    };
    if n == 0 || n > levels {
        return Err(VerifyError::Data(format!("flip level {n} outside 1..={levels}")));
    }
    let leading = PI * ((p.c0 - 1.0) * 32.0 * p.r(n - 1) / (5.0 * p.lambda(n))).sqrt();
    let tail_sum = (n..levels).map(|k| (p.r(k) / p.lambda(k + 1)).sqrt()).sum();
    let measured_tail = match at_flip {
        Some((a, b)) => diff.sub(&a.sub(b)).l2_norm(),
        None => 0.0,
    };
    let margin = leading - measured_tail;
    let passed = distance > 0.0 && (margin <= 0.0 || distance > margin);
    Ok(SeparationReport {
        flip_level,
        t,
        distance,
        distance_phys,
        leading,
        tail_sum,
        measured_tail,
        passed,
    })
}
