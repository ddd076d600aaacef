//! Ensemble statistics: non-Gaussianity witness and an exponential goodness-of-fit.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::VerifyError;

/// Two-sided 99% normal quantile.
const Z99: f64 = 2.575_829_303_548_901;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianityReport {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// `m4 / m2^2 - 3`.
    pub excess_kurtosis: f64,
    /// Half-width of the 99% interval for the excess kurtosis of a Gaussian sample.
    pub kurtosis_ci: f64,
    pub max_abs: f64,
    /// Interval known to contain every draw (at least one end finite).
    pub witness: Option<(f64, f64)>,
    /// All samples lie in the witness interval.
    pub bounded: bool,
    /// Bounded with positive variance, or kurtosis outside its interval.
    pub flagged: bool,
}

/// Statistics of a real ensemble. A witness interval with a finite end that
/// holds every sample of a non-constant ensemble proves the law is not Gaussian.
pub fn gaussianity_test(samples: &[f64], witness: Option<(f64, f64)>) -> Result<GaussianityReport, VerifyError> {
    let n = samples.len();
    if n < 100 {
        return Err(VerifyError::Data(format!("ensemble of {n} < 100 samples")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(VerifyError::Data("non-finite sample".into()));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (m2, m4) = samples.iter().fold((0.0, 0.0), |(a, b), x| {
        let d = (x - mean) * (x - mean);
        (a + d, b + d * d)
    });
    if m2 == 0.0 {
        return Err(VerifyError::Data("degenerate ensemble (zero variance)".into()));
    }
    let variance = m2 / (nf - 1.0);
    let excess_kurtosis = (m4 / nf) / (m2 / nf).powi(2) - 3.0;
    let se = (24.0 * nf * (nf - 1.0).powi(2) / ((nf - 3.0) * (nf - 2.0) * (nf + 3.0) * (nf + 5.0))).sqrt();
    let kurtosis_ci = Z99 * se;
    let max_abs = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let bounded = witness.is_some_and(|(lo, hi)| (lo.is_finite() || hi.is_finite()) && samples.iter().all(|&x| lo <= x && x <= hi));
    let flagged = bounded || excess_kurtosis.abs() > kurtosis_ci;
    Ok(GaussianityReport {
        n,
        mean,
        variance,
        excess_kurtosis,
        kurtosis_ci,
        max_abs,
        witness,
        bounded,
        flagged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquaredReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// `p_value >= 0.01`.
    pub passed: bool,
}

/// Pearson goodness-of-fit of `samples` against the exponential law with the
/// given mean, using `bins` equiprobable bins.
pub fn chi_squared_exponential(samples: &[f64], mean: f64, bins: usize) -> Result<ChiSquaredReport, VerifyError> {
    if bins < 2 || !(mean > 0.0) {
        return Err(VerifyError::Data(format!("need bins >= 2 and mean > 0, got {bins}, {mean}")));
    }
    let n = samples.len();
    if n < 5 * bins {
        return Err(VerifyError::Data(format!("{n} samples too few for {bins} bins")));
    }
    let mut counts = vec![0usize; bins];
    for &x in samples {
        if !(x >= 0.0) {
            return Err(VerifyError::Data(format!("sample {x} outside the exponential support")));
        }
        // F(x) = 1 - exp(-x / mean) maps each bin to an equal slice of [0, 1)
        let u = -(-x / mean).exp_m1();
        counts[((u * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let e = n as f64 / bins as f64;
    let statistic = counts.iter().map(|&o| (o as f64 - e).powi(2) / e).sum::<f64>();
    let dof = bins - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| VerifyError::Data(e.to_string()))?;
    let p_value = dist.sf(statistic);
    Ok(ChiSquaredReport {
        statistic,
        dof,
        p_value,
        passed: p_value >= 0.01,
    })
}
