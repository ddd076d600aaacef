//! Time averages of bounded functionals along a trajectory.

use std::fmt;
use std::sync::Arc;

use crate::engine::Trajectory;
use crate::spectral::SpectralField;

use super::VerifyError;

/// Bounded continuous functionals of finitely many Fourier modes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Functional {
    /// `clamp(Re thetahat(k), -clip, clip)`.
    ModeRe { k1: i64, k2: i64, clip: f64 },
    /// `sin(scale Re thetahat(k))`.
    SinModeRe { k1: i64, k2: i64, scale: f64 },
    /// `cos(scale Re thetahat(k))`.
    CosModeRe { k1: i64, k2: i64, scale: f64 },
    /// `min(||P_{|k| <= radius} theta||_{L^2}, clip)`.
    ClippedL2 { radius: f64, clip: f64 },
}

impl Functional {
    pub fn eval(&self, theta: &SpectralField) -> f64 {
        match *self {
            Functional::ModeRe { k1, k2, clip } => theta.get(k1, k2).re.clamp(-clip, clip),
            Functional::SinModeRe { k1, k2, scale } => (scale * theta.get(k1, k2).re).sin(),
            Functional::CosModeRe { k1, k2, scale } => (scale * theta.get(k1, k2).re).cos(),
            Functional::ClippedL2 { radius, clip } => {
                let r2 = radius * radius;
                let mut e = 0.0;
                theta.for_each_half(|k1, k2, c, m| {
                    if ((k1 * k1 + k2 * k2) as f64) <= r2 {
                        e += m * c.norm_sqr();
                    }
                });
                (2.0 * std::f64::consts::PI * e.sqrt()).min(clip)
            }
        }
    }

    /// Smallest coefficient box holding every mode the functional reads.
    pub fn support_box(&self) -> usize {
        match *self {
            Functional::ModeRe { k1, k2, .. } | Functional::SinModeRe { k1, k2, .. } | Functional::CosModeRe { k1, k2, .. } => k1.unsigned_abs().max(k2.unsigned_abs()) as usize,
            Functional::ClippedL2 { radius, .. } => radius.max(0.0).floor() as usize,
        }
    }

    /// Parses `mode_re:k1,k2,clip`, `sin_mode_re:k1,k2,scale`,
    /// `cos_mode_re:k1,k2,scale` or `clipped_l2:radius,clip`.
    pub fn parse(s: &str) -> Result<Self, VerifyError> {
        let bad = || VerifyError::Data(format!("unknown functional `{s}`"));
        let (name, args) = s.split_once(':').ok_or_else(bad)?;
        let v: Vec<f64> = args.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
        let int = |x: f64| if x.fract() == 0.0 { Ok(x as i64) } else { Err(bad()) };
        match (name.trim(), v.as_slice()) {
            ("mode_re", &[a, b, c]) => Ok(Functional::ModeRe { k1: int(a)?, k2: int(b)?, clip: c }),
            ("sin_mode_re", &[a, b, c]) => Ok(Functional::SinModeRe { k1: int(a)?, k2: int(b)?, scale: c }),
            ("cos_mode_re", &[a, b, c]) => Ok(Functional::CosModeRe { k1: int(a)?, k2: int(b)?, scale: c }),
            ("clipped_l2", &[r, c]) => Ok(Functional::ClippedL2 { radius: r, clip: c }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::ModeRe { k1, k2, clip } => write!(f, "mode_re:{k1},{k2},{clip}"),
            Functional::SinModeRe { k1, k2, scale } => write!(f, "sin_mode_re:{k1},{k2},{scale}"),
            Functional::CosModeRe { k1, k2, scale } => write!(f, "cos_mode_re:{k1},{k2},{scale}"),
            Functional::ClippedL2 { radius, clip } => write!(f, "clipped_l2:{radius},{clip}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErgodicReport {
    pub functional: Functional,
    pub horizons: Vec<f64>,
    /// `(1/T) int_0^T F(theta(t)) dt` per horizon (trapezoid on the run grid).
    pub averages: Vec<f64>,
    /// `|A_{T_{i+1}} - A_{T_i}|`.
    pub cauchy: Vec<f64>,
}

/// Averages of `f` along `theta` over `[0, T]` for each `T` in `horizons`;
/// every `T` must be a positive grid time.
pub fn ergodic_average(theta: &Trajectory, f: &Functional, horizons: &[f64]) -> Result<ErgodicReport, VerifyError> {
    let grid = theta.grid;
    let mut ends = Vec::with_capacity(horizons.len());
    for &t in horizons {
        if t > grid.horizon + 1e-12 {
            return Err(VerifyError::Horizon { t, horizon: grid.horizon });
        }
        match grid.index_of(t) {
            Some(i) if i > 0 => ends.push(i),
            _ => return Err(VerifyError::Data(format!("T = {t} is not a positive grid time"))),
        }
    }
    let last = ends.iter().copied().max().unwrap_or(0);
    let mut vals = Vec::with_capacity(last + 1);
    let mut prev: Option<(*const SpectralField, f64)> = None;
    for field in theta.fields.iter().take(last + 1) {
        let v = match prev {
            Some((p, v)) if p == Arc::as_ptr(field) => v,
            _ => f.eval(field),
        };
        prev = Some((Arc::as_ptr(field), v));
        vals.push(v);
    }
    let averages: Vec<f64> = ends
        .iter()
        .map(|&i| {
            let w = &vals[..=i];
            if w.iter().all(|&v| v == w[0]) {
                // a constant integrand averages to itself, without rounding
                return w[0];
            }
            let s = w.iter().sum::<f64>() - 0.5 * (w[0] + w[i]);
            s / i as f64
        })
        .collect();
    let cauchy = averages.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    Ok(ErgodicReport {
        functional: *f,
        horizons: horizons.to_vec(),
        averages,
        cauchy,
    })
}
