//! Fourier multipliers: `(m f)^(k) = m(k) fhat(k)`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::profile::CutoffProfile;
use super::{SpectralError, SpectralField};

/// Parity class of a symbol; both classes map real fields to real fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    /// `m(-k) = m(k)`, real valued.
    RealEven,
    /// `m(-k) = -m(k)`, purely imaginary.
    ImagOdd,
    /// Anything else; checked coefficient by coefficient when applied.
    General,
}

type Symbol = Arc<dyn Fn(i64, i64) -> Complex64 + Send + Sync>;

/// A Fourier multiplier. Built-in operators evaluate their symbol directly;
/// `Custom` wraps a user closure.
#[derive(Clone)]
pub enum Multiplier {
    Identity,
    /// `Lambda^s`, symbol `|k|^s`, zero mode to 0.
    FracLaplacian(f64),
    /// `R_j`, symbol `i k_j / |k|`.
    Riesz(u8),
    /// `R^o_1 = 25 (k2^2 - k1^2) / (12 |k|^2)`,
    /// `R^o_2 = 7 (k2^2 - k1^2) / (12 |k|^2) + 4 k1 k2 / |k|^2`.
    RieszOdd(u8),
    /// `d/dx_j`, symbol `i k_j`.
    Derivative(u8),
    /// `P_{<= lam}`, symbol `psi(k / lam)`.
    Project(f64, CutoffProfile),
    /// Littlewood-Paley block `Delta_j`.
    Block(i32, CutoffProfile),
    Custom {
        symbol: Symbol,
        at_zero: Complex64,
        symmetry: Symmetry,
    },
}

impl fmt::Debug for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Multiplier::Identity => write!(f, "Identity"),
            Multiplier::FracLaplacian(s) => write!(f, "Lambda^{s}"),
            Multiplier::Riesz(j) => write!(f, "R_{j}"),
            Multiplier::RieszOdd(j) => write!(f, "R^o_{j}"),
            Multiplier::Derivative(j) => write!(f, "d_{j}"),
            Multiplier::Project(l, p) => write!(f, "P<={l} ({p:?})"),
            Multiplier::Block(j, p) => write!(f, "Delta_{j} ({p:?})"),
            Multiplier::Custom { symmetry, .. } => write!(f, "Custom({symmetry:?})"),
        }
    }
}

#[inline]
fn frac_pow(r2: f64, s: f64) -> f64 {
    if s == 1.0 {
        r2.sqrt()
    } else if s == 2.0 {
        r2
    } else if s == -1.0 {
        1.0 / r2.sqrt()
    } else if s == -2.0 {
        1.0 / r2
    } else if s == 0.0 {
        1.0
    } else if s == 0.5 {
        r2.sqrt().sqrt()
    } else if s == -0.5 {
        1.0 / r2.sqrt().sqrt()
    } else {
        r2.powf(0.5 * s)
    }
}

impl Multiplier {
    pub fn custom(symbol: impl Fn(i64, i64) -> Complex64 + Send + Sync + 'static, at_zero: Complex64, symmetry: Symmetry) -> Self {
        Multiplier::Custom {
            symbol: Arc::new(symbol),
            at_zero,
            symmetry,
        }
    }

    pub fn symmetry(&self) -> Symmetry {
        match self {
            Multiplier::Riesz(_) | Multiplier::Derivative(_) => Symmetry::ImagOdd,
            Multiplier::Custom { symmetry, .. } => *symmetry,
            _ => Symmetry::RealEven,
        }
    }

    /// True when the operator is only defined on mean-free input.
    pub fn needs_mean_free(&self) -> bool {
        match self {
            Multiplier::FracLaplacian(s) => *s < 0.0,
            Multiplier::Riesz(_) | Multiplier::RieszOdd(_) => true,
            _ => false,
        }
    }

    /// Radius outside which the symbol vanishes, if any.
    pub fn support_bound(&self) -> Option<f64> {
        match self {
            Multiplier::Project(l, _) => Some(*l),
            Multiplier::Block(j, _) => Some(2f64.powi(j + 1)),
            _ => None,
        }
    }

    /// Symbol value at `k` (including `k = 0`).
    pub fn symbol(&self, k1: i64, k2: i64) -> Complex64 {
        let r2 = (k1 * k1 + k2 * k2) as f64;
        let re = |x: f64| Complex64::new(x, 0.0);
        let im = |x: f64| Complex64::new(0.0, x);
        match self {
            Multiplier::Identity => re(1.0),
            Multiplier::FracLaplacian(s) => {
                if r2 == 0.0 {
                    re(0.0)
                } else {
                    re(frac_pow(r2, *s))
                }
            }
            Multiplier::Riesz(j) => {
                if r2 == 0.0 {
                    re(0.0)
                } else {
                    let kj = if *j == 1 { k1 } else { k2 } as f64;
                    im(kj / r2.sqrt())
                }
            }
            Multiplier::RieszOdd(j) => {
                if r2 == 0.0 {
                    re(0.0)
                } else {
                    let (a, b) = (k1 as f64, k2 as f64);
                    let d = b * b - a * a;
                    if *j == 1 {
                        re(25.0 * d / (12.0 * r2))
                    } else {
                        re(7.0 * d / (12.0 * r2) + 4.0 * a * b / r2)
                    }
                }
            }
            Multiplier::Derivative(j) => im(if *j == 1 { k1 } else { k2 } as f64),
            Multiplier::Project(l, p) => re(p.psi(r2.sqrt() / l)),
            Multiplier::Block(j, p) => re(p.block_weight(*j, r2.sqrt())),
            Multiplier::Custom { symbol, at_zero, .. } => {
                if r2 == 0.0 {
                    *at_zero
                } else {
                    symbol(k1, k2)
                }
            }
        }
    }

    /// Applies the multiplier. Output support radius never exceeds the input's.
    pub fn apply(&self, f: &SpectralField) -> Result<SpectralField, SpectralError> {
        if self.needs_mean_free() && !f.is_mean_free() {
            return Err(SpectralError::NotMeanFree(format!("{self:?}")));
        }
        if let Multiplier::Identity = self {
            return Ok(f.clone());
        }
        if let Multiplier::Custom { symmetry, .. } = self {
            self.check_reality(f.max_freq(), *symmetry)?;
        }
        let mut out = f.map_coeffs(|k1, k2, c| c * self.symbol(k1, k2));
        let mut s = f.support_radius();
        if let Some(b) = self.support_bound() {
            s = s.min(b);
            // symbols vanish exactly outside their support; make it so
            let raw = out.raw_mut();
            let kk = f.max_freq() as i64;
            let w = f.max_freq() + 1;
            for (r, row) in raw.chunks_mut(w).enumerate() {
                let k1 = r as i64 - kk;
                for (k2, c) in row.iter_mut().enumerate() {
                    let rr = ((k1 * k1 + (k2 * k2) as i64) as f64).sqrt();
                    if rr >= b {
                        *c = Complex64::new(0.0, 0.0);
                    }
                }
            }
        }
        out.set_support_unchecked(s);
        Ok(out)
    }

    fn check_reality(&self, k: usize, symmetry: Symmetry) -> Result<(), SpectralError> {
        let kk = k as i64;
        let z = self.symbol(0, 0);
        if z.im.abs() > 1e-14 * (1.0 + z.re.abs()) {
            return Err(SpectralError::NonRealSymbol { k1: 0, k2: 0 });
        }
        for k1 in -kk..=kk {
            for k2 in 0..=kk {
                if k1 == 0 && k2 == 0 {
                    continue;
                }
                let a = self.symbol(k1, k2);
                let b = self.symbol(-k1, -k2);
                let tol = 1e-12 * (1.0 + a.norm());
                let ok = match symmetry {
                    Symmetry::RealEven => a.im.abs() <= tol && (a - b).norm() <= tol,
                    Symmetry::ImagOdd => a.re.abs() <= tol && (a + b).norm() <= tol,
                    Symmetry::General => (a - b.conj()).norm() <= tol,
                };
                if !ok {
                    return Err(SpectralError::NonRealSymbol { k1, k2 });
                }
            }
        }
        Ok(())
    }
}

pub fn apply_multiplier(f: &SpectralField, m: &Multiplier) -> Result<SpectralField, SpectralError> {
    m.apply(f)
}

/// `Lambda^s f`. Negative `s` needs a mean-free input.
pub fn fractional_laplacian(f: &SpectralField, s: f64) -> Result<SpectralField, SpectralError> {
    Multiplier::FracLaplacian(s).apply(f)
}

pub fn riesz(f: &SpectralField, j: u8) -> Result<SpectralField, SpectralError> {
    check_axis(j)?;
    Multiplier::Riesz(j).apply(f)
}

pub fn riesz_odd(f: &SpectralField, j: u8) -> Result<SpectralField, SpectralError> {
    check_axis(j)?;
    Multiplier::RieszOdd(j).apply(f)
}

pub fn derivative(f: &SpectralField, j: u8) -> SpectralField {
    Multiplier::Derivative(j).apply(f).expect("derivative is total")
}

/// `P_{<= lam}` with the default cutoff profile.
pub fn project_leq(f: &SpectralField, lam: f64) -> SpectralField {
    project_leq_with(f, lam, CutoffProfile::default())
}

pub fn project_leq_with(f: &SpectralField, lam: f64, profile: CutoffProfile) -> SpectralField {
    Multiplier::Project(lam, profile).apply(f).expect("projection is total")
}

pub(crate) fn check_axis(j: u8) -> Result<(), SpectralError> {
    if j == 1 || j == 2 {
        Ok(())
    } else {
        Err(SpectralError::BadAxis(j))
    }
}
