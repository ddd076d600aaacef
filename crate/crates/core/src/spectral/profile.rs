//! Radial cutoff `psi`: 1 on `[0, 1/2]`, 0 on `[1, inf)`, smooth and monotone between.

use std::fmt;
use std::str::FromStr;

/// Choice of the smooth bridge of `psi` on `(1/2, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CutoffProfile {
    /// `g(1-s) / (g(1-s) + g(s))` with `g(t) = exp(-1/t)`, `s = 2r - 1`.
    /// Flat to all orders at both ends.
    #[default]
    Smooth,
    /// `exp(1 - 1/(1 - s^2))`, `s = 2r - 1`. Flat to all orders at `r = 1`,
    /// only C^1 at `r = 1/2`.
    Bump,
}

impl CutoffProfile {
    /// `psi(r)` for `r = |k| / lam`.
    #[inline]
    pub fn psi(self, r: f64) -> f64 {
        if r <= 0.5 {
            return 1.0;
        }
        if r >= 1.0 {
            return 0.0;
        }
        let s = 2.0 * r - 1.0;
        match self {
            CutoffProfile::Smooth => {
                let g = |t: f64| (-1.0 / t).exp();
                let a = g(1.0 - s);
                let b = g(s);
                a / (a + b)
            }
            CutoffProfile::Bump => (1.0 - 1.0 / (1.0 - s * s)).exp(),
        }
    }

    /// Littlewood-Paley weight `rho_j(|k|)`:
    /// `rho_{-1} = psi`, `rho_j(k) = psi(k / 2^{j+1}) - psi(k / 2^j)`.
    #[inline]
    pub fn block_weight(self, j: i32, r: f64) -> f64 {
        if j < 0 {
            self.psi(r)
        } else {
            let s = 2f64.powi(j);
            self.psi(r / (2.0 * s)) - self.psi(r / s)
        }
    }

    /// Index of the last block needed to reconstruct a field of support radius `radius`.
    pub fn last_block(radius: f64) -> i32 {
        // rho_j vanishes for |k| <= 2^{j-1}; the sum up to J equals psi(k / 2^{J+1}) = 1 for |k| <= 2^J
        let mut j = -1;
        while 2f64.powi(j) < radius {
            j += 1;
        }
        j
    }

    pub fn name(self) -> &'static str {
        match self {
            CutoffProfile::Smooth => "smooth",
            CutoffProfile::Bump => "bump",
        }
    }
}

impl fmt::Display for CutoffProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CutoffProfile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smooth" => Ok(CutoffProfile::Smooth),
            "bump" => Ok(CutoffProfile::Bump),
            other => Err(format!("unknown cutoff profile '{other}' (expected smooth or bump)")),
        }
    }
}
