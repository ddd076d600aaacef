//! Time discretization: the uniform grid, the one-sided mollifier, the cutoffs
//! `chi~`, `chi` and the blend between initial and terminal data.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use super::EngineError;

/// Uniform grid `t_i = i dt`, `i = 0..nodes`, on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub dt: f64,
    pub nodes: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, dt: f64) -> Result<Self, EngineError> {
        if !(horizon >= 0.0) || !(dt > 0.0) {
            return Err(EngineError::Grid(format!("invalid horizon {horizon} / step {dt}")));
        }
        let steps = (horizon / dt).round();
        if (steps * dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
            return Err(EngineError::Grid(format!("step {dt} does not divide horizon {horizon}")));
        }
        Ok(TimeGrid {
            horizon,
            dt,
            nodes: steps as usize + 1,
        })
    }

    /// Largest power-of-two step with `dt <= min(ell, 2^-levels) / 8`.
    pub fn for_resolution(horizon: f64, finest_ell: f64, levels: usize) -> Result<Self, EngineError> {
        let target = finest_ell.min(0.5f64.powi(levels as i32)) / 8.0;
        let dt = 2f64.powi(target.log2().floor() as i32);
        Self::new(horizon, dt)
    }

    /// True when `dt <= min(ell, 2^-levels) / 8`.
    pub fn resolves(&self, finest_ell: f64, levels: usize) -> bool {
        self.dt <= finest_ell.min(0.5f64.powi(levels as i32)) / 8.0 * (1.0 + 1e-12)
    }

    #[inline]
    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Index of the node at exactly `t`, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.dt;
        let i = x.round();
        if (x - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < self.nodes {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Index of the last node at or before `t` (clamped to the grid).
    pub fn floor_index(&self, t: f64) -> usize {
        let x = (t / self.dt + 1e-9).floor().max(0.0) as usize;
        x.min(self.nodes - 1)
    }

    /// Index of the first node at or after `t` (clamped to the grid).
    pub fn ceil_index(&self, t: f64) -> usize {
        let x = (t / self.dt - 1e-9).ceil().max(0.0) as usize;
        x.min(self.nodes - 1)
    }

    /// Same horizon, half the step.
    pub fn halved(&self) -> Self {
        TimeGrid {
            horizon: self.horizon,
            dt: self.dt / 2.0,
            nodes: 2 * (self.nodes - 1) + 1,
        }
    }
}

/// `exp(-1/(u(1-u)))` on `(0, 1)`, unnormalized.
fn bump(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        (-1.0 / (u * (1.0 - u))).exp()
    }
}

fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        // the integrand is flat to all orders at both ends, so the trapezoid rule converges spectrally
        let n = 4096;
        let h = 1.0 / n as f64;
        (1..n).map(|i| bump(i as f64 * h)).sum::<f64>() * h
    })
}

/// Normalized profile `phi` with `int phi = 1`, supported in `(0, 1)`.
pub fn mollifier_profile(u: f64) -> f64 {
    bump(u) / bump_mass()
}

/// `phi'(u)`.
pub fn mollifier_profile_derivative(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let w = u * (1.0 - u);
    mollifier_profile(u) * (1.0 - 2.0 * u) / (w * w)
}

/// Discrete one-sided mollifier `phi_ell(s) = phi(s/ell)/ell` on nodes `s_m = m dt`.
///
/// The weights act on `t_{i-m}`, `m = 0..=M`. They are corrected (smallest
/// change) so that `sum w = 1`, `sum w' = 0` and `sum w'_m s_m = -1` hold to
/// roundoff; then constants are reproduced exactly and linear functions have
/// the exact derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct Mollifier {
    pub ell: f64,
    pub dt: f64,
    pub weights: Vec<f64>,
    pub dweights: Vec<f64>,
}

/// Minimum number of nodes per mollification width.
pub const MIN_NODES_PER_ELL: f64 = 8.0;

impl Mollifier {
    pub fn new(ell: f64, dt: f64) -> Result<Self, EngineError> {
        let ratio = ell / dt;
        if !(ratio >= MIN_NODES_PER_ELL * (1.0 - 1e-12)) {
            return Err(EngineError::Grid(format!(
                "time step {dt} does not resolve the mollification width {ell} (need ell/dt >= {MIN_NODES_PER_ELL})"
            )));
        }
        let m = (ratio + 1e-9).floor() as usize;
        let s: Vec<f64> = (0..=m).map(|k| k as f64 * dt).collect();
        let mut w: Vec<f64> = s.iter().map(|&x| mollifier_profile(x / ell) / ell * dt).collect();
        let mut dw: Vec<f64> = s.iter().map(|&x| mollifier_profile_derivative(x / ell) / (ell * ell) * dt).collect();

        let total: f64 = w.iter().sum();
        for v in &mut w {
            *v /= total;
        }
        // least-norm correction of dw in span{1, s} restricted to the interior nodes
        let interior: Vec<usize> = (0..=m).filter(|&k| dw[k] != 0.0).collect();
        let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
        for &k in &interior {
            a11 += 1.0;
            a12 += s[k];
            a22 += s[k] * s[k];
        }
        let r1 = -dw.iter().sum::<f64>();
        let r2 = -1.0 - dw.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>();
        let det = a11 * a22 - a12 * a12;
        let c1 = (a22 * r1 - a12 * r2) / det;
        let c2 = (a11 * r2 - a12 * r1) / det;
        for &k in &interior {
            dw[k] += c1 + c2 * s[k];
        }
        Ok(Mollifier {
            ell,
            dt,
            weights: w,
            dweights: dw,
        })
    }

    /// Window length `M` (weights are indexed `0..=M`).
    pub fn span(&self) -> usize {
        self.weights.len() - 1
    }

    /// Mollified value and its time derivative at node `i` of a scalar series,
    /// extended by its value at 0 for negative times.
    pub fn apply_scalar(&self, values: &[f64], i: usize) -> (f64, f64) {
        let mut v = 0.0;
        let mut d = 0.0;
        for (m, (w, dw)) in self.weights.iter().zip(&self.dweights).enumerate() {
            let x = values[i.saturating_sub(m)];
            v += w * x;
            d += dw * x;
        }
        (v, d)
    }
}

/// Monotone bridge `S: [0,1] -> [0,1]` used in the cutoffs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CutoffBridge {
    /// `6x^5 - 15x^4 + 10x^3`: C^2 joins, peak slope 15/8.
    #[default]
    Quintic,
    /// `x`: slope exactly 1, so the derivative bounds hold with equality.
    Linear,
}

impl CutoffBridge {
    pub fn eval(self, x: f64) -> (f64, f64) {
        let x = x.clamp(0.0, 1.0);
        match self {
            CutoffBridge::Quintic => {
                let v = x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
                let d = 30.0 * x * x * (1.0 - x) * (1.0 - x);
                (v, d)
            }
            CutoffBridge::Linear => (x, 1.0),
        }
    }

    /// Largest slope of the bridge.
    pub fn max_slope(self) -> f64 {
        match self {
            CutoffBridge::Quintic => 15.0 / 8.0,
            CutoffBridge::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CutoffBridge::Quintic => "quintic",
            CutoffBridge::Linear => "linear",
        }
    }
}

impl fmt::Display for CutoffBridge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CutoffBridge {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quintic" => Ok(CutoffBridge::Quintic),
            "linear" => Ok(CutoffBridge::Linear),
            other => Err(format!("unknown cutoff bridge '{other}' (expected quintic or linear)")),
        }
    }
}

/// Value and derivative of a cutoff at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffValue {
    pub value: f64,
    pub derivative: f64,
}

/// Going from `from` at `t0` to `to` at `t1` through the bridge.
fn ramp(bridge: CutoffBridge, t: f64, t0: f64, t1: f64, from: f64, to: f64) -> CutoffValue {
    if t <= t0 {
        return CutoffValue {
            value: from,
            derivative: 0.0,
        };
    }
    if t >= t1 {
        return CutoffValue {
            value: to,
            derivative: 0.0,
        };
    }
    let (s, ds) = bridge.eval((t - t0) / (t1 - t0));
    CutoffValue {
        value: from + (to - from) * s,
        derivative: (to - from) * ds / (t1 - t0),
    }
}

/// Cutoffs used when building level `n + 1` from level `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoffs {
    pub n: usize,
    pub m_l: f64,
    pub r_n: f64,
    /// `Some(T)` for the terminal scheme, which mirrors the profiles at `T`.
    pub terminal: Option<f64>,
    pub bridge: CutoffBridge,
}

impl Cutoffs {
    fn scale(&self) -> f64 {
        0.5f64.powi(self.n as i32)
    }

    /// `chi~`: `3 M_L` on `[0, 3 2^-n]`, `r_n` from `4 2^-n` on; terminal: also `3 M_L`
    /// on `[T - 2^{-n+1}, T]`, rising over `(T - 2^{-n+2}, T - 2^{-n+1})`.
    pub fn chi_tilde(&self, t: f64) -> CutoffValue {
        let h = self.scale();
        let top = 3.0 * self.m_l;
        let left = ramp(self.bridge, t, 3.0 * h, 4.0 * h, top, self.r_n);
        match self.terminal {
            None => left,
            Some(tt) => {
                let right = ramp(self.bridge, t, tt - 4.0 * h, tt - 2.0 * h, self.r_n, top);
                if right.value > left.value {
                    right
                } else {
                    left
                }
            }
        }
    }

    /// `chi`: 0 on `[0, 2^{-n-1}]`, 1 from `2^-n` on; terminal: also 0 on `[T - 2^{-n-1}, T]`.
    pub fn chi(&self, t: f64) -> CutoffValue {
        let h = self.scale();
        let left = ramp(self.bridge, t, 0.5 * h, h, 0.0, 1.0);
        match self.terminal {
            None => left,
            Some(tt) => {
                let right = ramp(self.bridge, t, tt - h, tt - 0.5 * h, 1.0, 0.0);
                if right.value < left.value {
                    right
                } else {
                    left
                }
            }
        }
    }

    /// Times at which the cutoffs change regime.
    pub fn breakpoints(&self) -> Vec<f64> {
        let h = self.scale();
        let mut v = vec![0.5 * h, h, 3.0 * h, 4.0 * h];
        if let Some(tt) = self.terminal {
            v.extend([tt - 4.0 * h, tt - 2.0 * h, tt - h, tt - 0.5 * h]);
        }
        v
    }
}

/// Standalone `chi~` for level `n` (initial-value scheme).
pub fn cutoff_chi_tilde(n: usize, t: f64, m_l: f64, r_n: f64, bridge: CutoffBridge) -> CutoffValue {
    Cutoffs {
        n,
        m_l,
        r_n,
        terminal: None,
        bridge,
    }
    .chi_tilde(t)
}

/// Standalone `chi` for level `n` (initial-value scheme).
pub fn cutoff_chi(n: usize, t: f64, bridge: CutoffBridge) -> CutoffValue {
    Cutoffs {
        n,
        m_l: 1.0,
        r_n: 1.0,
        terminal: None,
        bridge,
    }
    .chi(t)
}

/// `s(t)` and `s'(t)`: 0 up to `start`, 1 from `end` on, flat to all orders at both joins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Blend {
    pub start: f64,
    pub end: f64,
}

impl Blend {
    pub fn eval(&self, t: f64) -> (f64, f64) {
        if t <= self.start {
            return (0.0, 0.0);
        }
        if t >= self.end {
            return (1.0, 0.0);
        }
        let w = self.end - self.start;
        let x = (t - self.start) / w;
        let g = |u: f64| (-1.0 / u).exp();
        let dg = |u: f64| (-1.0 / u).exp() / (u * u);
        let (a, b) = (g(x), g(1.0 - x));
        let (da, db) = (dg(x), -dg(1.0 - x));
        let s = a / (a + b);
        let ds = (da * b - a * db) / ((a + b) * (a + b));
        (s, ds / w)
    }
}
