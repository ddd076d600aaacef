//! Reynolds-identity recomputation and the weak-form residual.

use crate::engine::{ParamSchedule, Trajectory};
use crate::spectral::{commutator, inverse_div, product, CutoffProfile, Multiplier, SpectralField};

use super::VerifyError;

/// Relative size below which the recomputed Reynolds field counts as equal.
pub const REYNOLDS_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReynoldsReport {
    /// `||q_recomputed - q||_{L^2}`.
    pub abs: f64,
    /// `abs / (1 + ||q||_{L^2})`.
    pub rel: f64,
    pub passed: bool,
}

/// Recomputes `q_n = Delta^-1 div V` from the vector field
/// `V = -d_t R f + Lambda f grad^perp f + R Lambda^{alpha-1} P_{<=lambda_n} xi - nu Lambda^{gamma-1} grad f`
/// (mean-free parts) and compares with the stored `q`.
pub fn reynolds_residual(
    f: &SpectralField,
    df: &SpectralField,
    q: &SpectralField,
    xi: &SpectralField,
    p: &ParamSchedule,
    level: usize,
    profile: CutoffProfile,
) -> Result<ReynoldsReport, VerifyError> {
    let lam = p.lambda(level);
    let lf = Multiplier::FracLaplacian(1.0).apply(f)?;
    let d = |g: &SpectralField, j: u8| Multiplier::Derivative(j).apply(g).expect("total");
    let noise = {
        let k = (lam.ceil() as usize).max(1);
        let pxi = Multiplier::Project(lam, profile).apply(&xi.truncated(k))?;
        Multiplier::FracLaplacian(p.alpha - 1.0).apply(&pxi)?
    };
    let diss = Multiplier::FracLaplacian(p.gamma - 1.0).apply(f)?;
    let mut v: Vec<SpectralField> = Vec::with_capacity(2);
    for j in 1..=2u8 {
        let rdf = Multiplier::Riesz(j).apply(df)?;
        // grad^perp f = (-d_2 f, d_1 f)
        let perp = if j == 1 { d(f, 2).scale(-1.0) } else { d(f, 1) };
        let c = product(&lf, &perp).axpy(-1.0, &rdf).add(&Multiplier::Riesz(j).apply(&noise)?).sub(&d(&diss, j).scale(p.nu));
        v.push(c.remove_mean());
    }
    let rec = inverse_div(&[v[0].clone(), v[1].clone()])?;
    let diff = rec.sub(q);
    let abs = diff.l2_norm();
    let rel = abs / (1.0 + q.l2_norm());
    Ok(ReynoldsReport {
        abs,
        rel,
        passed: rel < REYNOLDS_TOLERANCE,
    })
}

/// `zeta_n = Lambda^alpha P_{<=lambda_n} xi`, the forcing of the level-`n` equation.
pub fn level_forcing(xi: &SpectralField, p: &ParamSchedule, level: usize, profile: CutoffProfile) -> Result<SpectralField, VerifyError> {
    let lam = p.lambda(level);
    let k = (lam.ceil() as usize).max(1);
    let pxi = Multiplier::Project(lam, profile).apply(&xi.truncated(k))?;
    Ok(Multiplier::FracLaplacian(p.alpha).apply(&pxi)?)
}

/// Weak-form residual over `[s, t]` with its quadrature error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakResidual {
    pub s: f64,
    pub t: f64,
    /// `|<theta(t) - theta(s), psi> + int_s^t (1/2 <Lambda^{-1/2} theta, Lambda^{1/2}[R^perp., grad psi] theta> - <zeta - nu Lambda^gamma theta, psi>) dr|`.
    pub value: f64,
    /// Richardson estimate `|I(dt) - I(2 dt)| / 3` of the trapezoid error.
    pub quadrature_error: f64,
}

fn integrand(theta: &SpectralField, zeta: &SpectralField, psi: &SpectralField, nu: f64, gamma: f64) -> Result<f64, VerifyError> {
    let c = commutator(theta, psi)?;
    let a = Multiplier::FracLaplacian(-0.5).apply(theta)?;
    let b = Multiplier::FracLaplacian(0.5).apply(&c)?;
    let drift = 0.5 * a.inner(&b);
    let diss = Multiplier::FracLaplacian(gamma).apply(theta)?;
    let force = zeta.inner(psi) - nu * diss.inner(psi);
    Ok(drift - force)
}

/// Weak residual of `theta` tested against `psi` on `[s, t]`; both ends must be
/// grid nodes of `theta`.
pub fn weak_residual(theta: &Trajectory, zeta: &SpectralField, psi: &SpectralField, s: f64, t: f64, nu: f64, gamma: f64) -> Result<WeakResidual, VerifyError> {
    let grid = theta.grid;
    for x in [s, t] {
        if !(0.0..=grid.horizon + 1e-12).contains(&x) {
            return Err(VerifyError::Horizon { t: x, horizon: grid.horizon });
        }
    }
    if !(s < t) {
        return Err(VerifyError::Data(format!("empty interval [{s}, {t}]")));
    }
    if !psi.is_mean_free() {
        return Err(VerifyError::Data("test function must be mean-free".into()));
    }
    let (i0, i1) = match (grid.index_of(s), grid.index_of(t)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(VerifyError::Data(format!("[{s}, {t}] does not end on grid nodes"))),
    };
    // the integrand only changes where the field does
    let mut g = Vec::with_capacity(i1 - i0 + 1);
    let mut prev: Option<(*const SpectralField, f64)> = None;
    for i in i0..=i1 {
        let ptr = std::sync::Arc::as_ptr(&theta.fields[i]);
        let v = match prev {
            Some((p, v)) if p == ptr => v,
            _ => integrand(&theta.fields[i], zeta, psi, nu, gamma)?,
        };
        prev = Some((ptr, v));
        g.push(v);
    }
    let trap = |h: f64, vals: &[f64]| -> f64 {
        let n = vals.len();
        if n < 2 {
            return 0.0;
        }
        h * (vals.iter().sum::<f64>() - 0.5 * (vals[0] + vals[n - 1]))
    };
    let fine = trap(grid.dt, &g);
    let quadrature_error = if g.len() >= 3 {
        // an odd last interval keeps its fine-step value in the coarse rule
        let even = (g.len() - 1) / 2 * 2;
        let coarse: Vec<f64> = g[..=even].iter().step_by(2).copied().collect();
        let coarse = trap(2.0 * grid.dt, &coarse) + trap(grid.dt, &g[even..]);
        (fine - coarse).abs() / 3.0
    } else {
        0.0
    };
    let jump = theta.fields[i1].inner(psi) - theta.fields[i0].inner(psi);
    Ok(WeakResidual {
        s,
        t,
        value: (jump + fine).abs(),
        quadrature_error,
    })
}

/// Second-order convergence test for one dt-halving: the finer error must drop
/// by at least 3.2 (ideal 4), or already sit at roundoff.
pub fn halving_passes(err_dt: f64, err_half: f64, scale: f64) -> bool {
    err_half <= (err_dt / 3.2).max(1e-11 * scale.max(1.0))
}
