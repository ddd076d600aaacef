//! Parameter system and its admissibility conditions.

use std::fmt;

/// How the frequency schedule is produced.
#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleMode {
    /// `lambda_n = a^(b^n)`; checked symbolically, never used for field computations.
    Strict,
    /// Explicit list `lambda_0, lambda_1, ...`.
    Relaxed(Vec<f64>),
}

impl ScheduleMode {
    /// `lambda_n = 4 * 4^n` for `n = 0..=levels`.
    pub fn default_relaxed(levels: usize) -> Self {
        ScheduleMode::Relaxed((0..=levels).map(|n| 4.0 * 4f64.powi(n as i32)).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSchedule {
    pub a: f64,
    pub b: u32,
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub eta: f64,
    pub nu: f64,
    /// `N >= ||theta_0||_{C^eta}`.
    pub n_bound: f64,
    /// `L >= ||xi||_{C^{-1-kappa}}`.
    pub l_bound: f64,
    /// The constant `C` in `M_L = C (N^2 + N + L)`.
    pub ml_constant: f64,
    pub c0: f64,
    /// Reported constant used in bound targets.
    pub m0: f64,
    /// Lower bound required of `C_0 + R^o_j q_l / chi~` on the amplitude grid.
    pub positivity_floor: f64,
    pub mode: ScheduleMode,
}

impl Default for ParamSchedule {
    fn default() -> Self {
        ParamSchedule {
            a: 4.0,
            b: 4,
            beta: 0.05,
            gamma: 0.5,
            alpha: 0.0,
            kappa: 0.1,
            eta: 0.75,
            nu: 1.0,
            n_bound: 1.0,
            l_bound: 1.0,
            ml_constant: 1.0,
            c0: 2.0,
            m0: 1.0,
            positivity_floor: 1e-6,
            mode: ScheduleMode::default_relaxed(3),
        }
    }
}

impl ParamSchedule {
    pub fn m_l(&self) -> f64 {
        let n = self.n_bound;
        self.ml_constant * (n * n + n + self.l_bound)
    }

    /// Number of levels the schedule can reach (`None` for the unbounded strict schedule).
    pub fn max_level(&self) -> Option<usize> {
        match &self.mode {
            ScheduleMode::Strict => None,
            ScheduleMode::Relaxed(l) => l.len().checked_sub(1),
        }
    }

    pub fn lambda(&self, n: usize) -> f64 {
        match &self.mode {
            ScheduleMode::Strict => self.a.powf((self.b as f64).powi(n as i32)),
            ScheduleMode::Relaxed(l) => l[n],
        }
    }

    /// `r_n = M_L (lambda_0 / lambda_n)^beta`.
    pub fn r(&self, n: usize) -> f64 {
        self.m_l() * (self.lambda(0) / self.lambda(n)).powf(self.beta)
    }

    /// `ell_n = 1 / lambda_n`.
    pub fn ell(&self, n: usize) -> f64 {
        1.0 / self.lambda(n)
    }

    /// `mu_n = sqrt(lambda_n lambda_{n-1})`, `n >= 1`.
    pub fn mu(&self, n: usize) -> f64 {
        assert!(n >= 1, "mu_n is defined for n >= 1");
        (self.lambda(n) * self.lambda(n - 1)).sqrt()
    }

    /// `(a, b)` with `lambda_0 = a`, `lambda_1 = a^b`; for relaxed lists `b` may be fractional.
    pub fn implied_ab(&self) -> (f64, f64) {
        match &self.mode {
            ScheduleMode::Strict => (self.a, self.b as f64),
            ScheduleMode::Relaxed(l) => {
                let a = l[0];
                let b = if l.len() > 1 && a > 1.0 { l[1].ln() / a.ln() } else { f64::NAN };
                (a, b)
            }
        }
    }

    fn levels_checked(&self) -> usize {
        match &self.mode {
            ScheduleMode::Strict => 6,
            ScheduleMode::Relaxed(l) => l.len(),
        }
    }
}

/// One inequality of the admissibility system.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Slack in the direction of the inequality (negative when violated).
    pub margin: f64,
}

impl fmt::Display for BoundCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<48} lhs={:<14.6e} rhs={:<14.6e} margin={:<+14.6e} {}",
            self.name,
            self.lhs,
            self.rhs,
            self.margin,
            if self.holds { "ok" } else { "VIOLATED" }
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub strict: bool,
    /// `(a, b)` the checks were evaluated with.
    pub a: f64,
    pub b: f64,
    pub checks: Vec<BoundCheck>,
}

impl ValidationReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn violations(&self) -> Vec<&BoundCheck> {
        self.checks.iter().filter(|c| !c.holds).collect()
    }

    /// Strict mode turns violations into an error; relaxed mode only annotates.
    pub fn accepted(&self) -> bool {
        !self.strict || self.all_hold()
    }

    pub fn into_result(self) -> Result<Self, ParamError> {
        if self.accepted() {
            Ok(self)
        } else {
            Err(ParamError {
                violated: self.violations().iter().map(|c| c.name.clone()).collect(),
            })
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "mode={} a={} b={}",
            if self.strict { "strict" } else { "relaxed" },
            self.a,
            self.b
        )?;
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("parameter system violates: {}", violated.join("; "))]
pub struct ParamError {
    pub violated: Vec<String>,
}

fn less(name: &str, lhs: f64, rhs: f64) -> BoundCheck {
    BoundCheck {
        name: name.to_string(),
        lhs,
        rhs,
        holds: lhs < rhs,
        margin: rhs - lhs,
    }
}

/// `lhs >= rhs`, up to a relative rounding allowance so that exact equality
/// (such as `(16^5)^(4 * 0.05) = 16`) is not lost to `powf`.
fn at_least(name: &str, lhs: f64, rhs: f64) -> BoundCheck {
    BoundCheck {
        name: name.to_string(),
        lhs,
        rhs,
        holds: lhs >= rhs * (1.0 - 1e-12),
        margin: lhs - rhs,
    }
}

/// Evaluates every admissibility condition of the parameter system.
pub fn validate_params(p: &ParamSchedule) -> ValidationReport {
    let (a, b) = p.implied_ab();
    let mut checks = vec![
        BoundCheck {
            name: "a > 1".into(),
            lhs: a,
            rhs: 1.0,
            holds: a > 1.0,
            margin: a - 1.0,
        },
        at_least("b >= 2", b, 2.0),
        less("0 < beta", 0.0, p.beta),
        less("beta < 1", p.beta, 1.0),
        at_least("gamma >= 0", p.gamma, 0.0),
        less("gamma < 3/2", p.gamma, 1.5),
        less("alpha < 1", p.alpha, 1.0),
        less("kappa > 0", 0.0, p.kappa),
        less("eta > 1/2", 0.5, p.eta),
        at_least("nu >= 0", p.nu, 0.0),
        at_least("N >= 1", p.n_bound, 1.0),
        at_least("L >= 1", p.l_bound, 1.0),
        at_least("C0 >= 2", p.c0, 2.0),
        at_least("a^(b*beta) >= 16", a.powf(b * p.beta), 16.0),
        less("beta < 3/2 - gamma", p.beta, 1.5 - p.gamma),
        less("1/b + beta < 1/2", 1.0 / b + p.beta, 0.5),
        less(
            "b*beta < min(1 - alpha - kappa, eta - 1/2, 2 - gamma)",
            b * p.beta,
            (1.0 - p.alpha - p.kappa).min(p.eta - 0.5).min(2.0 - p.gamma),
        ),
    ];
    let levels = p.levels_checked();
    for n in 1..levels {
        let (l0, l1) = (p.lambda(n - 1), p.lambda(n));
        if !l1.is_finite() {
            break;
        }
        checks.push(less(&format!("lambda_{} < lambda_{}", n - 1, n), l0, l1));
        checks.push(less(&format!("r_{} < r_{}", n, n - 1), p.r(n), p.r(n - 1)));
        checks.push(less(&format!("mu_{n} < lambda_{n}"), p.mu(n), l1));
    }
    if let ScheduleMode::Relaxed(l) = &p.mode {
        for (n, lam) in l.iter().enumerate() {
            let ok = lam.fract() == 0.0 && *lam >= 1.0;
            checks.push(BoundCheck {
                name: format!("5 lambda_{n} l_j integer"),
                lhs: *lam,
                rhs: lam.round(),
                holds: ok,
                margin: if ok { 0.0 } else { -(lam - lam.round()).abs().max(1.0 - lam) },
            });
        }
    }
    ValidationReport {
        strict: matches!(p.mode, ScheduleMode::Strict),
        a,
        b,
        checks,
    }
}
