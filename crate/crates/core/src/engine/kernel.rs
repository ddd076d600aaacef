//! Per-node computations shared by the streaming engine and the materialized states.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::params::ParamSchedule;
use super::time::{Blend, CutoffBridge, CutoffValue, Cutoffs, Mollifier, TimeGrid};
use super::{BranchSignature, EngineError, Scheme};
use crate::spectral::{
    clamp_support, forward_transform_to, good_size, inverse_laplacian, inverse_transform, pointwise, quadratic_size, CutoffProfile, Multiplier,
    PhysField, SpectralField,
};

type Field = SpectralField;

/// Coefficient box of `f_{<=n}`: `ceil(6 lambda_n)`.
pub fn box_f(lambda: f64) -> usize {
    (6.0 * lambda - 1e-9).ceil() as usize
}

/// Coefficient box of `q_n`: twice that of `f_{<=n}`.
pub fn box_q(lambda: f64) -> usize {
    2 * box_f(lambda)
}

/// Grid on which `sqrt(C0 chi~ + R^o_j q_l)` is sampled: twice the size that
/// resolves the input box plus the output band.
pub fn amplitude_grid(k_q: usize, mu: f64) -> usize {
    good_size(2 * (2 * (k_q + mu.ceil() as usize) + 2))
}

/// `Delta^-1 div(Lambda a grad^perp b)` on the box `k_out`, formed as
/// `Delta^-1 (-d_1 Lambda a d_2 b + d_2 Lambda a d_1 b)` on an alias-free grid.
pub fn bilinear(a: &Field, b: &Field, k_out: usize) -> Field {
    let la = Multiplier::FracLaplacian(1.0).apply(a).expect("total");
    let d = |f: &Field, j: u8| Multiplier::Derivative(j).apply(f).expect("total");
    let parts = [d(&la, 1), d(&la, 2), d(b, 1), d(b, 2)];
    let refs: Vec<&Field> = parts.iter().collect();
    let radius = a.support_radius() + b.support_radius();
    let g = pointwise(&refs, k_out, radius, |v| -v[0] * v[3] + v[1] * v[2]);
    inverse_laplacian(&g)
}

/// `N(f) = Delta^-1 div(Lambda f grad^perp f)`.
pub fn nonlinear(f: &Field, k_out: usize) -> Field {
    bilinear(f, f, k_out)
}

/// Positivity failure inside the amplitude square root.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositivityFailure {
    pub j: u8,
    pub min: f64,
    pub x1: f64,
    pub x2: f64,
}

impl fmt::Display for PositivityFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C0 + R^o_{} q_l / chi~ reaches {:.6e} at ({:.4}, {:.4})", self.j, self.min, self.x1, self.x2)
    }
}

/// Constants entering `a_{j,n+1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmplitudeSpec {
    pub c0: f64,
    pub floor: f64,
    pub lambda_next: f64,
    pub mu: f64,
    pub grid: usize,
    pub profile: CutoffProfile,
}

/// `a_{1,n+1}, a_{2,n+1}` and, when requested, their time derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudePair {
    pub a: [Field; 2],
    pub da: Option<[Field; 2]>,
    /// Smallest sampled value of `C0 + R^o_j q_l / chi~` over both `j`.
    pub min_ratio: f64,
}

/// `a_j = 2 sqrt(chi~/(5 lambda)) P_{<=mu} sqrt(C0 + R^o_j q_l / chi~)`, computed as
/// `(2/sqrt(5 lambda)) P_{<=mu} sqrt(C0 chi~ + R^o_j q_l)`, with
/// `d_t a_j = (2/sqrt(5 lambda)) P_{<=mu} [(C0 chi~' + R^o_j d_t q_l) / (2 sqrt(...))]`.
/// `flip_first` switches the sign of `a_1`.
pub fn amplitude_pair(
    spec: &AmplitudeSpec,
    q_l: &Field,
    dq_l: Option<&Field>,
    chi_t: CutoffValue,
    flip_first: bool,
) -> Result<AmplitudePair, PositivityFailure> {
    let k_out = spec.mu.ceil() as usize;
    let scale = 2.0 / (5.0 * spec.lambda_next).sqrt();
    let n = spec.grid;
    let chi = chi_t.value;
    let project = Multiplier::Project(spec.mu, spec.profile);
    let q_zero = q_l.is_zero();
    let dq = dq_l.filter(|d| !d.is_zero());
    let want_d = dq_l.is_some() || chi_t.derivative != 0.0;

    let mut a: Vec<Field> = Vec::with_capacity(2);
    let mut da: Vec<Field> = Vec::with_capacity(2);
    let mut min_ratio = f64::INFINITY;
    for j in 1..=2u8 {
        let sign = if flip_first && j == 1 { -scale } else { scale };
        let c0chi = spec.c0 * chi;
        if q_zero {
            // constant symbol: no sampling needed
            min_ratio = min_ratio.min(spec.c0);
            if spec.c0 < spec.floor {
                return Err(PositivityFailure { j, min: spec.c0, x1: 0.0, x2: 0.0 });
            }
            let g = c0chi.sqrt();
            a.push(Field::constant(k_out, sign * g));
            if want_d {
                let d = match dq {
                    None => Field::constant(k_out, sign * spec.c0 * chi_t.derivative / (2.0 * g)),
                    Some(dq) => {
                        let r = Multiplier::RieszOdd(j).apply(dq).expect("mean-free");
                        let mut d = r.scale(1.0 / (2.0 * g)).truncated(k_out);
                        d = project.apply(&d).expect("total");
                        d.add_scaled_in_place(1.0, &Field::constant(k_out, spec.c0 * chi_t.derivative / (2.0 * g)));
                        d.scale(sign)
                    }
                };
                da.push(d);
            }
            continue;
        }
        let rq = inverse_transform(&Multiplier::RieszOdd(j).apply(q_l).expect("mean-free"), n).expect("amplitude grid");
        let mut g = rq.data;
        let (mut imin, mut vmin) = (0usize, f64::INFINITY);
        for (i, v) in g.iter_mut().enumerate() {
            *v += c0chi;
            let ratio = *v / chi;
            if ratio < vmin {
                vmin = ratio;
                imin = i;
            }
        }
        min_ratio = min_ratio.min(vmin);
        if vmin < spec.floor || vmin.is_nan() {
            let h = 2.0 * PI / n as f64;
            return Err(PositivityFailure {
                j,
                min: vmin,
                x1: (imin / n) as f64 * h,
                x2: (imin % n) as f64 * h,
            });
        }
        let sq: Vec<f64> = g.iter().map(|v| v.sqrt()).collect();
        let amp = forward_transform_to(&PhysField { n, data: sq.clone() }, k_out).expect("amplitude grid");
        a.push(project.apply(&amp).expect("total").scale(sign));
        if want_d {
            let rdq = dq.map(|d| inverse_transform(&Multiplier::RieszOdd(j).apply(d).expect("mean-free"), n).expect("amplitude grid"));
            let c = spec.c0 * chi_t.derivative;
            let data: Vec<f64> = match &rdq {
                Some(r) => r.data.iter().zip(&sq).map(|(x, s)| (c + x) / (2.0 * s)).collect(),
                None => sq.iter().map(|s| c / (2.0 * s)).collect(),
            };
            let d = forward_transform_to(&PhysField { n, data }, k_out).expect("amplitude grid");
            da.push(project.apply(&d).expect("total").scale(sign));
        }
    }
    let a: [Field; 2] = a.try_into().expect("two amplitudes");
    let da = if want_d { Some(da.try_into().expect("two amplitudes")) } else { None };
    Ok(AmplitudePair { a, da, min_ratio })
}

/// Single amplitude `a_{j,n+1}` at one time, for level `n -> n + 1` of `p`.
pub fn amplitude(j: u8, n: usize, q_l: &Field, p: &ParamSchedule, chi_tilde: f64) -> Result<Field, PositivityFailure> {
    let mu = p.mu(n + 1);
    let spec = AmplitudeSpec {
        c0: p.c0,
        floor: p.positivity_floor,
        lambda_next: p.lambda(n + 1),
        mu,
        grid: amplitude_grid(q_l.max_freq(), mu),
        profile: CutoffProfile::default(),
    };
    let chi = CutoffValue {
        value: chi_tilde,
        derivative: 0.0,
    };
    let pair = amplitude_pair(&spec, q_l, None, chi, false)?;
    let [a1, a2] = pair.a;
    Ok(if j == 1 { a1 } else { a2 })
}

/// `a(x) cos(w.x)`: `out(k) = (a(k - w) + a(k + w)) / 2` on the box `k_out`.
pub fn modulate(a: &Field, w: (i64, i64), k_out: usize) -> Field {
    let mut out = Field::zeros(k_out);
    let ka = a.max_freq() as i64;
    let ko = k_out as i64;
    let width = k_out + 1;
    {
        let raw = out.raw_mut();
        for m1 in -ka..=ka {
            for m2 in -ka..=ka {
                let c = a.get(m1, m2);
                if c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let h = c * 0.5;
                for (t1, t2) in [(m1 + w.0, m2 + w.1), (m1 - w.0, m2 - w.1)] {
                    if t2 < 0 || t2 > ko || t1.abs() > ko {
                        continue;
                    }
                    raw[((t1 + ko) as usize) * width + t2 as usize] += h;
                }
            }
        }
    }
    let wn = ((w.0 * w.0 + w.1 * w.1) as f64).sqrt();
    let s = (a.support_radius() + wn).min(k_out as f64 * std::f64::consts::SQRT_2);
    out.set_support_unchecked(if out.is_zero() { 0.0 } else { s });
    out
}

/// Smallest and largest `|k|` over nonzero coefficients (`None` for the zero field).
pub fn support_range(f: &Field) -> Option<(f64, f64)> {
    let mut lo = i64::MAX;
    let mut hi = -1;
    f.for_each_stored(|k1, k2, c| {
        if c != Complex64::new(0.0, 0.0) {
            let r = k1 * k1 + k2 * k2;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    });
    (hi >= 0).then(|| ((lo as f64).sqrt(), (hi as f64).sqrt()))
}

/// Fields at one node of one level.
#[derive(Clone, Debug)]
pub struct Node {
    /// `f_{<=n}(t)`.
    pub f: Arc<Field>,
    /// `d_t f_{<=n}(t)`.
    pub df: Arc<Field>,
    /// `q_n(t)`.
    pub q: Arc<Field>,
    /// `Delta^-1 div(Lambda f grad^perp f)` at this node, kept for the commutator term.
    pub nl: Arc<Field>,
    pub info: NodeInfo,
}

impl Node {
    /// Pointer identity of all fields.
    pub fn same(&self, other: &Node) -> bool {
        Arc::ptr_eq(&self.f, &other.f) && Arc::ptr_eq(&self.df, &other.df) && Arc::ptr_eq(&self.q, &other.q) && Arc::ptr_eq(&self.nl, &other.nl)
    }
}

/// Scalars recorded while building a node (NaN where not applicable).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeInfo {
    pub chi_tilde: f64,
    pub chi: f64,
    pub positivity_min: f64,
    /// Radii of the nonzero modes of `chi f~` (the oscillatory part).
    pub osc_inner: f64,
    pub osc_outer: f64,
    /// Blend value of the data at this time.
    pub blend: f64,
}

impl Default for NodeInfo {
    fn default() -> Self {
        NodeInfo {
            chi_tilde: f64::NAN,
            chi: f64::NAN,
            positivity_min: f64::NAN,
            osc_inner: f64::NAN,
            osc_outer: f64::NAN,
            blend: f64::NAN,
        }
    }
}

/// Level-0 constants.
#[derive(Debug)]
pub(crate) struct Base {
    pub f_init: Arc<Field>,
    pub f_term: Arc<Field>,
    pub noise: Arc<Field>,
    pub zero_f: Arc<Field>,
    pub zero_q: Arc<Field>,
    pub kq: usize,
}

/// Constants of the step `n -> n + 1`.
#[derive(Debug)]
pub(crate) struct Step {
    pub n: usize,
    pub lambda_next: f64,
    pub r_n: f64,
    pub cut: Cutoffs,
    pub moll: Option<Mollifier>,
    pub kf: usize,
    pub kq: usize,
    pub amp: AmplitudeSpec,
    pub waves: [(i64, i64); 2],
    pub flip: bool,
    pub fin_init: Arc<Field>,
    pub fin_term: Arc<Field>,
    /// `Lambda^{alpha-2} P_{<=lambda_{n+1}} xi` and the same at `lambda_n`.
    pub noise_next: Arc<Field>,
    pub noise_prev: Arc<Field>,
    pub zero_prev_f: Arc<Field>,
    pub zero_prev_q: Arc<Field>,
    /// Radii of the nonzero modes of `f^in` (None when it vanishes).
    pub fin_range: Option<(f64, f64)>,
}

impl Step {
    /// Number of level-`n` nodes in the window of one level-`(n+1)` node, minus one.
    pub fn span(&self) -> usize {
        self.moll.as_ref().map_or(0, |m| m.span())
    }
}

/// Everything fixed for one run.
#[derive(Debug)]
pub(crate) struct Context {
    pub scheme: Scheme,
    pub params: ParamSchedule,
    pub grid: TimeGrid,
    pub levels: usize,
    pub blend: Blend,
    pub base: Base,
    pub steps: Vec<Step>,
}

/// Inputs and settings needed to build a [`Context`].
pub(crate) struct ContextSpec<'a> {
    pub scheme: Scheme,
    pub params: &'a ParamSchedule,
    pub grid: TimeGrid,
    pub levels: usize,
    pub bridge: CutoffBridge,
    pub profile: CutoffProfile,
    pub branch: &'a BranchSignature,
    pub blend: Blend,
    pub theta0: &'a Field,
    pub theta_t: &'a Field,
    pub xi: &'a Field,
    pub grid_cap: usize,
}

fn lambda_inv(f: &Field) -> Result<Field, EngineError> {
    Ok(Multiplier::FracLaplacian(-1.0).apply(f)?)
}

fn noise_term(xi: &Field, lambda: f64, alpha: f64, profile: CutoffProfile) -> Result<Field, EngineError> {
    let k = (lambda.ceil() as usize).max(1);
    let p = Multiplier::Project(lambda, profile).apply(&xi.truncated(k))?;
    Ok(Multiplier::FracLaplacian(alpha - 2.0).apply(&p)?)
}

impl Context {
    pub fn new(s: ContextSpec<'_>) -> Result<Self, EngineError> {
        let p = s.params;
        if let Some(max) = p.max_level() {
            if s.levels > max {
                return Err(EngineError::MissingLevel {
                    requested: s.levels,
                    available: max,
                });
            }
        }
        for (name, f) in [("theta0", s.theta0), ("terminal value", s.theta_t), ("noise", s.xi)] {
            if !f.is_mean_free() {
                return Err(EngineError::Data(format!("{name} must be mean-free")));
            }
        }
        let horizon = s.grid.horizon;
        if s.scheme == Scheme::Terminal {
            if !(s.blend.start > 0.0) {
                return Err(EngineError::Data("terminal scheme needs d_t v(0) = 0: the blend must start after t = 0".into()));
            }
            if s.blend.end > horizon - 1.0 + 1e-12 {
                return Err(EngineError::Data(format!(
                    "terminal scheme needs v constant on [T-1, T]: blend ends at {} > T - 1 = {}",
                    s.blend.end,
                    horizon - 1.0
                )));
            }
        }
        if s.scheme != Scheme::Steady && s.levels > 0 && !s.grid.resolves(p.ell(s.levels), s.levels) {
            return Err(EngineError::Grid(format!(
                "dt = {} must satisfy dt <= min(ell_N, 2^-N)/8 = {}",
                s.grid.dt,
                p.ell(s.levels).min(0.5f64.powi(s.levels as i32)) / 8.0
            )));
        }
        for n in 0..=s.levels {
            let kf = box_f(p.lambda(n));
            let need = quadratic_size(kf, 2 * kf);
            if need > s.grid_cap {
                return Err(EngineError::GridOverflow {
                    level: n,
                    needed: need,
                    cap: s.grid_cap,
                });
            }
        }

        let m_l = p.m_l();
        let alpha = p.alpha;
        let l0 = p.lambda(0);
        let kf0 = box_f(l0);
        let kq0 = 2 * kf0;
        let (f_init, f_term) = if s.scheme == Scheme::Steady {
            (Field::zeros(kf0), Field::zeros(kf0))
        } else {
            let proj = |th: &Field| -> Result<Field, EngineError> {
                let low = Multiplier::Project(l0 / 3.0, s.profile).apply(th)?;
                Ok(lambda_inv(&low)?.resized(kf0)?)
            };
            (proj(s.theta0)?, proj(s.theta_t)?)
        };
        let base = Base {
            f_init: Arc::new(f_init),
            f_term: Arc::new(f_term),
            noise: Arc::new(noise_term(s.xi, l0, alpha, s.profile)?),
            zero_f: Arc::new(Field::zeros(kf0)),
            zero_q: Arc::new(Field::zeros(kq0)),
            kq: kq0,
        };

        let mut steps = Vec::with_capacity(s.levels);
        for n in 0..s.levels {
            let lam = p.lambda(n);
            let lam1 = p.lambda(n + 1);
            if lam1.fract() != 0.0 {
                return Err(EngineError::NonIntegerWave { level: n + 1, lambda: lam1 });
            }
            let l = lam1 as i64;
            let kf = box_f(lam1);
            let kq = 2 * kf;
            let mu = p.mu(n + 1);
            let amp_grid = amplitude_grid(box_q(lam), mu);
            if amp_grid > s.grid_cap {
                return Err(EngineError::GridOverflow {
                    level: n + 1,
                    needed: amp_grid,
                    cap: s.grid_cap,
                });
            }
            let moll = match s.scheme {
                Scheme::Steady => None,
                _ => Some(Mollifier::new(p.ell(n + 1), s.grid.dt)?),
            };
            let band = |th: &Field| -> Result<Field, EngineError> {
                if s.scheme == Scheme::Steady {
                    return Ok(Field::zeros(kf));
                }
                let hi = Multiplier::Project(lam1 / 3.0, s.profile).apply(th)?;
                let lo = Multiplier::Project(lam / 3.0, s.profile).apply(th)?;
                let d = hi.sub(&lo);
                let d = clamp_support(d, lam1 / 3.0);
                Ok(lambda_inv(&d)?.truncated(kf))
            };
            let fin_init = band(s.theta0)?;
            let fin_term = band(s.theta_t)?;
            let fin_range = match (support_range(&fin_init), support_range(&fin_term)) {
                (Some(a), Some(b)) => Some((a.0.min(b.0), a.1.max(b.1))),
                (a, b) => a.or(b),
            };
            steps.push(Step {
                n,
                lambda_next: lam1,
                r_n: p.r(n),
                cut: Cutoffs {
                    n,
                    m_l,
                    r_n: p.r(n),
                    terminal: (s.scheme == Scheme::Terminal).then_some(horizon),
                    bridge: s.bridge,
                },
                moll,
                kf,
                kq,
                amp: AmplitudeSpec {
                    c0: p.c0,
                    floor: p.positivity_floor,
                    lambda_next: lam1,
                    mu,
                    grid: amp_grid,
                    profile: s.profile,
                },
                waves: [(3 * l, 4 * l), (5 * l, 0)],
                flip: s.branch.flips(n + 1),
                fin_init: Arc::new(fin_init),
                fin_term: Arc::new(fin_term),
                noise_next: Arc::new(noise_term(s.xi, lam1, alpha, s.profile)?),
                noise_prev: Arc::new(noise_term(s.xi, lam, alpha, s.profile)?),
                zero_prev_f: Arc::new(Field::zeros(box_f(lam))),
                zero_prev_q: Arc::new(Field::zeros(box_q(lam))),
                fin_range,
            });
        }
        Ok(Context {
            scheme: s.scheme,
            params: p.clone(),
            grid: s.grid,
            levels: s.levels,
            blend: s.blend,
            base,
            steps,
        })
    }

    /// Blend of the data at `t` (0 for all but the terminal scheme).
    pub fn blend_at(&self, t: f64) -> (f64, f64) {
        match self.scheme {
            Scheme::Terminal => self.blend.eval(t),
            _ => (0.0, 0.0),
        }
    }
}

fn mix(init: &Arc<Field>, term: &Arc<Field>, s: f64) -> Arc<Field> {
    if s == 0.0 {
        init.clone()
    } else if s == 1.0 {
        term.clone()
    } else {
        Arc::new(init.scale(1.0 - s).axpy(s, term))
    }
}

/// `q = -Lambda^-1 df + nl + noise - nu Lambda^{gamma-1} f`, mean removed.
fn direct_q(f: &Field, df: &Field, nl: &Field, noise: &Field, p: &ParamSchedule, kq: usize, radius: f64) -> Result<Field, EngineError> {
    let mut q = Field::zeros(kq);
    q.add_scaled_in_place(1.0, nl);
    if !df.is_zero() {
        q.add_scaled_in_place(-1.0, &lambda_inv(df)?);
    }
    q.add_scaled_in_place(1.0, noise);
    if p.nu != 0.0 && !f.is_zero() {
        q.add_scaled_in_place(-p.nu, &Multiplier::FracLaplacian(p.gamma - 1.0).apply(f)?);
    }
    Ok(within(q.remove_mean(), radius)?)
}

/// Keeps the tracked support, failing if any coefficient lies beyond `radius`.
fn within(f: Field, radius: f64) -> Result<Field, crate::spectral::SpectralError> {
    let s = f.support_radius().min(radius);
    f.with_support(s)
}

/// Level-0 node at time `t`.
pub(crate) fn level0_node(ctx: &Context, t: f64) -> Result<Node, EngineError> {
    let b = &ctx.base;
    let (s, ds) = ctx.blend_at(t);
    let f = mix(&b.f_init, &b.f_term, s);
    let df = if ds == 0.0 {
        b.zero_f.clone()
    } else {
        Arc::new(b.f_term.sub(&b.f_init).scale(ds))
    };
    let nl = if f.is_zero() { b.zero_q.clone() } else { Arc::new(nonlinear(&f, b.kq)) };
    let radius = 12.0 * ctx.params.lambda(0);
    let q = direct_q(&f, &df, &nl, &b.noise, &ctx.params, b.kq, radius)?;
    Ok(Node {
        f,
        df,
        q: Arc::new(q),
        nl,
        info: NodeInfo {
            blend: s,
            ..NodeInfo::default()
        },
    })
}

/// Identifies a node by the (uniform) window it is built from and the cutoff
/// and blend values at its time; equal keys give bitwise equal nodes.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct NodeKey {
    f: usize,
    q: usize,
    scalars: [u64; 6],
}

/// `None` when the window is not uniform (such nodes are never shared).
pub(crate) fn node_key(ctx: &Context, level: usize, t: f64, window: Option<&[Node]>) -> Option<NodeKey> {
    let (s, ds) = ctx.blend_at(t);
    let (f, q, chi) = match window {
        None => (0, 0, [0.0; 4]),
        Some(w) => {
            if !uniform(w) {
                return None;
            }
            let chi = match ctx.scheme {
                Scheme::Steady => [0.0; 4],
                _ => {
                    let step = &ctx.steps[level - 1];
                    let a = step.cut.chi_tilde(t);
                    let b = step.cut.chi(t);
                    [a.value, a.derivative, b.value, b.derivative]
                }
            };
            (Arc::as_ptr(&w[0].f) as usize, Arc::as_ptr(&w[0].q) as usize, chi)
        }
    };
    Some(NodeKey {
        f,
        q,
        scalars: [chi[0], chi[1], chi[2], chi[3], s, ds].map(f64::to_bits),
    })
}

/// True when every window entry is the same node.
pub(crate) fn uniform(window: &[Node]) -> bool {
    window.windows(2).all(|w| w[0].same(&w[1]))
}

fn combine<'a>(fields: impl Iterator<Item = &'a Arc<Field>>, weights: &[f64], k: usize) -> Field {
    let mut out = Field::zeros(k);
    for (f, &w) in fields.zip(weights) {
        if w != 0.0 {
            out.add_scaled_in_place(w, f);
        }
    }
    out
}

/// Mollified level-`n` quantities at one time.
pub(crate) struct Mollified {
    pub f: Arc<Field>,
    pub df: Arc<Field>,
    pub q: Arc<Field>,
    pub dq: Arc<Field>,
}

/// `window[m]` is the level-`n` node at `t - m dt` (clamped at 0).
pub(crate) fn mollify(step: &Step, window: &[Node]) -> Mollified {
    if uniform(window) {
        let w = &window[0];
        return Mollified {
            f: w.f.clone(),
            df: step.zero_prev_f.clone(),
            q: w.q.clone(),
            dq: step.zero_prev_q.clone(),
        };
    }
    let m = step.moll.as_ref().expect("non-uniform windows only occur when mollifying");
    let kf = window[0].f.max_freq();
    let kq = window[0].q.max_freq();
    Mollified {
        f: Arc::new(combine(window.iter().map(|n| &n.f), &m.weights, kf)),
        df: Arc::new(combine(window.iter().map(|n| &n.f), &m.dweights, kf)),
        q: Arc::new(combine(window.iter().map(|n| &n.q), &m.weights, kq)),
        dq: Arc::new(combine(window.iter().map(|n| &n.q), &m.dweights, kq)),
    }
}

/// Intermediate quantities of one step at one time.
pub(crate) struct Built {
    pub moll: Mollified,
    pub chi: CutoffValue,
    pub ftilde: Field,
    pub dftilde: Field,
    pub fin: Arc<Field>,
    pub dfin: Option<Field>,
    pub f: Field,
    pub df: Field,
    pub info: NodeInfo,
}

pub(crate) fn build(ctx: &Context, step: &Step, window: &[Node], t: f64) -> Result<Built, EngineError> {
    let steady = ctx.scheme == Scheme::Steady;
    let moll = mollify(step, window);
    let (chi_t, chi) = if steady {
        let c = |v| CutoffValue { value: v, derivative: 0.0 };
        (c(step.r_n), c(1.0))
    } else {
        (step.cut.chi_tilde(t), step.cut.chi(t))
    };
    let kf = step.kf;
    let mut info = NodeInfo {
        chi_tilde: chi_t.value,
        chi: chi.value,
        ..NodeInfo::default()
    };

    let active = chi.value != 0.0 || chi.derivative != 0.0;
    let (ftilde, dftilde) = if active {
        let dq = (!steady).then(|| moll.dq.as_ref());
        let pair = amplitude_pair(&step.amp, &moll.q, dq, chi_t, step.flip).map_err(|e| EngineError::Positivity {
            level: step.n + 1,
            j: e.j,
            t,
            min: e.min,
            x1: e.x1,
            x2: e.x2,
            floor: step.amp.floor,
        })?;
        info.positivity_min = pair.min_ratio;
        let mut ft = Field::zeros(kf);
        for (a, w) in pair.a.iter().zip(step.waves) {
            ft.add_scaled_in_place(1.0, &modulate(a, w, kf));
        }
        let mut dft = Field::zeros(kf);
        if let Some(da) = &pair.da {
            for (a, w) in da.iter().zip(step.waves) {
                dft.add_scaled_in_place(1.0, &modulate(a, w, kf));
            }
        }
        (ft, dft)
    } else {
        (Field::zeros(kf), Field::zeros(kf))
    };
    if chi.value != 0.0 {
        if let Some((lo, hi)) = support_range(&ftilde) {
            info.osc_inner = lo;
            info.osc_outer = hi;
        }
    }

    let (s, ds) = ctx.blend_at(t);
    info.blend = s;
    let fin = mix(&step.fin_init, &step.fin_term, s);
    let dfin = (ds != 0.0).then(|| step.fin_term.sub(&step.fin_init).scale(ds));

    let mut f = Field::zeros(kf);
    f.add_scaled_in_place(1.0, &moll.f);
    if chi.value != 0.0 {
        f.add_scaled_in_place(chi.value, &ftilde);
    }
    f.add_scaled_in_place(1.0, &fin);
    let mut df = Field::zeros(kf);
    if !steady {
        df.add_scaled_in_place(1.0, &moll.df);
        if chi.derivative != 0.0 {
            df.add_scaled_in_place(chi.derivative, &ftilde);
        }
        if chi.value != 0.0 {
            df.add_scaled_in_place(chi.value, &dftilde);
        }
        if let Some(d) = &dfin {
            df.add_scaled_in_place(1.0, d);
        }
    }
    let radius = 6.0 * step.lambda_next;
    let f = within(f, radius)?;
    let df = within(df, radius)?;
    Ok(Built {
        moll,
        chi,
        ftilde,
        dftilde,
        fin,
        dfin,
        f,
        df,
        info,
    })
}

/// Level-`(n+1)` node from its level-`n` window.
pub(crate) fn advance_node(ctx: &Context, step: &Step, window: &[Node], t: f64) -> Result<Node, EngineError> {
    let b = build(ctx, step, window, t)?;
    let nl = nonlinear(&b.f, step.kq);
    let q = direct_q(&b.f, &b.df, &nl, &step.noise_next, &ctx.params, step.kq, 12.0 * step.lambda_next)?;
    Ok(Node {
        f: Arc::new(b.f),
        df: Arc::new(b.df),
        q: Arc::new(q),
        nl: Arc::new(nl),
        info: b.info,
    })
}

/// The error `q_{n+1}` split into its constituent pieces at one node.
#[derive(Clone, Debug)]
pub struct ErrorPieces {
    pub level: usize,
    pub t: f64,
    /// `chi^2 N(f~) + q_l`.
    pub q_m: Field,
    /// `Delta^-1 div(Lambda g grad^perp f_l + Lambda f_l grad^perp g)`, `g = f_{<=n+1} - f_l`.
    pub q_t: Field,
    /// `-nu Lambda^{gamma-1} g`.
    pub q_d: Field,
    /// `-Lambda^-1 d_t g` plus the quadratic terms carrying `f^in`.
    pub q_i: Field,
    /// `N(f_l) - (N(f_{<=n})) *_t phi_l`.
    pub q_com: Field,
    /// `Lambda^{alpha-2}(P_{<=lambda_{n+1}} - P_{<=lambda_n}) xi`.
    pub q_n: Field,
    /// Output of the direct assembly.
    pub direct: Field,
    /// `-Lambda^-1 ((d_t f_{<=n}) *_t phi_l - d_t f_l)`: the part of `direct` the
    /// pieces miss, a quadrature error of the time convolution.
    pub quadrature_gap: Field,
}

impl ErrorPieces {
    pub fn pieces(&self) -> [(&'static str, &Field); 6] {
        [
            ("q_M", &self.q_m),
            ("q_T", &self.q_t),
            ("q_D", &self.q_d),
            ("q_I", &self.q_i),
            ("q_com", &self.q_com),
            ("q_N", &self.q_n),
        ]
    }

    pub fn sum(&self) -> Field {
        let mut s = Field::zeros(self.direct.max_freq());
        for (_, p) in self.pieces() {
            s.add_scaled_in_place(1.0, p);
        }
        s
    }

    /// `||sum - direct||_{L^2}`.
    pub fn mismatch(&self) -> f64 {
        self.sum().sub(&self.direct).l2_norm()
    }

    /// `||sum - direct - quadrature_gap||_{L^2}`; vanishes up to roundoff.
    pub fn identity_defect(&self) -> f64 {
        self.sum().sub(&self.direct).sub(&self.quadrature_gap).l2_norm()
    }
}

pub(crate) fn decompose(ctx: &Context, step: &Step, window: &[Node], node: &Node, t: f64) -> Result<ErrorPieces, EngineError> {
    let b = build(ctx, step, window, t)?;
    let kq = step.kq;
    let p = &ctx.params;
    let steady = ctx.scheme == Scheme::Steady;
    let chi = b.chi.value;

    // g = chi f~ + f^in and its time derivative
    let mut g = Field::zeros(step.kf);
    g.add_scaled_in_place(chi, &b.ftilde);
    g.add_scaled_in_place(1.0, &b.fin);
    let mut dg = Field::zeros(step.kf);
    if !steady {
        dg.add_scaled_in_place(b.chi.derivative, &b.ftilde);
        dg.add_scaled_in_place(chi, &b.dftilde);
        if let Some(d) = &b.dfin {
            dg.add_scaled_in_place(1.0, d);
        }
    }
    let f_l = b.moll.f.resized(step.kf)?;

    let mut q_m = nonlinear(&b.ftilde, kq).scale(chi * chi);
    q_m.add_scaled_in_place(1.0, &b.moll.q);

    let q_t = bilinear(&g, &f_l, kq).add(&bilinear(&f_l, &g, kq));

    let q_d = if p.nu != 0.0 && !g.is_zero() {
        Multiplier::FracLaplacian(p.gamma - 1.0).apply(&g)?.scale(-p.nu)
    } else {
        Field::zeros(kq)
    };

    let mut q_i = Field::zeros(kq);
    if !dg.is_zero() {
        q_i.add_scaled_in_place(-1.0, &lambda_inv(&dg)?);
    }
    if !b.fin.is_zero() {
        if chi != 0.0 {
            let cross = bilinear(&b.ftilde, &b.fin, kq).add(&bilinear(&b.fin, &b.ftilde, kq));
            q_i.add_scaled_in_place(chi, &cross);
        }
        q_i.add_scaled_in_place(1.0, &bilinear(&b.fin, &b.fin, kq));
    }

    let (q_com, quadrature_gap) = if uniform(window) {
        (Field::zeros(kq), Field::zeros(kq))
    } else {
        let m = step.moll.as_ref().expect("mollified step");
        let kq_prev = window[0].nl.max_freq();
        let avg_nl = combine(window.iter().map(|n| &n.nl), &m.weights, kq_prev);
        let com = nonlinear(&b.moll.f, kq_prev).sub(&avg_nl);
        let avg_df = combine(window.iter().map(|n| &n.df), &m.weights, window[0].df.max_freq());
        let diff = avg_df.sub(&b.moll.df);
        let gap = if diff.is_zero() { Field::zeros(kq) } else { lambda_inv(&diff)?.scale(-1.0) };
        (com, gap)
    };

    let q_n = step.noise_next.sub(&step.noise_prev);

    let fit = |f: Field| f.truncated(kq).remove_mean();
    Ok(ErrorPieces {
        level: step.n + 1,
        t,
        q_m: fit(q_m),
        q_t: fit(q_t),
        q_d: fit(q_d),
        q_i: fit(q_i),
        q_com: fit(q_com),
        q_n: fit(q_n),
        direct: (*node.q).clone(),
        quadrature_gap: fit(quadrature_gap),
    })
}
