//! Whole runs: configuration, node retention and per-level diagnostics.

use std::collections::BTreeSet;

use super::kernel::{box_f, box_q, Node};
use super::params::{validate_params, ParamSchedule, ValidationReport};
use super::stream::Engine;
use super::time::{Blend, CutoffBridge, TimeGrid};
use super::{BranchSignature, EngineError, Scheme};
use crate::noise::holder_norm;
use crate::spectral::{besov_norm_with, x_norm_os, CutoffProfile, LPPartition, SpectralField};

/// Largest physical grid side any product may use.
pub const DEFAULT_GRID_CAP: usize = 2048;

/// Everything that determines a run apart from its input fields.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub scheme: Scheme,
    pub params: ParamSchedule,
    pub levels: usize,
    pub horizon: f64,
    /// `None` picks the largest power of two resolving the finest level.
    pub dt: Option<f64>,
    pub bridge: CutoffBridge,
    pub profile: CutoffProfile,
    pub branch: BranchSignature,
    /// Transition from `theta0` to the terminal value (terminal scheme only).
    pub blend: Blend,
    pub grid_cap: usize,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            scheme: Scheme::Ivp,
            params: ParamSchedule::default(),
            levels: 2,
            horizon: 8.0,
            dt: None,
            bridge: CutoffBridge::default(),
            profile: CutoffProfile::default(),
            branch: BranchSignature::none(),
            blend: Blend { start: 1.0, end: 3.0 },
            grid_cap: DEFAULT_GRID_CAP,
        }
    }
}

impl RunSpec {
    pub fn time_grid(&self) -> Result<TimeGrid, EngineError> {
        match self.dt {
            Some(dt) => TimeGrid::new(self.horizon, dt),
            None => {
                let ell = match self.params.max_level() {
                    Some(m) if self.levels > m => {
                        return Err(EngineError::MissingLevel {
                            requested: self.levels,
                            available: m,
                        })
                    }
                    _ => self.params.ell(self.levels),
                };
                TimeGrid::for_resolution(self.horizon, ell, self.levels)
            }
        }
    }
}

/// Input fields of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunInputs {
    /// Initial datum `theta0` (unused by the steady scheme).
    pub theta0: SpectralField,
    /// Terminal value (terminal scheme only).
    pub theta_t: SpectralField,
    /// Noise `xi` before any projection.
    pub xi: SpectralField,
}

impl RunInputs {
    pub fn new(theta0: SpectralField, xi: SpectralField) -> Self {
        RunInputs {
            theta0,
            theta_t: SpectralField::zeros(1),
            xi,
        }
    }

    pub fn zero() -> Self {
        Self::new(SpectralField::zeros(1), SpectralField::zeros(1))
    }

    /// `N = max(1, ||theta0||_{C^eta})`, `L = max(1, ||xi||_{C^{-1-kappa}})`, measured
    /// with the Hoelder-Zygmund norms of the fields as given.
    pub fn bounds(&self, eta: f64, kappa: f64) -> (f64, f64) {
        let n = holder_norm(&self.theta0, eta).max(holder_norm(&self.theta_t, eta));
        let l = holder_norm(&self.xi, -1.0 - kappa);
        (n.max(1.0), l.max(1.0))
    }
}

/// Which nodes are handed to the sink.
#[derive(Clone, Debug, PartialEq)]
pub struct Retention {
    /// Every `stride`-th node (and the last one).
    pub stride: usize,
    /// Every node at or after this time.
    pub dense_from: Option<f64>,
    /// Nodes next to the cutoff breakpoints of every level.
    pub breakpoints: bool,
    /// Nodes nearest to these times.
    pub probes: Vec<f64>,
    /// Emit all levels at the retained nodes, not only the last.
    pub all_levels: bool,
}

impl Default for Retention {
    fn default() -> Self {
        Retention {
            stride: 0,
            dense_from: None,
            breakpoints: true,
            probes: Vec::new(),
            all_levels: true,
        }
    }
}

impl Retention {
    /// Nodes at integer times (stride chosen from the grid).
    pub fn unit_times(grid: &TimeGrid) -> Self {
        Retention {
            stride: (1.0 / grid.dt).round().max(1.0) as usize,
            ..Self::default()
        }
    }

    /// Sorted retained indices for `engine`.
    pub fn indices(&self, engine: &Engine) -> Vec<usize> {
        let n = engine.node_count();
        let grid = engine.grid();
        let mut set = BTreeSet::new();
        set.insert(0);
        set.insert(n - 1);
        if self.stride > 0 {
            set.extend((0..n).step_by(self.stride));
        }
        if engine.scheme() == Scheme::Steady {
            return vec![0];
        }
        if let Some(t0) = self.dense_from {
            set.extend(grid.ceil_index(t0)..n);
        }
        if self.breakpoints {
            for level in 1..=engine.levels() {
                for b in engine.breakpoints(level) {
                    if (0.0..=grid.horizon).contains(&b) {
                        set.insert(grid.floor_index(b));
                        set.insert(grid.ceil_index(b));
                    }
                }
            }
        }
        for &p in &self.probes {
            if (0.0..=grid.horizon).contains(&p) {
                set.insert(grid.floor_index(p + 0.5 * grid.dt));
            }
        }
        set.into_iter().collect()
    }
}

/// What is measured at retained nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagOptions {
    /// Evaluate `||q||_X` (sup norms on an oversampled grid).
    pub x_norm: bool,
    pub oversample: f64,
    /// Split `q` into its pieces and record their sizes.
    pub decompose: bool,
    /// Measure `||f~||_{B^{1/2}_{inf,1}} / r^{1/2}` once per level.
    pub m0: bool,
}

impl Default for DiagOptions {
    fn default() -> Self {
        DiagOptions {
            x_norm: true,
            oversample: 2.0,
            decompose: false,
            m0: true,
        }
    }
}

impl DiagOptions {
    pub fn none() -> Self {
        DiagOptions {
            x_norm: false,
            oversample: 2.0,
            decompose: false,
            m0: false,
        }
    }
}

/// Measurements at one retained node of one level (NaN when not measured).
#[derive(Clone, Debug, PartialEq)]
pub struct DiagRecord {
    pub level: usize,
    pub index: usize,
    pub t: f64,
    pub chi_tilde: f64,
    pub chi: f64,
    pub positivity_min: f64,
    pub f_l2: f64,
    pub df_l2: f64,
    pub q_l2: f64,
    pub q_x: f64,
    pub f_support: f64,
    pub q_support: f64,
    pub osc_inner: f64,
    pub osc_outer: f64,
    /// `(name, ||piece||_{L^2}, ||piece||_X)`.
    pub pieces: Vec<(String, f64, f64)>,
    /// `||sum of pieces - q||_{L^2}` and the same after removing the quadrature gap.
    pub piece_mismatch: f64,
    pub piece_identity_defect: f64,
}

/// Per-level constants and aggregates.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSummary {
    pub level: usize,
    pub lambda: f64,
    pub r: f64,
    pub ell: f64,
    pub mu: f64,
    pub box_f: usize,
    pub box_q: usize,
    pub computed: usize,
    pub reused: usize,
    pub retained: usize,
    pub min_positivity: f64,
    pub max_q_l2: f64,
    pub max_q_x: f64,
    /// Largest `||q||_X` over retained nodes at or after [`plateau_start`].
    pub plateau_q_x: f64,
    pub m0_empirical: f64,
}

/// Start of the region where level `n` of an initial-value run no longer changes:
/// `4 + sum_{k <= n} ell_k` (all cutoffs are flat from `t = 4` on, and each level
/// inherits the window of the mollifier below it).
pub fn plateau_start(p: &ParamSchedule, n: usize) -> f64 {
    4.0 + (1..=n).map(|k| p.ell(k)).sum::<f64>()
}

/// A node handed to a [`NodeSink`].
#[derive(Clone, Debug)]
pub struct RetainedNode {
    pub level: usize,
    pub index: usize,
    pub t: f64,
    pub node: Node,
}

/// Receives retained nodes as they are produced.
pub trait NodeSink {
    fn accept(&mut self, node: RetainedNode) -> Result<(), EngineError>;
}

impl NodeSink for Vec<RetainedNode> {
    fn accept(&mut self, node: RetainedNode) -> Result<(), EngineError> {
        self.push(node);
        Ok(())
    }
}

/// Drops every node.
pub struct Discard;

impl NodeSink for Discard {
    fn accept(&mut self, _: RetainedNode) -> Result<(), EngineError> {
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub spec: RunSpec,
    pub grid: TimeGrid,
    pub validation: ValidationReport,
    pub levels: Vec<LevelSummary>,
    pub diagnostics: Vec<DiagRecord>,
    /// Filled by [`run`] only.
    pub retained: Vec<RetainedNode>,
    /// Annulus `[inner, outer]` of `f^in` per level `>= 1`.
    pub fin_ranges: Vec<Option<(f64, f64)>>,
}

impl RunOutput {
    /// Retained node of `level` at index `i`.
    pub fn node(&self, level: usize, i: usize) -> Option<&Node> {
        self.retained.iter().find(|r| r.level == level && r.index == i).map(|r| &r.node)
    }

    /// Largest empirical `M0` over levels.
    pub fn m0_empirical(&self) -> f64 {
        self.levels.iter().map(|l| l.m0_empirical).filter(|v| v.is_finite()).fold(f64::NAN, f64::max)
    }
}

/// Runs and keeps every retained node in memory.
pub fn run(spec: &RunSpec, inputs: &RunInputs, retention: &Retention, diag: &DiagOptions) -> Result<RunOutput, EngineError> {
    let mut sink: Vec<RetainedNode> = Vec::new();
    let mut out = run_with(spec, inputs, retention, diag, &mut sink)?;
    out.retained = sink;
    Ok(out)
}

/// Runs and streams retained nodes to `sink`.
pub fn run_with(
    spec: &RunSpec,
    inputs: &RunInputs,
    retention: &Retention,
    diag: &DiagOptions,
    sink: &mut dyn NodeSink,
) -> Result<RunOutput, EngineError> {
    let validation = validate_params(&spec.params).into_result()?;
    let mut engine = Engine::new(spec, inputs)?;
    let p = spec.params.clone();
    let indices = retention.indices(&engine);
    let top = spec.levels;
    let emitted: Vec<usize> = if retention.all_levels { (0..=top).rev().collect() } else { vec![top] };

    let mut levels: Vec<LevelSummary> = (0..=top)
        .map(|n| LevelSummary {
            level: n,
            lambda: p.lambda(n),
            r: p.r(n),
            ell: p.ell(n),
            mu: if n == 0 { f64::NAN } else { p.mu(n) },
            box_f: box_f(p.lambda(n)),
            box_q: box_q(p.lambda(n)),
            computed: 0,
            reused: 0,
            retained: 0,
            min_positivity: f64::NAN,
            max_q_l2: 0.0,
            max_q_x: f64::NAN,
            plateau_q_x: f64::NAN,
            m0_empirical: f64::NAN,
        })
        .collect();
    let mut diagnostics = Vec::new();

    for &i in &indices {
        for &level in &emitted {
            let node = engine.node(level, i)?;
            let t = engine.t(i);
            let mut rec = DiagRecord {
                level,
                index: i,
                t,
                chi_tilde: node.info.chi_tilde,
                chi: node.info.chi,
                positivity_min: node.info.positivity_min,
                f_l2: node.f.l2_norm(),
                df_l2: node.df.l2_norm(),
                q_l2: node.q.l2_norm(),
                q_x: f64::NAN,
                f_support: node.f.measured_support(),
                q_support: node.q.measured_support(),
                osc_inner: node.info.osc_inner,
                osc_outer: node.info.osc_outer,
                pieces: Vec::new(),
                piece_mismatch: f64::NAN,
                piece_identity_defect: f64::NAN,
            };
            if diag.x_norm {
                rec.q_x = x_norm_os(&node.q, diag.oversample)?;
            }
            if diag.decompose && level >= 1 {
                let e = engine.decompose(level, i)?;
                for (name, piece) in e.pieces() {
                    let x = if diag.x_norm { x_norm_os(piece, diag.oversample)? } else { f64::NAN };
                    rec.pieces.push((name.to_string(), piece.l2_norm(), x));
                }
                rec.piece_mismatch = e.mismatch();
                rec.piece_identity_defect = e.identity_defect();
            }
            let s = &mut levels[level];
            s.retained += 1;
            if rec.positivity_min.is_finite() {
                s.min_positivity = if s.min_positivity.is_nan() { rec.positivity_min } else { s.min_positivity.min(rec.positivity_min) };
            }
            s.max_q_l2 = s.max_q_l2.max(rec.q_l2);
            if rec.q_x.is_finite() {
                s.max_q_x = if s.max_q_x.is_nan() { rec.q_x } else { s.max_q_x.max(rec.q_x) };
                let plateau = spec.scheme == Scheme::Steady || t >= plateau_start(&p, level) - 1e-12;
                if plateau {
                    s.plateau_q_x = if s.plateau_q_x.is_nan() { rec.q_x } else { s.plateau_q_x.max(rec.q_x) };
                }
            }
            diagnostics.push(rec);
            sink.accept(RetainedNode { level, index: i, t, node })?;
        }
    }

    if diag.m0 {
        // last node: all cutoffs are flat there for the initial-value and steady schemes
        let i = match spec.scheme {
            Scheme::Terminal => engine.grid().floor_index(spec.horizon / 2.0),
            _ => engine.node_count() - 1,
        };
        for level in 1..=top {
            let ft = engine.perturbation(level, i)?;
            let b = besov_norm_with(&ft, 0.5, f64::INFINITY, 1.0, LPPartition::new(spec.profile), diag.oversample);
            levels[level].m0_empirical = b / p.r(level - 1).sqrt();
        }
    }

    for (s, (c, r)) in levels.iter_mut().zip(engine.counts()) {
        s.computed = c;
        s.reused = r;
    }
    let fin_ranges = (1..=top).map(|l| engine.fin_range(l)).collect();
    Ok(RunOutput {
        spec: spec.clone(),
        grid: *engine.grid(),
        validation,
        levels,
        diagnostics,
        retained: Vec::new(),
        fin_ranges,
    })
}
