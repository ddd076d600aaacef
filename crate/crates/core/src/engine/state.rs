//! Fully materialized levels, for small runs and cross-checks of the streaming engine.

use std::sync::Arc;

use super::kernel::{self, node_key, Context, ContextSpec, ErrorPieces, Node, NodeInfo, NodeKey};
use super::run::{RunInputs, RunSpec};
use super::time::{Mollifier, TimeGrid};
use super::{BranchSignature, EngineError, Scheme};
use crate::engine::params::ParamSchedule;
use crate::spectral::SpectralField;

/// One field per node of a time grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub fields: Vec<Arc<SpectralField>>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, fields: Vec<Arc<SpectralField>>) -> Result<Self, EngineError> {
        if fields.len() != grid.nodes {
            return Err(EngineError::Grid(format!("{} fields for {} nodes", fields.len(), grid.nodes)));
        }
        Ok(Trajectory { grid, fields })
    }

    /// The same field at every node.
    pub fn constant(grid: TimeGrid, field: SpectralField) -> Self {
        let f = Arc::new(field);
        Trajectory {
            fields: vec![f; grid.nodes],
            grid,
        }
    }

    pub fn from_fn(grid: TimeGrid, mut f: impl FnMut(f64) -> SpectralField) -> Self {
        let fields = (0..grid.nodes).map(|i| Arc::new(f(grid.t(i)))).collect();
        Trajectory { grid, fields }
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn at(&self, i: usize) -> &SpectralField {
        &self.fields[i]
    }

    /// Largest declared support radius along the trajectory.
    pub fn support_radius(&self) -> f64 {
        self.fields.iter().map(|f| f.support_radius()).fold(0.0, f64::max)
    }

    /// True when all nodes hold equal coefficients.
    pub fn is_constant(&self) -> bool {
        self.fields.windows(2).all(|w| Arc::ptr_eq(&w[0], &w[1]) || w[0] == w[1])
    }
}

/// `(tr *_t phi_ell, tr *_t phi'_ell)`, extending `tr` by its value at `t = 0` for `t < 0`.
pub fn mollify_time(tr: &Trajectory, ell: f64) -> Result<(Trajectory, Trajectory), EngineError> {
    let m = Mollifier::new(ell, tr.grid.dt)?;
    let k = tr.fields.iter().map(|f| f.max_freq()).max().unwrap_or(0);
    let zero = Arc::new(SpectralField::zeros(k));
    let mut value = Vec::with_capacity(tr.len());
    let mut deriv = Vec::with_capacity(tr.len());
    for i in 0..tr.len() {
        let at = |m: usize| &tr.fields[i.saturating_sub(m)];
        if (1..=m.span()).all(|j| Arc::ptr_eq(at(j), at(0))) {
            value.push(at(0).clone());
            deriv.push(zero.clone());
            continue;
        }
        let mut v = SpectralField::zeros(k);
        let mut d = SpectralField::zeros(k);
        for j in 0..=m.span() {
            let f = at(j);
            if m.weights[j] != 0.0 {
                v.add_scaled_in_place(m.weights[j], f);
            }
            if m.dweights[j] != 0.0 {
                d.add_scaled_in_place(m.dweights[j], f);
            }
        }
        value.push(Arc::new(v));
        deriv.push(Arc::new(d));
    }
    Ok((Trajectory::new(tr.grid, value)?, Trajectory::new(tr.grid, deriv)?))
}

/// Level `n` of a run with all nodes in memory.
pub struct IterationState {
    pub level: usize,
    pub scheme: Scheme,
    pub branch: BranchSignature,
    pub params: ParamSchedule,
    /// One entry per node (a single node for the steady scheme).
    pub nodes: Vec<Node>,
    ctx: Arc<Context>,
}

impl IterationState {
    fn trajectory(&self, pick: impl Fn(&Node) -> &Arc<SpectralField>) -> Trajectory {
        let grid = self.ctx.grid;
        let fields = if self.nodes.len() == grid.nodes {
            self.nodes.iter().map(|n| pick(n).clone()).collect()
        } else {
            vec![pick(&self.nodes[0]).clone(); grid.nodes]
        };
        Trajectory { grid, fields }
    }

    /// `f_{<=n}`.
    pub fn f(&self) -> Trajectory {
        self.trajectory(|n| &n.f)
    }

    /// `d_t f_{<=n}`.
    pub fn df(&self) -> Trajectory {
        self.trajectory(|n| &n.df)
    }

    /// `q_n`.
    pub fn q(&self) -> Trajectory {
        self.trajectory(|n| &n.q)
    }

    /// `theta = Lambda f_{<=n}` at node `i`.
    pub fn theta(&self, i: usize) -> SpectralField {
        let n = &self.nodes[i.min(self.nodes.len() - 1)];
        crate::spectral::fractional_laplacian(&n.f, 1.0).expect("total")
    }

    pub fn info(&self) -> Vec<NodeInfo> {
        self.nodes.iter().map(|n| n.info).collect()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.ctx.grid
    }

    /// Levels this state can still be advanced to.
    pub fn max_level(&self) -> usize {
        self.ctx.levels
    }

    /// Error pieces of this level at node `i`; needs the previous state.
    pub fn decompose(&self, prev: &IterationState, i: usize) -> Result<ErrorPieces, EngineError> {
        if prev.level + 1 != self.level {
            return Err(EngineError::Data(format!("level {} does not follow level {}", self.level, prev.level)));
        }
        let step = &self.ctx.steps[prev.level];
        let w = window(prev, step.span(), i);
        kernel::decompose(&self.ctx, step, &w, &self.nodes[i.min(self.nodes.len() - 1)], t_of(&self.ctx, i))
    }
}

fn t_of(ctx: &Context, i: usize) -> f64 {
    match ctx.scheme {
        Scheme::Steady => 0.0,
        _ => ctx.grid.t(i),
    }
}

fn window(state: &IterationState, span: usize, i: usize) -> Vec<Node> {
    let last = state.nodes.len() - 1;
    (0..=span).map(|m| state.nodes[i.saturating_sub(m).min(last)].clone()).collect()
}

fn node_count(ctx: &Context) -> usize {
    match ctx.scheme {
        Scheme::Steady => 1,
        _ => ctx.grid.nodes,
    }
}

/// Level 0 of the run described by `spec` (which also fixes how far it may be advanced).
pub fn init_state(spec: &RunSpec, inputs: &RunInputs) -> Result<IterationState, EngineError> {
    let ctx = Arc::new(Context::new(ContextSpec {
        scheme: spec.scheme,
        params: &spec.params,
        grid: spec.time_grid()?,
        levels: spec.levels,
        bridge: spec.bridge,
        profile: spec.profile,
        branch: &spec.branch,
        blend: spec.blend,
        theta0: &inputs.theta0,
        theta_t: &inputs.theta_t,
        xi: &inputs.xi,
        grid_cap: spec.grid_cap,
    })?);
    let mut nodes: Vec<Node> = Vec::with_capacity(node_count(&ctx));
    let mut last: Option<NodeKey> = None;
    for i in 0..node_count(&ctx) {
        let t = t_of(&ctx, i);
        let key = node_key(&ctx, 0, t, None);
        let node = match (&key, &last, nodes.last()) {
            (Some(k), Some(l), Some(prev)) if k == l => prev.clone(),
            _ => kernel::level0_node(&ctx, t)?,
        };
        last = key;
        nodes.push(node);
    }
    Ok(IterationState {
        level: 0,
        scheme: spec.scheme,
        branch: spec.branch.clone(),
        params: spec.params.clone(),
        nodes,
        ctx,
    })
}

/// `(f_{<=n+1}, q_{n+1})` from `(f_{<=n}, q_n)`; the sign choice comes from the run's signature.
pub fn advance(state: &IterationState) -> Result<IterationState, EngineError> {
    let ctx = &state.ctx;
    if state.level >= ctx.levels {
        return Err(EngineError::MissingLevel {
            requested: state.level + 1,
            available: ctx.levels,
        });
    }
    let step = &ctx.steps[state.level];
    let mut nodes: Vec<Node> = Vec::with_capacity(state.nodes.len());
    let mut last: Option<NodeKey> = None;
    for i in 0..node_count(ctx) {
        let t = t_of(ctx, i);
        let w = window(state, step.span(), i);
        let key = node_key(ctx, state.level + 1, t, Some(&w));
        let node = match (&key, &last, nodes.last()) {
            (Some(k), Some(l), Some(prev)) if k == l => prev.clone(),
            _ => kernel::advance_node(ctx, step, &w, t)?,
        };
        last = key;
        nodes.push(node);
    }
    Ok(IterationState {
        level: state.level + 1,
        scheme: state.scheme,
        branch: state.branch.clone(),
        params: state.params.clone(),
        nodes,
        ctx: ctx.clone(),
    })
}
