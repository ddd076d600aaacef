//! Lazy level-by-level evaluation with per-level caches.
//!
//! A level-`(n+1)` node at index `i` depends on the level-`n` nodes `i - m`,
//! `m = 0..=span` (clamped at 0). Nodes are computed on demand, kept while
//! they can still enter a window, and reused verbatim when two consecutive
//! requests see the same window and the same cutoff and blend values.

use std::collections::BTreeMap;

use super::kernel::{self, node_key, Context, ContextSpec, ErrorPieces, Node, NodeKey};
use super::params::ParamSchedule;
use super::run::{RunInputs, RunSpec};
use super::time::TimeGrid;
use super::{EngineError, Scheme};
use crate::spectral::SpectralField;

#[derive(Default)]
struct LevelCache {
    nodes: BTreeMap<usize, Node>,
    /// Last computed node, its key and the window head it was built from (kept
    /// alive so that the pointers in the key stay unique).
    last: Option<(NodeKey, Node, Option<Node>)>,
    computed: usize,
    reused: usize,
}

/// Streaming evaluator of all levels of one run.
pub struct Engine {
    ctx: Context,
    caches: Vec<LevelCache>,
}

impl Engine {
    pub fn new(spec: &RunSpec, inputs: &RunInputs) -> Result<Self, EngineError> {
        let grid = spec.time_grid()?;
        let ctx = Context::new(ContextSpec {
            scheme: spec.scheme,
            params: &spec.params,
            grid,
            levels: spec.levels,
            bridge: spec.bridge,
            profile: spec.profile,
            branch: &spec.branch,
            blend: spec.blend,
            theta0: &inputs.theta0,
            theta_t: &inputs.theta_t,
            xi: &inputs.xi,
            grid_cap: spec.grid_cap,
        })?;
        let caches = (0..=spec.levels).map(|_| LevelCache::default()).collect();
        Ok(Engine { ctx, caches })
    }

    pub fn levels(&self) -> usize {
        self.ctx.levels
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.ctx.grid
    }

    pub fn params(&self) -> &ParamSchedule {
        &self.ctx.params
    }

    pub fn scheme(&self) -> Scheme {
        self.ctx.scheme
    }

    /// Number of node indices: 1 for the steady scheme.
    pub fn node_count(&self) -> usize {
        match self.ctx.scheme {
            Scheme::Steady => 1,
            _ => self.ctx.grid.nodes,
        }
    }

    pub fn t(&self, i: usize) -> f64 {
        match self.ctx.scheme {
            Scheme::Steady => 0.0,
            _ => self.ctx.grid.t(i),
        }
    }

    /// Mollifier span (in nodes) of the step into `level`.
    pub fn span(&self, level: usize) -> usize {
        assert!(level >= 1);
        self.ctx.steps[level - 1].span()
    }

    /// Cutoff breakpoints of the step into `level`.
    pub fn breakpoints(&self, level: usize) -> Vec<f64> {
        assert!(level >= 1);
        match self.ctx.scheme {
            Scheme::Steady => Vec::new(),
            _ => self.ctx.steps[level - 1].cut.breakpoints(),
        }
    }

    /// `(computed, reused)` node counts per level.
    pub fn counts(&self) -> Vec<(usize, usize)> {
        self.caches.iter().map(|c| (c.computed, c.reused)).collect()
    }

    /// Radii of the nonzero modes of `f^in_{level}`.
    pub fn fin_range(&self, level: usize) -> Option<(f64, f64)> {
        self.ctx.steps[level - 1].fin_range
    }

    /// Level-`level - 1` nodes entering the level-`level` node `i`, newest first.
    pub fn window(&mut self, level: usize, i: usize) -> Result<Vec<Node>, EngineError> {
        assert!(level >= 1 && level <= self.ctx.levels);
        let span = self.ctx.steps[level - 1].span();
        let lo = i.saturating_sub(span);
        // ascending order keeps cache eviction monotone
        let mut asc = Vec::with_capacity(i - lo + 1);
        for j in lo..=i {
            asc.push(self.node(level - 1, j)?);
        }
        let head = asc[0].clone();
        let mut w: Vec<Node> = (0..=span).map(|m| if m <= i { asc[i - m - lo].clone() } else { head.clone() }).collect();
        w.shrink_to_fit();
        Ok(w)
    }

    /// Node `i` of `level`.
    pub fn node(&mut self, level: usize, i: usize) -> Result<Node, EngineError> {
        assert!(level <= self.ctx.levels, "level {level} beyond the run");
        assert!(i < self.node_count(), "node index {i} beyond the grid");
        if let Some(n) = self.caches[level].nodes.get(&i) {
            return Ok(n.clone());
        }
        let t = self.t(i);
        let (window, key) = if level == 0 {
            (None, node_key(&self.ctx, 0, t, None))
        } else {
            let w = self.window(level, i)?;
            let k = node_key(&self.ctx, level, t, Some(&w));
            (Some(w), k)
        };
        let cached = match (&key, &self.caches[level].last) {
            (Some(k), Some((lk, node, _))) if k == lk => Some(node.clone()),
            _ => None,
        };
        let node = match cached {
            Some(n) => {
                self.caches[level].reused += 1;
                n
            }
            None => {
                let n = match &window {
                    None => kernel::level0_node(&self.ctx, t)?,
                    Some(w) => kernel::advance_node(&self.ctx, &self.ctx.steps[level - 1], w, t)?,
                };
                self.caches[level].computed += 1;
                if let Some(k) = key {
                    let head = window.as_ref().map(|w| w[0].clone());
                    self.caches[level].last = Some((k, n.clone(), head));
                }
                n
            }
        };
        let keep = if level < self.ctx.levels { self.ctx.steps[level].span() } else { 0 };
        let cache = &mut self.caches[level];
        cache.nodes.insert(i, node.clone());
        let cut = i.saturating_sub(keep);
        cache.nodes = cache.nodes.split_off(&cut);
        Ok(node)
    }

    /// Error decomposition of the level-`level` node `i` (`level >= 1`).
    pub fn decompose(&mut self, level: usize, i: usize) -> Result<ErrorPieces, EngineError> {
        assert!(level >= 1);
        let node = self.node(level, i)?;
        let w = self.window(level, i)?;
        kernel::decompose(&self.ctx, &self.ctx.steps[level - 1], &w, &node, self.t(i))
    }

    /// `f~_{level}` at node `i`, before the cutoff `chi` is applied.
    pub fn perturbation(&mut self, level: usize, i: usize) -> Result<SpectralField, EngineError> {
        assert!(level >= 1);
        let w = self.window(level, i)?;
        let b = kernel::build(&self.ctx, &self.ctx.steps[level - 1], &w, self.t(i))?;
        Ok(b.ftilde)
    }

    /// Drops every cached node.
    pub fn clear(&mut self) {
        for c in &mut self.caches {
            c.nodes.clear();
            c.last = None;
        }
    }
}
