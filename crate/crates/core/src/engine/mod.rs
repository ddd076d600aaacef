//! The iteration: schedules, time mollification, cutoffs, amplitudes,
//! perturbations and error fields for the initial-value, terminal-value and
//! steady schemes.

mod kernel;
pub mod params;
mod run;
mod state;
mod stream;
pub mod time;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::noise::NoiseError;
use crate::spectral::SpectralError;

pub use kernel::{
    amplitude, amplitude_grid, amplitude_pair, bilinear, box_f, box_q, modulate, nonlinear, support_range, AmplitudePair, AmplitudeSpec,
    ErrorPieces, Node, NodeInfo, PositivityFailure,
};
pub use params::{validate_params, BoundCheck, ParamError, ParamSchedule, ScheduleMode, ValidationReport};
pub use run::{
    plateau_start, run, run_with, DiagOptions, Discard, DiagRecord, LevelSummary, NodeSink, Retention, RetainedNode, RunInputs, RunOutput, RunSpec, DEFAULT_GRID_CAP,
};
pub use state::{advance, init_state, mollify_time, IterationState, Trajectory};
pub use stream::Engine;
pub use time::{cutoff_chi, cutoff_chi_tilde, Blend, CutoffBridge, CutoffValue, Cutoffs, Mollifier, TimeGrid};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("time grid: {0}")]
    Grid(String),
    #[error("schedule provides {available} levels, {requested} requested")]
    MissingLevel { requested: usize, available: usize },
    #[error("wave vector 5 lambda_{level} l_j is not integer (lambda = {lambda})")]
    NonIntegerWave { level: usize, lambda: f64 },
    #[error("level {level} needs a {needed}^2 grid, above the cap {cap}^2")]
    GridOverflow { level: usize, needed: usize, cap: usize },
    #[error(
        "amplitude positivity fails at level {level}, t = {t}: min of C0 + R^o_{j} q_l / chi~ is {min:.6e} at x = ({x1:.4}, {x2:.4}), floor {floor:e}"
    )]
    Positivity {
        level: usize,
        j: u8,
        t: f64,
        min: f64,
        x1: f64,
        x2: f64,
        floor: f64,
    },
    #[error("data: {0}")]
    Data(String),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

/// Which construction is run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scheme {
    Ivp,
    /// Prescribed value at the horizon of the time grid.
    Terminal,
    Steady,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ivp => "ivp",
            Scheme::Terminal => "terminal",
            Scheme::Steady => "steady",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ivp" => Ok(Scheme::Ivp),
            "terminal" => Ok(Scheme::Terminal),
            "steady" => Ok(Scheme::Steady),
            other => Err(format!("unknown scheme '{other}' (expected ivp, terminal or steady)")),
        }
    }
}

/// `sigma: n -> {1, 2}`; `sigma(n) = 1` flips the sign of `a_{1,n}`. Unlisted levels are 2.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BranchSignature {
    prefix: Vec<u8>,
}

impl BranchSignature {
    pub fn none() -> Self {
        Self::default()
    }

    /// Signature `sigma(1), sigma(2), ...` from a list of values in `{1, 2}`.
    pub fn from_prefix(prefix: Vec<u8>) -> Result<Self, String> {
        if let Some(v) = prefix.iter().find(|v| **v != 1 && **v != 2) {
            return Err(format!("signature values must be 1 or 2, got {v}"));
        }
        Ok(BranchSignature { prefix })
    }

    /// Flip exactly at `level`.
    pub fn flip_at(level: usize) -> Self {
        assert!(level >= 1, "levels start at 1");
        let mut prefix = vec![2; level];
        prefix[level - 1] = 1;
        BranchSignature { prefix }
    }

    pub fn sigma(&self, level: usize) -> u8 {
        if level == 0 {
            return 2;
        }
        self.prefix.get(level - 1).copied().unwrap_or(2)
    }

    pub fn flips(&self, level: usize) -> bool {
        self.sigma(level) == 1
    }

    /// First level where two signatures differ.
    pub fn first_difference(&self, other: &Self) -> Option<usize> {
        let n = self.prefix.len().max(other.prefix.len());
        (1..=n).find(|&l| self.sigma(l) != other.sigma(l))
    }

    pub fn prefix(&self) -> &[u8] {
        &self.prefix
    }
}

impl fmt::Display for BranchSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.prefix.iter().map(|v| v.to_string()).collect();
        f.write_str(&s.join(","))
    }
}
