//! Shotgun: `P` coordinate updates per round.
//!
//! [`Mode::Sync`] is an exact simulator of the synchronous algorithm: every
//! update in a round is computed from the same state and the collective
//! update is applied at the end of the round. [`Mode::Async`] runs `P`
//! worker threads that read possibly-stale shared state and commit with
//! atomic read-modify-write operations, never locking.

mod asynchronous;
mod sync;
pub mod theory;

use serde::{Deserialize, Serialize};

use crate::objective::{Problem, SolverState};
use crate::solver_seq::{LineSearch, Variant};
use crate::spectral::SpectralEstimate;
use crate::trace::SolveResult;
use crate::Error;

pub use asynchronous::{replay_commits, solve_shotgun_async, AsyncRun, CommitRecord};
pub use sync::{apply_round, propose_round, shotgun_round_sync, RoundUpdate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Sync,
    Async,
}

/// Aborts runs whose objective blows up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceGuard {
    /// Check every this many epochs.
    pub check_every: u64,
    /// Fire when `F > blowup * max(F(x⁰), best F so far)`.
    pub blowup: f64,
}

impl Default for DivergenceGuard {
    fn default() -> Self {
        Self {
            check_every: 1,
            blowup: 10.0,
        }
    }
}

impl DivergenceGuard {
    pub(crate) fn fires(&self, f: f64, f0: f64, best: f64) -> bool {
        !f.is_finite() || f > self.blowup * f0.max(best)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParConfig {
    /// Parallel updates per round (or worker threads in async mode).
    pub p: usize,
    pub mode: Mode,
    pub seed: u64,
    pub tol: f64,
    pub max_epochs: u64,
    pub variant: Variant,
    pub line_search: LineSearch,
    pub guard: DivergenceGuard,
    /// Scale every step by `1/P`. Experimental; no convergence claims.
    pub damping: bool,
    pub trace_every: u64,
    pub target_objective: Option<f64>,
    /// Async only: keep a log of every committed weight change.
    pub record_commits: bool,
}

impl Default for ParConfig {
    fn default() -> Self {
        Self {
            p: 1,
            mode: Mode::Sync,
            seed: 0,
            tol: 1e-5,
            max_epochs: 10_000,
            variant: Variant::Fixed,
            line_search: LineSearch::default(),
            guard: DivergenceGuard::default(),
            damping: false,
            trace_every: 1,
            target_objective: None,
            record_commits: false,
        }
    }
}

impl ParConfig {
    pub(crate) fn validate(&self) -> Result<(), Error> {
        if self.p == 0 {
            return Err(Error::Config("p must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.guard.blowup > 1.0) {
            return Err(Error::Config(format!(
                "blow-up factor must be > 1, got {}",
                self.guard.blowup
            )));
        }
        if self.guard.check_every == 0 {
            return Err(Error::Config("guard check period must be >= 1".into()));
        }
        self.line_search.validate()
    }

    /// Coordinate draws per epoch: `2d` duplicated coordinates for the fixed
    /// step, `d` signed coordinates for CDN.
    pub fn epoch_len(&self, d: usize) -> u64 {
        match self.variant {
            Variant::Fixed => 2 * d as u64,
            Variant::Cdn => d as u64,
        }
    }

    pub(crate) fn step_scale(&self) -> f64 {
        if self.damping {
            1.0 / self.p as f64
        } else {
            1.0
        }
    }
}

/// Runs Shotgun from `x = 0`.
pub fn solve_shotgun(problem: &Problem, cfg: &ParConfig) -> Result<SolveResult, Error> {
    solve_shotgun_from(problem, cfg, SolverState::zeros(problem), None)
}

/// Runs Shotgun from a warm start. When a spectral estimate is supplied the
/// result records whether `p` respects the predicted parallelism limits.
pub fn solve_shotgun_from(
    problem: &Problem,
    cfg: &ParConfig,
    state: SolverState,
    spectral: Option<&SpectralEstimate>,
) -> Result<SolveResult, Error> {
    let mut result = match cfg.mode {
        Mode::Sync => sync::solve_sync(problem, cfg, state)?,
        Mode::Async => solve_shotgun_async(problem, cfg, state)?.result,
    };
    result.parallelism = spectral.map(|s| s.check(cfg.p));
    Ok(result)
}
