//! Solver outputs shared by every algorithm.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Largest step within an epoch fell below the tolerance.
    Converged,
    /// Epoch or update budget exhausted.
    MaxIters,
    /// Objective reached the caller's target value.
    TargetReached,
    /// Divergence guard fired or the objective became non-finite.
    Diverged,
}

/// One sampled point of a convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub wall_ms: f64,
    pub updates: u64,
    pub objective: f64,
    pub nnz: usize,
}

/// Whether a parallel run respected the spectral parallelism limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParallelismCheck {
    pub p: usize,
    pub rho: f64,
    pub pstar: usize,
    /// `2d/ρ + 1`, the duplicated-feature bound.
    pub thm3_bound: f64,
    /// `p < 2d/ρ + 1`.
    pub within_thm3_bound: bool,
    /// `p <= P*`.
    pub within_pstar: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub epochs: u64,
    /// Coordinate updates attempted (draws), including zero steps.
    pub updates: u64,
    /// Synchronous rounds (equal to `updates` for sequential solvers).
    pub rounds: u64,
    pub termination: Termination,
    pub trace: Vec<TraceRow>,
    /// Coordinates whose line search exhausted its backtracks.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flagged: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<ParallelismCheck>,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        matches!(
            self.termination,
            Termination::Converged | Termination::TargetReached
        )
    }

    pub fn nnz(&self) -> usize {
        crate::objective::nnz(&self.x)
    }
}

/// Trace recording helper: one row every `every` epochs plus explicit rows.
#[derive(Debug)]
pub(crate) struct TraceRecorder {
    start: std::time::Instant,
    every: u64,
    rows: Vec<TraceRow>,
}

impl TraceRecorder {
    pub fn new(every: u64) -> Self {
        Self {
            start: std::time::Instant::now(),
            every: every.max(1),
            rows: Vec::new(),
        }
    }

    pub fn epoch(&mut self, epoch: u64, updates: u64, objective: f64, nnz: usize) {
        if epoch.is_multiple_of(self.every) {
            self.push(updates, objective, nnz);
        }
    }

    pub fn push(&mut self, updates: u64, objective: f64, nnz: usize) {
        if self.rows.last().is_some_and(|r| r.updates == updates) {
            self.rows.pop();
        }
        self.rows.push(TraceRow {
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
            updates,
            objective,
            nnz,
        });
    }

    pub fn finish(self) -> Vec<TraceRow> {
        self.rows
    }
}
