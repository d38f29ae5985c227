//! Asynchronous Shotgun on shared atomics.
//!
//! Weights and predictions are stored as `f64` bit patterns in `AtomicU64`s.
//! Workers read without synchronization and commit through compare-and-swap
//! loops, so no update is lost even though reads may be stale. Worker 0
//! doubles as the monitor: once per epoch it snapshots the shared state,
//! records a trace row and decides whether to stop.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ParConfig;
use crate::objective::{
    dup_feature, dup_sign, nnz, relative_inf_distance, Problem, SolverState,
};
use crate::solver_seq::{cdn_step_with, fixed_step_delta_with, max_potential_step, Variant};
use crate::trace::{SolveResult, Termination, TraceRecorder};
use crate::Error;

const RELAXED: Ordering = Ordering::Relaxed;

/// One committed change `x_coord: prev -> prev + delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub worker: usize,
    pub coord: usize,
    pub prev: f64,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct AsyncRun {
    pub result: SolveResult,
    /// Every committed change, grouped by worker in commit order. Empty
    /// unless `record_commits` was set.
    pub commits: Vec<CommitRecord>,
    /// Relative ∞-distance between the shared predictions and a fresh `A x`.
    pub ax_drift: f64,
}

struct Shared {
    x: Vec<AtomicU64>,
    ax: Vec<AtomicU64>,
    tickets: AtomicU64,
    stop: AtomicBool,
    /// Bits of the largest |step| since the last checkpoint. Nonnegative
    /// floats order like their bit patterns.
    epoch_max: AtomicU64,
}

#[inline]
fn load(a: &AtomicU64) -> f64 {
    f64::from_bits(a.load(RELAXED))
}

#[inline]
fn atomic_add(a: &AtomicU64, v: f64) {
    let mut cur = a.load(RELAXED);
    loop {
        let new = (f64::from_bits(cur) + v).to_bits();
        match a.compare_exchange_weak(cur, new, Ordering::AcqRel, RELAXED) {
            Ok(_) => return,
            Err(actual) => cur = actual,
        }
    }
}

impl Shared {
    fn new(state: &SolverState) -> Self {
        let wrap = |v: &[f64]| v.iter().map(|a| AtomicU64::new(a.to_bits())).collect();
        Self {
            x: wrap(&state.x),
            ax: wrap(&state.ax),
            tickets: AtomicU64::new(0),
            stop: AtomicBool::new(false),
            epoch_max: AtomicU64::new(0),
        }
    }

    fn snapshot(&self) -> SolverState {
        SolverState {
            x: self.x.iter().map(load).collect(),
            ax: self.ax.iter().map(load).collect(),
            objective: None,
        }
    }

    /// CAS loop on `x_k`. `step` maps the current value to the signed change;
    /// it is re-evaluated whenever another worker got there first.
    fn commit(
        &self,
        problem: &Problem,
        k: usize,
        step: impl Fn(f64) -> f64,
    ) -> Option<(f64, f64)> {
        let cell = &self.x[k];
        let mut cur = cell.load(RELAXED);
        let (prev, delta) = loop {
            let prev = f64::from_bits(cur);
            let delta = step(prev);
            if delta == 0.0 {
                return None;
            }
            match cell.compare_exchange_weak(
                cur,
                (prev + delta).to_bits(),
                Ordering::AcqRel,
                RELAXED,
            ) {
                Ok(_) => break (prev, delta),
                Err(actual) => cur = actual,
            }
        };
        let (rows, vals) = problem.matrix().column(k);
        for (&i, &a) in rows.iter().zip(vals) {
            atomic_add(&self.ax[i], delta * a);
        }
        Some((prev, delta))
    }
}

struct Monitor<'p, 'a> {
    problem: &'p Problem<'a>,
    cfg: &'p ParConfig,
    epoch_len: u64,
    budget: u64,
    f0: f64,
    best: f64,
    epochs: u64,
    next_check: u64,
    trace: TraceRecorder,
    termination: Option<Termination>,
}

impl Monitor<'_, '_> {
    /// Runs the per-epoch bookkeeping if `done` updates cross an epoch boundary.
    fn check(&mut self, shared: &Shared, done: u64) {
        if self.termination.is_some() || done < self.next_check {
            return;
        }
        self.epochs = done / self.epoch_len;
        self.next_check = (self.epochs + 1) * self.epoch_len;
        let snap = shared.snapshot();
        let f = self.problem.objective(&snap.x, &snap.ax);
        let guarded = self.epochs.is_multiple_of(self.cfg.guard.check_every);
        if (guarded && self.cfg.guard.fires(f, self.f0, self.best)) || !f.is_finite() {
            self.stop(shared, Termination::Diverged);
            return;
        }
        self.best = self.best.min(f);
        self.trace.epoch(self.epochs, done, f, nnz(&snap.x));
        if self.cfg.target_objective.is_some_and(|t| f <= t) {
            self.stop(shared, Termination::TargetReached);
            return;
        }
        let max_step = f64::from_bits(shared.epoch_max.swap(0, RELAXED));
        if max_step < self.cfg.tol {
            let settled = match self.cfg.variant {
                Variant::Fixed => max_potential_step(self.problem, &snap) < self.cfg.tol,
                Variant::Cdn => true,
            };
            if settled {
                self.stop(shared, Termination::Converged);
                return;
            }
        }
        if self.epochs >= self.cfg.max_epochs || done >= self.budget {
            self.stop(shared, Termination::MaxIters);
        }
    }

    fn stop(&mut self, shared: &Shared, t: Termination) {
        self.termination = Some(t);
        shared.stop.store(true, RELAXED);
    }
}

fn worker(
    id: usize,
    problem: &Problem,
    cfg: &ParConfig,
    shared: &Shared,
    budget: u64,
    mut monitor: Option<&mut Monitor>,
) -> Vec<CommitRecord> {
    let d = problem.d();
    let scale = cfg.step_scale();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(id as u64);
    let mut log = Vec::new();
    let ax_at = |i: usize| load(&shared.ax[i]);
    while !shared.stop.load(RELAXED) {
        let t = shared.tickets.fetch_add(1, RELAXED);
        if t >= budget {
            break;
        }
        let (committed, proposed) = match cfg.variant {
            Variant::Fixed => {
                let j = rng.gen_range(0..2 * d);
                let (k, s) = (dup_feature(j, d), dup_sign(j, d));
                let delta = scale * fixed_step_delta_with(problem, load(&shared.x[k]), ax_at, j);
                // Clamp against the value actually being replaced so the
                // duplicated weight never goes negative.
                let committed = if delta == 0.0 {
                    None
                } else {
                    shared.commit(problem, k, |cur| s * delta.max(-(s * cur).max(0.0)))
                };
                (committed.map(|c| (k, c)), delta)
            }
            Variant::Cdn => {
                let k = rng.gen_range(0..d);
                let step = scale
                    * cdn_step_with(problem, load(&shared.x[k]), ax_at, k, &cfg.line_search).step;
                let committed = if step == 0.0 {
                    None
                } else {
                    shared.commit(problem, k, |_| step)
                };
                (committed.map(|c| (k, c)), step)
            }
        };
        shared.epoch_max.fetch_max(proposed.abs().to_bits(), RELAXED);
        if cfg.record_commits {
            if let Some((coord, (prev, delta))) = committed {
                log.push(CommitRecord {
                    worker: id,
                    coord,
                    prev,
                    delta,
                });
            }
        }
        if let Some(m) = monitor.as_deref_mut() {
            m.check(shared, (t + 1).min(budget));
        }
    }
    log
}

/// Runs asynchronous Shotgun with `cfg.p` workers from `state`.
///
/// Worker `w` draws coordinates from ChaCha8 stream `w` of `cfg.seed`, so a
/// single worker reproduces the sequential draw sequence. The run stops on
/// convergence, on divergence, on reaching the target objective, or after
/// `max_epochs` epochs worth of updates.
pub fn solve_shotgun_async(
    problem: &Problem,
    cfg: &ParConfig,
    state: SolverState,
) -> Result<AsyncRun, Error> {
    cfg.validate()?;
    let d = problem.d();
    if d == 0 {
        return Err(Error::EmptyMatrix);
    }
    if state.x.len() != d || state.ax.len() != problem.n() {
        return Err(Error::Config("warm-start state has the wrong shape".into()));
    }
    let epoch_len = cfg.epoch_len(d);
    let budget = cfg.max_epochs.saturating_mul(epoch_len);
    let f0 = problem.objective(&state.x, &state.ax);
    let mut trace = TraceRecorder::new(cfg.trace_every);
    trace.push(0, f0, nnz(&state.x));
    let shared = Shared::new(&state);
    let mut monitor = Monitor {
        problem,
        cfg,
        epoch_len,
        budget,
        f0,
        best: f0,
        epochs: 0,
        next_check: epoch_len,
        trace,
        termination: None,
    };
    if cfg.target_objective.is_some_and(|t| f0 <= t) {
        monitor.termination = Some(Termination::TargetReached);
        shared.stop.store(true, RELAXED);
    }
    if cfg.max_epochs == 0 {
        monitor.termination = Some(Termination::MaxIters);
        shared.stop.store(true, RELAXED);
    }

    let mut commits = std::thread::scope(|scope| {
        let handles: Vec<_> = (1..cfg.p)
            .map(|id| {
                let shared = &shared;
                scope.spawn(move || worker(id, problem, cfg, shared, budget, None))
            })
            .collect();
        let mut all = worker(0, problem, cfg, &shared, budget, Some(&mut monitor));
        for h in handles {
            all.extend(h.join().expect("worker panicked"));
        }
        all
    });
    commits.sort_by_key(|c| c.worker);

    let done = shared.tickets.load(RELAXED).min(budget);
    monitor.check(&shared, done);
    let termination = monitor.termination.unwrap_or(Termination::MaxIters);
    let snap = shared.snapshot();
    let fresh_ax = problem.matrix().matvec(&snap.x);
    let ax_drift = relative_inf_distance(&snap.ax, &fresh_ax);
    let objective = problem.objective(&snap.x, &fresh_ax);
    let mut trace = monitor.trace;
    if termination != Termination::Diverged && objective.is_finite() {
        trace.push(done, objective, nnz(&snap.x));
    }
    let p = cfg.p as u64;
    Ok(AsyncRun {
        result: SolveResult {
            x: snap.x,
            objective,
            epochs: done.div_ceil(epoch_len),
            updates: done,
            rounds: done.div_ceil(p),
            termination,
            trace: trace.finish(),
            flagged: Vec::new(),
            parallelism: None,
        },
        commits,
        ax_drift,
    })
}

/// Checks that `commits` explain the move from `initial` to `final_x`
/// exactly: for every coordinate there is an ordering of its commits in
/// which each one starts from the bit pattern the previous one produced and
/// the last one ends at `final_x`. Ties between commits with equal `prev`
/// are resolved by backtracking.
pub fn replay_commits(
    initial: &[f64],
    commits: &[CommitRecord],
    final_x: &[f64],
) -> Result<(), String> {
    if initial.len() != final_x.len() {
        return Err("initial and final weights differ in length".into());
    }
    let mut per_coord: HashMap<usize, Vec<(u64, u64)>> = HashMap::new();
    for c in commits {
        if c.coord >= initial.len() {
            return Err(format!("commit on out-of-range coordinate {}", c.coord));
        }
        per_coord
            .entry(c.coord)
            .or_default()
            .push((c.prev.to_bits(), (c.prev + c.delta).to_bits()));
    }
    for (k, (&x0, &x1)) in initial.iter().zip(final_x).enumerate() {
        let edges = per_coord.remove(&k).unwrap_or_default();
        if !chain_exists(x0.to_bits(), x1.to_bits(), &edges) {
            return Err(format!(
                "coordinate {k}: {} commits do not chain from {x0} to {x1}",
                edges.len()
            ));
        }
    }
    Ok(())
}

struct Frame {
    cur: u64,
    pos: usize,
    chosen: Option<usize>,
    tried: Vec<u64>,
}

impl Frame {
    fn at(cur: u64) -> Self {
        Self {
            cur,
            pos: 0,
            chosen: None,
            tried: Vec::new(),
        }
    }
}

/// Depth-first search for an Eulerian-style path using every edge once.
fn chain_exists(start: u64, end: u64, edges: &[(u64, u64)]) -> bool {
    let mut by_prev: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, &(p, _)) in edges.iter().enumerate() {
        by_prev.entry(p).or_default().push(i);
    }
    let mut used = vec![false; edges.len()];
    let mut budget = 10_000_000usize;
    let mut stack = vec![Frame::at(start)];
    loop {
        let depth = stack.len().wrapping_sub(1);
        let Some(frame) = stack.last_mut() else {
            return false;
        };
        if let Some(i) = frame.chosen.take() {
            used[i] = false;
        }
        if depth == edges.len() {
            if frame.cur == end {
                return true;
            }
            stack.pop();
            continue;
        }
        if budget == 0 {
            return false;
        }
        budget -= 1;
        let cands = by_prev.get(&frame.cur).map(Vec::as_slice).unwrap_or(&[]);
        let mut child = None;
        while frame.pos < cands.len() {
            let i = cands[frame.pos];
            frame.pos += 1;
            let next = edges[i].1;
            // Interchangeable commits lead to identical subtrees.
            if used[i] || frame.tried.contains(&next) {
                continue;
            }
            frame.tried.push(next);
            child = Some(i);
            break;
        }
        match child {
            Some(i) => {
                used[i] = true;
                frame.chosen = Some(i);
                stack.push(Frame::at(edges[i].1));
            }
            None => {
                stack.pop();
            }
        }
    }
}
