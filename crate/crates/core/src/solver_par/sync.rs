//! Exact synchronous simulation of Shotgun rounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ParConfig;
use crate::objective::{dup_feature, dup_sign, dup_weight, nnz, Problem, SolverState};
use crate::solver_seq::{cdn_step, fixed_step_delta, max_potential_step, Variant};
use crate::trace::{SolveResult, Termination, TraceRecorder};
use crate::Error;

/// The multiset of coordinates drawn in one round and their proposed steps.
///
/// For the fixed step `picks` are duplicated indices in `[0, 2d)` and
/// `deltas` are duplicated-space steps; for CDN `picks` are signed features
/// and `deltas` signed steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundUpdate {
    pub variant: Variant,
    pub picks: Vec<usize>,
    pub deltas: Vec<f64>,
}

impl RoundUpdate {
    /// Duplicated-space collective update `(Δx̂)_j = Σ_{picks = j} δ`, length `2d`.
    pub fn collective(&self, d: usize) -> Vec<f64> {
        assert_eq!(self.variant, Variant::Fixed, "collective() is defined for fixed steps");
        let mut out = vec![0.0; 2 * d];
        for (&j, &delta) in self.picks.iter().zip(&self.deltas) {
            out[j] += delta;
        }
        out
    }

    pub fn max_abs_delta(&self) -> f64 {
        self.deltas.iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// Draws `p` coordinates i.i.d. uniformly and computes every step from the
/// same (pre-round) state. Nothing is applied.
pub fn propose_round(
    problem: &Problem,
    state: &SolverState,
    cfg: &ParConfig,
    rng: &mut impl Rng,
) -> RoundUpdate {
    let d = problem.d();
    let scale = cfg.step_scale();
    let (picks, deltas): (Vec<usize>, Vec<f64>) = match cfg.variant {
        Variant::Fixed => (0..cfg.p)
            .map(|_| {
                let j = rng.gen_range(0..2 * d);
                let delta = fixed_step_delta(problem, &state.x, &state.ax, j);
                (j, scale * delta)
            })
            .unzip(),
        Variant::Cdn => (0..cfg.p)
            .map(|_| {
                let k = rng.gen_range(0..d);
                let s = cdn_step(problem, &state.x, &state.ax, k, &cfg.line_search);
                (k, scale * s.step)
            })
            .unzip(),
    };
    RoundUpdate {
        variant: cfg.variant,
        picks,
        deltas,
    }
}

/// Applies a round's collective update.
///
/// Steps on the same duplicated coordinate are summed; the sum is then
/// clamped so the duplicated weight stays nonnegative, and the result is
/// folded into the signed weights. `ax` is updated once per touched feature.
pub fn apply_round(problem: &Problem, state: &mut SolverState, round: &RoundUpdate) {
    let d = problem.d();
    let mut order: Vec<usize> = (0..round.picks.len()).collect();
    order.sort_by_key(|&i| round.picks[i]);
    // (feature, signed step), grouped by pick
    let mut steps: Vec<(usize, f64)> = Vec::with_capacity(order.len());
    let mut i = 0;
    while i < order.len() {
        let j = round.picks[order[i]];
        let mut sum = 0.0;
        while i < order.len() && round.picks[order[i]] == j {
            sum += round.deltas[order[i]];
            i += 1;
        }
        let (k, signed) = match round.variant {
            Variant::Fixed => {
                let current = dup_weight(&state.x, j);
                if current + sum < 0.0 {
                    sum = -current;
                }
                (dup_feature(j, d), dup_sign(j, d) * sum)
            }
            Variant::Cdn => (j, sum),
        };
        match steps.last_mut() {
            Some((last, acc)) if *last == k => *acc += signed,
            _ => steps.push((k, signed)),
        }
    }
    // Positive and negative copies of a feature sort apart; merge them.
    steps.sort_by_key(|&(k, _)| k);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(steps.len());
    for (k, s) in steps {
        match merged.last_mut() {
            Some((last, acc)) if *last == k => *acc += s,
            _ => merged.push((k, 0.0 + s)),
        }
    }
    for (k, s) in merged {
        state.apply(problem, k, s);
    }
}

/// One synchronous Shotgun round: propose from the current state, then apply.
pub fn shotgun_round_sync(
    problem: &Problem,
    state: &mut SolverState,
    cfg: &ParConfig,
    rng: &mut impl Rng,
) -> RoundUpdate {
    let round = propose_round(problem, state, cfg, rng);
    apply_round(problem, state, &round);
    round
}

pub(super) fn solve_sync(
    problem: &Problem,
    cfg: &ParConfig,
    mut state: SolverState,
) -> Result<SolveResult, Error> {
    cfg.validate()?;
    let d = problem.d();
    if d == 0 {
        return Err(Error::EmptyMatrix);
    }
    if state.x.len() != d || state.ax.len() != problem.n() {
        return Err(Error::Config("warm-start state has the wrong shape".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = TraceRecorder::new(cfg.trace_every);
    let f0 = state.refresh_objective(problem);
    trace.push(0, f0, nnz(&state.x));
    let mut best = f0;
    let epoch_len = cfg.epoch_len(d);
    let rounds_per_epoch = epoch_len.div_ceil(cfg.p as u64);
    let (mut rounds, mut epochs) = (0u64, 0u64);

    let termination = 'outer: {
        if cfg.target_objective.is_some_and(|t| f0 <= t) {
            break 'outer Termination::TargetReached;
        }
        while epochs < cfg.max_epochs {
            let mut max_step = 0.0f64;
            for _ in 0..rounds_per_epoch {
                let round = shotgun_round_sync(problem, &mut state, cfg, &mut rng);
                rounds += 1;
                max_step = max_step.max(round.max_abs_delta());
                if let Some(target) = cfg.target_objective {
                    if problem.objective(&state.x, &state.ax) <= target {
                        epochs += 1;
                        break 'outer Termination::TargetReached;
                    }
                }
            }
            epochs += 1;
            let f = state.refresh_objective(problem);
            let updates = rounds * cfg.p as u64;
            if epochs % cfg.guard.check_every == 0 && cfg.guard.fires(f, f0, best) {
                break 'outer Termination::Diverged;
            }
            if !f.is_finite() {
                break 'outer Termination::Diverged;
            }
            best = best.min(f);
            trace.epoch(epochs, updates, f, nnz(&state.x));
            if max_step < cfg.tol {
                let settled = match cfg.variant {
                    Variant::Fixed => max_potential_step(problem, &state) < cfg.tol,
                    Variant::Cdn => true,
                };
                if settled {
                    break 'outer Termination::Converged;
                }
            }
        }
        Termination::MaxIters
    };

    let updates = rounds * cfg.p as u64;
    let objective = state.refresh_objective(problem);
    if termination != Termination::Diverged {
        trace.push(updates, objective, nnz(&state.x));
    }
    Ok(SolveResult {
        x: state.x,
        objective,
        epochs,
        updates,
        rounds,
        termination,
        trace: trace.finish(),
        flagged: Vec::new(),
        parallelism: None,
    })
}
