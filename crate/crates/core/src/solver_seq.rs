//! Sequential stochastic coordinate descent.
//!
//! Two variants share the driver loop:
//!
//! * **fixed-step** (Shooting): draw a duplicated coordinate `j` uniformly
//!   from `{0, …, 2d-1}` and move it by `max{-x̂_j, -(∇F)_j / β}`;
//! * **CDN**: draw a signed coordinate, take the L1-regularized Newton step of
//!   its one-dimensional quadratic model and backtrack until an Armijo
//!   condition on the true objective holds. CDN keeps an active set of
//!   coordinates that are allowed to move.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::objective::{
    dup_feature, dup_sign, nnz, Loss, Problem, SolverState,
};
use crate::trace::{SolveResult, Termination, TraceRecorder};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Fixed,
    Cdn,
}

/// Backtracking parameters for CDN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearch {
    /// Step multiplier per backtrack, in `(0, 1)`.
    pub shrink: f64,
    /// Armijo constant, in `(0, 1)`.
    pub sufficient_decrease: f64,
    pub max_backtracks: u32,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            shrink: 0.5,
            sufficient_decrease: 0.01,
            max_backtracks: 30,
        }
    }
}

impl LineSearch {
    pub(crate) fn validate(&self) -> Result<(), Error> {
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Config(format!(
                "line-search shrink must be in (0, 1), got {}",
                self.shrink
            )));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return Err(Error::Config(format!(
                "sufficient-decrease constant must be in (0, 1), got {}",
                self.sufficient_decrease
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqConfig {
    /// Convergence threshold on the largest step within an epoch.
    pub tol: f64,
    pub max_epochs: u64,
    pub seed: u64,
    pub variant: Variant,
    pub line_search: LineSearch,
    /// Record a trace row every this many epochs.
    pub trace_every: u64,
    /// Stop as soon as the objective is at or below this value.
    pub target_objective: Option<f64>,
}

impl Default for SeqConfig {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_epochs: 10_000,
            seed: 0,
            variant: Variant::Fixed,
            line_search: LineSearch::default(),
            trace_every: 1,
            target_objective: None,
        }
    }
}

impl SeqConfig {
    pub(crate) fn validate(&self) -> Result<(), Error> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        self.line_search.validate()
    }
}

/// Fixed step for a nonnegative duplicated weight: `max{-x̂_j, -g_j / β}`.
#[inline]
pub fn shooting_delta(xj: f64, gj: f64, beta: f64) -> f64 {
    (-xj).max(-gj / beta)
}

/// Signed change of `x_k` produced by moving duplicated weight `j` by `delta`.
#[inline]
pub(crate) fn fold(j: usize, d: usize, delta: f64) -> (usize, f64) {
    (dup_feature(j, d), dup_sign(j, d) * delta)
}

/// Fixed-step proposal for duplicated coordinate `j` at the current state.
#[inline]
pub(crate) fn fixed_step_delta(problem: &Problem, x: &[f64], ax: &[f64], j: usize) -> f64 {
    fixed_step_delta_with(problem, x[dup_feature(j, problem.d())], |i| ax[i], j)
}

/// Same as [`fixed_step_delta`] given the signed weight `xk` behind `j`.
#[inline]
pub(crate) fn fixed_step_delta_with(
    problem: &Problem,
    xk: f64,
    ax_at: impl Fn(usize) -> f64,
    j: usize,
) -> f64 {
    let d = problem.d();
    let s = dup_sign(j, d);
    let g = s * problem.smooth_partial_with(ax_at, dup_feature(j, d)) + problem.lambda();
    shooting_delta((s * xk).max(0.0), g, problem.beta())
}

/// One Shooting update of duplicated coordinate `j`; returns the applied δ.
///
/// The step is computed in duplicated space and folded into the signed
/// weight, `x_k += s_j δ`, with the matching `O(nnz(a_k))` update of `ax`.
pub fn scd_update(problem: &Problem, state: &mut SolverState, j: usize) -> f64 {
    let delta = fixed_step_delta(problem, &state.x, &state.ax, j);
    let (k, step) = fold(j, problem.d(), delta);
    state.apply(problem, k, step);
    delta
}

/// Largest fixed step any duplicated coordinate would take from `state`.
pub fn max_potential_step(problem: &Problem, state: &SolverState) -> f64 {
    let d = problem.d();
    let (lam, beta) = (problem.lambda(), problem.beta());
    (0..d)
        .map(|k| {
            let g = problem.smooth_partial(&state.ax, k);
            let pos = shooting_delta(state.x[k].max(0.0), g + lam, beta);
            let neg = shooting_delta((-state.x[k]).max(0.0), -g + lam, beta);
            pos.abs().max(neg.abs())
        })
        .fold(0.0, f64::max)
}

/// Outcome of a CDN coordinate step, computed without applying it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdnStep {
    /// Accepted signed step (zero if none).
    pub step: f64,
    /// Newton direction before backtracking.
    pub direction: f64,
    /// Smooth partial derivative at the starting point.
    pub gradient: f64,
    pub backtracks: u32,
    /// Backtracking budget exhausted; the step was discarded.
    pub exhausted: bool,
}

/// Change in `F` from moving `x_k` by `t`, touching only the support of `a_k`.
#[inline]
fn coordinate_change_with(
    problem: &Problem,
    xk: f64,
    ax_at: impl Fn(usize) -> f64,
    k: usize,
    t: f64,
) -> f64 {
    let (rows, vals) = problem.matrix().column(k);
    let y = problem.y();
    let loss = problem.loss();
    let smooth: f64 = rows
        .iter()
        .zip(vals)
        .map(|(&i, &a)| loss.value_change(ax_at(i), t * a, y[i]))
        .sum();
    smooth + problem.lambda() * abs_change(xk, t)
}

/// `|x + t| - |x|`, exact when the sign does not flip.
#[inline]
fn abs_change(x: f64, t: f64) -> f64 {
    let moved = x + t;
    if x > 0.0 && moved >= 0.0 {
        t
    } else if x < 0.0 && moved <= 0.0 {
        -t
    } else {
        moved.abs() - x.abs()
    }
}

/// Minimizer of `g d + ½ h d² + λ |x + d|` over `d`.
#[inline]
pub fn newton_direction(xk: f64, g: f64, h: f64, lambda: f64) -> f64 {
    if g + lambda <= h * xk {
        -(g + lambda) / h
    } else if g - lambda >= h * xk {
        -(g - lambda) / h
    } else {
        -xk
    }
}

/// CDN step for signed coordinate `k` at `(x, ax)`.
pub fn cdn_step(problem: &Problem, x: &[f64], ax: &[f64], k: usize, ls: &LineSearch) -> CdnStep {
    cdn_step_with(problem, x[k], |i| ax[i], k, ls)
}

/// [`cdn_step`] given `x_k` and an accessor for the predictions.
pub(crate) fn cdn_step_with(
    problem: &Problem,
    xk: f64,
    ax_at: impl Fn(usize) -> f64 + Copy,
    k: usize,
    ls: &LineSearch,
) -> CdnStep {
    let g = problem.smooth_partial_with(ax_at, k);
    let h = match problem.loss() {
        // Columns are unit norm, so the quadratic model is exact.
        Loss::Squared => 1.0,
        Loss::Logistic => problem.smooth_curvature_with(ax_at, k).max(1e-12),
    };
    let lam = problem.lambda();
    let dir = newton_direction(xk, g, h, lam);
    let mut out = CdnStep {
        step: 0.0,
        direction: dir,
        gradient: g,
        backtracks: 0,
        exhausted: false,
    };
    if dir == 0.0 {
        return out;
    }
    if problem.loss() == Loss::Squared {
        // The model is the exact one-dimensional objective, so the full
        // step always passes the sufficient-decrease test.
        out.step = dir;
        return out;
    }
    let decrease = g * dir + lam * abs_change(xk, dir);
    let mut t = 1.0;
    loop {
        let change = coordinate_change_with(problem, xk, ax_at, k, t * dir);
        if change <= ls.sufficient_decrease * t * decrease {
            out.step = t * dir;
            return out;
        }
        if out.backtracks == ls.max_backtracks {
            out.exhausted = true;
            return out;
        }
        out.backtracks += 1;
        t *= ls.shrink;
    }
}

/// Applies one CDN step to signed coordinate `k`; returns the accepted step.
pub fn cdn_update(problem: &Problem, state: &mut SolverState, k: usize, cfg: &SeqConfig) -> f64 {
    let s = cdn_step(problem, &state.x, &state.ax, k, &cfg.line_search);
    state.apply(problem, k, s.step);
    s.step
}

/// Runs Shooting (or CDN) from `x = 0`.
pub fn solve_sequential(problem: &Problem, cfg: &SeqConfig) -> Result<SolveResult, Error> {
    solve_sequential_from(problem, cfg, SolverState::zeros(problem))
}

/// Runs Shooting (or CDN) from a warm start.
pub fn solve_sequential_from(
    problem: &Problem,
    cfg: &SeqConfig,
    mut state: SolverState,
) -> Result<SolveResult, Error> {
    cfg.validate()?;
    if problem.d() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if state.x.len() != problem.d() || state.ax.len() != problem.n() {
        return Err(Error::Config("warm-start state has the wrong shape".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = TraceRecorder::new(cfg.trace_every);
    let f0 = state.refresh_objective(problem);
    trace.push(0, f0, nnz(&state.x));
    let mut run = SeqRun {
        problem,
        cfg,
        state,
        updates: 0,
        epochs: 0,
        flagged: Vec::new(),
    };
    let termination = if cfg.target_objective.is_some_and(|t| f0 <= t) {
        Termination::TargetReached
    } else {
        match cfg.variant {
            Variant::Fixed => run.fixed(&mut rng, &mut trace),
            Variant::Cdn => run.cdn(&mut rng, &mut trace),
        }
    };
    let objective = run.state.refresh_objective(problem);
    trace.push(run.updates, objective, nnz(&run.state.x));
    run.flagged.sort_unstable();
    run.flagged.dedup();
    Ok(SolveResult {
        objective,
        epochs: run.epochs,
        updates: run.updates,
        rounds: run.updates,
        termination,
        trace: trace.finish(),
        flagged: run.flagged,
        parallelism: None,
        x: run.state.x,
    })
}

struct SeqRun<'p, 'a> {
    problem: &'p Problem<'a>,
    cfg: &'p SeqConfig,
    state: SolverState,
    updates: u64,
    epochs: u64,
    flagged: Vec<usize>,
}

impl SeqRun<'_, '_> {
    fn target_hit(&self) -> bool {
        self.cfg
            .target_objective
            .is_some_and(|t| self.problem.objective(&self.state.x, &self.state.ax) <= t)
    }

    /// Records the epoch and reports a non-finite objective.
    fn end_epoch(&mut self, trace: &mut TraceRecorder) -> Option<Termination> {
        self.epochs += 1;
        let f = self.state.refresh_objective(self.problem);
        trace.epoch(self.epochs, self.updates, f, nnz(&self.state.x));
        (!f.is_finite()).then_some(Termination::Diverged)
    }

    fn fixed(&mut self, rng: &mut ChaCha8Rng, trace: &mut TraceRecorder) -> Termination {
        let two_d = 2 * self.problem.d();
        while self.epochs < self.cfg.max_epochs {
            let mut max_step = 0.0f64;
            for _ in 0..two_d {
                let j = rng.gen_range(0..two_d);
                let delta = scd_update(self.problem, &mut self.state, j);
                self.updates += 1;
                max_step = max_step.max(delta.abs());
                if self.target_hit() {
                    self.epochs += 1;
                    return Termination::TargetReached;
                }
            }
            if let Some(t) = self.end_epoch(trace) {
                return t;
            }
            if max_step < self.cfg.tol
                && max_potential_step(self.problem, &self.state) < self.cfg.tol
            {
                return Termination::Converged;
            }
        }
        Termination::MaxIters
    }

    fn cdn(&mut self, rng: &mut ChaCha8Rng, trace: &mut TraceRecorder) -> Termination {
        let d = self.problem.d();
        let lam = self.problem.lambda();
        let shrink_at = 2.0 * self.cfg.tol;
        let mut active: Vec<usize> = (0..d).collect();
        let mut full_pass = false;
        while self.epochs < self.cfg.max_epochs {
            let mut max_step = 0.0f64;
            let mut suspended = vec![false; d];
            let draws: Vec<usize> = if full_pass {
                let mut all: Vec<usize> = (0..d).collect();
                all.shuffle(rng);
                all
            } else {
                (0..active.len())
                    .map(|_| active[rng.gen_range(0..active.len())])
                    .collect()
            };
            for k in draws {
                let s = cdn_step(
                    self.problem,
                    &self.state.x,
                    &self.state.ax,
                    k,
                    &self.cfg.line_search,
                );
                if s.exhausted {
                    self.flagged.push(k);
                }
                self.state.apply(self.problem, k, s.step);
                self.updates += 1;
                max_step = max_step.max(s.step.abs());
                suspended[k] = s.step == 0.0
                    && self.state.x[k] == 0.0
                    && lam - s.gradient.abs() > shrink_at;
                if self.target_hit() {
                    self.epochs += 1;
                    return Termination::TargetReached;
                }
            }
            if let Some(t) = self.end_epoch(trace) {
                return t;
            }
            let small = max_step < self.cfg.tol;
            if full_pass && small {
                return Termination::Converged;
            }
            if full_pass {
                active = (0..d).filter(|&k| !suspended[k]).collect();
            } else {
                active.retain(|&k| !suspended[k]);
            }
            full_pass = small || active.is_empty();
        }
        Termination::MaxIters
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_io::{DesignMatrix, Labels};
    use crate::objective::{coord_gradient, objective_value};

    #[test]
    fn shooting_delta_cases() {
        assert_eq!(shooting_delta(0.0, -1.5, 1.0), 1.5);
        assert_eq!(shooting_delta(2.0, 1.0, 1.0), -1.0);
        assert_eq!(shooting_delta(0.5, 4.0, 1.0), -0.5);
        assert_eq!(0.5 + shooting_delta(0.5, 4.0, 1.0), 0.0);
    }

    #[test]
    fn scd_update_one_by_one() {
        let m = DesignMatrix::identity(1);
        let y = Labels::new(vec![3.0]);
        let p = Problem::new(&m, &y, Loss::Squared, 1.0).unwrap();
        let mut s = SolverState::zeros(&p);
        // negative copy first: g = 3 + 1 = 4, clipped to zero
        assert_eq!(coord_gradient(&p, &s, 0), 4.0);
        assert_eq!(scd_update(&p, &mut s, 0), 0.0);
        assert_eq!(s.x, vec![0.0]);
        // positive copy: g = -3 + 1 = -2, step 2
        assert_eq!(coord_gradient(&p, &s, 1), -2.0);
        assert_eq!(scd_update(&p, &mut s, 1), 2.0);
        assert_eq!(s.x, vec![2.0]);
        assert_eq!(objective_value(&p, &s), 2.5);
        assert_eq!(s.ax, vec![2.0]);
    }

    #[test]
    fn newton_direction_is_soft_threshold() {
        // h = 1: x - g shrunk by λ
        assert_eq!(newton_direction(0.0, -3.0, 1.0, 1.0), 2.0);
        assert_eq!(newton_direction(0.0, 0.5, 1.0, 1.0), 0.0);
        assert_eq!(newton_direction(1.0, 0.0, 1.0, 2.0), -1.0);
        assert_eq!(newton_direction(1.0, 5.0, 1.0, 1.0), -5.0 + 1.0);
    }

    #[test]
    fn cdn_squared_accepts_full_step() {
        let m = DesignMatrix::identity(1);
        let y = Labels::new(vec![3.0]);
        let p = Problem::new(&m, &y, Loss::Squared, 1.0).unwrap();
        let s = SolverState::zeros(&p);
        let step = cdn_step(&p, &s.x, &s.ax, 0, &LineSearch::default());
        assert_eq!(step.step, 2.0);
        assert_eq!(step.backtracks, 0);
    }

    #[test]
    fn config_validation() {
        let m = DesignMatrix::identity(1);
        let y = Labels::new(vec![3.0]);
        let p = Problem::new(&m, &y, Loss::Squared, 1.0).unwrap();
        let bad = SeqConfig {
            tol: 0.0,
            ..Default::default()
        };
        assert!(solve_sequential(&p, &bad).is_err());
        let bad = SeqConfig {
            line_search: LineSearch {
                shrink: 1.0,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(solve_sequential(&p, &bad).is_err());
    }

    #[test]
    fn identity_design_soft_thresholds() {
        let m = DesignMatrix::identity(3);
        let y = Labels::new(vec![3.0, -1.0, 0.2]);
        let p = Problem::new(&m, &y, Loss::Squared, 1.0).unwrap();
        for variant in [Variant::Fixed, Variant::Cdn] {
            let cfg = SeqConfig {
                variant,
                tol: 1e-10,
                ..Default::default()
            };
            let r = solve_sequential(&p, &cfg).unwrap();
            assert_eq!(r.termination, Termination::Converged);
            assert_eq!(r.x, vec![2.0, 0.0, 0.0], "{variant:?}");
        }
    }
}
