//! Stochastic gradient descent baseline for L1-regularized losses.
//!
//! Each sample contributes `L(a_iᵀx, y_i) + (λ/n)‖x‖₁`, so an epoch of steps
//! sees the full objective once. The L1 part is handled by soft-thresholding
//! every coordinate by `η_t λ/n` at every step; that shrinkage is applied
//! lazily, only when a coordinate is next touched (or at the end), which
//! gives the same iterates as the eager version at the cost of the sample's
//! support.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix_io::{DesignMatrix, Labels};
use crate::objective::{nnz, Problem};
use crate::trace::{SolveResult, Termination, TraceRecorder};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    Constant,
    /// `η / √t` at step `t` (1-based).
    InvSqrt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    /// Learning rates to try, positive and increasing.
    pub rates: Vec<f64>,
    pub epochs: usize,
    pub seed: u64,
    pub schedule: Schedule,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            rates: rate_grid(1e-4, 1.0, 14),
            epochs: 50,
            seed: 0,
            schedule: Schedule::Constant,
        }
    }
}

/// `count` exponentially spaced values from `lo` to `hi` inclusive.
pub fn rate_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let ratio = (hi / lo).ln() / (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i == count - 1 {
                        hi
                    } else {
                        lo * (ratio * i as f64).exp()
                    }
                })
                .collect()
        }
    }
}

impl SgdConfig {
    fn validate(&self) -> Result<(), Error> {
        if self.rates.is_empty() {
            return Err(Error::Config("learning-rate grid is empty".into()));
        }
        if self.rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.rates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("learning rates must be increasing".into()));
        }
        Ok(())
    }
}

/// Per-epoch sample order: a fresh shuffle of `0..n` every epoch, from
/// ChaCha8 stream `stream` of `seed`.
#[derive(Debug, Clone)]
pub struct EpochOrder {
    rng: ChaCha8Rng,
    perm: Vec<usize>,
}

impl EpochOrder {
    pub fn new(n: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            rng,
            perm: (0..n).collect(),
        }
    }

    pub fn next_epoch(&mut self) -> &[usize] {
        self.perm.shuffle(&mut self.rng);
        &self.perm
    }
}

/// `sign(v) max(|v| - t, 0)`.
#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Step size at 1-based step `t`.
pub fn step_rate(schedule: Schedule, rate: f64, t: u64) -> f64 {
    match schedule {
        Schedule::Constant => rate,
        Schedule::InvSqrt => rate / (t as f64).sqrt(),
    }
}

/// Outcome of SGD at one learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRun {
    pub rate: f64,
    pub diverged: bool,
    pub result: SolveResult,
}

struct Lazy {
    x: Vec<f64>,
    /// Cumulative shrinkage through each step; `cum[0] = 0`.
    cum: Vec<f64>,
    /// Step through which each coordinate's shrinkage has been applied.
    last: Vec<usize>,
}

impl Lazy {
    fn catch_up(&mut self, j: usize, t: usize) {
        let pending = self.cum[t] - self.cum[self.last[j]];
        if pending > 0.0 {
            self.x[j] = soft_threshold(self.x[j], pending);
        }
        self.last[j] = t;
    }

    /// Weights with all pending shrinkage applied, without mutating.
    fn flushed(&self) -> Vec<f64> {
        let t = self.cum.len() - 1;
        self.x
            .iter()
            .zip(&self.last)
            .map(|(&v, &l)| soft_threshold(v, self.cum[t] - self.cum[l]))
            .collect()
    }
}

/// SGD at a single rate with lazy shrinkage. `stream` selects the RNG stream
/// of the sample order.
pub fn sgd_single_rate(
    problem: &Problem,
    rate: f64,
    cfg: &SgdConfig,
    stream: u64,
) -> RateRun {
    let (n, d) = (problem.n(), problem.d());
    let rows = problem.matrix().rows();
    let y = problem.y();
    let loss = problem.loss();
    let per_sample = problem.lambda() / n as f64;
    let mut order = EpochOrder::new(n, cfg.seed, stream);
    let mut state = Lazy {
        x: vec![0.0; d],
        cum: Vec::with_capacity(cfg.epochs * n + 1),
        last: vec![0; d],
    };
    state.cum.push(0.0);
    let mut trace = TraceRecorder::new(1);
    trace.push(0, problem.objective_at(&state.x), 0);
    let mut diverged = false;
    let mut epochs_done = 0;
    for epoch in 1..=cfg.epochs {
        for &i in order.next_epoch() {
            let t = state.cum.len();
            let eta = step_rate(cfg.schedule, rate, t as u64);
            let prev = state.cum[t - 1];
            state.cum.push(prev + eta * per_sample);
            let mut margin = 0.0;
            for &(j, a) in &rows[i] {
                state.catch_up(j, t);
                margin += a * state.x[j];
            }
            let g = loss.derivative(margin, y[i]);
            for &(j, a) in &rows[i] {
                state.x[j] -= eta * g * a;
            }
        }
        epochs_done = epoch;
        let x = state.flushed();
        let f = problem.objective_at(&x);
        if !f.is_finite() {
            diverged = true;
            break;
        }
        trace.push((epoch * n) as u64, f, nnz(&x));
    }
    let x = state.flushed();
    let objective = problem.objective_at(&x);
    diverged |= !objective.is_finite() || x.iter().any(|v| !v.is_finite());
    let updates = (epochs_done * n) as u64;
    RateRun {
        rate,
        diverged,
        result: SolveResult {
            x,
            objective,
            epochs: epochs_done as u64,
            updates,
            rounds: updates,
            termination: if diverged {
                Termination::Diverged
            } else {
                Termination::MaxIters
            },
            trace: trace.finish(),
            flagged: Vec::new(),
            parallelism: None,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdOutcome {
    pub best_rate: f64,
    pub best: SolveResult,
    pub runs: Vec<RateRun>,
}

/// Runs every rate of the grid (concurrently, each on its own RNG stream)
/// and keeps the one with the lowest final training objective.
pub fn sgd_solve(problem: &Problem, cfg: &SgdConfig) -> Result<SgdOutcome, Error> {
    cfg.validate()?;
    if problem.d() == 0 {
        return Err(Error::EmptyMatrix);
    }
    let runs: Vec<RateRun> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .rates
            .iter()
            .enumerate()
            .map(|(s, &rate)| scope.spawn(move || sgd_single_rate(problem, rate, cfg, s as u64)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sgd worker panicked"))
            .collect()
    });
    let best = runs
        .iter()
        .filter(|r| !r.diverged)
        .min_by(|a, b| a.result.objective.total_cmp(&b.result.objective))
        .ok_or(Error::AllRatesDiverged)?;
    Ok(SgdOutcome {
        best_rate: best.rate,
        best: best.result.clone(),
        runs,
    })
}

/// Fraction of samples with `sign(a_iᵀx) ≠ y_i`, where `sign(0) = +1`.
pub fn held_out_error(x: &[f64], matrix: &DesignMatrix, labels: &Labels) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let z = matrix.matvec(x);
    let wrong = z
        .iter()
        .zip(labels.as_slice())
        .filter(|(&zi, &yi)| {
            let pred = if zi >= 0.0 { 1.0 } else { -1.0 };
            pred != yi
        })
        .count();
    wrong as f64 / labels.len() as f64
}
