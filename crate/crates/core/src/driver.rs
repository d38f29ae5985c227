//! Pathwise λ continuation and the iterations-to-threshold benchmark.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::objective::{Problem, SolverState};
use crate::solver_par::{solve_shotgun_from, DivergenceGuard, Mode, ParConfig};
use crate::solver_seq::{solve_sequential_from, LineSearch, SeqConfig, Variant};
use crate::spectral::{power_iteration, PowerConfig, SpectralEstimate};
use crate::trace::{SolveResult, Termination};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub lambda_target: f64,
    pub num_steps: usize,
}

impl PathConfig {
    pub fn new(lambda_target: f64) -> Self {
        Self {
            lambda_target,
            num_steps: 10,
        }
    }
}

/// Geometric sequence from `λ_max` (the smallest λ with `x* = 0`) down to
/// the target, `num_steps` values in all. A target at or above `λ_max`
/// yields the single-element path `[target]`.
pub fn lambda_path(problem: &Problem, cfg: &PathConfig) -> Result<Vec<f64>, Error> {
    let target = cfg.lambda_target;
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::Config(format!("lambda target must be > 0, got {target}")));
    }
    let lmax = problem.lambda_max();
    if target >= lmax || cfg.num_steps <= 1 {
        return Ok(vec![target]);
    }
    let k = cfg.num_steps - 1;
    let ratio = (target / lmax).powf(1.0 / k as f64);
    let mut path: Vec<f64> = (0..k).map(|i| lmax * ratio.powi(i as i32)).collect();
    path.push(target);
    Ok(path)
}

/// Which solver each path stage (or benchmark run) uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SolverSpec {
    Sequential(SeqConfig),
    Shotgun(ParConfig),
}

impl SolverSpec {
    pub fn solve_from(&self, problem: &Problem, state: SolverState) -> Result<SolveResult, Error> {
        match self {
            SolverSpec::Sequential(cfg) => solve_sequential_from(problem, cfg, state),
            SolverSpec::Shotgun(cfg) => solve_shotgun_from(problem, cfg, state, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub lambdas: Vec<f64>,
    /// One result per solved stage. The last one answers the target λ
    /// unless the path was aborted.
    pub stages: Vec<SolveResult>,
    /// Index of the stage that diverged, if any; later stages were skipped.
    pub aborted_at: Option<usize>,
}

impl PathResult {
    pub fn final_result(&self) -> &SolveResult {
        self.stages.last().expect("a path has at least one stage")
    }

    pub fn total_updates(&self) -> u64 {
        self.stages.iter().map(|s| s.updates).sum()
    }
}

/// Solves each λ of the path in turn, warm-starting from the previous
/// stage's weights. A diverged stage stops the path.
pub fn solve_path(
    problem: &Problem,
    path: &PathConfig,
    solver: &SolverSpec,
) -> Result<PathResult, Error> {
    let lambdas = lambda_path(problem, path)?;
    let mut stages = Vec::with_capacity(lambdas.len());
    let mut x = vec![0.0; problem.d()];
    let mut aborted_at = None;
    for (i, &lambda) in lambdas.iter().enumerate() {
        let stage_problem = problem.with_lambda(lambda)?;
        let state = SolverState::from_weights(&stage_problem, x)?;
        let result = solver.solve_from(&stage_problem, state)?;
        x = result.x.clone();
        let diverged = result.termination == Termination::Diverged;
        stages.push(result);
        if diverged {
            aborted_at = Some(i);
            break;
        }
    }
    Ok(PathResult {
        lambdas,
        stages,
        aborted_at,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Seeds per P for the synchronous (iterations) metric.
    pub seeds: usize,
    pub base_seed: u64,
    /// Tolerance of the benchmarked solves; the reference uses a tolerance
    /// at least 100 times tighter.
    pub tol: f64,
    pub max_epochs: u64,
    pub variant: Variant,
    pub line_search: LineSearch,
    pub guard: DivergenceGuard,
    /// Relative gap to the reference optimum that counts as "reached".
    pub threshold_rel: f64,
    /// Also time one asynchronous run per P.
    pub async_wall: bool,
    pub power: PowerConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seeds: 10,
            base_seed: 0,
            tol: 1e-5,
            max_epochs: 1000,
            variant: Variant::Fixed,
            line_search: LineSearch::default(),
            guard: DivergenceGuard::default(),
            threshold_rel: 0.005,
            async_wall: false,
            power: PowerConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn reference_tol(&self) -> f64 {
        (self.tol / 100.0).min(1e-8)
    }

    fn par_config(&self, p: usize, mode: Mode, seed: u64, target: f64) -> ParConfig {
        ParConfig {
            p,
            mode,
            seed,
            tol: self.tol,
            max_epochs: self.max_epochs,
            variant: self.variant,
            line_search: self.line_search,
            guard: self.guard,
            damping: false,
            trace_every: 1,
            target_objective: Some(target),
            record_commits: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub p: usize,
    /// Mean rounds to reach the threshold over the seeds that reached it.
    pub mean_iterations: Option<f64>,
    pub mean_updates: Option<f64>,
    pub reached: usize,
    pub diverged_runs: usize,
    pub seeds: usize,
    pub mean_wall_ms: f64,
    pub async_wall_ms: Option<f64>,
    pub async_termination: Option<Termination>,
    /// `T(P) · P / T(1)`; 1 is a perfect linear speedup.
    pub ratio_vs_p1: Option<f64>,
    /// Most common termination across seeds.
    pub termination: Termination,
    /// Set when at least half of the seeds diverged.
    pub diverged: bool,
    pub within_pstar: bool,
    pub within_thm3_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub reference_objective: f64,
    pub reference_tol: f64,
    pub reference_updates: u64,
    pub threshold: f64,
    pub spectral: SpectralEstimate,
    /// Coordinate draws per epoch, so iteration counts can be compared with
    /// other solvers' epoch conventions.
    pub epoch_len: u64,
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
}

const CSV_HEADER: &str = "p,mean_iterations,mean_updates,reached,diverged_runs,seeds,mean_wall_ms,async_wall_ms,ratio_vs_p1,termination,diverged,pstar,within_pstar,within_thm3_bound";

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::MaxIters => "max-iters",
        Termination::TargetReached => "target-reached",
        Termination::Diverged => "diverged",
    }
}

impl BenchmarkReport {
    /// One line per P after a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.p,
                opt(r.mean_iterations),
                opt(r.mean_updates),
                r.reached,
                r.diverged_runs,
                r.seeds,
                r.mean_wall_ms,
                opt(r.async_wall_ms),
                opt(r.ratio_vs_p1),
                termination_name(r.termination),
                r.diverged,
                self.spectral.pstar,
                r.within_pstar,
                r.within_thm3_bound,
            );
        }
        out
    }

    pub fn row(&self, p: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.p == p)
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn most_common(ts: &[Termination]) -> Termination {
    let all = [
        Termination::Diverged,
        Termination::TargetReached,
        Termination::Converged,
        Termination::MaxIters,
    ];
    all.into_iter()
        .max_by_key(|t| ts.iter().filter(|u| *u == t).count())
        .unwrap_or(Termination::MaxIters)
}

/// Iterations needed to come within `threshold_rel` of the optimum, for each
/// P in `p_list`.
///
/// The optimum comes from a sequential solve at a tolerance at least 100
/// times tighter than the benchmarked runs. Each P is run in the
/// synchronous simulator once per seed, stopping at the threshold; an
/// iteration is one round of P updates.
pub fn benchmark_speedup(
    problem: &Problem,
    p_list: &[usize],
    cfg: &BenchConfig,
) -> Result<BenchmarkReport, Error> {
    if p_list.is_empty() || p_list.contains(&0) {
        return Err(Error::Config("p list must be non-empty and positive".into()));
    }
    if cfg.seeds == 0 {
        return Err(Error::Config("need at least one seed".into()));
    }
    let reference_cfg = SeqConfig {
        tol: cfg.reference_tol(),
        max_epochs: 1_000_000,
        seed: cfg.base_seed,
        variant: cfg.variant,
        line_search: cfg.line_search,
        trace_every: u64::MAX,
        target_objective: None,
    };
    let reference = solve_sequential_from(problem, &reference_cfg, SolverState::zeros(problem))?;
    if reference.termination != Termination::Converged || !reference.objective.is_finite() {
        return Err(Error::Reference(format!(
            "terminated with {:?} at F = {}",
            reference.termination, reference.objective
        )));
    }
    let threshold = reference.objective * (1.0 + cfg.threshold_rel);
    let spectral = power_iteration(problem.matrix(), &cfg.power)?;

    let mut rows = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let mut iters = Vec::new();
        let mut updates = Vec::new();
        let mut walls = Vec::new();
        let mut terms = Vec::new();
        for s in 0..cfg.seeds {
            let pc = cfg.par_config(p, Mode::Sync, cfg.base_seed + s as u64, threshold);
            let started = Instant::now();
            let r = solve_shotgun_from(problem, &pc, SolverState::zeros(problem), None)?;
            walls.push(started.elapsed().as_secs_f64() * 1e3);
            if r.termination == Termination::TargetReached {
                iters.push(r.rounds as f64);
                updates.push(r.updates as f64);
            }
            terms.push(r.termination);
        }
        let (async_wall_ms, async_termination) = if cfg.async_wall {
            let pc = cfg.par_config(p, Mode::Async, cfg.base_seed, threshold);
            let started = Instant::now();
            let r = solve_shotgun_from(problem, &pc, SolverState::zeros(problem), None)?;
            (
                Some(started.elapsed().as_secs_f64() * 1e3),
                Some(r.termination),
            )
        } else {
            (None, None)
        };
        let diverged_runs = terms.iter().filter(|t| **t == Termination::Diverged).count();
        let check = spectral.check(p);
        rows.push(BenchRow {
            p,
            mean_iterations: mean(&iters),
            mean_updates: mean(&updates),
            reached: iters.len(),
            diverged_runs,
            seeds: cfg.seeds,
            mean_wall_ms: mean(&walls).unwrap_or(0.0),
            async_wall_ms,
            async_termination,
            ratio_vs_p1: None,
            termination: most_common(&terms),
            diverged: 2 * diverged_runs >= cfg.seeds,
            within_pstar: check.within_pstar,
            within_thm3_bound: check.within_thm3_bound,
        });
    }
    let base = rows
        .iter()
        .find(|r| r.p == 1)
        .and_then(|r| r.mean_iterations);
    if let Some(t1) = base {
        for r in &mut rows {
            r.ratio_vs_p1 = r.mean_iterations.map(|t| t * r.p as f64 / t1);
        }
    }
    Ok(BenchmarkReport {
        reference_objective: reference.objective,
        reference_tol: reference_cfg.tol,
        reference_updates: reference.updates,
        threshold,
        spectral,
        epoch_len: match cfg.variant {
            Variant::Fixed => 2 * problem.d() as u64,
            Variant::Cdn => problem.d() as u64,
        },
        config: cfg.clone(),
        rows,
    })
}
