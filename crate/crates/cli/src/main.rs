//! `shotgun`: command-line front end for the L1 solvers.
//!
//! Exit codes: 0 when the run finished (converged or hit its budget),
//! 2 when a solver diverged, 1 for usage and I/O errors.

mod args;
mod manifest;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::Parser;
use serde::Serialize;
use serde_json::json;

use shotgun::driver::{benchmark_speedup, solve_path, BenchConfig, PathConfig, SolverSpec};
use shotgun::matrix_io::{load_dataset, load_normalized, normalize_columns, ColumnScales};
use shotgun::solver_par::{DivergenceGuard, ParConfig};
use shotgun::solver_seq::{LineSearch, SeqConfig};
use shotgun::spectral::{power_iteration, PowerConfig, SpectralEstimate};
use shotgun::{Problem, SolveResult, Termination};

use args::{BenchArgs, Cli, Command, ModeArg, PstarArgs, SolveArgs};
use manifest::Manifest;

const EXIT_DIVERGED: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            eprintln!("{}", rendered.lines().next().unwrap_or("error: invalid arguments"));
            return ExitCode::FAILURE;
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Pstar(a) => cmd_pstar(&a),
        Command::Bench(a) => cmd_bench(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[derive(Serialize)]
struct Weight {
    index: usize,
    value: f64,
}

#[derive(Serialize)]
struct Stage {
    lambda: f64,
    objective: f64,
    termination: Termination,
    epochs: u64,
    updates: u64,
    rounds: u64,
    nnz: usize,
}

fn sparse_weights(x: &[f64], scales: &ColumnScales, normalized: bool) -> Vec<Weight> {
    if normalized {
        scales
            .kept
            .iter()
            .zip(x)
            .filter(|(_, v)| **v != 0.0)
            .map(|(&index, &value)| Weight { index, value })
            .collect()
    } else {
        scales
            .denormalize(x)
            .into_iter()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .map(|(index, value)| Weight { index, value })
            .collect()
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print_json(value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    write_stdout(&text)
}

/// Writes to stdout, treating a closed pipe as success.
fn write_stdout(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn trace_csv(manifest: &Manifest, lambdas: &[f64], stages: &[SolveResult]) -> Result<String> {
    let mut out = manifest.csv_header()?;
    out.push_str("stage,lambda,wall_ms,updates,objective,nnz\n");
    for (i, (stage, lambda)) in stages.iter().zip(lambdas).enumerate() {
        for row in &stage.trace {
            out.push_str(&format!(
                "{i},{lambda:e},{:.3},{},{:e},{}\n",
                row.wall_ms, row.updates, row.objective, row.nnz
            ));
        }
    }
    Ok(out)
}

fn cmd_solve(a: &SolveArgs) -> Result<ExitCode> {
    let loss = a.problem.loss.into();
    let format = a.input.format()?;
    let data = load_normalized(&a.input.input, &format, loss)?;
    if data.matrix.d() == 0 {
        bail!("{}: no nonzero columns", a.input.input.display());
    }
    let problem = Problem::new(&data.matrix, &data.labels, loss, a.problem.lambda)?;
    let s = &a.solver;
    let line_search = LineSearch::default();
    let spec = if s.threads == 1 && s.mode == ModeArg::Sync {
        SolverSpec::Sequential(SeqConfig {
            tol: s.tol,
            max_epochs: s.max_epochs,
            seed: s.seed,
            variant: s.variant.into(),
            line_search,
            trace_every: a.trace_every,
            target_objective: s.target,
        })
    } else {
        SolverSpec::Shotgun(ParConfig {
            p: s.threads,
            mode: s.mode.into(),
            seed: s.seed,
            tol: s.tol,
            max_epochs: s.max_epochs,
            variant: s.variant.into(),
            line_search,
            guard: DivergenceGuard {
                check_every: s.guard_every,
                blowup: s.guard_blowup,
            },
            damping: s.damping,
            trace_every: a.trace_every,
            target_objective: s.target,
            record_commits: false,
        })
    };
    let spectral = if s.threads > 1 {
        let est = power_iteration(
            &data.matrix,
            &PowerConfig {
                seed: s.seed,
                ..PowerConfig::default()
            },
        )?;
        Some(est.check(s.threads))
    } else {
        None
    };
    let path = PathConfig {
        lambda_target: a.problem.lambda,
        num_steps: a.path_steps,
    };
    let run = solve_path(&problem, &path, &spec)?;
    let last = run.final_result();
    let manifest = Manifest::new("solve", &a.input, a, vec![s.seed])?;
    let stages: Vec<Stage> = run
        .stages
        .iter()
        .zip(&run.lambdas)
        .map(|(r, &lambda)| Stage {
            lambda,
            objective: r.objective,
            termination: r.termination,
            epochs: r.epochs,
            updates: r.updates,
            rounds: r.rounds,
            nnz: r.nnz(),
        })
        .collect();
    let diverged = run.aborted_at.is_some() || last.termination == Termination::Diverged;
    let result = json!({
        "manifest": manifest,
        "loss": loss,
        "lambda": a.problem.lambda,
        "objective": last.objective,
        "termination": last.termination,
        "completed": run.aborted_at.is_none(),
        "epochs": last.epochs,
        "updates": run.total_updates(),
        "nnz": last.nnz(),
        "weight_scaling": if a.normalized_weights { "normalized" } else { "original" },
        "weights": sparse_weights(&last.x, &data.scales, a.normalized_weights),
        "dropped_columns": data.scales.dropped,
        "flagged_coordinates": last.flagged,
        "parallelism": spectral,
        "stages": stages,
    });
    match &a.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            write_json(&dir.join("result.json"), &result)?;
            let trace = trace_csv(&manifest, &run.lambdas, &run.stages)?;
            let path = dir.join("trace.csv");
            fs::write(&path, trace).with_context(|| format!("writing {}", path.display()))?;
        }
        None => print_json(&result)?,
    }
    if diverged {
        eprintln!(
            "diverged at lambda {:e} (stage {} of {})",
            run.lambdas[run.stages.len() - 1],
            run.stages.len(),
            run.lambdas.len()
        );
        return Ok(ExitCode::from(EXIT_DIVERGED));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_pstar(a: &PstarArgs) -> Result<ExitCode> {
    let (raw, _) = load_dataset(&a.input.input, &a.input.format()?)?;
    let (m, _) = normalize_columns(&raw);
    let est: SpectralEstimate = power_iteration(
        &m,
        &PowerConfig {
            tol: a.tol,
            max_iters: a.max_iters,
            seed: a.seed,
        },
    )?;
    let manifest = Manifest::new("pstar", &a.input, a, vec![a.seed])?;
    print_json(&json!({
        "rho": est.rho,
        "pstar": est.pstar,
        "converged": est.converged,
        "iterations": est.iterations,
        "rel_change": est.rel_change,
        "d": est.d,
        "thm3_bound": est.thm3_bound(),
        "manifest": manifest,
    }))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(a: &BenchArgs) -> Result<ExitCode> {
    let loss = a.problem.loss.into();
    let data = load_normalized(&a.input.input, &a.input.format()?, loss)?;
    let problem = Problem::new(&data.matrix, &data.labels, loss, a.problem.lambda)?;
    let cfg = BenchConfig {
        seeds: a.seeds,
        base_seed: a.seed,
        tol: a.tol,
        max_epochs: a.max_epochs,
        variant: a.variant.into(),
        line_search: LineSearch::default(),
        guard: DivergenceGuard {
            check_every: a.guard_every,
            blowup: a.guard_blowup,
        },
        threshold_rel: a.threshold,
        async_wall: a.async_wall,
        power: PowerConfig {
            seed: a.seed,
            ..PowerConfig::default()
        },
    };
    let report = benchmark_speedup(&problem, &a.p_list, &cfg)?;
    let seeds = (0..a.seeds as u64).map(|s| a.seed + s).collect();
    let manifest = Manifest::new("bench", &a.input, a, seeds)?;
    let doc = json!({ "manifest": manifest, "report": report });
    match &a.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            write_json(&dir.join("bench.json"), &doc)?;
            let csv = manifest.csv_header()? + &report.to_csv();
            let path = dir.join("bench.csv");
            fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
            write_stdout(&report.to_csv())?;
        }
        None => print_json(&doc)?,
    }
    Ok(ExitCode::SUCCESS)
}
