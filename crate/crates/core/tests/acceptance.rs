//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails or exceeds its time budget.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shotgun::driver::{benchmark_speedup, solve_path, BenchConfig, PathConfig, SolverSpec};
use shotgun::matrix_io::{DesignMatrix, Labels};
use shotgun::objective::{
    assumption2_gap, coord_gradient, dup_sign, dup_weight, to_duplicated, Loss,
    Problem, SolverState,
};
use shotgun::sgd::{sgd_single_rate, sgd_solve, SgdConfig};
use shotgun::solver_par::theory::{
    interference_decomposition, lemma4_empirical_check, round_objective_change, sequential_bound,
};
use shotgun::solver_par::{
    apply_round, propose_round, replay_commits, solve_shotgun, solve_shotgun_async, Mode,
    ParConfig,
};
use shotgun::solver_seq::{
    cdn_step, cdn_update, scd_update, shooting_delta, solve_sequential, SeqConfig, Variant,
};
use shotgun::spectral::{power_iteration, predicted_pstar, PowerConfig};
use shotgun::synthetic::{
    lasso_instance, logistic_instance, orthogonal_instance, replicated_instance, Instance,
};
use shotgun::Termination;

use common::{dense_rho, eager_sgd, projected_gradient_lasso, rel_diff, soft};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn problem(inst: &Instance, loss: Loss, frac: f64) -> Problem<'_> {
    let p = Problem::new(&inst.matrix, &inst.labels, loss, 1.0).unwrap();
    p.with_lambda(frac * p.lambda_max()).unwrap()
}

fn seq(tol: f64, seed: u64, variant: Variant) -> SeqConfig {
    SeqConfig {
        tol,
        max_epochs: 200_000,
        seed,
        variant,
        ..SeqConfig::default()
    }
}

fn c1_lasso_correctness() -> Check {
    let mut worst_kkt = 0.0f64;
    let mut worst_rel = 0.0f64;
    for s in 0..20u64 {
        let n = 20 + (s as usize * 37) % 181;
        let d = 10 + (s as usize * 53) % 191;
        let inst = lasso_instance(n, d, (d / 10).max(1), 0.1, 100 + s);
        let p = problem(&inst, Loss::Squared, 0.1);
        let r = solve_sequential(&p, &seq(1e-7, s, Variant::Fixed)).map_err(|e| e.to_string())?;
        ensure(r.termination == Termination::Converged, || {
            format!("instance {s} ({n}x{d}) ended {:?}", r.termination)
        })?;
        let ax = inst.matrix.matvec(&r.x);
        let kkt = p.kkt_violation(&r.x, &ax);
        let oracle = projected_gradient_lasso(&inst.matrix, inst.labels.as_slice(), p.lambda(), 100_000);
        let rel = rel_diff(r.objective, p.objective_at(&oracle));
        worst_kkt = worst_kkt.max(kkt);
        worst_rel = worst_rel.max(rel);
        ensure(kkt <= 1e-4, || format!("instance {s}: KKT slack {kkt:e}"))?;
        ensure(rel <= 1e-6, || format!("instance {s} ({n}x{d}): objective gap {rel:e}"))?;
    }
    Ok(format!("max KKT slack {worst_kkt:.2e}, max oracle gap {worst_rel:.2e}"))
}

fn c2_closed_form() -> Check {
    let mut worst = 0.0f64;
    for s in 0..5 {
        let inst = orthogonal_instance(50, s);
        let p = Problem::new(&inst.matrix, &inst.labels, Loss::Squared, 1.0).unwrap();
        let r = solve_sequential(&p, &seq(1e-7, s, Variant::Fixed)).map_err(|e| e.to_string())?;
        for (x, y) in r.x.iter().zip(inst.labels.as_slice()) {
            worst = worst.max((x - soft(*y, 1.0)).abs());
        }
    }
    let m = DesignMatrix::identity(3);
    let y = Labels::new(vec![3.0, -1.0, 0.2]);
    let p = Problem::new(&m, &y, Loss::Squared, 1.0).unwrap();
    let r = solve_sequential(&p, &SeqConfig::default()).map_err(|e| e.to_string())?;
    ensure(r.x == vec![2.0, 0.0, 0.0], || format!("3-d fixture gave {:?}", r.x))?;
    ensure(worst <= 1e-8, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation from soft threshold {worst:.1e}"))
}

fn c3_assumption2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sq = lasso_instance(30, 10, 3, 0.1, 31);
    let lg = logistic_instance(30, 10, 3, 1.0, 1.0, 32);
    let psq = Problem::new(&sq.matrix, &sq.labels, Loss::Squared, 0.3).unwrap();
    let plg = Problem::new(&lg.matrix, &lg.labels, Loss::Logistic, 0.3).unwrap();
    let mut worst_sq = 0.0f64;
    let mut min_lg = f64::INFINITY;
    for _ in 0..1000 {
        let xhat: Vec<f64> = (0..20)
            .map(|_| if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..1.0) })
            .collect();
        let dx: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        worst_sq = worst_sq.max(assumption2_gap(&psq, &xhat, &dx).abs());
        let xl: Vec<f64> = xhat.iter().map(|v| 3.0 * v).collect();
        let dl: Vec<f64> = dx.iter().map(|v| 3.0 * v).collect();
        min_lg = min_lg.min(assumption2_gap(&plg, &xl, &dl));
    }
    ensure(worst_sq <= 1e-12, || format!("squared |gap| {worst_sq:e}"))?;
    ensure(min_lg >= -1e-12, || format!("logistic gap {min_lg:e}"))?;
    Ok(format!("squared max |gap| {worst_sq:.1e}, logistic min gap {min_lg:.2e}"))
}

fn c4_decomposition() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    let mut rounds = 0;
    let mut worst = f64::NEG_INFINITY;
    for s in 0..10u64 {
        let inst = lasso_instance(40, 30, 5, 0.1, 400 + s);
        let p = problem(&inst, Loss::Squared, 0.1);
        let mut state = SolverState::zeros(&p);
        for _ in 0..100 {
            let cfg = ParConfig {
                p: rng.gen_range(1..=16),
                ..ParConfig::default()
            };
            let round = propose_round(&p, &state, &cfg, &mut rng);
            let xhat = to_duplicated(&state.x);
            let bound = interference_decomposition(&p, &xhat, &round)
                .map_err(|e| e.to_string())?
                .total();
            let realized = round_objective_change(&p, &xhat, &round).map_err(|e| e.to_string())?;
            let scale = 1.0 + p.objective(&state.x, &state.ax).abs();
            let excess = (realized - bound) / scale;
            worst = worst.max(excess);
            if excess > 1e-12 {
                violations += 1;
            }
            apply_round(&p, &mut state, &round);
            rounds += 1;
        }
    }
    ensure(violations == 0, || format!("{violations} of {rounds} rounds violate"))?;
    Ok(format!("{rounds} rounds, 0 violations, max scaled excess {worst:.1e}"))
}

fn c5_lemma4() -> Check {
    let mut lines = Vec::new();
    for s in 0..5u64 {
        let inst = lasso_instance(60, 40, 6, 0.1, 500 + s);
        let p = problem(&inst, Loss::Squared, 0.1);
        let mut state = SolverState::zeros(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        for _ in 0..80 {
            scd_update(&p, &mut state, rng.gen_range(0..80));
        }
        for pp in [1usize, 2, 4] {
            let c = lemma4_empirical_check(&p, &state.x, pp, 10_000, &mut rng)
                .map_err(|e| e.to_string())?;
            let slack = 3.0 * c.std_error;
            ensure(c.mean_change <= c.bound + slack, || {
                format!(
                    "instance {s} P={pp}: mean {} > bound {} + 3se {}",
                    c.mean_change, c.bound, slack
                )
            })?;
            if pp == 1 {
                ensure((c.mean_change - c.bound).abs() <= slack, || {
                    format!(
                        "instance {s} P=1: mean {} vs bound {} (3se {})",
                        c.mean_change, c.bound, slack
                    )
                })?;
            }
            lines.push((c.bound - c.mean_change) / c.std_error.max(1e-300));
        }
    }
    let tightest = lines.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(format!("15 cases, tightest margin {tightest:.2} standard errors"))
}

fn c6_spectral() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for s in 0..20u64 {
        let d = rng.gen_range(2..=100);
        let n = rng.gen_range(2..=120);
        let m = if s % 2 == 0 {
            shotgun::synthetic::gaussian_design(n, d, &mut rng)
        } else {
            shotgun::synthetic::sparse_design(n, d, 0.2, &mut rng)
        };
        let est = power_iteration(
            &m,
            &PowerConfig {
                tol: 1e-14,
                max_iters: 1_000_000,
                seed: s,
            },
        )
        .map_err(|e| e.to_string())?;
        let rel = rel_diff(est.rho, dense_rho(&m));
        worst = worst.max(rel);
        ensure(rel <= 1e-6, || format!("matrix {s} ({n}x{d}): rel error {rel:e}"))?;
    }
    ensure(predicted_pstar(4096, 2047.8) == 3, || "P*(4096, 2047.8) != 3".into())?;
    Ok(format!("max relative error {worst:.1e}; P*(4096, 2047.8) = 3"))
}

fn c7_speedup() -> Check {
    let inst = lasso_instance(2048, 512, 64, 0.3, 7);
    let p = problem(&inst, Loss::Squared, 0.1);
    let cfg = BenchConfig {
        seeds: 10,
        ..BenchConfig::default()
    };
    let report = benchmark_speedup(&p, &[1, 2, 4, 8, 16], &cfg).map_err(|e| e.to_string())?;
    let mut parts = vec![format!("rho {:.3}, P* {}", report.spectral.rho, report.spectral.pstar)];
    for row in &report.rows {
        ensure(row.reached == cfg.seeds, || {
            format!("P={} reached the threshold in {}/{} seeds", row.p, row.reached, cfg.seeds)
        })?;
        let ratio = row.ratio_vs_p1.ok_or("missing ratio")?;
        parts.push(format!("P={} T={:.1} ratio {:.3}", row.p, row.mean_iterations.unwrap(), ratio));
        if row.p > 1 {
            ensure((0.67..=1.5).contains(&ratio), || {
                format!("P={} ratio {ratio:.3}", row.p)
            })?;
        }
    }
    Ok(parts.join("; "))
}

fn c8_divergence() -> Check {
    let inst = replicated_instance(200, 4, 64, 0.5, 8);
    let p = problem(&inst, Loss::Squared, 0.1);
    let est = power_iteration(&inst.matrix, &PowerConfig::default()).map_err(|e| e.to_string())?;
    ensure(est.pstar <= 2, || format!("P* = {} (rho {})", est.pstar, est.rho))?;
    let mut diverged = 0;
    let mut converged = 0;
    for seed in 0..10 {
        let run = |pp| {
            solve_shotgun(
                &p,
                &ParConfig {
                    p: pp,
                    seed,
                    ..ParConfig::default()
                },
            )
        };
        if run(64).map_err(|e| e.to_string())?.termination == Termination::Diverged {
            diverged += 1;
        }
        if run(1).map_err(|e| e.to_string())?.termination == Termination::Converged {
            converged += 1;
        }
    }
    ensure(diverged >= 8, || format!("P=64 diverged in {diverged}/10"))?;
    ensure(converged == 10, || format!("P=1 converged in {converged}/10"))?;
    Ok(format!(
        "rho {:.1}, P* {}; P=64 diverged {diverged}/10, P=1 converged {converged}/10",
        est.rho, est.pstar
    ))
}

fn c9_rate_envelope() -> Check {
    let inst = lasso_instance(50, 100, 10, 0.1, 9);
    let p = problem(&inst, Loss::Squared, 0.1);
    let reference = solve_sequential(&p, &seq(1e-12, 0, Variant::Fixed)).map_err(|e| e.to_string())?;
    let fstar = reference.objective;
    let xstar_sq: f64 = reference.x.iter().map(|v| v * v).sum();
    let f0 = p.objective_at(&vec![0.0; p.d()]);
    let epochs = 100u64;
    let mut sums = vec![0.0; epochs as usize + 1];
    let mut ts = vec![0u64; epochs as usize + 1];
    for seed in 0..20 {
        let cfg = SeqConfig {
            tol: 1e-300,
            max_epochs: epochs,
            seed,
            ..SeqConfig::default()
        };
        let r = solve_sequential(&p, &cfg).map_err(|e| e.to_string())?;
        ensure(r.trace.len() == epochs as usize + 1, || format!("trace has {} rows", r.trace.len()))?;
        for (i, row) in r.trace.iter().enumerate() {
            sums[i] += row.objective;
            ts[i] = row.updates;
        }
    }
    let mut tightest = f64::INFINITY;
    for (sum, &t) in sums.iter().zip(&ts) {
        let gap = sum / 20.0 - fstar;
        let bound = sequential_bound(p.d(), p.beta(), xstar_sq, f0, t);
        tightest = tightest.min(bound / gap.max(1e-300));
        ensure(gap <= bound, || format!("T={t}: mean gap {gap:e} > bound {bound:e}"))?;
    }
    Ok(format!("{} logged T, min bound/gap ratio {tightest:.2}", ts.len()))
}

fn c10_cdn() -> Check {
    let mut worst_rel = 0.0f64;
    for s in 0..10u64 {
        let density = if s % 2 == 0 { 1.0 } else { 0.3 };
        let inst = logistic_instance(100, 40, 5, density, 1.0, 1000 + s);
        let p = problem(&inst, Loss::Logistic, 0.1);
        let cdn = solve_sequential(&p, &seq(1e-8, s, Variant::Cdn)).map_err(|e| e.to_string())?;
        let fixed = solve_sequential(&p, &seq(1e-8, s, Variant::Fixed)).map_err(|e| e.to_string())?;
        ensure(cdn.converged() && fixed.converged(), || {
            format!("instance {s}: {:?} / {:?}", cdn.termination, fixed.termination)
        })?;
        let rel = rel_diff(cdn.objective, fixed.objective);
        worst_rel = worst_rel.max(rel);
        ensure(rel <= 1e-5, || format!("instance {s}: CDN vs fixed {rel:e}"))?;

        let cfg = seq(1e-8, s, Variant::Cdn);
        let mut state = SolverState::zeros(&p);
        let mut f = p.objective(&state.x, &state.ax);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        for _ in 0..20 * p.d() {
            let step = cdn_update(&p, &mut state, rng.gen_range(0..p.d()), &cfg);
            if step != 0.0 {
                let g = p.objective(&state.x, &state.ax);
                ensure(g <= f + 1e-12 * f.abs(), || format!("instance {s}: F rose {f} -> {g}"))?;
                f = g;
            }
        }
    }
    let (mut accepted, mut rejected) = (0, 0);
    for s in 0..5u64 {
        let inst = lasso_instance(60, 40, 6, 0.1, 1100 + s);
        let p = problem(&inst, Loss::Squared, 0.1);
        let mut state = SolverState::zeros(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let d = p.d();
        for _ in 0..10 {
            for k in 0..d {
                let c = cdn_step(&p, &state.x, &state.ax, k, &Default::default());
                let fixed: Vec<f64> = [k, d + k]
                    .iter()
                    .map(|&j| {
                        let g = coord_gradient(&p, &state, j);
                        dup_sign(j, d) * shooting_delta(dup_weight(&state.x, j), g, 1.0)
                    })
                    .collect();
                if c.step != 0.0 {
                    ensure(fixed.contains(&c.step), || {
                        format!("x_k={} CDN step {} vs fixed {fixed:?}", state.x[k], c.step)
                    })?;
                    accepted += 1;
                } else {
                    // Nothing accepted: every fixed step must leave x_k unchanged.
                    let xk = state.x[k];
                    ensure(fixed.iter().all(|v| xk + v == xk), || {
                        format!("x_k={xk} CDN took no step, fixed steps {fixed:?}")
                    })?;
                    rejected += 1;
                }
            }
            for _ in 0..d {
                scd_update(&p, &mut state, rng.gen_range(0..2 * d));
            }
        }
    }
    Ok(format!(
        "max CDN/fixed gap {worst_rel:.1e}; {accepted} accepted squared-loss steps equal fixed steps, {rejected} zero steps are no-ops"
    ))
}

fn c11_sgd() -> Check {
    let mut worst = 0.0f64;
    for s in 0..20u64 {
        let inst = logistic_instance(200, 100, 10, 0.05, 2.0, 1200 + s);
        let p = problem(&inst, Loss::Logistic, 0.05);
        let cfg = SgdConfig {
            rates: vec![0.1],
            epochs: 5,
            seed: s,
            ..SgdConfig::default()
        };
        let lazy = sgd_single_rate(&p, 0.1, &cfg, 0).result.x;
        let eager = eager_sgd(&inst.matrix, &inst.labels, p.lambda(), 0.1, 5, s, 0, true);
        let diff = lazy
            .iter()
            .zip(&eager)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(diff);
        ensure(diff <= 1e-10, || format!("instance {s}: lazy vs eager {diff:e}"))?;
    }
    let inst = logistic_instance(1000, 200, 20, 0.1, 2.0, 1300);
    let p = problem(&inst, Loss::Logistic, 0.05);
    let cdn = solve_sequential(&p, &seq(1e-6, 0, Variant::Cdn)).map_err(|e| e.to_string())?;
    let out = sgd_solve(
        &p,
        &SgdConfig {
            epochs: 50,
            ..SgdConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let rel = (out.best.objective - cdn.objective) / cdn.objective;
    ensure(rel <= 0.02, || format!("SGD {} vs CDN {} ({rel:.3})", out.best.objective, cdn.objective))?;
    Ok(format!(
        "lazy/eager max diff {worst:.1e}; SGD within {:.2}% of CDN (rate {})",
        100.0 * rel,
        out.best_rate
    ))
}

fn c12_path() -> Check {
    let mut worst = 0.0f64;
    for s in 0..5u64 {
        let inst = lasso_instance(100, 200, 10, 0.1, 1400 + s);
        let p = problem(&inst, Loss::Squared, 0.05);
        let solver = SolverSpec::Sequential(seq(1e-7, s, Variant::Fixed));
        let path = solve_path(&p, &PathConfig::new(p.lambda()), &solver).map_err(|e| e.to_string())?;
        ensure(path.lambdas.len() == 10 && path.aborted_at.is_none(), || "bad path".into())?;
        let cold = solve_sequential(&p, &seq(1e-7, s, Variant::Fixed)).map_err(|e| e.to_string())?;
        let rel = rel_diff(path.final_result().objective, cold.objective);
        worst = worst.max(rel);
        ensure(rel <= 1e-6, || format!("instance {s}: path vs cold {rel:e}"))?;
    }
    Ok(format!("max path/cold gap {worst:.1e}"))
}

fn c13_async() -> Check {
    let inst = lasso_instance(100, 50, 8, 0.1, 13);
    let p = problem(&inst, Loss::Squared, 0.1);
    let cfg = ParConfig {
        p: 8,
        mode: Mode::Async,
        tol: 1e-300,
        max_epochs: 100,
        record_commits: true,
        ..ParConfig::default()
    };
    let run = solve_shotgun_async(&p, &cfg, SolverState::zeros(&p)).map_err(|e| e.to_string())?;
    ensure(run.result.updates == 10_000, || format!("{} updates", run.result.updates))?;
    let x0 = vec![0.0; p.d()];
    replay_commits(&x0, &run.commits, &run.result.x)?;
    let mut summed = x0.clone();
    for c in &run.commits {
        summed[c.coord] += c.delta;
    }
    let sum_err = summed
        .iter()
        .zip(&run.result.x)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    ensure(sum_err <= 1e-12, || format!("x0 + sum of deltas off by {sum_err:e}"))?;
    ensure(run.ax_drift <= 1e-6, || format!("ax drift {:e}", run.ax_drift))?;

    let single = ParConfig {
        p: 1,
        mode: Mode::Async,
        tol: 1e-7,
        ..ParConfig::default()
    };
    let a1 = solve_shotgun(&p, &single).map_err(|e| e.to_string())?;
    let s1 = solve_sequential(&p, &seq(1e-7, 0, Variant::Fixed)).map_err(|e| e.to_string())?;
    let rel = rel_diff(a1.objective, s1.objective);
    ensure(rel <= 1e-6, || format!("async P=1 vs sequential {rel:e}"))?;
    Ok(format!(
        "{} commits replay exactly, ax drift {:.1e}, P=1 gap {rel:.1e}",
        run.commits.len(),
        run.ax_drift
    ))
}

#[test]
fn acceptance_criteria() {
    let criteria: Vec<(u32, &str, u64, fn() -> Check)> = vec![
        (1, "lasso correctness", 10, c1_lasso_correctness),
        (2, "orthogonal closed form", 1, c2_closed_form),
        (3, "uniform upper bound gap", 5, c3_assumption2),
        (4, "round decomposition", 10, c4_decomposition),
        (5, "expected round decrease", 60, c5_lemma4),
        (6, "spectral estimate", 5, c6_spectral),
        (7, "iteration speedup", 120, c7_speedup),
        (8, "divergence past P*", 60, c8_divergence),
        (9, "sequential rate envelope", 30, c9_rate_envelope),
        (10, "CDN", 30, c10_cdn),
        (11, "SGD lazy shrinkage", 120, c11_sgd),
        (12, "path consistency", 30, c12_path),
        (13, "async integrity", 60, c13_async),
    ];
    let mut failed = Vec::new();
    for (id, name, limit, run) in criteria {
        let started = Instant::now();
        let outcome = run();
        let elapsed = started.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let (ok, detail) = match outcome {
            Ok(d) if in_time => (true, d),
            Ok(d) => (false, format!("{d} [over {limit}s budget]")),
            Err(e) => (false, e),
        };
        println!(
            "{} criterion {id:>2} {name}: {:.2}s (limit {limit}s) {detail}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        if !ok {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
