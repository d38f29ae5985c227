//! Quantities from the convergence analysis of Shotgun, for diagnostics and
//! tests. Everything here works in the duplicated-feature space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RoundUpdate;
use crate::objective::{
    dup_feature, dup_sign, duplicated_gradient, duplicated_objective, from_duplicated,
    to_duplicated, Loss, Problem,
};
use crate::solver_seq::{fixed_step_delta, Variant};
use crate::spectral::{power_iteration, PowerConfig};
use crate::Error;

/// Split of a round's exact objective change for squared loss:
/// `ΔF = sequential_progress + interference`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// `Σ_a (δ_a g_a + ½ ‖â_a‖² δ_a²)`: what the updates would achieve one
    /// at a time. Equals `-½ Σ δ²` when no step is clipped at zero.
    pub sequential_progress: f64,
    /// `½ Σ_{a≠b} (ÂᵀÂ)_{i_a i_b} δ_a δ_b`: cost of updating correlated
    /// coordinates together.
    pub interference: f64,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.sequential_progress + self.interference
    }
}

fn fixed_round(round: &RoundUpdate) -> Result<(), Error> {
    if round.variant != Variant::Fixed {
        return Err(Error::Unsupported(
            "analysis is defined for fixed-step rounds".into(),
        ));
    }
    Ok(())
}

/// Decomposes the round's objective change at duplicated point `xhat`.
///
/// Only squared loss (with unit-norm columns) has this exact form; logistic
/// problems are rejected.
pub fn interference_decomposition(
    problem: &Problem,
    xhat: &[f64],
    round: &RoundUpdate,
) -> Result<Decomposition, Error> {
    fixed_round(round)?;
    if problem.loss() != Loss::Squared {
        return Err(Error::Unsupported(
            "interference decomposition requires squared loss".into(),
        ));
    }
    let d = problem.d();
    if xhat.len() != 2 * d {
        return Err(Error::Config("xhat must have length 2d".into()));
    }
    let m = problem.matrix();
    let grad = duplicated_gradient(problem, xhat);
    let (picks, deltas) = (&round.picks, &round.deltas);
    let sequential_progress = picks
        .iter()
        .zip(deltas)
        .map(|(&j, &v)| v * grad[j] + 0.5 * m.col_sq_norm(dup_feature(j, d)) * v * v)
        .sum();
    let mut cross = 0.0;
    for a in 0..picks.len() {
        for b in 0..picks.len() {
            if a == b {
                continue;
            }
            let (ia, ib) = (picks[a], picks[b]);
            let g = dup_sign(ia, d)
                * dup_sign(ib, d)
                * m.gram_entry(dup_feature(ia, d), dup_feature(ib, d));
            cross += g * deltas[a] * deltas[b];
        }
    }
    Ok(Decomposition {
        sequential_progress,
        interference: 0.5 * cross,
    })
}

/// Exact change of the duplicated objective when the round's raw collective
/// update is added to `xhat` (no clamping).
pub fn round_objective_change(
    problem: &Problem,
    xhat: &[f64],
    round: &RoundUpdate,
) -> Result<f64, Error> {
    fixed_round(round)?;
    let delta = round.collective(problem.d());
    let moved: Vec<f64> = xhat.iter().zip(&delta).map(|(a, b)| a + b).collect();
    Ok(duplicated_objective(problem, &moved) - duplicated_objective(problem, xhat))
}

/// Monte Carlo check of the expected one-round decrease bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma4Check {
    pub p: usize,
    pub trials: usize,
    /// Mean of `F(x̂ + Δx̂) - F(x̂)` over the trials.
    pub mean_change: f64,
    /// Standard error of `mean_change`.
    pub std_error: f64,
    /// `P · E_j[δ_j g_j + (β/2)(1 + (P-1)ρ̂/(2d)) δ_j²]`.
    pub bound: f64,
    /// Spectral radius of `ÂᵀÂ`, twice that of `AᵀA`.
    pub rho_dup: f64,
    /// `P - 1 < 2d/ρ̂`, the regime in which the bound is negative.
    pub within_regime: bool,
}

/// Estimates `E[F(x̂ + Δx̂) - F(x̂)]` for rounds of `p` fixed steps drawn at
/// signed weights `x` and compares it with the analytic upper bound.
///
/// The collective update is taken as the raw sum of proposed steps, which is
/// the quantity the bound is about.
pub fn lemma4_empirical_check(
    problem: &Problem,
    x: &[f64],
    p: usize,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<Lemma4Check, Error> {
    if problem.loss() != Loss::Squared {
        return Err(Error::Unsupported(
            "the empirical decrease check is implemented for squared loss".into(),
        ));
    }
    if p == 0 || trials < 2 {
        return Err(Error::Config("need p >= 1 and at least 2 trials".into()));
    }
    let d = problem.d();
    let m = problem.matrix();
    let ax = m.matvec(x);
    let xhat = to_duplicated(x);
    let grad = duplicated_gradient(problem, &xhat);
    let deltas: Vec<f64> = (0..2 * d)
        .map(|j| fixed_step_delta(problem, x, &ax, j))
        .collect();
    let est = power_iteration(
        m,
        &PowerConfig {
            tol: 1e-12,
            max_iters: 20_000,
            seed: 0,
        },
    )?;
    let rho_dup = 2.0 * est.rho;
    let beta = problem.beta();
    let pf = p as f64;
    let factor = 1.0 + (pf - 1.0) * rho_dup / (2.0 * d as f64);
    let bound = pf
        * (0..2 * d)
            .map(|j| deltas[j] * grad[j] + 0.5 * beta * factor * deltas[j] * deltas[j])
            .sum::<f64>()
        / (2 * d) as f64;

    let base = problem.smooth_loss(&ax);
    let lam = problem.lambda();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut moved = ax.clone();
    for _ in 0..trials {
        moved.copy_from_slice(&ax);
        let mut l1_change = 0.0;
        for _ in 0..p {
            let j = rng.gen_range(0..2 * d);
            m.col_axpy(dup_feature(j, d), dup_sign(j, d) * deltas[j], &mut moved);
            l1_change += deltas[j];
        }
        let change = problem.smooth_loss(&moved) - base + lam * l1_change;
        sum += change;
        sum_sq += change * change;
    }
    let t = trials as f64;
    let mean = sum / t;
    let var = ((sum_sq - t * mean * mean) / (t - 1.0)).max(0.0);
    Ok(Lemma4Check {
        p,
        trials,
        mean_change: mean,
        std_error: (var / t).sqrt(),
        bound,
        rho_dup,
        within_regime: pf - 1.0 < 2.0 * d as f64 / rho_dup,
    })
}

/// Right-hand side of the sequential rate
/// `d (β‖x*‖² + 2F(x⁰)) / (T + 1)`.
pub fn sequential_bound(d: usize, beta: f64, xstar_sq_norm: f64, f0: f64, t: u64) -> f64 {
    d as f64 * (beta * xstar_sq_norm + 2.0 * f0) / (t as f64 + 1.0)
}

/// Right-hand side of the parallel rate
/// `d (β‖x*‖² + 2F(x⁰)) / ((T + 1) P)`, valid while `P - 1 < 2d/ρ̂`.
pub fn parallel_bound(d: usize, beta: f64, xstar_sq_norm: f64, f0: f64, t: u64, p: usize) -> f64 {
    sequential_bound(d, beta, xstar_sq_norm, f0, t) / p as f64
}

/// Signed weights reached by adding a raw collective update to `xhat`.
pub fn moved_weights(xhat: &[f64], round: &RoundUpdate, d: usize) -> Vec<f64> {
    let delta = round.collective(d);
    let moved: Vec<f64> = xhat.iter().zip(&delta).map(|(a, b)| a + b).collect();
    from_duplicated(&moved)
}
