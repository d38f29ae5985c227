//! Spectral radius of `AᵀA` by power iteration, and the parallelism limit
//! `P* = ceil(d / ρ)` derived from it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::matrix_io::DesignMatrix;
use crate::trace::ParallelismCheck;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub rho: f64,
    pub iterations: usize,
    /// Relative change of the Rayleigh quotient at the last iteration.
    pub rel_change: f64,
    pub converged: bool,
    pub d: usize,
    pub pstar: usize,
}

impl SpectralEstimate {
    /// `2d/ρ + 1`: parallel updates allowed by the duplicated-feature analysis.
    pub fn thm3_bound(&self) -> f64 {
        2.0 * self.d as f64 / self.rho + 1.0
    }

    pub fn check(&self, p: usize) -> ParallelismCheck {
        let bound = self.thm3_bound();
        ParallelismCheck {
            p,
            rho: self.rho,
            pstar: self.pstar,
            thm3_bound: bound,
            within_thm3_bound: (p as f64) < bound,
            within_pstar: p <= self.pstar,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iters: 1000,
            seed: 0,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Largest eigenvalue of `AᵀA` via `v ← Aᵀ(Av) / ‖·‖`.
///
/// Each iteration costs two sparse products; `AᵀA` is never formed. The
/// Rayleigh quotient `‖Av‖²` of the unit iterate is returned once its relative
/// change drops below `tol`, otherwise after `max_iters` with
/// `converged = false`. For positive semidefinite `AᵀA` the quotient never
/// exceeds the true spectral radius.
pub fn power_iteration(m: &DesignMatrix, cfg: &PowerConfig) -> Result<SpectralEstimate, Error> {
    let d = m.d();
    if d == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut nv = norm(&v);
    if nv == 0.0 {
        v = vec![1.0; d];
        nv = norm(&v);
    }
    v.iter_mut().for_each(|a| *a /= nv);

    let mut rho = 0.0;
    let mut rel_change = f64::INFINITY;
    for it in 1..=cfg.max_iters {
        let av = m.matvec(&v);
        let quotient = av.iter().map(|a| a * a).sum::<f64>();
        let w = m.rmatvec(&av);
        let nw = norm(&w);
        if it > 1 {
            rel_change = (quotient - rho).abs() / quotient.abs().max(f64::MIN_POSITIVE);
        }
        rho = quotient;
        if nw == 0.0 {
            // v is in the null space; A = 0 on this start.
            return Ok(estimate(d, rho.max(0.0), it, 0.0, true));
        }
        if rel_change < cfg.tol {
            return Ok(estimate(d, rho, it, rel_change, true));
        }
        v = w.into_iter().map(|a| a / nw).collect();
    }
    Ok(estimate(d, rho, cfg.max_iters, rel_change, false))
}

fn estimate(d: usize, rho: f64, iterations: usize, rel_change: f64, converged: bool) -> SpectralEstimate {
    SpectralEstimate {
        rho,
        iterations,
        rel_change,
        converged,
        d,
        pstar: predicted_pstar(d, rho),
    }
}

/// `ceil(d / ρ)` clamped to `[1, d]`.
pub fn predicted_pstar(d: usize, rho: f64) -> usize {
    if d == 0 {
        return 1;
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return if rho.is_infinite() { 1 } else { d };
    }
    let p = (d as f64 / rho).ceil();
    (p as usize).clamp(1, d)
}
