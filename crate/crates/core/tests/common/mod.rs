#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use shotgun::matrix_io::{DesignMatrix, Labels};
use shotgun::sgd::EpochOrder;

pub fn dense(m: &DesignMatrix) -> DMatrix<f64> {
    let rows = m.to_dense_rows();
    DMatrix::from_fn(m.n(), m.d(), |i, j| rows[i][j])
}

/// Largest eigenvalue of `AᵀA` from a dense symmetric eigendecomposition.
pub fn dense_rho(m: &DesignMatrix) -> f64 {
    let a = dense(m);
    let gram = a.transpose() * &a;
    SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Lasso objective by direct dense evaluation.
pub fn lasso_objective(a: &DMatrix<f64>, y: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let r = a * DVector::from_column_slice(x) - DVector::from_column_slice(y);
    0.5 * r.norm_squared() + lambda * x.iter().map(|v| v.abs()).sum::<f64>()
}

/// Accelerated projected gradient on the nonnegative duplicated Lasso
/// `min ½‖[-A, A] u - y‖² + λ Σ u  s.t. u ≥ 0`, with gradient-based
/// momentum restarts. Works from the Gram matrix; stops once a step moves
/// no weight by more than `1e-12`. Returns the signed weights.
pub fn projected_gradient_lasso(m: &DesignMatrix, y: &[f64], lambda: f64, iters: usize) -> Vec<f64> {
    let a = dense(m);
    let d = m.d();
    let gram = a.transpose() * &a;
    let aty = a.transpose() * DVector::from_column_slice(y);
    let step = 1.0 / (2.0 * dense_rho(m));
    let signed = |u: &[f64]| DVector::from_fn(d, |k, _| u[d + k] - u[k]);
    let mut u = vec![0.0; 2 * d];
    let mut v = u.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let g = &gram * signed(&v) - &aty;
        let next: Vec<f64> = (0..2 * d)
            .map(|j| {
                let gj = if j < d { -g[j] } else { g[j - d] } + lambda;
                (v[j] - step * gj).max(0.0)
            })
            .collect();
        let moved = next.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        // restart when the momentum points uphill
        let uphill: f64 = (0..2 * d).map(|j| (v[j] - next[j]) * (next[j] - u[j])).sum();
        if uphill > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        v = next.iter().zip(&u).map(|(n, o)| n + beta * (n - o)).collect();
        u = next;
        t = t_next;
        if moved < 1e-12 {
            break;
        }
    }
    (0..d).map(|k| u[d + k] - u[k]).collect()
}

pub fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// SGD with the L1 shrinkage applied to every coordinate at every step.
pub fn eager_sgd(
    m: &DesignMatrix,
    y: &Labels,
    lambda: f64,
    rate: f64,
    epochs: usize,
    seed: u64,
    stream: u64,
    logistic: bool,
) -> Vec<f64> {
    let rows = m.rows();
    let (n, d) = (m.n(), m.d());
    let y = y.as_slice();
    let tau = rate * lambda / n as f64;
    let mut order = EpochOrder::new(n, seed, stream);
    let mut x = vec![0.0; d];
    for _ in 0..epochs {
        for &i in order.next_epoch() {
            for v in x.iter_mut() {
                *v = soft(*v, tau);
            }
            let z: f64 = rows[i].iter().map(|&(j, a)| a * x[j]).sum();
            let g = if logistic {
                -y[i] / (1.0 + (y[i] * z).exp())
            } else {
                z - y[i]
            };
            for &(j, a) in &rows[i] {
                x[j] -= rate * g * a;
            }
        }
    }
    x
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
