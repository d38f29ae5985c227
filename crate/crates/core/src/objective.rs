//! L1-regularized objectives, coordinate gradients, and the duplicated-feature
//! view used by the convergence theory.
//!
//! Solvers keep a signed weight vector `x` of length `d`. The analysis works
//! over `x̂ ∈ R^{2d}_+` with duplicated columns `[a; -a]`; the two are related
//! by `x_k = x̂_{d+k} - x̂_k`. Index `j < d` is the *negative* copy of feature
//! `j`, index `j >= d` the *positive* copy of feature `j - d`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::matrix_io::{DesignMatrix, Labels};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// `½ (z - y)²`, the Lasso.
    Squared,
    /// `log(1 + exp(-y z))`, sparse logistic regression.
    Logistic,
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Loss::Squared => "squared",
            Loss::Logistic => "logistic",
        })
    }
}

/// `log(1 + exp(z))` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    (-z.abs()).exp().ln_1p() + z.max(0.0)
}

/// Logistic sigmoid `1 / (1 + exp(-t))` without overflow.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Loss {
    /// Curvature constant bounding the per-sample second derivative for
    /// unit-norm columns.
    pub fn beta(self) -> f64 {
        match self {
            Loss::Squared => 1.0,
            Loss::Logistic => 0.25,
        }
    }

    /// Per-sample loss at prediction `z`.
    #[inline]
    pub fn value(self, z: f64, y: f64) -> f64 {
        match self {
            Loss::Squared => 0.5 * (z - y) * (z - y),
            Loss::Logistic => softplus(-y * z),
        }
    }

    /// `L(z + u) - L(z)`, evaluated without cancellation for small `u`.
    #[inline]
    pub fn value_change(self, z: f64, u: f64, y: f64) -> f64 {
        match self {
            Loss::Squared => u * (z - y + 0.5 * u),
            Loss::Logistic => {
                // softplus(a - y u) - softplus(a) = log1p(σ(a) expm1(-y u))
                let a = -y * z;
                (sigmoid(a) * (-y * u).exp_m1()).ln_1p()
            }
        }
    }

    /// `∂/∂z` of the per-sample loss.
    #[inline]
    pub fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Loss::Squared => z - y,
            Loss::Logistic => -y * sigmoid(-y * z),
        }
    }

    /// `∂²/∂z²` of the per-sample loss.
    #[inline]
    pub fn curvature(self, z: f64, _y: f64) -> f64 {
        match self {
            Loss::Squared => 1.0,
            Loss::Logistic => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }
}

/// A regularized loss-minimization instance. Borrowing the data keeps the
/// problem `Copy`, so a λ-path or a pool of workers can share one matrix.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    matrix: &'a DesignMatrix,
    labels: &'a Labels,
    loss: Loss,
    lambda: f64,
}

impl<'a> Problem<'a> {
    pub fn new(
        matrix: &'a DesignMatrix,
        labels: &'a Labels,
        loss: Loss,
        lambda: f64,
    ) -> Result<Self, Error> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        if labels.len() != matrix.n() {
            return Err(Error::Config(format!(
                "{} labels for {} samples",
                labels.len(),
                matrix.n()
            )));
        }
        labels.validate_for(loss).map_err(Error::Data)?;
        Ok(Self {
            matrix,
            labels,
            loss,
            lambda,
        })
    }

    /// Same data and loss with a different regularization level.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self, Error> {
        Self::new(self.matrix, self.labels, self.loss, lambda)
    }

    pub fn matrix(&self) -> &'a DesignMatrix {
        self.matrix
    }

    pub fn labels(&self) -> &'a Labels {
        self.labels
    }

    pub fn y(&self) -> &'a [f64] {
        self.labels.as_slice()
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn beta(&self) -> f64 {
        self.loss.beta()
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn d(&self) -> usize {
        self.matrix.d()
    }

    /// Smooth part `Σ_i L(z_i, y_i)` at predictions `ax`.
    pub fn smooth_loss(&self, ax: &[f64]) -> f64 {
        let loss = self.loss;
        ax.iter()
            .zip(self.y())
            .map(|(&z, &y)| loss.value(z, y))
            .sum()
    }

    /// `F(x)` given `ax = A x`.
    pub fn objective(&self, x: &[f64], ax: &[f64]) -> f64 {
        self.smooth_loss(ax) + self.lambda * l1_norm(x)
    }

    /// `F(x)`, recomputing `A x`.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective(x, &self.matrix.matvec(x))
    }

    /// `∂/∂x_k` of the smooth part, in `O(nnz(a_k))`.
    #[inline]
    pub fn smooth_partial(&self, ax: &[f64], k: usize) -> f64 {
        self.smooth_partial_with(|i| ax[i], k)
    }

    /// [`Problem::smooth_partial`] reading predictions through `ax_at`.
    #[inline]
    pub fn smooth_partial_with(&self, ax_at: impl Fn(usize) -> f64, k: usize) -> f64 {
        let (rows, vals) = self.matrix.column(k);
        let y = self.y();
        let loss = self.loss;
        rows.iter()
            .zip(vals)
            .map(|(&i, &a)| a * loss.derivative(ax_at(i), y[i]))
            .sum()
    }

    /// `∂²/∂x_k²` of the smooth part.
    pub fn smooth_curvature(&self, ax: &[f64], k: usize) -> f64 {
        self.smooth_curvature_with(|i| ax[i], k)
    }

    #[inline]
    pub fn smooth_curvature_with(&self, ax_at: impl Fn(usize) -> f64, k: usize) -> f64 {
        let (rows, vals) = self.matrix.column(k);
        let y = self.y();
        rows.iter()
            .zip(vals)
            .map(|(&i, &a)| a * a * self.loss.curvature(ax_at(i), y[i]))
            .sum()
    }

    /// Full smooth gradient `A^T L'(Ax)`.
    pub fn smooth_gradient(&self, ax: &[f64]) -> Vec<f64> {
        let r: Vec<f64> = ax
            .iter()
            .zip(self.y())
            .map(|(&z, &y)| self.loss.derivative(z, y))
            .collect();
        self.matrix.rmatvec(&r)
    }

    /// Smallest λ for which `x = 0` is optimal: `‖∇L(0)‖_∞`.
    pub fn lambda_max(&self) -> f64 {
        let zeros = vec![0.0; self.n()];
        self.smooth_gradient(&zeros)
            .into_iter()
            .fold(0.0, |m, g| m.max(g.abs()))
    }

    /// Largest KKT violation of `x`: `max(|g_k| - λ, 0)` where `x_k = 0`,
    /// `|g_k + λ sign(x_k)|` elsewhere.
    pub fn kkt_violation(&self, x: &[f64], ax: &[f64]) -> f64 {
        (0..self.d())
            .map(|k| kkt_residual(x[k], self.smooth_partial(ax, k), self.lambda))
            .fold(0.0, f64::max)
    }
}

/// Subgradient-optimality residual of a single coordinate.
#[inline]
pub fn kkt_residual(xk: f64, g: f64, lambda: f64) -> f64 {
    if xk == 0.0 {
        (g.abs() - lambda).max(0.0)
    } else {
        (g + lambda * xk.signum()).abs()
    }
}

pub fn l1_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn nnz(x: &[f64]) -> usize {
    x.iter().filter(|&&v| v != 0.0).count()
}

/// Weights plus the cached prediction vector `A x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub ax: Vec<f64>,
    /// Last computed objective. May be stale; see [`SolverState::refresh_objective`].
    pub objective: Option<f64>,
}

impl SolverState {
    pub fn zeros(problem: &Problem) -> Self {
        Self {
            x: vec![0.0; problem.d()],
            ax: vec![0.0; problem.n()],
            objective: None,
        }
    }

    pub fn from_weights(problem: &Problem, x: Vec<f64>) -> Result<Self, Error> {
        if x.len() != problem.d() {
            return Err(Error::Config(format!(
                "warm start has {} weights, problem has {} features",
                x.len(),
                problem.d()
            )));
        }
        let ax = problem.matrix().matvec(&x);
        Ok(Self {
            x,
            ax,
            objective: None,
        })
    }

    pub fn refresh_objective(&mut self, problem: &Problem) -> f64 {
        let f = problem.objective(&self.x, &self.ax);
        self.objective = Some(f);
        f
    }

    /// Recomputes `A x` from scratch.
    pub fn recompute_ax(&mut self, problem: &Problem) {
        self.ax = problem.matrix().matvec(&self.x);
    }

    /// `‖ax - A x‖_∞ / max(1, ‖A x‖_∞)`.
    pub fn ax_drift(&self, problem: &Problem) -> f64 {
        let fresh = problem.matrix().matvec(&self.x);
        relative_inf_distance(&self.ax, &fresh)
    }

    /// Applies `x_k += step` and the matching column update of `ax`.
    #[inline]
    pub fn apply(&mut self, problem: &Problem, k: usize, step: f64) {
        if step != 0.0 {
            self.x[k] += step;
            problem.matrix().col_axpy(k, step, &mut self.ax);
            self.objective = None;
        }
    }
}

pub(crate) fn relative_inf_distance(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
    diff / scale
}

/// `F(x)` from a state's cache.
pub fn objective_value(problem: &Problem, state: &SolverState) -> f64 {
    problem.objective(&state.x, &state.ax)
}

// ---------------------------------------------------------------------------
// Duplicated-feature view
// ---------------------------------------------------------------------------

/// Feature behind duplicated index `j`.
#[inline]
pub fn dup_feature(j: usize, d: usize) -> usize {
    if j < d {
        j
    } else {
        j - d
    }
}

/// Sign of duplicated column `j`: `-1` for the negative copy (`j < d`),
/// `+1` for the positive copy.
#[inline]
pub fn dup_sign(j: usize, d: usize) -> f64 {
    if j < d {
        -1.0
    } else {
        1.0
    }
}

/// Value of duplicated weight `x̂_j` for the canonical split of signed `x`.
#[inline]
pub fn dup_weight(x: &[f64], j: usize) -> f64 {
    let d = x.len();
    (dup_sign(j, d) * x[dup_feature(j, d)]).max(0.0)
}

/// Canonical duplicated representation: `x̂_{d+k} = x_k⁺`, `x̂_k = x_k⁻`.
pub fn to_duplicated(x: &[f64]) -> Vec<f64> {
    (0..2 * x.len()).map(|j| dup_weight(x, j)).collect()
}

/// `x_k = x̂_{d+k} - x̂_k`.
pub fn from_duplicated(xhat: &[f64]) -> Vec<f64> {
    let d = xhat.len() / 2;
    (0..d).map(|k| xhat[d + k] - xhat[k]).collect()
}

/// `(∇F(x̂))_j` of the duplicated objective, in `O(nnz(column))`.
pub fn coord_gradient(problem: &Problem, state: &SolverState, j: usize) -> f64 {
    let d = problem.d();
    dup_sign(j, d) * problem.smooth_partial(&state.ax, dup_feature(j, d)) + problem.lambda()
}

/// Duplicated objective `Σ L(â_i^T x̂) + λ Σ_j x̂_j`; `x̂` may be any vector
/// of length `2d` (both copies of a feature may be positive).
pub fn duplicated_objective(problem: &Problem, xhat: &[f64]) -> f64 {
    let x = from_duplicated(xhat);
    let ax = problem.matrix().matvec(&x);
    problem.smooth_loss(&ax) + problem.lambda() * xhat.iter().sum::<f64>()
}

/// Full duplicated gradient (length `2d`).
pub fn duplicated_gradient(problem: &Problem, xhat: &[f64]) -> Vec<f64> {
    let x = from_duplicated(xhat);
    let g = problem.smooth_gradient(&problem.matrix().matvec(&x));
    let lam = problem.lambda();
    let d = problem.d();
    (0..2 * d).map(|j| dup_sign(j, d) * g[dup_feature(j, d)] + lam).collect()
}

/// Slack of the parallel upper bound
/// `F(x̂) + Δᵀ∇F(x̂) + (β/2) Δᵀ ÂᵀÂ Δ - F(x̂ + Δ)` at duplicated `x̂`, `Δ`.
///
/// The λ term is linear in `x̂` and cancels exactly, so the slack is
/// evaluated per sample on the smooth part: with `z = Âx̂`, `u = ÂΔ`,
/// `Σ_i [L(z_i) + u_i L'(z_i) + (β/2) u_i² - L(z_i + u_i)]`. For squared
/// loss every term vanishes up to round-off.
pub fn assumption2_gap(problem: &Problem, xhat: &[f64], dxhat: &[f64]) -> f64 {
    let m = problem.matrix();
    let z = m.matvec(&from_duplicated(xhat));
    let u = m.matvec(&from_duplicated(dxhat));
    let (loss, beta) = (problem.loss(), problem.beta());
    z.iter()
        .zip(&u)
        .zip(problem.y())
        .map(|((&zi, &ui), &yi)| {
            loss.value(zi, yi) + ui * loss.derivative(zi, yi) + 0.5 * beta * ui * ui
                - loss.value(zi + ui, yi)
        })
        .sum()
}
