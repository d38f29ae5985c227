//! Seeded random problem instances. All designs have unit-norm columns.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matrix_io::{normalize_columns, DesignMatrix, Labels};
use crate::objective::sigmoid;

/// A design, its labels, and the weights that generated them.
#[derive(Debug, Clone)]
pub struct Instance {
    pub matrix: DesignMatrix,
    pub labels: Labels,
    pub truth: Vec<f64>,
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn normalized(n: usize, columns: Vec<Vec<(usize, f64)>>) -> DesignMatrix {
    let m = DesignMatrix::from_columns(n, columns).expect("generated columns are valid");
    let (m, scales) = normalize_columns(&m);
    debug_assert!(scales.dropped.is_empty());
    m
}

/// Dense `n × d` Gaussian design. `ρ(AᵀA) ≈ (1 + √(d/n))²`.
pub fn gaussian_design(n: usize, d: usize, rng: &mut impl Rng) -> DesignMatrix {
    let columns = (0..d)
        .map(|_| (0..n).map(|i| (i, normal(rng))).collect())
        .collect();
    normalized(n, columns)
}

/// Sparse Gaussian design with roughly `density · n` entries per column
/// (at least one).
pub fn sparse_design(n: usize, d: usize, density: f64, rng: &mut impl Rng) -> DesignMatrix {
    let per_col = ((density * n as f64).round() as usize).clamp(1, n);
    let columns = (0..d)
        .map(|_| {
            let mut rows = sample(rng, n, per_col).into_vec();
            rows.sort_unstable();
            rows.into_iter().map(|i| (i, normal(rng))).collect()
        })
        .collect();
    normalized(n, columns)
}

/// `base` correlated Gaussian columns, each repeated `copies` times.
///
/// Base column `b` is `√c z + √(1-c) e_b` for a shared `z`, so the Gram
/// matrix of the bases has top eigenvalue about `1 + (base-1) c` and the
/// full design has `ρ ≈ copies · (1 + (base-1) c)`.
pub fn replicated_design(
    n: usize,
    base: usize,
    copies: usize,
    correlation: f64,
    rng: &mut impl Rng,
) -> DesignMatrix {
    let c = correlation.clamp(0.0, 1.0);
    let shared: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
    let bases: Vec<Vec<(usize, f64)>> = (0..base)
        .map(|_| {
            (0..n)
                .map(|i| (i, c.sqrt() * shared[i] + (1.0 - c).sqrt() * normal(rng)))
                .collect()
        })
        .collect();
    let columns = (0..base * copies).map(|j| bases[j % base].clone()).collect();
    normalized(n, columns)
}

/// `k` nonzero weights at random positions, magnitudes in `[0.5, 1.5]` with
/// random signs.
pub fn planted_weights(d: usize, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut x = vec![0.0; d];
    for j in sample(rng, d, k.min(d)) {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        x[j] = sign * rng.gen_range(0.5..1.5);
    }
    x
}

/// `y = A x + noise · ε`.
pub fn lasso_labels(m: &DesignMatrix, truth: &[f64], noise: f64, rng: &mut impl Rng) -> Labels {
    Labels::new(
        m.matvec(truth)
            .into_iter()
            .map(|z| z + noise * normal(rng))
            .collect(),
    )
}

/// `y_i = +1` with probability `σ(a_iᵀ x)`.
pub fn logistic_labels(m: &DesignMatrix, truth: &[f64], rng: &mut impl Rng) -> Labels {
    Labels::new(
        m.matvec(truth)
            .into_iter()
            .map(|z| if rng.gen_bool(sigmoid(z)) { 1.0 } else { -1.0 })
            .collect(),
    )
}

/// Gaussian Lasso instance with `k` planted nonzeros.
pub fn lasso_instance(n: usize, d: usize, k: usize, noise: f64, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let matrix = gaussian_design(n, d, &mut rng);
    let truth = planted_weights(d, k, &mut rng);
    let labels = lasso_labels(&matrix, &truth, noise, &mut rng);
    Instance {
        matrix,
        labels,
        truth,
    }
}

/// Sparse logistic instance. `density = 1` gives a dense Gaussian design.
/// Planted weights are scaled by `signal` before labels are drawn.
pub fn logistic_instance(
    n: usize,
    d: usize,
    k: usize,
    density: f64,
    signal: f64,
    seed: u64,
) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let matrix = if density >= 1.0 {
        gaussian_design(n, d, &mut rng)
    } else {
        sparse_design(n, d, density, &mut rng)
    };
    let truth: Vec<f64> = planted_weights(d, k, &mut rng)
        .into_iter()
        .map(|v| signal * v)
        .collect();
    let labels = logistic_labels(&matrix, &truth, &mut rng);
    Instance {
        matrix,
        labels,
        truth,
    }
}

/// `A = I_d` with Gaussian labels; the Lasso solution is the soft threshold
/// of `y`.
pub fn orthogonal_instance(d: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = Labels::new((0..d).map(|_| 2.0 * normal(&mut rng)).collect());
    Instance {
        matrix: DesignMatrix::identity(d),
        truth: labels.as_slice().to_vec(),
        labels,
    }
}

/// Replicated-column Lasso instance: `base` correlated columns each copied
/// `copies` times, labels from a planted combination of the bases.
pub fn replicated_instance(
    n: usize,
    base: usize,
    copies: usize,
    correlation: f64,
    seed: u64,
) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let matrix = replicated_design(n, base, copies, correlation, &mut rng);
    let d = base * copies;
    let mut truth = vec![0.0; d];
    for v in truth.iter_mut().take(base) {
        *v = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    }
    let labels = lasso_labels(&matrix, &truth, 0.1, &mut rng);
    Instance {
        matrix,
        labels,
        truth,
    }
}
