//! Column-major sparse design matrix, labels, and column normalization.

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::objective::Loss;

/// Sparse `n x d` matrix in compressed sparse column layout.
///
/// Row indices are strictly increasing within each column and no explicit
/// zeros are stored. Once built the matrix is immutable, so it can be shared
/// freely between solver threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl DesignMatrix {
    /// Builds a matrix from per-column `(row, value)` lists.
    ///
    /// Entries are sorted by row; zeros are discarded. A repeated row within a
    /// column or a row outside `[0, n)` is rejected.
    pub fn from_columns(n: usize, columns: Vec<Vec<(usize, f64)>>) -> Result<Self, DataError> {
        let mut col_ptr = Vec::with_capacity(columns.len() + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for (j, mut col) in columns.into_iter().enumerate() {
            col.sort_by_key(|&(i, _)| i);
            for w in col.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(DataError::Duplicate { row: w[0].0, col: j });
                }
            }
            for (i, v) in col {
                if i >= n {
                    return Err(DataError::Bounds {
                        line: None,
                        what: format!("row index {i} outside [0, {n}) in column {j}"),
                    });
                }
                if !v.is_finite() {
                    return Err(DataError::Parse {
                        line: None,
                        msg: format!("non-finite value at ({i}, {j})"),
                    });
                }
                if v != 0.0 {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self {
            n,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Builds a matrix from dense row-major data.
    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self, DataError> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::new(); d];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(DataError::Parse {
                    line: Some(i + 1),
                    msg: format!("row has {} entries, expected {d}", row.len()),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                columns[j].push((i, v));
            }
        }
        Self::from_columns(n, columns)
    }

    /// `n x n` identity.
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Row indices and values of column `j`.
    #[inline]
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[lo..hi], &self.values[lo..hi])
    }

    /// `a_j^T v`.
    #[inline]
    pub fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        let (rows, vals) = self.column(j);
        rows.iter().zip(vals).map(|(&i, &a)| a * v[i]).sum()
    }

    /// `out += alpha * a_j`.
    #[inline]
    pub fn col_axpy(&self, j: usize, alpha: f64, out: &mut [f64]) {
        let (rows, vals) = self.column(j);
        for (&i, &a) in rows.iter().zip(vals) {
            out[i] += alpha * a;
        }
    }

    pub fn col_sq_norm(&self, j: usize) -> f64 {
        self.column(j).1.iter().map(|a| a * a).sum()
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.d(), "matvec: dimension mismatch");
        let mut out = vec![0.0; self.n];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                self.col_axpy(j, xj, &mut out);
            }
        }
        out
    }

    /// `A^T r`.
    pub fn rmatvec(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.n, "rmatvec: dimension mismatch");
        (0..self.d()).map(|j| self.col_dot(j, r)).collect()
    }

    /// `(A^T A)_{jk}`.
    pub fn gram_entry(&self, j: usize, k: usize) -> f64 {
        let (ri, vi) = self.column(j);
        let (rk, vk) = self.column(k);
        let (mut a, mut b, mut acc) = (0, 0, 0.0);
        while a < ri.len() && b < rk.len() {
            match ri[a].cmp(&rk[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += vi[a] * vk[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    /// Row-major sparse view: for every sample, its `(column, value)` support.
    pub fn rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut rows = vec![Vec::new(); self.n];
        for j in 0..self.d() {
            let (ri, vals) = self.column(j);
            for (&i, &v) in ri.iter().zip(vals) {
                rows[i].push((j, v));
            }
        }
        rows
    }

    /// Dense row-major copy; intended for small matrices and oracles.
    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.d()]; self.n];
        for j in 0..self.d() {
            let (ri, vals) = self.column(j);
            for (&i, &v) in ri.iter().zip(vals) {
                out[i][j] = v;
            }
        }
        out
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Self {
        let mut col_ptr = Vec::with_capacity(keep.len() + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for &j in keep {
            let (ri, vals) = self.column(j);
            row_idx.extend_from_slice(ri);
            values.extend_from_slice(vals);
            col_ptr.push(row_idx.len());
        }
        Self {
            n: self.n,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Keeps the listed rows (renumbered in the given order).
    pub fn select_rows(&self, keep: &[usize]) -> Self {
        let mut remap = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let columns = (0..self.d())
            .map(|j| {
                let (ri, vals) = self.column(j);
                ri.iter()
                    .zip(vals)
                    .filter(|(&i, _)| remap[i] != usize::MAX)
                    .map(|(&i, &v)| (remap[i], v))
                    .collect()
            })
            .collect();
        Self::from_columns(keep.len(), columns).expect("row subset of a valid matrix is valid")
    }
}

/// Observation vector `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labels(Vec<f64>);

impl Labels {
    pub fn new(y: Vec<f64>) -> Self {
        Self(y)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks the label domain required by `loss`: any finite real for
    /// squared loss, exactly `-1` or `+1` for logistic loss.
    pub fn validate_for(&self, loss: Loss) -> Result<(), DataError> {
        for (i, &y) in self.0.iter().enumerate() {
            let ok = match loss {
                Loss::Squared => y.is_finite(),
                Loss::Logistic => y == 1.0 || y == -1.0,
            };
            if !ok {
                return Err(DataError::Domain {
                    sample: i,
                    label: y,
                    loss,
                });
            }
        }
        Ok(())
    }

    pub fn select(&self, keep: &[usize]) -> Self {
        Self(keep.iter().map(|&i| self.0[i]).collect())
    }
}

/// Per-column L2 norms removed by [`normalize_columns`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScales {
    /// Column count before dropping.
    pub original_d: usize,
    /// Original index of every retained column.
    pub kept: Vec<usize>,
    /// Pre-normalization norm of every retained column (same order as `kept`).
    pub scales: Vec<f64>,
    /// Original indices of all-zero columns that were removed.
    pub dropped: Vec<usize>,
}

impl ColumnScales {
    pub fn identity(d: usize) -> Self {
        Self {
            original_d: d,
            kept: (0..d).collect(),
            scales: vec![1.0; d],
            dropped: Vec::new(),
        }
    }

    /// Maps normalized-space weights back to the original columns.
    /// Dropped columns get weight zero.
    pub fn denormalize(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.kept.len());
        let mut out = vec![0.0; self.original_d];
        for ((&j, &s), &w) in self.kept.iter().zip(&self.scales).zip(x) {
            out[j] = w / s;
        }
        out
    }

    /// Per-coordinate penalty weights `lambda * scale_j` that make the
    /// original-space problem equivalent to the normalized one.
    pub fn original_lambdas(&self, lambda: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.original_d];
        for (&j, &s) in self.kept.iter().zip(&self.scales) {
            out[j] = lambda * s;
        }
        out
    }
}

/// Scales every column to unit L2 norm and drops all-zero columns.
pub fn normalize_columns(m: &DesignMatrix) -> (DesignMatrix, ColumnScales) {
    let d = m.d();
    let mut kept = Vec::with_capacity(d);
    let mut scales = Vec::with_capacity(d);
    let mut dropped = Vec::new();
    for j in 0..d {
        let norm = m.col_sq_norm(j).sqrt();
        if norm > 0.0 {
            kept.push(j);
            scales.push(norm);
        } else {
            dropped.push(j);
        }
    }
    let mut out = m.select_columns(&kept);
    for (k, &s) in scales.iter().enumerate() {
        let (lo, hi) = (out.col_ptr[k], out.col_ptr[k + 1]);
        for v in &mut out.values[lo..hi] {
            *v /= s;
        }
    }
    (
        out,
        ColumnScales {
            original_d: d,
            kept,
            scales,
            dropped,
        },
    )
}
