//! Compressed sparse column storage for the data matrix of smooth objectives.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Sparse `nrows x ncols` matrix in compressed-column layout.
///
/// Column `j` owns the entries `col_ptr[j]..col_ptr[j + 1]` of `row_idx` / `values`,
/// with row indices strictly increasing inside a column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Builds a matrix from per-column `(row, value)` lists. Rows must be strictly
    /// increasing inside each column and smaller than `nrows`.
    pub fn from_columns(nrows: usize, columns: Vec<Vec<(usize, f64)>>) -> Self {
        let ncols = columns.len();
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for col in columns {
            let mut last = None;
            for (r, v) in col {
                assert!(r < nrows, "row index {r} out of bounds for {nrows} rows");
                assert!(last.is_none_or(|l| l < r), "row indices must increase within a column");
                last = Some(r);
                row_idx.push(r);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        Self { nrows, ncols, col_ptr, row_idx, values }
    }

    pub fn from_dense(dense: &DMatrix<f64>) -> Self {
        let columns = (0..dense.ncols())
            .map(|j| (0..dense.nrows()).filter(|&i| dense[(i, j)] != 0.0).map(|i| (i, dense[(i, j)])).collect())
            .collect();
        Self::from_columns(dense.nrows(), columns)
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_columns(nrows, vec![Vec::new(); ncols])
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterator over the `(row, value)` pairs stored in column `j`.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.nrows);
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for (i, v) in self.column(j) {
                out[i] += v * xj;
            }
        }
        out
    }

    /// `Aᵀ w`.
    pub fn tr_mul_vec(&self, w: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.ncols, (0..self.ncols).map(|j| self.column_dot(j, w)))
    }

    /// `⟨A^{(j)}, w⟩` for column `j`.
    pub fn column_dot(&self, j: usize, w: &DVector<f64>) -> f64 {
        self.column(j).map(|(i, v)| v * w[i]).sum()
    }

    pub fn column_norm_sq(&self, j: usize) -> f64 {
        self.column(j).map(|(_, v)| v * v).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            for (i, v) in self.column(j) {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// Maximum squared Euclidean column norm, `max_k ‖A^{(k)}‖²`.
///
/// This is the smoothness estimate used for the log-sum-exp benchmark objective.
/// Returns 0 for a matrix without stored entries.
pub fn estimate_lf(a: &CscMatrix) -> f64 {
    (0..a.ncols()).map(|j| a.column_norm_sq(j)).fold(0.0, f64::max)
}
