//! Compressed sparse column matrices, sized for the problems this crate
//! builds (hundreds of rows, a few thousand nonzeros).

use serde::{Deserialize, Serialize};

use crate::error::ConicError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            col_ptr: vec![0; cols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Assembles from triplets. Entries sharing a position are summed, so the
    /// assembled matrix never carries duplicate (row, col) pairs.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, ConicError> {
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(ConicError::DimensionMismatch(format!(
                    "triplet ({r}, {c}) outside {rows}x{cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(ConicError::NonFinite("matrix triplet"));
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> =
            triplets.iter().map(|&(r, c, v)| (c, r, v)).collect();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        // Merge duplicates, then count entries per column.
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(sorted.len());
        for (c, r, v) in sorted {
            match merged.last_mut() {
                Some((lc, lr, lv)) if *lc == c && *lr == r => *lv += v,
                _ => merged.push((c, r, v)),
            }
        }
        let mut col_ptr = vec![0usize; cols + 1];
        for &(c, _, _) in &merged {
            col_ptr[c + 1] += 1;
        }
        for j in 0..cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let (row_idx, values) = merged.iter().map(|&(_, r, v)| (r, v)).unzip();
        Ok(Self {
            rows,
            cols,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_range(&self, j: usize) -> std::ops::Range<usize> {
        self.col_ptr[j]..self.col_ptr[j + 1]
    }

    pub fn entries(&self) -> (&[usize], &[f64]) {
        (&self.row_idx, &self.values)
    }

    /// out = A x
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        out.fill(0.0);
        self.matvec_add(x, out);
    }

    /// out += A x
    pub fn matvec_add(&self, x: &[f64], out: &mut [f64]) {
        for j in 0..self.cols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for k in self.col_range(j) {
                out[self.row_idx[k]] += self.values[k] * xj;
            }
        }
    }

    /// out = A' x
    pub fn matvec_t(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for j in 0..self.cols {
            let mut acc = 0.0;
            for k in self.col_range(j) {
                acc += self.values[k] * x[self.row_idx[k]];
            }
            out[j] = acc;
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        for k in self.col_range(c) {
            if self.row_idx[k] == r {
                return self.values[k];
            }
        }
        0.0
    }

    pub fn iter_triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.cols).flat_map(move |j| {
            self.col_range(j)
                .map(move |k| (self.row_idx[k], j, self.values[k]))
        })
    }

    /// Returns D A E for diagonal scalings given as vectors.
    pub fn scale_rows_cols(&self, d: &[f64], e: &[f64]) -> SparseMatrix {
        debug_assert_eq!(d.len(), self.rows);
        debug_assert_eq!(e.len(), self.cols);
        let mut out = self.clone();
        for j in 0..self.cols {
            for k in out.col_ptr[j]..out.col_ptr[j + 1] {
                out.values[k] *= d[out.row_idx[k]] * e[j];
            }
        }
        out
    }

    /// Applies f to every stored value, keeping the pattern.
    pub fn map_values(&self, f: impl Fn(usize, usize, f64) -> f64) -> SparseMatrix {
        let mut out = self.clone();
        for j in 0..self.cols {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                out.values[k] = f(self.row_idx[k], j, self.values[k]);
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cols]; self.rows];
        for (r, c, v) in self.iter_triplets() {
            d[r][c] = v;
        }
        d
    }

    /// Infinity norms of the rows.
    pub fn row_inf_norms(&self) -> Vec<f64> {
        let mut norms = vec![0.0f64; self.rows];
        for k in 0..self.values.len() {
            let r = self.row_idx[k];
            norms[r] = norms[r].max(self.values[k].abs());
        }
        norms
    }

    /// Infinity norms of the columns.
    pub fn col_inf_norms(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| {
                self.col_range(j)
                    .map(|k| self.values[k].abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}
