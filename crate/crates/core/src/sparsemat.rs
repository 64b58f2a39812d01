//! Minimal triplet (COO) sparse matrix used to pass Jacobians and KKT blocks
//! around without committing the public API to a particular backend.

/// Sparse matrix in coordinate form. Duplicate entries are additive.
#[derive(Clone, Debug, Default)]
pub struct CooMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl CooMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        CooMatrix { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        CooMatrix { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Sorts entries by (row, col) and sums duplicates in place.
    pub fn canonicalize(&mut self) {
        self.entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(r, c, v) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => out.push((r, c, v)),
            }
        }
        self.entries = out;
    }

    /// Sorted, deduplicated structural pattern.
    pub fn pattern(&self) -> Vec<(usize, usize)> {
        let mut p: Vec<(usize, usize)> = self.entries.iter().map(|&(r, c, _)| (r, c)).collect();
        p.sort_unstable();
        p.dedup();
        p
    }

    /// y += A * x
    pub fn add_mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
    }

    /// y += A^T * x
    pub fn add_mul_vec_transpose(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for &(r, c, v) in &self.entries {
            y[c] += v * x[r];
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.add_mul_vec(x, &mut y);
        y
    }

    /// Dense row-major copy, intended for small matrices in tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for &(r, c, v) in &self.entries {
            d[r][c] += v;
        }
        d
    }

    /// Appends `other` with its rows and columns offset by (row_off, col_off).
    pub fn add_block(&mut self, row_off: usize, col_off: usize, other: &CooMatrix) {
        for &(r, c, v) in &other.entries {
            self.push(row_off + r, col_off + c, v);
        }
    }

    /// Appends the transpose of `other` offset by (row_off, col_off).
    pub fn add_block_transposed(&mut self, row_off: usize, col_off: usize, other: &CooMatrix) {
        for &(r, c, v) in &other.entries {
            self.push(row_off + c, col_off + r, v);
        }
    }
}
