use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted, unique column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

/// Row-wise sparsity pattern accumulator.
#[derive(Debug, Clone)]
pub struct PatternBuilder {
    nrows: usize,
    ncols: usize,
    rows: Vec<Vec<usize>>,
}

impl PatternBuilder {
    pub fn new(nrows: usize, ncols: usize) -> PatternBuilder {
        PatternBuilder {
            nrows,
            ncols,
            rows: vec![Vec::new(); nrows],
        }
    }

    pub fn insert(&mut self, i: usize, j: usize) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.rows[i].push(j);
    }

    /// All pairs of `dofs` (a dense element block).
    pub fn insert_block(&mut self, rows: &[usize], cols: &[usize]) {
        for &i in rows {
            self.rows[i].extend_from_slice(cols);
        }
    }

    pub fn build(self) -> SparseMatrix {
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for mut r in self.rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            vals: vec![0.0; nnz],
        }
    }
}

impl SparseMatrix {
    pub fn identity(n: usize) -> SparseMatrix {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    /// Sums duplicate entries.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> SparseMatrix {
        let mut pb = PatternBuilder::new(nrows, ncols);
        for &(i, j, _) in triplets {
            pb.insert(i, j);
        }
        let mut m = pb.build();
        for &(i, j, v) in triplets {
            m.add(i, j, v);
        }
        m
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> SparseMatrix {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        let mut t = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        SparseMatrix::from_triplets(n, m, &t)
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.vals[r])
    }

    /// Storage position of entry (i, j), if present in the pattern.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e].binary_search(&j).ok().map(|k| s + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.find(i, j).map_or(0.0, |k| self.vals[k])
    }

    /// Adds to an existing pattern entry. Panics if (i, j) is not stored.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        match self.find(i, j) {
            Some(k) => self.vals[k] += v,
            None => panic!("entry ({i}, {j}) not in sparsity pattern"),
        }
    }

    pub fn set_zero(&mut self) {
        self.vals.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// y = Aᵀ x
    pub fn mul_vec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.vals[k] * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut count = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            count[j + 1] += 1;
        }
        for j in 0..self.ncols {
            count[j + 1] += count[j];
        }
        let row_ptr = count.clone();
        let mut next = count;
        let mut col_idx = vec![0; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let p = next[j];
                col_idx[p] = i;
                vals[p] = self.vals[k];
                next[j] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            vals,
        }
    }

    /// max |A - Aᵀ| over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m = m.max((v - self.get(j, i)).abs());
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }

    /// MatrixMarket coordinate dump (1-based indices).
    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let mut s = String::with_capacity(24 * self.nnz() + 64);
        s.push_str("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
            }
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
