//! Sparse LU backed by faer.

use faer::linalg::solvers::Solve;
use std::sync::Mutex;

use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::Mat;

use super::sparse::{norm2, SparseMatrix};
use crate::error::{Error, Result};

/// Factorization of a square [`SparseMatrix`]; solves with A and Aᵀ.
pub struct DirectSolver {
    n: usize,
    // The CSR arrays of A are the CSC arrays of Aᵀ, so `lu` factors Aᵀ.
    lu: Option<Lu<usize, f64>>,
}

impl std::fmt::Debug for DirectSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirectSolver").field("n", &self.n).finish()
    }
}

struct PatternEntry {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    symbolic: SymbolicLu<usize>,
}

/// Symbolic factorizations of recently seen sparsity patterns.
static SYMBOLIC_CACHE: Mutex<Vec<PatternEntry>> = Mutex::new(Vec::new());
const SYMBOLIC_CACHE_LEN: usize = 4;

fn symbolic_for(a: &SparseMatrix, sym: SymbolicSparseColMatRef<'_, usize>) -> Result<SymbolicLu<usize>> {
    let mut cache = SYMBOLIC_CACHE.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(i) = cache.iter().position(|e| e.row_ptr == a.row_ptr && e.col_idx == a.col_idx) {
        let e = cache.remove(i);
        let s = e.symbolic.clone();
        cache.push(e);
        return Ok(s);
    }
    let symbolic =
        SymbolicLu::try_new(sym).map_err(|e| Error::SingularMatrix(format!("sparse LU analysis failed: {e:?}")))?;
    if cache.len() == SYMBOLIC_CACHE_LEN {
        cache.remove(0);
    }
    cache.push(PatternEntry {
        row_ptr: a.row_ptr.clone(),
        col_idx: a.col_idx.clone(),
        symbolic: symbolic.clone(),
    });
    Ok(symbolic)
}

impl DirectSolver {
    pub fn factor(a: &SparseMatrix) -> Result<DirectSolver> {
        if !a.is_square() {
            return Err(Error::InvalidArgument("direct solver needs a square matrix".into()));
        }
        let n = a.nrows;
        if n == 0 {
            return Ok(DirectSolver { n, lu: None });
        }
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &a.row_ptr, None, &a.col_idx);
        let symbolic = symbolic_for(a, sym)?;
        let mat = SparseColMatRef::new(sym, &a.vals);
        let lu = Lu::try_new_with_symbolic(symbolic, mat)
            .map_err(|e| Error::SingularMatrix(format!("sparse LU failed: {e:?}")))?;
        Ok(DirectSolver { n, lu: Some(lu) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn run(&self, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.n);
        let Some(lu) = &self.lu else {
            return Ok(Vec::new());
        };
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        if transpose {
            lu.solve_in_place(rhs.as_mut());
        } else {
            lu.solve_transpose_in_place(rhs.as_mut());
        }
        let x: Vec<f64> = (0..self.n).map(|i| rhs[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix("non-finite solution from sparse LU".into()));
        }
        Ok(x)
    }

    /// x with A x = b.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.run(b, false)
    }

    /// x with Aᵀ x = b.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.run(b, true)
    }
}

/// One-shot sparse LU solve with a residual check.
pub fn lu_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let x = DirectSolver::factor(a)?.solve(b)?;
    let mut r = a.mul_vec(&x);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri -= bi);
    let (rn, bn) = (norm2(&r), norm2(b));
    if rn > 1e-6 * bn.max(f64::MIN_POSITIVE) && rn > 1e-300 {
        return Err(Error::SingularMatrix(format!("LU residual {rn:e} for |b| = {bn:e}")));
    }
    Ok(x)
}
