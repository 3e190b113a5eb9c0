use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmootherKind {
    Jacobi { omega: f64 },
    Ilu0,
}

/// Incomplete LU factorization on the pattern of A, unit lower factor.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: SparseMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn factor(a: &SparseMatrix) -> Result<Ilu0> {
        let n = a.nrows;
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            diag[i] = lu.find(i, i).ok_or(Error::ZeroPivot(i))?;
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (s, e) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in s..e {
                pos[lu.col_idx[k]] = k;
            }
            for kk in s..e {
                let k = lu.col_idx[kk];
                if k >= i {
                    break;
                }
                let piv = lu.vals[diag[k]];
                let f = lu.vals[kk] / piv;
                lu.vals[kk] = f;
                if f == 0.0 {
                    continue;
                }
                for m in diag[k] + 1..lu.row_ptr[k + 1] {
                    let p = pos[lu.col_idx[m]];
                    if p != usize::MAX {
                        lu.vals[p] -= f * lu.vals[m];
                    }
                }
            }
            for k in s..e {
                pos[lu.col_idx[k]] = usize::MAX;
            }
            let d = lu.vals[diag[i]];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::ZeroPivot(i));
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    /// (LU)⁻¹ r
    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let lu = &self.lu;
        let mut y = r.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in lu.row_ptr[i]..self.diag[i] {
                s -= lu.vals[k] * y[lu.col_idx[k]];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in self.diag[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.vals[k] * y[lu.col_idx[k]];
            }
            y[i] = s / lu.vals[self.diag[i]];
        }
        y
    }
}

#[derive(Debug, Clone)]
pub enum Smoother {
    Jacobi { omega: f64, inv_diag: Vec<f64> },
    Ilu0(Ilu0),
}

impl Smoother {
    pub fn new(kind: SmootherKind, a: &SparseMatrix) -> Result<Smoother> {
        match kind {
            SmootherKind::Jacobi { omega } => {
                let inv_diag = a
                    .diagonal()
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| if d == 0.0 { Err(Error::ZeroDiagonal(i)) } else { Ok(1.0 / d) })
                    .collect::<Result<_>>()?;
                Ok(Smoother::Jacobi { omega, inv_diag })
            }
            SmootherKind::Ilu0 => Ok(Smoother::Ilu0(Ilu0::factor(a)?)),
        }
    }

    /// `sweeps` steps of x ← x + S(b − Ax).
    pub fn smooth(&self, a: &SparseMatrix, x: &mut [f64], b: &[f64], sweeps: usize) {
        let mut r = vec![0.0; b.len()];
        for _ in 0..sweeps {
            a.mul_vec_into(x, &mut r);
            r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
            match self {
                Smoother::Jacobi { omega, inv_diag } => {
                    for i in 0..x.len() {
                        x[i] += omega * inv_diag[i] * r[i];
                    }
                }
                Smoother::Ilu0(ilu) => {
                    let c = ilu.solve(&r);
                    x.iter_mut().zip(&c).for_each(|(xi, ci)| *xi += ci);
                }
            }
        }
    }
}

pub fn smoother_apply(kind: SmootherKind, a: &SparseMatrix, x: &[f64], b: &[f64], sweeps: usize) -> Result<Vec<f64>> {
    let s = Smoother::new(kind, a)?;
    let mut x = x.to_vec();
    s.smooth(a, &mut x, b, sweeps);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_one_by_one_exact() {
        let a = SparseMatrix::from_dense(&[vec![4.0]]);
        let x = smoother_apply(SmootherKind::Jacobi { omega: 1.0 }, &a, &[0.0], &[2.0], 1).unwrap();
        assert_eq!(x, vec![0.5]);
    }

    #[test]
    fn ilu_of_triangular_is_exact() {
        let a = SparseMatrix::from_dense(&[
            vec![2.0, 0.0, 0.0],
            vec![1.0, 3.0, 0.0],
            vec![-1.0, 2.0, 4.0],
        ]);
        let b = vec![2.0, 5.0, 9.0];
        let x = smoother_apply(SmootherKind::Ilu0, &a, &[0.0; 3], &b, 1).unwrap();
        let r = a.mul_vec(&x);
        for i in 0..3 {
            assert!((r[i] - b[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_diagonal_and_pivot_errors() {
        let a = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(matches!(Smoother::new(SmootherKind::Jacobi { omega: 0.66 }, &a), Err(Error::ZeroDiagonal(0))));
        assert!(matches!(Ilu0::factor(&a), Err(Error::ZeroPivot(0))));
    }
}
