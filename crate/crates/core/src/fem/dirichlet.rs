use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Prescribed values for a set of dofs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirichletBc {
    pub values: BTreeMap<usize, f64>,
}

impl DirichletBc {
    /// Repeated dofs must carry identical values.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<DirichletBc> {
        let mut values = BTreeMap::new();
        for (dof, v) in pairs {
            if let Some(&prev) = values.get(&dof) {
                if prev != v {
                    return Err(Error::ConflictingDirichlet {
                        dof,
                        first: prev,
                        second: v,
                    });
                }
            }
            values.insert(dof, v);
        }
        Ok(DirichletBc { values })
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &d in self.values.keys() {
            m[d] = true;
        }
        m
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Imposes the values by symmetric elimination: constrained rows and
/// columns become identity, the known column contributions move to the
/// right-hand side. The pattern is kept.
pub fn apply_dirichlet(a: &mut SparseMatrix, rhs: &mut [f64], bc: &DirichletBc) -> Result<()> {
    let n = a.nrows;
    if let Some((&d, _)) = bc.values.iter().next_back() {
        if d >= n {
            return Err(Error::InvalidArgument(format!("Dirichlet dof {d} out of range {n}")));
        }
    }
    if bc.is_empty() {
        return Ok(());
    }
    let mut val = vec![None; n];
    for (&d, &v) in &bc.values {
        val[d] = Some(v);
    }
    for i in 0..n {
        let (s, e) = (a.row_ptr[i], a.row_ptr[i + 1]);
        if let Some(vi) = val[i] {
            for k in s..e {
                a.vals[k] = if a.col_idx[k] == i { 1.0 } else { 0.0 };
            }
            rhs[i] = vi;
        } else {
            for k in s..e {
                if let Some(vj) = val[a.col_idx[k]] {
                    rhs[i] -= a.vals[k] * vj;
                    a.vals[k] = 0.0;
                }
            }
        }
    }
    for &d in bc.values.keys() {
        if a.find(d, d).is_none() {
            return Err(Error::InvalidArgument(format!("row {d} has no diagonal entry")));
        }
    }
    Ok(())
}

/// Zeros constrained rows and columns of a Jacobian and puts one on their
/// diagonal.
pub fn constrain_homogeneous(a: &mut SparseMatrix, fixed: &[bool]) {
    for i in 0..a.nrows {
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            let j = a.col_idx[k];
            if fixed[i] || fixed[j] {
                a.vals[k] = if i == j { 1.0 } else { 0.0 };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conflicting_values_rejected() {
        let e = DirichletBc::from_pairs([(1, 0.5), (1, 0.25)]).unwrap_err();
        assert!(matches!(e, Error::ConflictingDirichlet { dof: 1, .. }));
        assert!(DirichletBc::from_pairs([(1, 0.5), (1, 0.5)]).is_ok());
    }

    #[test]
    fn all_dofs_fixed() {
        let mut a = SparseMatrix::from_dense(&[vec![2.0, -1.0], vec![-1.0, 2.0]]);
        let mut b = vec![1.0, 1.0];
        let bc = DirichletBc::from_pairs([(0, 3.0), (1, -4.0)]).unwrap();
        apply_dirichlet(&mut a, &mut b, &bc).unwrap();
        let x = crate::linalg::lu_solve(&a, &b).unwrap();
        assert_eq!(x, vec![3.0, -4.0]);
    }

    #[test]
    fn empty_bc_is_noop() {
        let a0 = SparseMatrix::from_dense(&[vec![2.0, -1.0], vec![-1.0, 2.0]]);
        let mut a = a0.clone();
        let mut b = vec![1.0, 2.0];
        apply_dirichlet(&mut a, &mut b, &DirichletBc::default()).unwrap();
        assert_eq!(a, a0);
        assert_eq!(b, vec![1.0, 2.0]);
    }
}
