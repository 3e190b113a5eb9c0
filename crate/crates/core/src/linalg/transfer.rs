//! Prolongation operators between consecutive levels of a [`GridHierarchy`].

use super::sparse::SparseMatrix;
use crate::fem::p2_basis;
use crate::mesh::{GridHierarchy, VertexParent};

#[derive(Debug, Clone)]
pub struct TransferOperator {
    /// n_fine × n_coarse
    pub prolongation: SparseMatrix,
    /// Pᵀ
    pub restriction: SparseMatrix,
}

impl TransferOperator {
    pub fn new(prolongation: SparseMatrix) -> TransferOperator {
        let restriction = prolongation.transpose();
        TransferOperator {
            prolongation,
            restriction,
        }
    }

    pub fn prolong(&self, xc: &[f64]) -> Vec<f64> {
        self.prolongation.mul_vec(xc)
    }

    pub fn restrict(&self, xf: &[f64]) -> Vec<f64> {
        self.restriction.mul_vec(xf)
    }
}

/// Linear interpolation from level `fine - 1` to level `fine`.
pub fn p1_prolongation(h: &GridHierarchy, fine: usize) -> SparseMatrix {
    let nc = h.levels[fine - 1].num_vertices();
    let parents = &h.parent_map[fine - 1];
    let mut t = Vec::with_capacity(2 * parents.len());
    for (v, p) in parents.iter().enumerate() {
        match *p {
            VertexParent::Vertex(c) => t.push((v, c, 1.0)),
            VertexParent::EdgeMidpoint { ends: [a, b], .. } => {
                t.push((v, a, 0.5));
                t.push((v, b, 0.5));
            }
        }
    }
    SparseMatrix::from_triplets(parents.len(), nc, &t)
}

/// Exact interpolation of coarse quadratic fields onto the fine quadratic
/// nodes. Fine vertex nodes coincide with coarse nodes (vertex or edge).
pub fn p2_prolongation(h: &GridHierarchy, fine: usize) -> SparseMatrix {
    let (c, f) = (&h.levels[fine - 1], &h.levels[fine]);
    let (nvc, nvf) = (c.num_vertices(), f.num_vertices());
    let ncn = nvc + c.num_edges();
    let nfn = nvf + f.num_edges();
    debug_assert_eq!(ncn, nvf);
    let mut t: Vec<(usize, usize, f64)> = (0..nvf).map(|i| (i, i, 1.0)).collect();
    let mut done = vec![false; f.num_edges()];
    const B: [[f64; 3]; 6] = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
    ];
    // child vertex positions as indices into B
    const CHILD: [[usize; 3]; 4] = [[0, 3, 5], [1, 4, 3], [2, 5, 4], [3, 4, 5]];
    for (ct, tri) in c.triangles.iter().enumerate() {
        let [e01, e12, e20] = c.triangle_edges[ct];
        let cnodes = [tri[0], tri[1], tri[2], nvc + e01, nvc + e12, nvc + e20];
        for (k, child) in CHILD.iter().enumerate() {
            let ft = 4 * ct + k;
            for le in 0..3 {
                let fe = f.triangle_edges[ft][le];
                if done[fe] {
                    continue;
                }
                done[fe] = true;
                let (a, b) = (B[child[le]], B[child[(le + 1) % 3]]);
                let lam = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])];
                let phi = p2_basis(lam);
                for (n, &val) in phi.iter().enumerate() {
                    if val != 0.0 {
                        t.push((nvf + fe, cnodes[n], val));
                    }
                }
            }
        }
    }
    SparseMatrix::from_triplets(nfn, ncn, &t)
}

/// Interleaved vector version (dof = ncomp·node + comp) of a scalar prolongation.
pub fn vector_prolongation(p: &SparseMatrix, ncomp: usize) -> SparseMatrix {
    let mut t = Vec::with_capacity(ncomp * p.nnz());
    for i in 0..p.nrows {
        let (cols, vals) = p.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            for c in 0..ncomp {
                t.push((ncomp * i + c, ncomp * j + c, v));
            }
        }
    }
    SparseMatrix::from_triplets(ncomp * p.nrows, ncomp * p.ncols, &t)
}

/// Block prolongation for the mixed quadratic-velocity / linear-pressure space.
pub fn mixed_prolongation(h: &GridHierarchy, fine: usize) -> SparseMatrix {
    let pv = vector_prolongation(&p2_prolongation(h, fine), 2);
    let pp = p1_prolongation(h, fine);
    let (rv, cv) = (pv.nrows, pv.ncols);
    let mut t = Vec::with_capacity(pv.nnz() + pp.nnz());
    for i in 0..pv.nrows {
        let (cols, vals) = pv.row(i);
        t.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, j, v)));
    }
    for i in 0..pp.nrows {
        let (cols, vals) = pp.row(i);
        t.extend(cols.iter().zip(vals).map(|(&j, &v)| (rv + i, cv + j, v)));
    }
    SparseMatrix::from_triplets(rv + pp.nrows, cv + pp.ncols, &t)
}
