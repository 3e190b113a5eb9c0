use super::element::ElementGeometry;
use super::space::{DofMap, FieldVector, SpaceKind};
use crate::error::Result;
use crate::mesh::MeshLevel;

pub type Mat2 = [[f64; 2]; 2];

pub fn det2(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn inv2(a: &Mat2) -> Mat2 {
    let d = det2(a);
    [[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]]
}

/// Displacement w (linear, vector valued) and the elementwise constant
/// DF = I + Dw with its determinant and inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformState {
    pub w: FieldVector,
    pub df: Vec<Mat2>,
    pub det: Vec<f64>,
    pub df_inv: Vec<Mat2>,
}

/// Dw on one element from the nodal displacement.
pub fn element_dw(w: &[f64], tri: [usize; 3], g: &ElementGeometry) -> Mat2 {
    let mut dw = [[0.0; 2]; 2];
    for (a, &v) in tri.iter().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                dw[i][j] += w[2 * v + i] * g.grad_lambda[a][j];
            }
        }
    }
    dw
}

impl TransformState {
    pub fn identity(mesh: &MeshLevel) -> TransformState {
        let d = DofMap::new(mesh, SpaceKind::P1Vector);
        let ne = mesh.num_triangles();
        TransformState {
            w: FieldVector::zeros(&d),
            df: vec![[[1.0, 0.0], [0.0, 1.0]]; ne],
            det: vec![1.0; ne],
            df_inv: vec![[[1.0, 0.0], [0.0, 1.0]]; ne],
        }
    }

    pub fn min_det(&self) -> f64 {
        self.det.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn inverted_count(&self) -> usize {
        self.det.iter().filter(|&&d| !(d > 0.0)).count()
    }
}

pub fn compute_transform(mesh: &MeshLevel, geom: &[ElementGeometry], w: &FieldVector) -> Result<TransformState> {
    w.check(&DofMap::new(mesh, SpaceKind::P1Vector))?;
    let n = mesh.num_triangles();
    let (mut df, mut det, mut df_inv) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let dw = element_dw(&w.values, *tri, &geom[t]);
        let f = [[1.0 + dw[0][0], dw[0][1]], [dw[1][0], 1.0 + dw[1][1]]];
        det.push(det2(&f));
        df_inv.push(inv2(&f));
        df.push(f);
    }
    Ok(TransformState {
        w: w.clone(),
        df,
        det,
        df_inv,
    })
}
