//! Affine triangle geometry and Lagrange shape functions.

use crate::mesh::{MeshLevel, Point};

/// Constant data of one affine triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
    pub centroid: Point,
}

impl ElementGeometry {
    pub fn new(p: [Point; 3]) -> ElementGeometry {
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let inv = 1.0 / det;
        let grad_lambda = [
            [(p[1][1] - p[2][1]) * inv, (p[2][0] - p[1][0]) * inv],
            [(p[2][1] - p[0][1]) * inv, (p[0][0] - p[2][0]) * inv],
            [(p[0][1] - p[1][1]) * inv, (p[1][0] - p[0][0]) * inv],
        ];
        ElementGeometry {
            area: 0.5 * det,
            grad_lambda,
            centroid: [
                (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                (p[0][1] + p[1][1] + p[2][1]) / 3.0,
            ],
        }
    }
}

pub fn mesh_geometry(mesh: &MeshLevel) -> Vec<ElementGeometry> {
    mesh.triangles
        .iter()
        .map(|t| ElementGeometry::new([mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]]))
        .collect()
}

/// Quadratic Lagrange basis at barycentric point `l`; nodes are the three
/// vertices followed by the edge midpoints (0,1), (1,2), (2,0).
pub fn p2_basis(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Physical gradients of the quadratic basis.
pub fn p2_gradients(l: [f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let comb = |a: f64, i: usize, b: f64, j: usize| [a * g[i][0] + b * g[j][0], a * g[i][1] + b * g[j][1]];
    let vert = |i: usize| {
        let c = 4.0 * l[i] - 1.0;
        [c * g[i][0], c * g[i][1]]
    };
    [
        vert(0),
        vert(1),
        vert(2),
        comb(4.0 * l[1], 0, 4.0 * l[0], 1),
        comb(4.0 * l[2], 1, 4.0 * l[1], 2),
        comb(4.0 * l[0], 2, 4.0 * l[2], 0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p2_partition_of_unity_and_nodality() {
        let nodes = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
        ];
        for (k, &l) in nodes.iter().enumerate() {
            let phi = p2_basis(l);
            for (j, &v) in phi.iter().enumerate() {
                assert_eq!(v, if j == k { 1.0 } else { 0.0 });
            }
        }
        let g = ElementGeometry::new([[0.0, 0.0], [2.0, 0.1], [0.3, 1.5]]);
        let grads = p2_gradients([0.2, 0.3, 0.5], &g.grad_lambda);
        let sx: f64 = grads.iter().map(|d| d[0]).sum();
        let sy: f64 = grads.iter().map(|d| d[1]).sum();
        assert!(sx.abs() < 1e-13 && sy.abs() < 1e-13);
    }

    #[test]
    fn p2_gradient_matches_fd() {
        let p = [[0.1, -0.2], [1.3, 0.2], [0.4, 1.1]];
        let g = ElementGeometry::new(p);
        let bary = |x: [f64; 2]| {
            let l1 = g.grad_lambda[1][0] * (x[0] - p[0][0]) + g.grad_lambda[1][1] * (x[1] - p[0][1]);
            let l2 = g.grad_lambda[2][0] * (x[0] - p[0][0]) + g.grad_lambda[2][1] * (x[1] - p[0][1]);
            [1.0 - l1 - l2, l1, l2]
        };
        let x = [0.5, 0.3];
        let grads = p2_gradients(bary(x), &g.grad_lambda);
        let h = 1e-6;
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (fp, fm) = (p2_basis(bary(xp)), p2_basis(bary(xm)));
            for n in 0..6 {
                assert!(((fp[n] - fm[n]) / (2.0 * h) - grads[n][k]).abs() < 1e-8);
            }
        }
    }
}
