//! Scalar functionals of the objective and the geometric constraints.

use super::element::ElementGeometry;
use super::forms::{flow_points, gather_mixed, NS_LOCAL};
use super::space::DofMap;
use super::transform::TransformState;
use crate::linalg::{dot, SparseMatrix};
use crate::mesh::MeshLevel;

/// j = ν ∫ |Dv (DF)⁻¹|² det(DF) dx
pub fn dissipation(mesh: &MeshLevel, geom: &[ElementGeometry], dofmap: &DofMap, tr: &TransformState, x: &[f64], nu: f64) -> f64 {
    let mut j = 0.0;
    for t in 0..mesh.num_triangles() {
        let (_, xl) = gather_mixed(mesh, dofmap, t, x);
        let d = tr.det[t];
        for q in flow_points(&geom[t], &tr.df_inv[t], &xl) {
            let s = q.gv[0][0].powi(2) + q.gv[0][1].powi(2) + q.gv[1][0].powi(2) + q.gv[1][1].powi(2);
            j += q.omega * nu * s * d;
        }
    }
    j
}

/// ∂j/∂x over the mixed space (pressure entries zero).
pub fn dissipation_gradient(
    mesh: &MeshLevel,
    geom: &[ElementGeometry],
    dofmap: &DofMap,
    tr: &TransformState,
    x: &[f64],
    nu: f64,
) -> Vec<f64> {
    let mut g = vec![0.0; dofmap.n_dofs];
    for t in 0..mesh.num_triangles() {
        let (dofs, xl) = gather_mixed(mesh, dofmap, t, x);
        let d = tr.det[t];
        let mut gl = [0.0; NS_LOCAL];
        for q in flow_points(&geom[t], &tr.df_inv[t], &xl) {
            for a in 0..6 {
                for i in 0..2 {
                    gl[2 * a + i] += q.omega * 2.0 * nu * d * (q.gv[i][0] * q.g[a][0] + q.gv[i][1] * q.g[a][1]);
                }
            }
        }
        for k in 0..12 {
            g[dofs[k]] += gl[k];
        }
    }
    g
}

/// β/2 Σ_K |K| ((b − det DF)⁺)²
pub fn det_penalty(geom: &[ElementGeometry], tr: &TransformState, b: f64, beta: f64) -> f64 {
    geom.iter()
        .zip(&tr.det)
        .map(|(g, &d)| {
            let s = (b - d).max(0.0);
            0.5 * beta * g.area * s * s
        })
        .sum()
}

/// α/2 uᵀ M_Γ u
pub fn control_regularization(mass_gamma: &SparseMatrix, u: &[f64], alpha: f64) -> f64 {
    0.5 * alpha * dot(u, &mass_gamma.mul_vec(u))
}

/// θ/2 ‖η − mid‖²_{L²(Ω)}
pub fn eta_regularization(mass_omega: &SparseMatrix, eta: &[f64], mid: f64, theta: f64) -> f64 {
    let e: Vec<f64> = eta.iter().map(|v| v - mid).collect();
    0.5 * theta * dot(&e, &mass_omega.mul_vec(&e))
}

/// g(w) = (∫ det DF − 1, ∫ F(x) det DF) on the reference mesh, exact for
/// linear w.
pub fn geometric_constraints(mesh: &MeshLevel, geom: &[ElementGeometry], tr: &TransformState) -> [f64; 3] {
    let w = &tr.w.values;
    let mut g = [0.0; 3];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let k = geom[t].area;
        let d = tr.det[t];
        g[0] += k * (d - 1.0);
        for i in 0..2 {
            let wbar = (w[2 * tri[0] + i] + w[2 * tri[1] + i] + w[2 * tri[2] + i]) / 3.0;
            g[1 + i] += d * k * (geom[t].centroid[i] + wbar);
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{compute_transform, mesh_geometry, FieldVector, SpaceKind};
    use crate::mesh::Marker;

    fn unit_square(n: usize) -> MeshLevel {
        let mut v = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                v.push([i as f64 / n as f64, j as f64 / n as f64]);
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut t = Vec::new();
        for j in 0..n {
            for i in 0..n {
                t.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                t.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let mut b = Vec::new();
        for i in 0..n {
            b.push(([id(i, 0), id(i + 1, 0)], Marker::Wall));
            b.push(([id(i, n), id(i + 1, n)], Marker::Wall));
            b.push(([id(0, i), id(0, i + 1)], Marker::Inflow));
            b.push(([id(n, i), id(n, i + 1)], Marker::Outflow));
        }
        MeshLevel::new(v, t, b, 0).unwrap()
    }

    #[test]
    fn dissipation_of_shear_flow() {
        let m = unit_square(3);
        let geom = mesh_geometry(&m);
        let d = DofMap::new(&m, SpaceKind::Mixed);
        let mut x = vec![0.0; d.n_dofs];
        for node in 0..d.num_p2_nodes() {
            let p = if node < m.num_vertices() { m.vertices[node] } else { m.edge_midpoint(node - m.num_vertices()) };
            x[2 * node] = p[1];
        }
        let tr = crate::fem::TransformState::identity(&m);
        let j = dissipation(&m, &geom, &d, &tr, &x, 0.1);
        assert!((j - 0.1).abs() < 1e-13);
        assert_eq!(dissipation(&m, &geom, &d, &tr, &vec![0.0; d.n_dofs], 0.1), 0.0);
    }

    #[test]
    fn affine_scaling_volume_and_translation_barycenter() {
        let m = unit_square(4);
        let geom = mesh_geometry(&m);
        let dm = DofMap::new(&m, SpaceKind::P1Vector);
        let area = m.fluid_area();
        let g0 = geometric_constraints(&m, &geom, &crate::fem::TransformState::identity(&m));
        let w: Vec<f64> = m.vertices.iter().flat_map(|p| [0.1 * p[0], 0.1 * p[1]]).collect();
        let tr = compute_transform(&m, &geom, &FieldVector::new(&dm, w).unwrap()).unwrap();
        assert!(tr.det.iter().all(|&d| (d - 1.21).abs() < 1e-14));
        let g = geometric_constraints(&m, &geom, &tr);
        assert!((g[0] - g0[0] - 0.21 * area).abs() < 1e-12);
        let t = [0.3, -0.2];
        let w: Vec<f64> = m.vertices.iter().flat_map(|_| t).collect();
        let tr = compute_transform(&m, &geom, &FieldVector::new(&dm, w).unwrap()).unwrap();
        let g = geometric_constraints(&m, &geom, &tr);
        assert!((g[0] - g0[0]).abs() < 1e-14);
        for i in 0..2 {
            assert!((g[1 + i] - g0[1 + i] - t[i] * area).abs() < 1e-12);
        }
    }
}
