//! Element kernels and global assembly of the pulled-back variational forms.

use super::element::{p2_basis, p2_gradients, ElementGeometry};
use super::quadrature::{EDGE_G3, TRI_Q4};
use super::space::{DofMap, SpaceKind, TraceSpace};
use super::transform::{element_dw, Mat2, TransformState};
use crate::linalg::{PatternBuilder, SparseMatrix};
use crate::mesh::{Marker, MeshLevel};

pub const NS_LOCAL: usize = 15;
pub const EXT_LOCAL: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsParams {
    pub nu: f64,
    /// 0 drops the convection term (Stokes test hook), 1 keeps it.
    pub convection: f64,
}

impl NsParams {
    pub fn navier_stokes(nu: f64) -> NsParams {
        NsParams { nu, convection: 1.0 }
    }

    pub fn stokes(nu: f64) -> NsParams {
        NsParams { nu, convection: 0.0 }
    }
}

pub fn element_pattern(mesh: &MeshLevel, dofmap: &DofMap) -> SparseMatrix {
    let mut pb = PatternBuilder::new(dofmap.n_dofs, dofmap.n_dofs);
    for t in 0..mesh.num_triangles() {
        let d = dofmap.element_dofs(mesh, t);
        pb.insert_block(&d, &d);
    }
    pb.build()
}

/// Gradient Mᵀ∇φ of a basis function under the pull-back.
#[inline]
pub fn pulled(m: &Mat2, g: [f64; 2]) -> [f64; 2] {
    [m[0][0] * g[0] + m[1][0] * g[1], m[0][1] * g[0] + m[1][1] * g[1]]
}

/// Local velocity/pressure coefficients of triangle `t` in element order.
pub fn gather_mixed(mesh: &MeshLevel, dofmap: &DofMap, t: usize, x: &[f64]) -> ([usize; NS_LOCAL], [f64; NS_LOCAL]) {
    let nodes = DofMap::p2_nodes(mesh, t);
    let tri = mesh.triangles[t];
    let off = dofmap.pressure_offset();
    let mut dofs = [0usize; NS_LOCAL];
    for a in 0..6 {
        dofs[2 * a] = 2 * nodes[a];
        dofs[2 * a + 1] = 2 * nodes[a] + 1;
    }
    for b in 0..3 {
        dofs[12 + b] = off + tri[b];
    }
    let mut xl = [0.0; NS_LOCAL];
    for k in 0..NS_LOCAL {
        xl[k] = x[dofs[k]];
    }
    (dofs, xl)
}

/// Quadrature-point values for the pulled-back flow kernels.
pub struct FlowPoint {
    pub omega: f64,
    pub phi: [f64; 6],
    /// Mᵀ∇φ_a
    pub g: [[f64; 2]; 6],
    /// Reference gradients ∇φ_a
    pub grad: [[f64; 2]; 6],
    pub psi: [f64; 3],
    pub v: [f64; 2],
    /// Dv M
    pub gv: Mat2,
    pub p: f64,
}

pub fn flow_points<'g>(geo: &'g ElementGeometry, m: &Mat2, xl: &[f64; NS_LOCAL]) -> impl Iterator<Item = FlowPoint> + 'g {
    let m = *m;
    let xl = *xl;
    TRI_Q4.iter().map(move |&(lam, wq)| {
        let phi = p2_basis(lam);
        let grad = p2_gradients(lam, &geo.grad_lambda);
        let mut g = [[0.0; 2]; 6];
        let mut v = [0.0; 2];
        let mut gv = [[0.0; 2]; 2];
        for a in 0..6 {
            g[a] = pulled(&m, grad[a]);
            for i in 0..2 {
                let c = xl[2 * a + i];
                v[i] += c * phi[a];
                gv[i][0] += c * g[a][0];
                gv[i][1] += c * g[a][1];
            }
        }
        let p = (0..3).map(|b| xl[12 + b] * lam[b]).sum();
        FlowPoint {
            omega: wq * geo.area,
            phi,
            g,
            grad,
            psi: lam,
            v,
            gv,
            p,
        }
    })
}

/// Residual and (optionally) Jacobian of one element of the pulled-back
/// Navier–Stokes system.
pub fn ns_element(
    geo: &ElementGeometry,
    m: &Mat2,
    d: f64,
    xl: &[f64; NS_LOCAL],
    par: &NsParams,
    res: &mut [f64; NS_LOCAL],
    mut jac: Option<&mut [[f64; NS_LOCAL]; NS_LOCAL]>,
) {
    let (nu, conv) = (par.nu, par.convection);
    for q in flow_points(geo, m, xl) {
        let om = q.omega;
        let div = q.gv[0][0] + q.gv[1][1];
        for a in 0..6 {
            for i in 0..2 {
                let visc = q.gv[i][0] * q.g[a][0] + q.gv[i][1] * q.g[a][1];
                let adv = q.gv[i][0] * q.v[0] + q.gv[i][1] * q.v[1];
                res[2 * a + i] += om * (nu * visc + conv * adv * q.phi[a] - q.p * q.g[a][i] * d);
            }
        }
        for b in 0..3 {
            res[12 + b] -= om * q.psi[b] * div * d;
        }
        if let Some(jac) = jac.as_deref_mut() {
            for a in 0..6 {
                for c in 0..6 {
                    let gg = q.g[c][0] * q.g[a][0] + q.g[c][1] * q.g[a][1];
                    let gvv = q.g[c][0] * q.v[0] + q.g[c][1] * q.v[1];
                    let pp = q.phi[c] * q.phi[a];
                    for i in 0..2 {
                        for k in 0..2 {
                            let delta = if i == k { 1.0 } else { 0.0 };
                            let val = nu * delta * gg + conv * (delta * gvv * q.phi[a] + q.gv[i][k] * pp);
                            jac[2 * a + i][2 * c + k] += om * val;
                        }
                    }
                }
                for b in 0..3 {
                    for i in 0..2 {
                        let val = -om * q.psi[b] * q.g[a][i] * d;
                        jac[2 * a + i][12 + b] += val;
                        jac[12 + b][2 * a + i] += val;
                    }
                }
            }
        }
    }
}

pub fn ns_residual(
    mesh: &MeshLevel,
    geom: &[ElementGeometry],
    dofmap: &DofMap,
    tr: &TransformState,
    x: &[f64],
    par: &NsParams,
) -> Vec<f64> {
    let mut r = vec![0.0; dofmap.n_dofs];
    for t in 0..mesh.num_triangles() {
        let (dofs, xl) = gather_mixed(mesh, dofmap, t, x);
        let mut rl = [0.0; NS_LOCAL];
        ns_element(&geom[t], &tr.df_inv[t], tr.det[t], &xl, par, &mut rl, None);
        for k in 0..NS_LOCAL {
            r[dofs[k]] += rl[k];
        }
    }
    r
}

/// Jacobian on the given pattern (from [`element_pattern`] of the mixed space),
/// together with the residual.
pub fn ns_jacobian(
    mesh: &MeshLevel,
    geom: &[ElementGeometry],
    dofmap: &DofMap,
    tr: &TransformState,
    x: &[f64],
    par: &NsParams,
    pattern: &SparseMatrix,
) -> (SparseMatrix, Vec<f64>) {
    let mut a = pattern.clone();
    a.set_zero();
    let mut r = vec![0.0; dofmap.n_dofs];
    let mut kl = [[0.0; NS_LOCAL]; NS_LOCAL];
    for t in 0..mesh.num_triangles() {
        let (dofs, xl) = gather_mixed(mesh, dofmap, t, x);
        let mut rl = [0.0; NS_LOCAL];
        kl.iter_mut().for_each(|row| row.fill(0.0));
        ns_element(&geom[t], &tr.df_inv[t], tr.det[t], &xl, par, &mut rl, Some(&mut kl));
        for i in 0..NS_LOCAL {
            r[dofs[i]] += rl[i];
            for j in 0..NS_LOCAL {
                a.add(dofs[i], dofs[j], kl[i][j]);
            }
        }
    }
    (a, r)
}

fn p1_local_dofs(tri: [usize; 3]) -> [usize; EXT_LOCAL] {
    [2 * tri[0], 2 * tri[0] + 1, 2 * tri[1], 2 * tri[1] + 1, 2 * tri[2], 2 * tri[2] + 1]
}

/// Element residual/Jacobian of Sym(Dw):Dŵ + η (Dw w)·ŵ.
pub fn extension_element(
    geo: &ElementGeometry,
    wl: &[f64; EXT_LOCAL],
    el: &[f64; 3],
    res: &mut [f64; EXT_LOCAL],
    mut jac: Option<&mut [[f64; EXT_LOCAL]; EXT_LOCAL]>,
) {
    let gl = &geo.grad_lambda;
    let mut dw = [[0.0; 2]; 2];
    for a in 0..3 {
        for i in 0..2 {
            for j in 0..2 {
                dw[i][j] += wl[2 * a + i] * gl[a][j];
            }
        }
    }
    let sym = [
        [dw[0][0], 0.5 * (dw[0][1] + dw[1][0])],
        [0.5 * (dw[0][1] + dw[1][0]), dw[1][1]],
    ];
    let area = geo.area;
    for a in 0..3 {
        for i in 0..2 {
            res[2 * a + i] += area * (sym[i][0] * gl[a][0] + sym[i][1] * gl[a][1]);
        }
    }
    if let Some(jac) = jac.as_deref_mut() {
        for a in 0..3 {
            for c in 0..3 {
                let gg = gl[c][0] * gl[a][0] + gl[c][1] * gl[a][1];
                for i in 0..2 {
                    for k in 0..2 {
                        let delta = if i == k { 1.0 } else { 0.0 };
                        jac[2 * a + i][2 * c + k] += area * 0.5 * (delta * gg + gl[c][i] * gl[a][k]);
                    }
                }
            }
        }
    }
    if el.iter().all(|&e| e == 0.0) {
        return;
    }
    for &(lam, wq) in TRI_Q4.iter() {
        let om = wq * area;
        let h = el[0] * lam[0] + el[1] * lam[1] + el[2] * lam[2];
        if h == 0.0 {
            continue;
        }
        let mut wv = [0.0; 2];
        for a in 0..3 {
            wv[0] += wl[2 * a] * lam[a];
            wv[1] += wl[2 * a + 1] * lam[a];
        }
        let dww = [dw[0][0] * wv[0] + dw[0][1] * wv[1], dw[1][0] * wv[0] + dw[1][1] * wv[1]];
        for a in 0..3 {
            for i in 0..2 {
                res[2 * a + i] += om * h * dww[i] * lam[a];
            }
        }
        if let Some(jac) = jac.as_deref_mut() {
            for a in 0..3 {
                for c in 0..3 {
                    let gw = gl[c][0] * wv[0] + gl[c][1] * wv[1];
                    for i in 0..2 {
                        for k in 0..2 {
                            let delta = if i == k { 1.0 } else { 0.0 };
                            jac[2 * a + i][2 * c + k] += om * h * lam[a] * (delta * gw + dw[i][k] * lam[c]);
                        }
                    }
                }
            }
        }
    }
}

fn gather_ext(tri: [usize; 3], w: &[f64], eta: &[f64]) -> ([usize; EXT_LOCAL], [f64; EXT_LOCAL], [f64; 3]) {
    let dofs = p1_local_dofs(tri);
    let mut wl = [0.0; EXT_LOCAL];
    for k in 0..EXT_LOCAL {
        wl[k] = w[dofs[k]];
    }
    (dofs, wl, [eta[tri[0]], eta[tri[1]], eta[tri[2]]])
}

/// Volume part of the extension residual (boundary load not included).
pub fn extension_residual(mesh: &MeshLevel, geom: &[ElementGeometry], w: &[f64], eta: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; 2 * mesh.num_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (dofs, wl, el) = gather_ext(*tri, w, eta);
        let mut rl = [0.0; EXT_LOCAL];
        extension_element(&geom[t], &wl, &el, &mut rl, None);
        for k in 0..EXT_LOCAL {
            r[dofs[k]] += rl[k];
        }
    }
    r
}

pub fn extension_jacobian(
    mesh: &MeshLevel,
    geom: &[ElementGeometry],
    w: &[f64],
    eta: &[f64],
    pattern: &SparseMatrix,
) -> (SparseMatrix, Vec<f64>) {
    let mut a = pattern.clone();
    a.set_zero();
    let mut r = vec![0.0; 2 * mesh.num_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (dofs, wl, el) = gather_ext(*tri, w, eta);
        let mut rl = [0.0; EXT_LOCAL];
        let mut kl = [[0.0; EXT_LOCAL]; EXT_LOCAL];
        extension_element(&geom[t], &wl, &el, &mut rl, Some(&mut kl));
        for i in 0..EXT_LOCAL {
            r[dofs[i]] += rl[i];
            for j in 0..EXT_LOCAL {
                a.add(dofs[i], dofs[j], kl[i][j]);
            }
        }
    }
    (a, r)
}

/// ∫ φ_b (Dw w)·λ for every vertex b: the η-derivative of the extension
/// residual contracted with λ.
pub fn eta_coupling(mesh: &MeshLevel, geom: &[ElementGeometry], w: &[f64], lambda: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let geo = &geom[t];
        let dw = element_dw(w, *tri, geo);
        for &(lam, wq) in TRI_Q4.iter() {
            let om = wq * geo.area;
            let mut wv = [0.0; 2];
            let mut lv = [0.0; 2];
            for a in 0..3 {
                for i in 0..2 {
                    wv[i] += w[2 * tri[a] + i] * lam[a];
                    lv[i] += lambda[2 * tri[a] + i] * lam[a];
                }
            }
            let dww = [dw[0][0] * wv[0] + dw[0][1] * wv[1], dw[1][0] * wv[0] + dw[1][1] * wv[1]];
            let s = dww[0] * lv[0] + dww[1] * lv[1];
            for b in 0..3 {
                out[tri[b]] += om * s * lam[b];
            }
        }
    }
    out
}

/// Unit normal on an obstacle edge pointing out of the obstacle (into the fluid).
pub fn obstacle_normal(mesh: &MeshLevel, e: &crate::mesh::BoundaryEdge) -> [f64; 2] {
    let n = mesh.outward_normal(e);
    [-n[0], -n[1]]
}

/// B with (B u)_(a,i) = ∫_Γobs u n_i φ_a ds; size 2·nv × trace dofs.
pub fn boundary_coupling(mesh: &MeshLevel, trace: &TraceSpace) -> SparseMatrix {
    let mut t = Vec::new();
    for e in mesh.boundary_edges_with(Marker::Obstacle) {
        let n = obstacle_normal(mesh, e);
        let len = mesh.edge_length(e);
        for (ia, &va) in e.vertices.iter().enumerate() {
            for (ib, &vb) in e.vertices.iter().enumerate() {
                let m = len / 6.0 * if ia == ib { 2.0 } else { 1.0 };
                let kb = trace.index[vb].expect("obstacle vertex in trace space");
                for i in 0..2 {
                    t.push((2 * va + i, kb, m * n[i]));
                }
            }
        }
    }
    SparseMatrix::from_triplets(2 * mesh.num_vertices(), trace.len(), &t)
}

/// L² mass matrix of the trace space on Γobs.
pub fn obstacle_mass(mesh: &MeshLevel, trace: &TraceSpace) -> SparseMatrix {
    let mut t = Vec::new();
    for e in mesh.boundary_edges_with(Marker::Obstacle) {
        let len = mesh.edge_length(e);
        for (ia, &va) in e.vertices.iter().enumerate() {
            for (ib, &vb) in e.vertices.iter().enumerate() {
                let m = len / 6.0 * if ia == ib { 2.0 } else { 1.0 };
                t.push((trace.index[va].unwrap(), trace.index[vb].unwrap(), m));
            }
        }
    }
    SparseMatrix::from_triplets(trace.len(), trace.len(), &t)
}

/// Linear mass matrix on Ω.
pub fn p1_mass(mesh: &MeshLevel, geom: &[ElementGeometry]) -> SparseMatrix {
    let mut a = element_pattern(mesh, &DofMap::new(mesh, SpaceKind::P1Scalar));
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = geom[t].area;
        for i in 0..3 {
            for j in 0..3 {
                a.add(tri[i], tri[j], area / 12.0 * if i == j { 2.0 } else { 1.0 });
            }
        }
    }
    a
}

/// Linear stiffness matrix ∫ ∇φ_i·∇φ_j, the Poisson model operator.
pub fn p1_laplacian(mesh: &MeshLevel, geom: &[ElementGeometry]) -> SparseMatrix {
    let mut a = element_pattern(mesh, &DofMap::new(mesh, SpaceKind::P1Scalar));
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let g = &geom[t];
        for i in 0..3 {
            for j in 0..3 {
                let gg = g.grad_lambda[i][0] * g.grad_lambda[j][0] + g.grad_lambda[i][1] * g.grad_lambda[j][1];
                a.add(tri[i], tri[j], g.area * gg);
            }
        }
    }
    a
}

/// ∫_e f(x) over a boundary edge with the three-point Gauss rule.
pub fn edge_integral(mesh: &MeshLevel, e: &crate::mesh::BoundaryEdge, f: impl Fn([f64; 2]) -> f64) -> f64 {
    let (a, b) = (mesh.vertices[e.vertices[0]], mesh.vertices[e.vertices[1]]);
    let len = mesh.edge_length(e);
    EDGE_G3
        .iter()
        .map(|&(s, w)| w * f([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]))
        .sum::<f64>()
        * len
}
