use super::{Marker, MeshLevel};
use crate::error::{Error, Result};

/// Origin of a fine-level vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexParent {
    Vertex(usize),
    /// Midpoint of coarse edge `edge` with end points `ends`.
    EdgeMidpoint { edge: usize, ends: [usize; 2] },
}

/// Uniformly red-refined meshes, coarse to fine.
///
/// Fine vertex numbering keeps the coarse vertices first and appends one
/// midpoint per coarse edge in edge order, so fine vertex `nv_c + e` is the
/// midpoint of coarse edge `e`. Child triangle `4 t + c` (c = 0..4) lies in
/// coarse triangle `t`; children 0, 1, 2 contain local coarse vertex `c` and
/// child 3 is the central one.
#[derive(Debug, Clone)]
pub struct GridHierarchy {
    pub levels: Vec<MeshLevel>,
    /// `parent_map[l - 1][v]` describes fine vertex `v` of level `l`.
    pub parent_map: Vec<Vec<VertexParent>>,
}

impl GridHierarchy {
    pub fn new(base: MeshLevel) -> GridHierarchy {
        let mut base = base;
        base.level_index = 0;
        GridHierarchy {
            levels: vec![base],
            parent_map: Vec::new(),
        }
    }

    pub fn with_refinements(base: MeshLevel, refinements: usize) -> GridHierarchy {
        let mut h = GridHierarchy::new(base);
        for _ in 0..refinements {
            h = h.refine_uniform().expect("hierarchy is nonempty");
        }
        h
    }

    pub fn refinement_count(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn finest(&self) -> &MeshLevel {
        self.levels.last().expect("hierarchy is nonempty")
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Appends one red-refined level.
    pub fn refine_uniform(mut self) -> Result<GridHierarchy> {
        let coarse = self
            .levels
            .last()
            .ok_or_else(|| Error::InvalidArgument("empty hierarchy".into()))?;
        let (fine, parents) = refine_once(coarse)?;
        self.levels.push(fine);
        self.parent_map.push(parents);
        Ok(self)
    }
}

fn refine_once(c: &MeshLevel) -> Result<(MeshLevel, Vec<VertexParent>)> {
    let nv = c.num_vertices();
    let mut vertices = c.vertices.clone();
    vertices.reserve(c.num_edges());
    let mut parents: Vec<VertexParent> = (0..nv).map(VertexParent::Vertex).collect();
    for e in 0..c.num_edges() {
        vertices.push(c.edge_midpoint(e));
        parents.push(VertexParent::EdgeMidpoint {
            edge: e,
            ends: c.edges[e],
        });
    }
    let mut triangles = Vec::with_capacity(4 * c.num_triangles());
    for (t, tri) in c.triangles.iter().enumerate() {
        let [e01, e12, e20] = c.triangle_edges[t];
        let (m01, m12, m20) = (nv + e01, nv + e12, nv + e20);
        triangles.push([tri[0], m01, m20]);
        triangles.push([tri[1], m12, m01]);
        triangles.push([tri[2], m20, m12]);
        triangles.push([m01, m12, m20]);
    }
    let mut boundary: Vec<([usize; 2], Marker)> = Vec::with_capacity(2 * c.boundary_edges.len());
    for be in &c.boundary_edges {
        let m = nv + be.edge;
        boundary.push(([be.vertices[0], m], be.marker));
        boundary.push(([m, be.vertices[1]], be.marker));
    }
    let fine = MeshLevel::new(vertices, triangles, boundary, c.level_index + 1)?;
    Ok((fine, parents))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_reference_mesh, DomainSpec};

    #[test]
    fn one_triangle_to_four() {
        let m = MeshLevel::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![([0, 1], Marker::Wall), ([1, 2], Marker::Outflow), ([2, 0], Marker::Inflow)],
            0,
        )
        .unwrap();
        let h = GridHierarchy::new(m).refine_uniform().unwrap();
        let f = h.finest();
        assert_eq!(f.num_triangles(), 4);
        assert_eq!(f.num_vertices(), 6);
        assert_eq!(h.parent_map[0].iter().filter(|p| matches!(p, VertexParent::EdgeMidpoint { .. })).count(), 3);
        assert!((f.fluid_area() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn markers_inherited_and_area_preserved() {
        let base = generate_reference_mesh(&DomainSpec::square_obstacle(), 120).unwrap();
        let h = GridHierarchy::with_refinements(base, 2);
        for l in 1..h.num_levels() {
            let (c, f) = (&h.levels[l - 1], &h.levels[l]);
            assert_eq!(f.num_triangles(), 4 * c.num_triangles());
            assert!((f.fluid_area() - c.fluid_area()).abs() <= 1e-12 * c.fluid_area());
            for mk in Marker::ALL {
                assert_eq!(f.boundary_edges_with(mk).count(), 2 * c.boundary_edges_with(mk).count());
            }
            for (v, p) in h.parent_map[l - 1].iter().enumerate() {
                match *p {
                    VertexParent::Vertex(cv) => assert_eq!(f.vertices[v], c.vertices[cv]),
                    VertexParent::EdgeMidpoint { ends: [a, b], .. } => {
                        let (pa, pb) = (c.vertices[a], c.vertices[b]);
                        assert_eq!(f.vertices[v], [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                    }
                }
            }
        }
    }
}
