//! Degree-of-freedom layouts and tagged coefficient vectors.

use crate::error::{Error, Result};
use crate::mesh::{Marker, MeshLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    P1Scalar,
    /// dof = 2·vertex + component
    P1Vector,
    /// dof = 2·node + component, node = vertex or nv + edge
    P2Vector,
    /// P2Vector block followed by P1 pressure dofs (offset + vertex)
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    pub kind: SpaceKind,
    pub nv: usize,
    pub ne: usize,
    pub n_dofs: usize,
}

impl DofMap {
    pub fn new(mesh: &MeshLevel, kind: SpaceKind) -> DofMap {
        let (nv, ne) = (mesh.num_vertices(), mesh.num_edges());
        let n_dofs = match kind {
            SpaceKind::P1Scalar => nv,
            SpaceKind::P1Vector => 2 * nv,
            SpaceKind::P2Vector => 2 * (nv + ne),
            SpaceKind::Mixed => 2 * (nv + ne) + nv,
        };
        DofMap { kind, nv, ne, n_dofs }
    }

    pub fn num_p2_nodes(&self) -> usize {
        self.nv + self.ne
    }

    /// First pressure dof of the mixed space.
    pub fn pressure_offset(&self) -> usize {
        2 * (self.nv + self.ne)
    }

    pub fn p2_nodes(mesh: &MeshLevel, t: usize) -> [usize; 6] {
        let tri = mesh.triangles[t];
        let e = mesh.triangle_edges[t];
        let nv = mesh.num_vertices();
        [tri[0], tri[1], tri[2], nv + e[0], nv + e[1], nv + e[2]]
    }

    /// Local-to-global dofs of triangle `t`, vector components interleaved.
    pub fn element_dofs(&self, mesh: &MeshLevel, t: usize) -> Vec<usize> {
        let tri = mesh.triangles[t];
        match self.kind {
            SpaceKind::P1Scalar => tri.to_vec(),
            SpaceKind::P1Vector => tri.iter().flat_map(|&v| [2 * v, 2 * v + 1]).collect(),
            SpaceKind::P2Vector => Self::p2_nodes(mesh, t).iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect(),
            SpaceKind::Mixed => {
                let off = self.pressure_offset();
                let mut d: Vec<usize> = Self::p2_nodes(mesh, t).iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect();
                d.extend(tri.iter().map(|&v| off + v));
                d
            }
        }
    }
}

/// Coefficient vector tagged with the space it lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    pub kind: SpaceKind,
    pub values: Vec<f64>,
}

impl FieldVector {
    pub fn new(dofmap: &DofMap, values: Vec<f64>) -> Result<FieldVector> {
        if values.len() != dofmap.n_dofs {
            return Err(Error::SpaceMismatch(format!(
                "{:?} vector of length {} for {} dofs",
                dofmap.kind,
                values.len(),
                dofmap.n_dofs
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("field vector has non-finite entries".into()));
        }
        Ok(FieldVector {
            kind: dofmap.kind,
            values,
        })
    }

    pub fn zeros(dofmap: &DofMap) -> FieldVector {
        FieldVector {
            kind: dofmap.kind,
            values: vec![0.0; dofmap.n_dofs],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check(&self, dofmap: &DofMap) -> Result<()> {
        if self.kind != dofmap.kind || self.values.len() != dofmap.n_dofs {
            return Err(Error::SpaceMismatch(format!(
                "expected {:?} with {} dofs, got {:?} with {}",
                dofmap.kind,
                dofmap.n_dofs,
                self.kind,
                self.values.len()
            )));
        }
        Ok(())
    }
}

/// Linear trace space on the obstacle boundary: one dof per obstacle vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSpace {
    /// Mesh vertex of every trace dof, ascending.
    pub vertices: Vec<usize>,
    /// Trace dof of every mesh vertex.
    pub index: Vec<Option<usize>>,
}

impl TraceSpace {
    pub fn obstacle(mesh: &MeshLevel) -> TraceSpace {
        let vertices: Vec<usize> = mesh.boundary_dofs(Marker::Obstacle).into_iter().collect();
        let mut index = vec![None; mesh.num_vertices()];
        for (k, &v) in vertices.iter().enumerate() {
            index[v] = Some(k);
        }
        TraceSpace { vertices, index }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}
