//! Per-level spaces, boundary masks and transfer operators of a mesh hierarchy.

use std::sync::OnceLock;

use crate::fem::{
    boundary_coupling, element_pattern, mesh_geometry, obstacle_mass, p1_mass, DofMap, ElementGeometry, SpaceKind,
    TraceSpace,
};
use crate::error::Result;
use crate::linalg::{mixed_prolongation, DirectSolver, p1_prolongation, vector_prolongation, SparseMatrix, TransferOperator};
use crate::mesh::{GridHierarchy, Marker, MeshLevel, Point};

#[derive(Debug)]
pub struct LevelSpaces {
    pub geom: Vec<ElementGeometry>,
    pub p1: DofMap,
    pub p1v: DofMap,
    pub mixed: DofMap,
    /// Dirichlet flags of the displacement dofs (outer boundary).
    pub ext_fixed: Vec<bool>,
    /// Dirichlet flags of the mixed flow dofs (inflow, wall, obstacle velocity).
    pub flow_fixed: Vec<bool>,
    /// Inflow velocity nodes: (quadratic node, position).
    pub inflow_nodes: Vec<(usize, Point)>,
    ext_pattern: OnceLock<SparseMatrix>,
    flow_pattern: OnceLock<SparseMatrix>,
}

impl LevelSpaces {
    fn new(mesh: &MeshLevel) -> LevelSpaces {
        let p1 = DofMap::new(mesh, SpaceKind::P1Scalar);
        let p1v = DofMap::new(mesh, SpaceKind::P1Vector);
        let mixed = DofMap::new(mesh, SpaceKind::Mixed);
        let owners = mesh.vertex_owners();
        let nv = mesh.num_vertices();
        let mut ext_fixed = vec![false; p1v.n_dofs];
        for (v, o) in owners.iter().enumerate() {
            if matches!(o, Some(Marker::Inflow | Marker::Outflow | Marker::Wall)) {
                ext_fixed[2 * v] = true;
                ext_fixed[2 * v + 1] = true;
            }
        }
        let mut node_owner: Vec<Option<Marker>> = owners.clone();
        node_owner.resize(nv + mesh.num_edges(), None);
        for e in &mesh.boundary_edges {
            node_owner[nv + e.edge] = Some(e.marker);
        }
        let mut flow_fixed = vec![false; mixed.n_dofs];
        let mut inflow_nodes = Vec::new();
        for (n, o) in node_owner.iter().enumerate() {
            if matches!(o, Some(Marker::Inflow | Marker::Wall | Marker::Obstacle)) {
                flow_fixed[2 * n] = true;
                flow_fixed[2 * n + 1] = true;
            }
            if *o == Some(Marker::Inflow) {
                let p = if n < nv { mesh.vertices[n] } else { mesh.edge_midpoint(n - nv) };
                inflow_nodes.push((n, p));
            }
        }
        LevelSpaces {
            geom: mesh_geometry(mesh),
            p1,
            p1v,
            mixed,
            ext_fixed,
            flow_fixed,
            inflow_nodes,
            ext_pattern: OnceLock::new(),
            flow_pattern: OnceLock::new(),
        }
    }
}

/// Everything that depends only on the mesh hierarchy.
#[derive(Debug)]
pub struct Discretization {
    pub hierarchy: GridHierarchy,
    pub levels: Vec<LevelSpaces>,
    /// Obstacle trace space on the finest level.
    pub trace: TraceSpace,
    pub mass_gamma: SparseMatrix,
    pub mass_omega: SparseMatrix,
    /// Boundary load operator B (2·nv × trace).
    pub b_gamma: SparseMatrix,
    ext_transfers: OnceLock<Vec<TransferOperator>>,
    flow_transfers: OnceLock<Vec<TransferOperator>>,
    mass_solvers: OnceLock<(DirectSolver, DirectSolver)>,
}

impl Discretization {
    pub fn new(hierarchy: GridHierarchy) -> Discretization {
        let levels: Vec<LevelSpaces> = hierarchy.levels.iter().map(LevelSpaces::new).collect();
        let fine = hierarchy.finest();
        let trace = TraceSpace::obstacle(fine);
        let mass_gamma = obstacle_mass(fine, &trace);
        let mass_omega = p1_mass(fine, &levels.last().expect("nonempty").geom);
        let b_gamma = boundary_coupling(fine, &trace);
        Discretization {
            hierarchy,
            levels,
            trace,
            mass_gamma,
            mass_omega,
            b_gamma,
            ext_transfers: OnceLock::new(),
            flow_transfers: OnceLock::new(),
            mass_solvers: OnceLock::new(),
        }
    }

    pub fn finest_index(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn mesh(&self, level: usize) -> &MeshLevel {
        &self.hierarchy.levels[level]
    }

    pub fn fine(&self) -> &LevelSpaces {
        self.levels.last().expect("nonempty")
    }

    pub fn fine_mesh(&self) -> &MeshLevel {
        self.hierarchy.finest()
    }

    pub fn ext_pattern(&self, level: usize) -> &SparseMatrix {
        let l = &self.levels[level];
        l.ext_pattern.get_or_init(|| element_pattern(self.mesh(level), &l.p1v))
    }

    pub fn flow_pattern(&self, level: usize) -> &SparseMatrix {
        let l = &self.levels[level];
        l.flow_pattern.get_or_init(|| element_pattern(self.mesh(level), &l.mixed))
    }

    /// `[l]` maps level l to l + 1 (vector linear space).
    pub fn ext_transfers(&self) -> &[TransferOperator] {
        self.ext_transfers.get_or_init(|| {
            (1..self.levels.len())
                .map(|l| TransferOperator::new(vector_prolongation(&p1_prolongation(&self.hierarchy, l), 2)))
                .collect()
        })
    }

    pub fn flow_transfers(&self) -> &[TransferOperator] {
        self.flow_transfers.get_or_init(|| {
            (1..self.levels.len())
                .map(|l| TransferOperator::new(mixed_prolongation(&self.hierarchy, l)))
                .collect()
        })
    }

    /// Factorizations of (M_Γ, M_Ω).
    pub fn mass_solvers(&self) -> Result<&(DirectSolver, DirectSolver)> {
        if let Some(s) = self.mass_solvers.get() {
            return Ok(s);
        }
        let pair = (DirectSolver::factor(&self.mass_gamma)?, DirectSolver::factor(&self.mass_omega)?);
        Ok(self.mass_solvers.get_or_init(|| pair))
    }

    /// Nodal injection of a linear field with `ncomp` interleaved components
    /// from the finest level to `level`.
    pub fn inject_p1<'a>(&self, fine: &'a [f64], level: usize, ncomp: usize) -> &'a [f64] {
        &fine[..ncomp * self.levels[level].p1.nv]
    }

    /// Nodal injection of a mixed flow state from level `from` to `from - 1`.
    pub fn inject_mixed(&self, x: &[f64], from: usize) -> Vec<f64> {
        let (f, c) = (&self.levels[from], &self.levels[from - 1]);
        let mut out = x[..2 * c.mixed.num_p2_nodes()].to_vec();
        let off = f.mixed.pressure_offset();
        out.extend_from_slice(&x[off..off + c.p1.nv]);
        out
    }
}
