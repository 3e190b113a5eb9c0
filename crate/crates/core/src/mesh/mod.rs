//! Triangle meshes of the flow domain and their refinement hierarchy.
//!
//! A [`MeshLevel`] is immutable once built. Construction validates the
//! orientation, conformity and boundary marking of the triangulation and
//! derives the unique edge list used by quadratic elements.

mod generate;
mod hierarchy;
mod io;

pub use generate::{generate_reference_mesh, DomainSpec, Rect};
pub use hierarchy::{GridHierarchy, VertexParent};
pub use io::{read_mesh, write_mesh, GmshMarkerTable, MeshFormat};

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Boundary classes of the flow tunnel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Marker {
    Inflow = 1,
    Outflow = 2,
    Wall = 3,
    Obstacle = 4,
}

impl Marker {
    pub const ALL: [Marker; 4] = [Marker::Inflow, Marker::Outflow, Marker::Wall, Marker::Obstacle];

    pub fn from_id(id: i64) -> Option<Marker> {
        match id {
            1 => Some(Marker::Inflow),
            2 => Some(Marker::Outflow),
            3 => Some(Marker::Wall),
            4 => Some(Marker::Obstacle),
            _ => None,
        }
    }

    pub fn id(self) -> u8 {
        self as u8
    }

    /// Ownership rank for vertices shared by two markers; lower wins.
    pub fn priority(self) -> u8 {
        match self {
            Marker::Inflow => 0,
            Marker::Wall => 1,
            Marker::Obstacle => 2,
            Marker::Outflow => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    /// Oriented so that the adjacent triangle lies to the left.
    pub vertices: [usize; 2],
    pub marker: Marker,
    /// Index into [`MeshLevel::edges`].
    pub edge: usize,
}

#[derive(Debug, Clone)]
pub struct MeshLevel {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Unique edges as sorted vertex pairs.
    pub edges: Vec<[usize; 2]>,
    /// Edge ids of every triangle in the local order (v0,v1), (v1,v2), (v2,v0).
    pub triangle_edges: Vec<[usize; 3]>,
    pub level_index: usize,
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl MeshLevel {
    /// Builds and validates a mesh. Boundary edges may be given in either
    /// orientation; they are re-oriented to follow their triangle.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<([usize; 2], Marker)>,
        level_index: usize,
    ) -> Result<MeshLevel> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::NonConforming(format!(
                    "triangle {t} references a vertex out of range"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::NonConforming(format!("triangle {t} is degenerate")));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "triangle {t} has non-positive signed area {area:e}"
                )));
            }
        }

        let mut edge_ids: HashMap<[usize; 2], usize> = HashMap::with_capacity(triangles.len() * 2);
        let mut edges: Vec<[usize; 2]> = Vec::with_capacity(triangles.len() * 2);
        // incidence: (count, oriented copy from the first triangle)
        let mut incidence: Vec<(u8, [usize; 2])> = Vec::with_capacity(triangles.len() * 2);
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let mut local = [0usize; 3];
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                let key = [a.min(b), a.max(b)];
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(key);
                    incidence.push((0, [a, b]));
                    edges.len() - 1
                });
                incidence[id].0 += 1;
                if incidence[id].0 > 2 {
                    return Err(Error::NonConforming(format!(
                        "edge ({}, {}) is shared by more than two triangles",
                        key[0], key[1]
                    )));
                }
                local[k] = id;
            }
            triangle_edges.push(local);
        }

        let mut marked: HashMap<usize, Marker> = HashMap::with_capacity(boundary.len());
        for (pair, marker) in &boundary {
            let key = [pair[0].min(pair[1]), pair[0].max(pair[1])];
            let id = *edge_ids.get(&key).ok_or_else(|| {
                Error::NonConforming(format!(
                    "boundary edge ({}, {}) does not belong to any triangle",
                    pair[0], pair[1]
                ))
            })?;
            if incidence[id].0 != 1 {
                return Err(Error::NonConforming(format!(
                    "marked edge ({}, {}) is interior",
                    pair[0], pair[1]
                )));
            }
            if let Some(prev) = marked.insert(id, *marker) {
                if prev != *marker {
                    return Err(Error::NonConforming(format!(
                        "edge ({}, {}) carries two markers",
                        pair[0], pair[1]
                    )));
                }
            }
        }

        let mut boundary_edges = Vec::with_capacity(marked.len());
        for (id, &(count, oriented)) in incidence.iter().enumerate() {
            if count == 1 {
                let marker = *marked.get(&id).ok_or_else(|| {
                    Error::NonConforming(format!(
                        "boundary edge ({}, {}) has no marker",
                        oriented[0], oriented[1]
                    ))
                })?;
                boundary_edges.push(BoundaryEdge {
                    vertices: oriented,
                    marker,
                    edge: id,
                });
            }
        }

        Ok(MeshLevel {
            vertices,
            triangles,
            boundary_edges,
            edges,
            triangle_edges,
            level_index,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn fluid_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    /// Midpoint of an edge, also the location of its quadratic dof.
    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    pub fn boundary_edges_with(&self, marker: Marker) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.marker == marker)
    }

    /// Vertices lying on an edge with the given marker (corners shared with
    /// other markers included).
    pub fn boundary_dofs(&self, marker: Marker) -> BTreeSet<usize> {
        self.boundary_edges_with(marker)
            .flat_map(|e| e.vertices)
            .collect()
    }

    pub fn boundary_vertices(&self) -> BTreeSet<usize> {
        self.boundary_edges.iter().flat_map(|e| e.vertices).collect()
    }

    /// Owning marker of every boundary vertex, resolving shared corners by
    /// [`Marker::priority`]. Interior vertices map to `None`.
    pub fn vertex_owners(&self) -> Vec<Option<Marker>> {
        let mut owner: Vec<Option<Marker>> = vec![None; self.vertices.len()];
        for e in &self.boundary_edges {
            for &v in &e.vertices {
                owner[v] = match owner[v] {
                    Some(m) if m.priority() <= e.marker.priority() => Some(m),
                    _ => Some(e.marker),
                };
            }
        }
        owner
    }

    /// Outward unit normal of the fluid domain on a boundary edge.
    pub fn outward_normal(&self, e: &BoundaryEdge) -> Point {
        let a = self.vertices[e.vertices[0]];
        let b = self.vertices[e.vertices[1]];
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = (dx * dx + dy * dy).sqrt();
        [dy / len, -dx / len]
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        let a = self.vertices[e.vertices[0]];
        let b = self.vertices[e.vertices[1]];
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }

    /// Obstacle boundary as a closed vertex loop, ordered along the edge
    /// orientation.
    pub fn obstacle_loop(&self) -> Vec<usize> {
        let mut next: HashMap<usize, usize> = HashMap::new();
        for e in self.boundary_edges_with(Marker::Obstacle) {
            next.insert(e.vertices[0], e.vertices[1]);
        }
        let Some(&start) = next.keys().min() else {
            return Vec::new();
        };
        let mut out = vec![start];
        let mut cur = next[&start];
        while cur != start && out.len() <= next.len() {
            out.push(cur);
            cur = next[&cur];
        }
        out
    }

    pub fn mean_obstacle_edge_length(&self) -> f64 {
        let (sum, n) = self
            .boundary_edges_with(Marker::Obstacle)
            .fold((0.0, 0usize), |(s, n), e| (s + self.edge_length(e), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    pub fn max_obstacle_edge_length(&self) -> f64 {
        self.boundary_edges_with(Marker::Obstacle)
            .map(|e| self.edge_length(e))
            .fold(0.0, f64::max)
    }

    /// Copy of the mesh with every vertex shifted by `offset`.
    pub fn translated(&self, offset: Point) -> MeshLevel {
        let mut m = self.clone();
        for p in &mut m.vertices {
            p[0] += offset[0];
            p[1] += offset[1];
        }
        m
    }
}
