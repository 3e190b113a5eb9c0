//! Mesh files: the native line-oriented ASCII format and a read-only subset
//! of Gmsh MSH 2.2 (ASCII, line and triangle elements).
//!
//! Native layout:
//!
//! ```text
//! mesh2d <nv> <ne> <nb>
//! x y            (nv lines)
//! i j k          (ne lines, 0-based, counter-clockwise)
//! i j marker     (nb lines, 1=inflow 2=outflow 3=wall 4=obstacle)
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Marker, MeshLevel, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    NativeAscii,
    Gmsh2,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> MeshFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("msh") => MeshFormat::Gmsh2,
            _ => MeshFormat::NativeAscii,
        }
    }
}

/// Physical group id → marker mapping for Gmsh input.
#[derive(Debug, Clone)]
pub struct GmshMarkerTable(pub HashMap<i64, Marker>);

impl Default for GmshMarkerTable {
    fn default() -> Self {
        GmshMarkerTable(Marker::ALL.iter().map(|&m| (m.id() as i64, m)).collect())
    }
}

pub fn read_mesh(path: &Path, format: MeshFormat, markers: &GmshMarkerTable) -> Result<MeshLevel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    match format {
        MeshFormat::NativeAscii => parse_native(&text, &name),
        MeshFormat::Gmsh2 => parse_gmsh(&text, &name, markers),
    }
}

pub fn write_mesh(mesh: &MeshLevel, path: &Path) -> Result<()> {
    std::fs::write(path, format_native(mesh)).map_err(|e| Error::io(path, e))
}

pub(crate) fn format_native(mesh: &MeshLevel) -> String {
    let mut out = String::with_capacity(32 * (mesh.num_vertices() + 2 * mesh.num_triangles()));
    let _ = writeln!(
        out,
        "mesh2d {} {} {}",
        mesh.num_vertices(),
        mesh.num_triangles(),
        mesh.boundary_edges.len()
    );
    for p in &mesh.vertices {
        let _ = writeln!(out, "{:?} {:?}", p[0], p[1]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    for e in &mesh.boundary_edges {
        let _ = writeln!(out, "{} {} {}", e.vertices[0], e.vertices[1], e.marker.id());
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    name: &'a str,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, name: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            name,
            line: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.name.to_string(),
            line: self.line,
            msg: msg.into(),
        }
    }

    /// Next non-empty, non-comment line.
    fn next_line(&mut self) -> Result<&'a str> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let t = l.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok(t);
            }
        }
        Err(self.err("unexpected end of file"))
    }

    fn fields<T: std::str::FromStr>(&mut self, n: usize) -> Result<Vec<T>> {
        let line = self.next_line()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() < n {
            return Err(self.err(format!("expected {n} fields, found {}", parts.len())));
        }
        parts
            .iter()
            .take(n)
            .map(|p| p.parse::<T>().map_err(|_| self.err(format!("invalid number '{p}'"))))
            .collect()
    }
}

pub(crate) fn parse_native(text: &str, name: &str) -> Result<MeshLevel> {
    let mut lines = Lines::new(text, name);
    let header = lines.next_line()?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "mesh2d" {
        return Err(lines.err("expected header 'mesh2d <nv> <ne> <nb>'"));
    }
    let counts: Vec<usize> = parts[1..]
        .iter()
        .map(|p| p.parse().map_err(|_| lines.err(format!("invalid count '{p}'"))))
        .collect::<Result<_>>()?;
    let (nv, ne, nb) = (counts[0], counts[1], counts[2]);
    let mut vertices: Vec<Point> = Vec::with_capacity(nv);
    for _ in 0..nv {
        let f: Vec<f64> = lines.fields(2)?;
        vertices.push([f[0], f[1]]);
    }
    let mut triangles = Vec::with_capacity(ne);
    for _ in 0..ne {
        let f: Vec<usize> = lines.fields(3)?;
        if f.iter().any(|&v| v >= nv) {
            return Err(lines.err("vertex index out of range"));
        }
        triangles.push([f[0], f[1], f[2]]);
    }
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let f: Vec<i64> = lines.fields(3)?;
        if f[0] < 0 || f[1] < 0 || f[0] as usize >= nv || f[1] as usize >= nv {
            return Err(lines.err("vertex index out of range"));
        }
        let marker = Marker::from_id(f[2]).ok_or(Error::MissingMarker(f[2]))?;
        boundary.push(([f[0] as usize, f[1] as usize], marker));
    }
    MeshLevel::new(vertices, triangles, boundary, 0)
}

fn parse_gmsh(text: &str, name: &str, markers: &GmshMarkerTable) -> Result<MeshLevel> {
    let mut lines = Lines::new(text, name);
    let mut vertices: Vec<Point> = Vec::new();
    let mut node_index: HashMap<i64, usize> = HashMap::new();
    let mut triangles = Vec::new();
    let mut boundary = Vec::new();
    let mut seen_nodes = false;
    loop {
        let line = match lines.next_line() {
            Ok(l) => l,
            Err(_) if seen_nodes => break,
            Err(e) => return Err(e),
        };
        match line {
            "$MeshFormat" => {
                let f: Vec<String> = lines.fields(3)?;
                if !f[0].starts_with('2') || f[1] != "0" {
                    return Err(lines.err("only ASCII MSH 2.x is supported"));
                }
                expect(&mut lines, "$EndMeshFormat")?;
            }
            "$Nodes" => {
                let n: Vec<usize> = lines.fields(1)?;
                for _ in 0..n[0] {
                    let f: Vec<f64> = lines.fields(3)?;
                    node_index.insert(f[0] as i64, vertices.len());
                    vertices.push([f[1], f[2]]);
                }
                expect(&mut lines, "$EndNodes")?;
                seen_nodes = true;
            }
            "$Elements" => {
                let n: Vec<usize> = lines.fields(1)?;
                for _ in 0..n[0] {
                    let l = lines.next_line()?;
                    let f: Vec<i64> = l
                        .split_whitespace()
                        .map(|p| p.parse().map_err(|_| lines.err(format!("invalid integer '{p}'"))))
                        .collect::<Result<_>>()?;
                    if f.len() < 3 {
                        return Err(lines.err("truncated element record"));
                    }
                    let (kind, ntags) = (f[1], f[2] as usize);
                    let tags = f.get(3..3 + ntags).ok_or_else(|| lines.err("truncated tags"))?;
                    let nodes = &f[3 + ntags..];
                    let map = |id: &i64| {
                        node_index
                            .get(id)
                            .copied()
                            .ok_or_else(|| lines.err(format!("unknown node {id}")))
                    };
                    match kind {
                        1 => {
                            if nodes.len() != 2 {
                                return Err(lines.err("line element needs 2 nodes"));
                            }
                            let phys = *tags.first().ok_or_else(|| lines.err("line element without physical tag"))?;
                            let marker = *markers.0.get(&phys).ok_or(Error::MissingMarker(phys))?;
                            boundary.push(([map(&nodes[0])?, map(&nodes[1])?], marker));
                        }
                        2 => {
                            if nodes.len() != 3 {
                                return Err(lines.err("triangle element needs 3 nodes"));
                            }
                            let mut t = [map(&nodes[0])?, map(&nodes[1])?, map(&nodes[2])?];
                            let a = super::signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
                            if a < 0.0 {
                                t.swap(1, 2);
                            }
                            triangles.push(t);
                        }
                        // points and other element types are ignored
                        _ => {}
                    }
                }
                expect(&mut lines, "$EndElements")?;
            }
            other if other.starts_with('$') && !other.starts_with("$End") => {
                let end = format!("$End{}", &other[1..]);
                while lines.next_line()? != end {}
            }
            _ => return Err(lines.err(format!("unexpected line '{line}'"))),
        }
    }
    // Drop vertices not used by any triangle (e.g. geometry points).
    let mut used = vec![false; vertices.len()];
    triangles.iter().flatten().for_each(|&v| used[v] = true);
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut kept = Vec::new();
    for (i, p) in vertices.iter().enumerate() {
        if used[i] {
            remap[i] = kept.len();
            kept.push(*p);
        }
    }
    let triangles = triangles.into_iter().map(|t| t.map(|v| remap[v])).collect();
    let boundary = boundary
        .into_iter()
        .map(|(e, m)| {
            if used[e[0]] && used[e[1]] {
                Ok(([remap[e[0]], remap[e[1]]], m))
            } else {
                Err(Error::NonConforming("boundary edge on a vertex outside the triangulation".into()))
            }
        })
        .collect::<Result<_>>()?;
    MeshLevel::new(kept, triangles, boundary, 0)
}

fn expect(lines: &mut Lines<'_>, tag: &str) -> Result<()> {
    let l = lines.next_line()?;
    if l == tag {
        Ok(())
    } else {
        Err(lines.err(format!("expected {tag}, found '{l}'")))
    }
}
