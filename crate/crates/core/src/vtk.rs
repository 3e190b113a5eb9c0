//! Legacy ASCII VTK output on triangle meshes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::MeshLevel;

#[derive(Debug, Clone, PartialEq)]
pub enum PointField {
    Scalar { name: String, values: Vec<f64> },
    /// Interleaved (x, y) per vertex.
    Vector { name: String, values: Vec<f64> },
}

impl PointField {
    pub fn scalar(name: &str, values: Vec<f64>) -> PointField {
        PointField::Scalar { name: name.into(), values }
    }

    pub fn vector(name: &str, values: Vec<f64>) -> PointField {
        PointField::Vector { name: name.into(), values }
    }

    pub fn name(&self) -> &str {
        match self {
            PointField::Scalar { name, .. } | PointField::Vector { name, .. } => name,
        }
    }

    fn ncomp(&self) -> usize {
        match self {
            PointField::Scalar { .. } => 1,
            PointField::Vector { .. } => 2,
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            PointField::Scalar { values, .. } | PointField::Vector { values, .. } => values,
        }
    }
}

/// Renders the mesh with point data; `deformed` moves vertices by the vector
/// field named `w`.
pub fn render_vtk(mesh: &MeshLevel, fields: &[PointField], deformed: bool) -> Result<String> {
    let nv = mesh.num_vertices();
    for f in fields {
        if f.name().is_empty() || f.name().contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("VTK field name {:?} is not a single token", f.name())));
        }
        if f.values().len() != f.ncomp() * nv {
            return Err(Error::InvalidArgument(format!(
                "VTK field {} has {} values, expected {}",
                f.name(),
                f.values().len(),
                f.ncomp() * nv
            )));
        }
    }
    let w = if deformed {
        match fields.iter().find(|f| matches!(f, PointField::Vector { name, .. } if name == "w")) {
            Some(f) => Some(f.values()),
            None => return Err(Error::InvalidArgument("deformed output needs a vector field `w`".into())),
        }
    } else {
        None
    };
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nshapeforge\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(s, "POINTS {nv} double").unwrap();
    for (i, p) in mesh.vertices.iter().enumerate() {
        let (dx, dy) = w.map_or((0.0, 0.0), |w| (w[2 * i], w[2 * i + 1]));
        writeln!(s, "{:e} {:e} 0", p[0] + dx, p[1] + dy).unwrap();
    }
    let nt = mesh.num_triangles();
    writeln!(s, "CELLS {nt} {}", 4 * nt).unwrap();
    for t in &mesh.triangles {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {nt}").unwrap();
    for _ in 0..nt {
        s.push_str("5\n");
    }
    if !fields.is_empty() {
        writeln!(s, "POINT_DATA {nv}").unwrap();
    }
    for f in fields {
        match f {
            PointField::Scalar { name, values } => {
                writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
                for v in values {
                    writeln!(s, "{v:e}").unwrap();
                }
            }
            PointField::Vector { name, values } => {
                writeln!(s, "VECTORS {name} double").unwrap();
                for v in values.chunks(2) {
                    writeln!(s, "{:e} {:e} 0", v[0], v[1]).unwrap();
                }
            }
        }
    }
    Ok(s)
}

pub fn export_vtk(mesh: &MeshLevel, fields: &[PointField], path: &Path, deformed: bool) -> Result<()> {
    let s = render_vtk(mesh, fields, deformed)?;
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Contents of a file written by [`export_vtk`].
#[derive(Debug, Clone, PartialEq)]
pub struct VtkData {
    pub points: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub fields: Vec<PointField>,
}

impl VtkData {
    pub fn field(&self, name: &str) -> Option<&PointField> {
        self.fields.iter().find(|f| f.name() == name)
    }
}

/// Minimal reader for the subset produced by [`export_vtk`].
pub fn read_vtk(path: &Path) -> Result<VtkData> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_vtk(&text, &path.display().to_string())
}

pub fn parse_vtk(text: &str, origin: &str) -> Result<VtkData> {
    let mut lines = text.lines().enumerate().peekable();
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.into(),
        line: line + 1,
        msg,
    };
    let mut next = |what: &str| -> Result<(usize, Vec<&str>)> {
        loop {
            match lines.next() {
                Some((i, l)) if !l.trim().is_empty() => return Ok((i, l.split_whitespace().collect())),
                Some(_) => continue,
                None => {
                    return Err(Error::Parse {
                        path: origin.into(),
                        line: 0,
                        msg: format!("unexpected end of file, expected {what}"),
                    })
                }
            }
        }
    };
    let num = |i: usize, t: &str| t.parse::<f64>().map_err(|_| err(i, format!("bad number {t:?}")));
    let idx = |i: usize, t: &str| t.parse::<usize>().map_err(|_| err(i, format!("bad integer {t:?}")));
    let (i, h) = next("header")?;
    if h.first() != Some(&"#") {
        return Err(err(i, "missing vtk header".into()));
    }
    next("title")?;
    let (i, f) = next("format")?;
    if f != ["ASCII"] {
        return Err(err(i, "only ASCII files are supported".into()));
    }
    let (i, d) = next("dataset")?;
    if d != ["DATASET", "UNSTRUCTURED_GRID"] {
        return Err(err(i, "expected DATASET UNSTRUCTURED_GRID".into()));
    }
    let (i, p) = next("POINTS")?;
    if p.first() != Some(&"POINTS") || p.len() < 2 {
        return Err(err(i, "expected POINTS".into()));
    }
    let np = idx(i, p[1])?;
    let mut points = Vec::with_capacity(np);
    for _ in 0..np {
        let (i, t) = next("point")?;
        if t.len() < 2 {
            return Err(err(i, "point needs coordinates".into()));
        }
        points.push([num(i, t[0])?, num(i, t[1])?]);
    }
    let (i, c) = next("CELLS")?;
    if c.first() != Some(&"CELLS") || c.len() < 2 {
        return Err(err(i, "expected CELLS".into()));
    }
    let nc = idx(i, c[1])?;
    let mut triangles = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (i, t) = next("cell")?;
        if t.len() != 4 || t[0] != "3" {
            return Err(err(i, "only triangle cells are supported".into()));
        }
        let tri = [idx(i, t[1])?, idx(i, t[2])?, idx(i, t[3])?];
        if tri.iter().any(|&v| v >= np) {
            return Err(err(i, "cell references a missing point".into()));
        }
        triangles.push(tri);
    }
    let (i, ct) = next("CELL_TYPES")?;
    if ct.first() != Some(&"CELL_TYPES") {
        return Err(err(i, "expected CELL_TYPES".into()));
    }
    for _ in 0..nc {
        next("cell type")?;
    }
    let mut fields = Vec::new();
    let mut header = next("POINT_DATA").ok();
    if let Some((i, pd)) = &header {
        if pd.first() != Some(&"POINT_DATA") {
            return Err(err(*i, "expected POINT_DATA".into()));
        }
        header = next("field").ok();
    }
    while let Some((i, h)) = header {
        match h.as_slice() {
            ["SCALARS", name, ..] => {
                let name = name.to_string();
                next("LOOKUP_TABLE")?;
                let mut values = Vec::with_capacity(np);
                for _ in 0..np {
                    let (i, t) = next("value")?;
                    values.push(num(i, t[0])?);
                }
                fields.push(PointField::Scalar { name, values });
            }
            ["VECTORS", name, ..] => {
                let name = name.to_string();
                let mut values = Vec::with_capacity(2 * np);
                for _ in 0..np {
                    let (i, t) = next("vector")?;
                    if t.len() < 2 {
                        return Err(err(i, "vector needs components".into()));
                    }
                    values.push(num(i, t[0])?);
                    values.push(num(i, t[1])?);
                }
                fields.push(PointField::Vector { name, values });
            }
            _ => return Err(err(i, format!("unsupported section {:?}", h.first()))),
        }
        header = next("field").ok();
    }
    Ok(VtkData { points, triangles, fields })
}
