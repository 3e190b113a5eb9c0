#![allow(dead_code)]

use shapeforge::discretization::Discretization;
use shapeforge::mesh::{generate_reference_mesh, DomainSpec, GridHierarchy, Marker, MeshLevel};

/// Unit square split into 2n² triangles; left inflow, right outflow, walls
/// top and bottom.
pub fn unit_square(n: usize) -> MeshLevel {
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
        b.push(([id(i + 1, n), id(i, n)], Marker::Wall));
        b.push(([id(0, i + 1), id(0, i)], Marker::Inflow));
        b.push(([id(n, i), id(n, i + 1)], Marker::Outflow));
    }
    MeshLevel::new(v, t, b, 0).unwrap()
}

pub fn fixture() -> MeshLevel {
    generate_reference_mesh(&DomainSpec::square_obstacle(), 412).unwrap()
}

pub fn fixture_disc(refinements: usize) -> Discretization {
    Discretization::new(GridHierarchy::with_refinements(fixture(), refinements))
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}
