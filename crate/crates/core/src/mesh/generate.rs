//! Graded triangulation of a rectangular tunnel with a rectangular obstacle.

use std::collections::HashMap;

use super::{Marker, MeshLevel, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Rect {
        Rect { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn center(&self) -> Point {
        [0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub outer: Rect,
    pub obstacle: Rect,
}

impl DomainSpec {
    /// Tunnel (-7,7)x(-3,3) around the unit square obstacle.
    pub fn square_obstacle() -> DomainSpec {
        DomainSpec {
            outer: Rect::new(-7.0, 7.0, -3.0, 3.0),
            obstacle: Rect::new(-0.5, 0.5, -0.5, 0.5),
        }
    }

    fn validate(&self) -> Result<()> {
        let (o, b) = (&self.outer, &self.obstacle);
        if !(o.width() > 0.0 && o.height() > 0.0) {
            return Err(Error::InvalidGeometry("outer rectangle has zero extent".into()));
        }
        if !(b.width() > 0.0 && b.height() > 0.0) {
            return Err(Error::InvalidGeometry("obstacle has zero extent".into()));
        }
        if !(o.x0 < b.x0 && b.x1 < o.x1 && o.y0 < b.y0 && b.y1 < o.y1) {
            return Err(Error::InvalidGeometry(
                "obstacle must lie strictly inside the outer rectangle".into(),
            ));
        }
        Ok(())
    }
}

/// Cell sizes `h0 * r^i` (i = 0..n) covering `length`, with `r >= 1`.
fn graded_sizes(length: f64, n: usize, h0: f64) -> Vec<f64> {
    if h0 * n as f64 >= length {
        return vec![length / n as f64; n];
    }
    let total = |r: f64| (0..n).map(|i| h0 * r.powi(i as i32)).sum::<f64>();
    let (mut lo, mut hi) = (1.0, 2.0);
    while total(hi) < length {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < length {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    let mut sizes: Vec<f64> = (0..n).map(|i| h0 * r.powi(i as i32)).collect();
    let scale = length / sizes.iter().sum::<f64>();
    sizes.iter_mut().for_each(|h| *h *= scale);
    sizes
}

/// Breakpoints across `[lo, inner_lo] ∪ [inner_lo, inner_hi] ∪ [inner_hi, hi]`;
/// returns the coordinates and the index range of the inner block.
fn axis(lo: f64, inner_lo: f64, inner_hi: f64, hi: f64, side: usize, inner: usize) -> (Vec<f64>, usize, usize) {
    let h0 = (inner_hi - inner_lo) / inner as f64;
    let left = graded_sizes(inner_lo - lo, side, h0);
    let right = graded_sizes(hi - inner_hi, side, h0);
    let mut xs = vec![inner_lo];
    for h in &left {
        let last = *xs.last().unwrap();
        xs.push(last - h);
    }
    xs.reverse();
    *xs.first_mut().unwrap() = lo;
    let i0 = xs.len() - 1;
    for k in 1..=inner {
        xs.push(inner_lo + (inner_hi - inner_lo) * k as f64 / inner as f64);
    }
    *xs.last_mut().unwrap() = inner_hi;
    let i1 = xs.len() - 1;
    for h in &right {
        let last = *xs.last().unwrap();
        xs.push(last + h);
    }
    *xs.last_mut().unwrap() = hi;
    (xs, i0, i1)
}

/// Conforming graded triangulation of the tunnel minus the obstacle with at
/// least `target_coarse_elements` triangles. Most cells are split along one
/// diagonal, mirrored across the obstacle axes; cells next to the obstacle
/// front are split into four when needed to meet the requested count. The
/// result is translated so that the obstacle barycenter is the origin.
pub fn generate_reference_mesh(domain: &DomainSpec, target_coarse_elements: usize) -> Result<MeshLevel> {
    domain.validate()?;
    if target_coarse_elements < 64 {
        return Err(Error::InvalidArgument(format!(
            "target_coarse_elements must be at least 64, got {target_coarse_elements}"
        )));
    }
    let scale = (target_coarse_elements as f64 / 412.0).sqrt();
    let k = (2 * (2.0 * scale).round() as usize).max(2);
    let nx_side = ((9.0 * scale).round() as usize).max(2);
    let ny_side = ((3.0 * scale).round() as usize).max(2);

    let (o, b) = (&domain.outer, &domain.obstacle);
    let (xs, i0, i1) = axis(o.x0, b.x0, b.x1, o.x1, nx_side, k);
    let (ys, j0, j1) = axis(o.y0, b.y0, b.y1, o.y1, ny_side, k);
    let (ncx, ncy) = (xs.len() - 1, ys.len() - 1);
    let in_obstacle = |i: usize, j: usize| (i0..i1).contains(&i) && (j0..j1).contains(&j);
    let [bcx, bcy] = b.center();

    let mut cells: Vec<(usize, usize)> = Vec::new();
    for j in 0..ncy {
        for i in 0..ncx {
            if !in_obstacle(i, j) {
                cells.push((i, j));
            }
        }
    }
    let base = 2 * cells.len();
    let extra_cells = if target_coarse_elements > base {
        (target_coarse_elements - base).div_ceil(2)
    } else {
        0
    };
    if extra_cells > cells.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot reach {target_coarse_elements} elements with the chosen layout"
        )));
    }
    let center_of = |i: usize, j: usize| [0.5 * (xs[i] + xs[i + 1]) - bcx, 0.5 * (ys[j] + ys[j + 1]) - bcy];
    let ring = |i: usize, j: usize| {
        let di = if i < i0 { i0 - i } else if i >= i1 { i - i1 + 1 } else { 0 };
        let dj = if j < j0 { j0 - j } else if j >= j1 { j - j1 + 1 } else { 0 };
        di.max(dj)
    };
    let mut order = cells.clone();
    order.sort_by(|&(ia, ja), &(ib, jb)| {
        let (ca, cb) = (center_of(ia, ja), center_of(ib, jb));
        ring(ia, ja)
            .cmp(&ring(ib, jb))
            .then((ca[0] >= 0.0).cmp(&(cb[0] >= 0.0)))
            .then(ca[1].abs().total_cmp(&cb[1].abs()))
            .then(ca[0].abs().total_cmp(&cb[0].abs()))
            .then(ca[1].total_cmp(&cb[1]))
    });
    let split4: std::collections::HashSet<(usize, usize)> = order.into_iter().take(extra_cells).collect();

    let mut vertices: Vec<Point> = Vec::new();
    let mut grid_index = vec![usize::MAX; (ncx + 1) * (ncy + 1)];
    for j in 0..=ncy {
        for i in 0..=ncx {
            let strictly_inside = i > i0 && i < i1 && j > j0 && j < j1;
            if !strictly_inside {
                grid_index[j * (ncx + 1) + i] = vertices.len();
                vertices.push([xs[i] - bcx, ys[j] - bcy]);
            }
        }
    }
    let gv = |i: usize, j: usize| grid_index[j * (ncx + 1) + i];

    let mut triangles: Vec<[usize; 3]> = Vec::with_capacity(target_coarse_elements);
    for &(i, j) in &cells {
        let (p00, p10, p11, p01) = (gv(i, j), gv(i + 1, j), gv(i + 1, j + 1), gv(i, j + 1));
        if split4.contains(&(i, j)) {
            let c = center_of(i, j);
            let m = vertices.len();
            vertices.push(c);
            triangles.extend([[p00, p10, m], [p10, p11, m], [p11, p01, m], [p01, p00, m]]);
        } else {
            let c = center_of(i, j);
            if c[0] * c[1] > 0.0 {
                triangles.extend([[p00, p10, p11], [p00, p11, p01]]);
            } else {
                triangles.extend([[p00, p10, p01], [p10, p11, p01]]);
            }
        }
    }

    let mut count: HashMap<[usize; 2], usize> = HashMap::new();
    for t in &triangles {
        for k in 0..3 {
            let (a, c) = (t[k], t[(k + 1) % 3]);
            *count.entry([a.min(c), a.max(c)]).or_default() += 1;
        }
    }
    let (ox0, ox1, oy0, oy1) = (o.x0 - bcx, o.x1 - bcx, o.y0 - bcy, o.y1 - bcy);
    let tol = 1e-12 * o.width().max(o.height());
    let mut boundary = Vec::new();
    let mut keys: Vec<_> = count.iter().filter(|(_, &c)| c == 1).map(|(k, _)| *k).collect();
    keys.sort_unstable();
    for [a, c] in keys {
        let (pa, pc) = (vertices[a], vertices[c]);
        let on = |coord: usize, val: f64| (pa[coord] - val).abs() < tol && (pc[coord] - val).abs() < tol;
        let marker = if on(0, ox0) {
            Marker::Inflow
        } else if on(0, ox1) {
            Marker::Outflow
        } else if on(1, oy0) || on(1, oy1) {
            Marker::Wall
        } else {
            Marker::Obstacle
        };
        boundary.push(([a, c], marker));
    }
    MeshLevel::new(vertices, triangles, boundary, 0)
}
