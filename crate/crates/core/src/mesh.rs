//! Conforming triangulations with edge topology and corner metadata.
//!
//! Both domains are built from a uniform grid of square cells, each cut
//! by its lower-left to upper-right diagonal. Edges carry a canonical
//! orientation from the lower to the higher global vertex index, so edge
//! polynomials are single-valued without a separate orientation pass.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use crate::{norm, sub, Error, Point, Result};

/// A corner of the polygonal domain with its interior angle and penalty
/// weight exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerSpec {
    pub position: Point,
    pub angle: f64,
    pub mu: f64,
    /// Index of the mesh vertex sitting on this corner.
    pub vertex: usize,
}

impl CornerSpec {
    /// Checks `0 < mu <= 1`, `mu = 1` for angles up to `pi/2` and
    /// `mu < pi / (2 omega)` beyond.
    pub fn is_admissible(&self) -> bool {
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return false;
        }
        if self.angle <= FRAC_PI_2 + 1e-12 {
            self.mu == 1.0
        } else {
            self.mu < PI / (2.0 * self.angle)
        }
    }

    pub fn is_singular(&self) -> bool {
        self.mu < 1.0
    }
}

#[derive(Debug, Clone)]
pub struct Triangle {
    /// Counterclockwise vertex indices.
    pub vertices: [usize; 3],
    /// Local edge `l` joins local vertices `l` and `(l + 1) % 3`.
    pub edges: [usize; 3],
    /// `+1` if local edge `l` runs in the canonical (ascending) direction.
    pub edge_signs: [i8; 3],
    pub area: f64,
    /// Diameter (longest side).
    pub diameter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Interior,
    Boundary,
}

#[derive(Debug, Clone)]
pub struct Edge {
    /// Endpoints with `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    /// Adjacent triangles; the second slot is `None` on the boundary.
    pub triangles: [Option<usize>; 2],
    pub kind: EdgeKind,
    pub midpoint: Point,
    pub length: f64,
    /// Unit tangent from `vertices[0]` to `vertices[1]`.
    pub tangent: Point,
    /// Outward unit normal seen from each adjacent triangle.
    pub normals: [Point; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.kind == EdgeKind::Boundary
    }

    /// Outward normal of the boundary edge (the single adjacent triangle).
    pub fn outward_normal(&self) -> Point {
        self.normals[0]
    }

    /// Position of `triangle` in `self.triangles`.
    pub fn side_of(&self, triangle: usize) -> Option<usize> {
        self.triangles.iter().position(|t| *t == Some(triangle))
    }

    /// Point at canonical parameter `s` in `[0, 1]`.
    pub fn point_at(&self, mesh: &Mesh, s: f64) -> Point {
        let a = mesh.vertices[self.vertices[0]];
        let b = mesh.vertices[self.vertices[1]];
        [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
    }
}

/// Which of the two test domains a mesh covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// `(0, 1/2)^2`
    Square,
    /// `(-1/2, 1/2)^2` minus `[0, 1/2]^2`
    LShape,
}

impl Domain {
    pub fn area(self) -> f64 {
        match self {
            Domain::Square => 0.25,
            Domain::LShape => 0.75,
        }
    }

    pub fn contains_boundary_point(self, p: Point) -> bool {
        let tol = 1e-12;
        let on = |a: f64, b: f64| (a - b).abs() < tol;
        match self {
            Domain::Square => {
                let inside = |v: f64| (-tol..=0.5 + tol).contains(&v);
                inside(p[0])
                    && inside(p[1])
                    && (on(p[0], 0.0) || on(p[0], 0.5) || on(p[1], 0.0) || on(p[1], 0.5))
            }
            Domain::LShape => {
                let inside = |v: f64| (-0.5 - tol..=0.5 + tol).contains(&v);
                if !(inside(p[0]) && inside(p[1])) {
                    return false;
                }
                let outer = on(p[0], -0.5) || on(p[0], 0.5) || on(p[1], -0.5) || on(p[1], 0.5);
                let notch_x = on(p[0], 0.0) && p[1] >= -tol;
                let notch_y = on(p[1], 0.0) && p[0] >= -tol;
                (outer && !(p[0] > tol && p[1] > tol)) || notch_x || notch_y
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub domain: Domain,
    /// Cells per unit-half-length; the cell size is `1 / (2N)`.
    pub n: usize,
    pub vertices: Vec<Point>,
    pub triangles: Vec<Triangle>,
    pub edges: Vec<Edge>,
    pub corners: Vec<CornerSpec>,
}

/// Uniform triangulation of `(0, 1/2)^2` with `N x N` cells.
pub fn make_square_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidMesh("N must be positive".into()));
    }
    let h = 0.5 / n as f64;
    let mut vid = HashMap::new();
    let mut vertices = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            vid.insert((i, j), vertices.len());
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let cells = (0..n).flat_map(|j| (0..n).map(move |i| (i, j)));
    let corner_pts = [[0.0, 0.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];
    let corners: Vec<_> = corner_pts.iter().map(|&p| (p, FRAC_PI_2, 1.0)).collect();
    build(Domain::Square, n, vertices, &vid, cells, &corners)
}

/// Uniform triangulation of the L-shape: a `2N x 2N` grid on
/// `(-1/2, 1/2)^2` with the first-quadrant cells removed. The reentrant
/// corner at the origin gets weight `mu1`, which must lie in `(0, 1/3)`.
pub fn make_lshape_mesh(n: usize, mu1: f64) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidMesh("N must be positive".into()));
    }
    let reentrant = 1.5 * PI;
    if !(mu1 > 0.0 && mu1 < PI / (2.0 * reentrant)) {
        return Err(Error::InvalidMesh(format!(
            "reentrant corner weight mu1 = {mu1} must lie in (0, 1/3)"
        )));
    }
    let h = 0.5 / n as f64;
    let m = 2 * n;
    // grid index (i, j) sits at (-1/2 + i h, -1/2 + j h); the origin is (n, n)
    let removed_vertex = |i: usize, j: usize| i > n && j > n;
    let removed_cell = |i: usize, j: usize| i >= n && j >= n;
    let mut vid = HashMap::new();
    let mut vertices = Vec::new();
    for j in 0..=m {
        for i in 0..=m {
            if removed_vertex(i, j) {
                continue;
            }
            vid.insert((i, j), vertices.len());
            vertices.push([-0.5 + i as f64 * h, -0.5 + j as f64 * h]);
        }
    }
    let cells: Vec<_> = (0..m)
        .flat_map(|j| (0..m).map(move |i| (i, j)))
        .filter(|&(i, j)| !removed_cell(i, j))
        .collect();
    let corners = [
        ([0.0, 0.0], reentrant, mu1),
        ([-0.5, -0.5], FRAC_PI_2, 1.0),
        ([0.5, -0.5], FRAC_PI_2, 1.0),
        ([0.5, 0.0], FRAC_PI_2, 1.0),
        ([0.0, 0.5], FRAC_PI_2, 1.0),
        ([-0.5, 0.5], FRAC_PI_2, 1.0),
    ];
    build(Domain::LShape, n, vertices, &vid, cells.into_iter(), &corners)
}

fn build(
    domain: Domain,
    n: usize,
    vertices: Vec<Point>,
    vid: &HashMap<(usize, usize), usize>,
    cells: impl Iterator<Item = (usize, usize)>,
    corners: &[(Point, f64, f64)],
) -> Result<Mesh> {
    let mut tri_verts = Vec::new();
    for (i, j) in cells {
        let v00 = vid[&(i, j)];
        let v10 = vid[&(i + 1, j)];
        let v11 = vid[&(i + 1, j + 1)];
        let v01 = vid[&(i, j + 1)];
        tri_verts.push([v00, v10, v11]);
        tri_verts.push([v00, v11, v01]);
    }

    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut triangles = Vec::with_capacity(tri_verts.len());
    for (t, verts) in tri_verts.iter().enumerate() {
        let p = verts.map(|v| vertices[v]);
        let area = 0.5 * crate::cross(sub(p[1], p[0]), sub(p[2], p[0]));
        let mut tri_edges = [0; 3];
        let mut signs = [0i8; 3];
        let mut diameter: f64 = 0.0;
        for l in 0..3 {
            let (a, b) = (verts[l], verts[(l + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let d = sub(vertices[b], vertices[a]);
            let len = norm(d);
            diameter = diameter.max(len);
            let outward = [d[1] / len, -d[0] / len];
            let e = *edge_index.entry(key).or_insert_with(|| {
                let (lo, hi) = key;
                let pl = vertices[lo];
                let ph = vertices[hi];
                edges.push(Edge {
                    vertices: [lo, hi],
                    triangles: [None, None],
                    kind: EdgeKind::Boundary,
                    midpoint: [0.5 * (pl[0] + ph[0]), 0.5 * (pl[1] + ph[1])],
                    length: len,
                    tangent: [(ph[0] - pl[0]) / len, (ph[1] - pl[1]) / len],
                    normals: [[0.0; 2]; 2],
                });
                edges.len() - 1
            });
            let edge = &mut edges[e];
            let slot = if edge.triangles[0].is_none() { 0 } else { 1 };
            if edge.triangles[slot].is_some() {
                return Err(Error::InvalidMesh(format!("edge {e} has more than two triangles")));
            }
            edge.triangles[slot] = Some(t);
            edge.normals[slot] = outward;
            if slot == 1 {
                edge.kind = EdgeKind::Interior;
            }
            tri_edges[l] = e;
            signs[l] = if a < b { 1 } else { -1 };
        }
        triangles.push(Triangle { vertices: *verts, edges: tri_edges, edge_signs: signs, area, diameter });
    }

    let locate = |p: Point| {
        vertices
            .iter()
            .position(|v| (v[0] - p[0]).abs() < 1e-13 && (v[1] - p[1]).abs() < 1e-13)
            .ok_or_else(|| Error::InvalidMesh(format!("corner {p:?} is not a mesh vertex")))
    };
    let corners = corners
        .iter()
        .map(|&(position, angle, mu)| Ok(CornerSpec { position, angle, mu, vertex: locate(position)? }))
        .collect::<Result<Vec<_>>>()?;

    Ok(Mesh { domain, n, vertices, triangles, edges, corners })
}

impl Mesh {
    pub fn num_interior_edges(&self) -> usize {
        self.edges.iter().filter(|e| !e.is_boundary()).count()
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    /// Largest triangle diameter.
    pub fn h(&self) -> f64 {
        self.triangles.iter().map(|t| t.diameter).fold(0.0, f64::max)
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].vertices.map(|v| self.vertices[v])
    }

    /// Labels the two sides of an interior edge: the plus side is the
    /// adjacent triangle with the lower index. Returns
    /// `(K+, K-, n+, n-)`.
    pub fn edge_sides(&self, edge: usize) -> Result<(usize, usize, Point, Point)> {
        let e = &self.edges[edge];
        match e.triangles {
            [Some(a), Some(b)] => {
                let (sa, sb) = if a < b { (0, 1) } else { (1, 0) };
                Ok((a.min(b), a.max(b), e.normals[sa], e.normals[sb]))
            }
            _ => Err(Error::BoundaryEdge(edge)),
        }
    }

    /// Local vertex of triangle `t` sitting on a corner with `mu < 1`.
    pub fn singular_corner_vertex(&self, t: usize) -> Option<usize> {
        let tri = &self.triangles[t];
        self.corners
            .iter()
            .filter(|c| c.is_singular())
            .find_map(|c| tri.vertices.iter().position(|&v| v == c.vertex))
    }

    /// Plain-text dump: a header line, one `x y` line per vertex, then one
    /// `a b c` line per triangle (zero-based).
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.vertices.len(), self.triangles.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", v[0], v[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t.vertices[0], t.vertices[1], t.vertices[2]);
        }
        s
    }
}
