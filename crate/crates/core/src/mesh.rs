//! Structured triangulations of axis-aligned rectangles.
//!
//! Every cell of an `nx × ny` grid is cut along its lower-left to upper-right
//! diagonal, so uniform refinement of a mesh always yields a mesh whose
//! vertices and triangle edges contain those of the parent. The refinement
//! ladders used by the convergence studies rely on this nesting.

use std::io::Write;

use crate::error::{invalid, Result};

pub type Point = [f64; 2];

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    /// The reference domain `[-1, 1]²`.
    pub fn symmetric_unit() -> Self {
        Self::new(-1.0, 1.0, -1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn on_boundary(&self, p: Point) -> bool {
        p[0] == self.x0 || p[0] == self.x1 || p[1] == self.y0 || p[1] == self.y1
    }
}

impl Default for Rect {
    fn default() -> Self {
        Self::symmetric_unit()
    }
}

/// Structured triangulation of a rectangle.
///
/// Vertex `(i, j)` with `0 ≤ i ≤ nx`, `0 ≤ j ≤ ny` has index `j·(nx+1) + i`.
/// Cell `(i, j)` contributes the triangles `(v00, v10, v11)` and
/// `(v00, v11, v01)`, both counterclockwise.
#[derive(Debug, Clone)]
pub struct Mesh {
    domain: Rect,
    nx: usize,
    ny: usize,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<usize>,
    on_boundary: Vec<bool>,
    h: f64,
}

impl Mesh {
    pub fn rect(domain: Rect, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid(format!("cell counts must be positive (nx = {nx}, ny = {ny})")));
        }
        if !(domain.x1 > domain.x0 && domain.y1 > domain.y0) {
            return Err(invalid(format!("degenerate rectangle {domain:?}")));
        }
        if !(domain.x0.is_finite() && domain.x1.is_finite() && domain.y0.is_finite() && domain.y1.is_finite()) {
            return Err(invalid("rectangle corners must be finite"));
        }

        // Coordinates are computed as x0 + width·(i/nx); for a refined mesh
        // (2i)/(2nx) rounds to the same value as i/nx, which keeps parent
        // vertices bitwise identical in the child.
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            let y = domain.y0 + domain.height() * (j as f64 / ny as f64);
            for i in 0..=nx {
                let x = domain.x0 + domain.width() * (i as f64 / nx as f64);
                vertices.push([x, y]);
            }
        }

        let stride = nx + 1;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let v00 = j * stride + i;
                let v10 = v00 + 1;
                let v01 = v00 + stride;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }

        let on_boundary: Vec<bool> = vertices.iter().map(|&p| domain.on_boundary(p)).collect();
        let boundary = on_boundary
            .iter()
            .enumerate()
            .filter_map(|(v, &b)| b.then_some(v))
            .collect();

        let mut mesh = Self {
            domain,
            nx,
            ny,
            vertices,
            triangles,
            boundary,
            on_boundary,
            h: 0.0,
        };
        mesh.h = mesh.max_edge_length();
        Ok(mesh)
    }

    /// `[-1, 1]²` split into `n × n` cells.
    pub fn square(n: usize) -> Result<Self> {
        Self::rect(Rect::symmetric_unit(), n, n)
    }

    /// Splits every cell into four, doubling `nx` and `ny`.
    pub fn refine_uniform(&self) -> Self {
        Self::rect(self.domain, 2 * self.nx, 2 * self.ny).expect("refinement of a valid mesh is valid")
    }

    /// Number of uniform refinements separating `self` from `coarse`, if `self`
    /// is a descendant of `coarse` (zero when they coincide).
    pub fn refinement_depth_from(&self, coarse: &Mesh) -> Option<u32> {
        if self.domain != coarse.domain || self.nx % coarse.nx != 0 || self.ny % coarse.ny != 0 {
            return None;
        }
        let rx = self.nx / coarse.nx;
        let ry = self.ny / coarse.ny;
        (rx == ry && rx.is_power_of_two()).then(|| rx.trailing_zeros())
    }

    fn max_edge_length(&self) -> f64 {
        let mut h: f64 = 0.0;
        for t in &self.triangles {
            for k in 0..3 {
                let a = self.vertices[t[k]];
                let b = self.vertices[t[(k + 1) % 3]];
                h = h.max((b[0] - a[0]).hypot(b[1] - a[1]));
            }
        }
        h
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Maximum edge length.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// Sorted indices of the vertices on the rectangle's boundary.
    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.on_boundary[v]
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area of triangle `t` (positive for counterclockwise ordering).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_points(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    /// Plain-text dump: vertex count, vertices, triangle count, triangles.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "vertices {}", self.vertices.len())?;
        for p in &self.vertices {
            writeln!(out, "{:.17e} {:.17e}", p[0], p[1])?;
        }
        writeln!(out, "triangles {}", self.triangles.len())?;
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}
