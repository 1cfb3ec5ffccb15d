//! Isosurface extraction on a regular grid.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{PinError, Result};

use super::tables::{CORNERS, EDGES, TRIANGLES};
use super::{Point3, TriMesh};

/// Samples of a scalar field on a regular grid. `values` is stored with x
/// varying fastest, then y, then z.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub dims: [usize; 3],
    pub origin: Point3,
    pub spacing: Point3,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(dims: [usize; 3], origin: Point3, spacing: Point3, values: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(PinError::param(format!("grid needs at least 2 samples per axis, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0)) {
            return Err(PinError::param("grid spacing must be positive"));
        }
        let n = dims[0] * dims[1] * dims[2];
        if values.len() != n {
            return Err(PinError::shape(format!("grid expects {n} values, got {}", values.len())));
        }
        Ok(ScalarGrid { dims, origin, spacing, values })
    }

    /// Cube grid with `res` samples per axis spanning `[lo, hi]` inclusive.
    pub fn cube_points(res: usize, lo: f64, hi: f64) -> Result<(Vec<Point3>, [usize; 3], Point3, Point3)> {
        if res < 2 || !(hi > lo) {
            return Err(PinError::param(format!("invalid cube grid: res {res}, range [{lo}, {hi}]")));
        }
        let h = (hi - lo) / (res - 1) as f64;
        let coord = |i: usize| if i == res - 1 { hi } else { lo + h * i as f64 };
        let mut pts = Vec::with_capacity(res * res * res);
        for k in 0..res {
            for j in 0..res {
                for i in 0..res {
                    pts.push([coord(i), coord(j), coord(k)]);
                }
            }
        }
        Ok((pts, [res; 3], [lo; 3], [h; 3]))
    }

    /// Evaluates `f` at every point of a cube grid, in parallel.
    pub fn sample_cube<F>(res: usize, lo: f64, hi: f64, f: F) -> Result<Self>
    where
        F: Fn(Point3) -> Result<f64> + Sync,
    {
        let (pts, dims, origin, spacing) = Self::cube_points(res, lo, hi)?;
        let values = pts.par_iter().map(|&p| f(p)).collect::<Result<Vec<f64>>>()?;
        Self::new(dims, origin, spacing, values)
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> Point3 {
        [
            self.origin[0] + self.spacing[0] * i as f64,
            self.origin[1] + self.spacing[1] * j as f64,
            self.origin[2] + self.spacing[2] * k as f64,
        ]
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }
}

/// Extracts the `iso` level set as a triangle mesh. Vertices on shared cell
/// edges are merged, and triangles are wound so normals point toward values
/// above `iso` (outward for a signed distance field).
pub fn marching_cubes(grid: &ScalarGrid, iso: f64) -> Result<TriMesh> {
    if !iso.is_finite() {
        return Err(PinError::param("iso level must be finite"));
    }
    if let Some(v) = grid.values.iter().find(|v| !v.is_finite()) {
        return Err(PinError::Geometry(format!("grid contains non-finite value {v}")));
    }
    let [nx, ny, nz] = grid.dims;
    let mut vertices: Vec<Point3> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut edge_vertex: HashMap<(usize, usize), usize> = HashMap::new();

    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let corner = |c: usize| {
                    let [dx, dy, dz] = CORNERS[c];
                    (i + dx, j + dy, k + dz)
                };
                let mut case = 0usize;
                for c in 0..8 {
                    let (a, b, d) = corner(c);
                    if grid.value(a, b, d) < iso {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let mut vid = [usize::MAX; 12];
                let row = &TRIANGLES[case];
                for &e in row.iter().take_while(|&&e| e >= 0) {
                    let e = e as usize;
                    if vid[e] != usize::MAX {
                        continue;
                    }
                    let (p, q) = (corner(EDGES[e][0]), corner(EDGES[e][1]));
                    let (ip, iq) = (grid.index(p.0, p.1, p.2), grid.index(q.0, q.1, q.2));
                    let key = (ip.min(iq), ip.max(iq));
                    vid[e] = *edge_vertex.entry(key).or_insert_with(|| {
                        let (vp, vq) = (grid.values[ip], grid.values[iq]);
                        let t = if (vq - vp).abs() > f64::MIN_POSITIVE {
                            ((iso - vp) / (vq - vp)).clamp(0.0, 1.0)
                        } else {
                            0.5
                        };
                        let (pp, pq) = (grid.position(p.0, p.1, p.2), grid.position(q.0, q.1, q.2));
                        vertices.push([
                            pp[0] + t * (pq[0] - pp[0]),
                            pp[1] + t * (pq[1] - pp[1]),
                            pp[2] + t * (pq[2] - pp[2]),
                        ]);
                        vertices.len() - 1
                    });
                }
                // The table winds toward the below-iso side; reverse it.
                for tri in row.chunks(3).take_while(|t| t[0] >= 0) {
                    triangles.push([vid[tri[0] as usize], vid[tri[2] as usize], vid[tri[1] as usize]]);
                }
            }
        }
    }
    TriMesh::new(vertices, triangles)
}
