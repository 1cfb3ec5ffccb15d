use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{PinError, Result};
use crate::rng::PinRng;

use super::vec3::{add, cross, dot, norm, normalize, scale, sub};
use super::Point3;

/// Indexed triangle mesh.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
}

/// Affine map `p ↦ (p − center) · scale` applied by [`TriMesh::normalized`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizeTransform {
    pub center: Point3,
    pub scale: f64,
}

impl NormalizeTransform {
    pub fn apply(&self, p: Point3) -> Point3 {
        scale(sub(p, self.center), self.scale)
    }

    pub fn invert(&self, p: Point3) -> Point3 {
        add(scale(p, 1.0 / self.scale), self.center)
    }
}

impl TriMesh {
    /// Validates indices and drops zero-area triangles.
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(PinError::Geometry(format!("triangle {t:?} references a vertex outside 0..{n}")));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(PinError::Geometry("non-finite vertex coordinate".into()));
        }
        let mut mesh = TriMesh { vertices, triangles };
        mesh.triangles.retain(|t| {
            let [a, b, c] = *t;
            a != b && b != c && a != c && {
                let [p, q, r] = [mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]];
                norm(cross(sub(q, p), sub(r, p))) > 0.0
            }
        });
        Ok(mesh)
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, i: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[i];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle(i);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    /// Unit normal following the right-hand rule on the vertex order.
    pub fn face_normal(&self, i: usize) -> Point3 {
        let [a, b, c] = self.triangle(i);
        normalize(cross(sub(b, a), sub(c, a)))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.triangle_area(i)).sum()
    }

    /// Volume enclosed by a closed mesh; positive for outward-facing triangles.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                dot(a, cross(b, c)) / 6.0
            })
            .sum()
    }

    pub fn bounding_box(&self) -> Option<(Point3, Point3)> {
        let first = *self.vertices.first()?;
        let mut lo = first;
        let mut hi = first;
        for v in &self.vertices {
            for d in 0..3 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        Some((lo, hi))
    }

    /// Every undirected edge is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        if self.triangles.is_empty() {
            return false;
        }
        let mut count: HashMap<(usize, usize), u32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        count.values().all(|&c| c == 2)
    }

    pub fn flipped(&self) -> TriMesh {
        TriMesh {
            vertices: self.vertices.clone(),
            triangles: self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect(),
        }
    }

    pub fn transformed(&self, f: impl Fn(Point3) -> Point3) -> TriMesh {
        TriMesh { vertices: self.vertices.iter().map(|&v| f(v)).collect(), triangles: self.triangles.clone() }
    }

    /// Uniformly scales and centres the mesh so that its bounding box fits
    /// `[-1 + margin, 1 − margin]` along the longest axis.
    pub fn normalized(&self, margin: f64) -> Result<(TriMesh, NormalizeTransform)> {
        let (lo, hi) = self
            .bounding_box()
            .ok_or_else(|| PinError::Geometry("cannot normalise an empty mesh".into()))?;
        let extent = (0..3).map(|d| hi[d] - lo[d]).fold(0.0, f64::max);
        if extent <= 0.0 {
            return Err(PinError::Geometry("mesh has zero extent".into()));
        }
        let center = scale(add(lo, hi), 0.5);
        let tf = NormalizeTransform { center, scale: 2.0 * (1.0 - margin) / extent };
        Ok((self.transformed(|p| tf.apply(p)), tf))
    }

    /// `n` points drawn uniformly by area, with the normal of their triangle.
    pub fn sample_surface(&self, n: usize, rng: &mut PinRng) -> Result<Vec<(Point3, Point3)>> {
        let cdf = self.area_cdf()?;
        Ok((0..n).map(|_| self.sample_with_cdf(&cdf, rng)).collect())
    }

    pub(crate) fn area_cdf(&self) -> Result<Vec<f64>> {
        if self.triangles.is_empty() {
            return Err(PinError::Geometry("cannot sample an empty mesh".into()));
        }
        let mut acc = 0.0;
        let cdf: Vec<f64> = (0..self.triangles.len())
            .map(|i| {
                acc += self.triangle_area(i);
                acc
            })
            .collect();
        Ok(cdf)
    }

    pub(crate) fn sample_with_cdf(&self, cdf: &[f64], rng: &mut PinRng) -> (Point3, Point3) {
        let total = *cdf.last().expect("non-empty cdf");
        let u = rng.random_range(0.0..total);
        let i = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        let [a, b, c] = self.triangle(i);
        let r1: f64 = rng.random_range(0.0..1.0);
        let r2: f64 = rng.random_range(0.0..1.0);
        let s = r1.sqrt();
        let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
        let p = [
            wa * a[0] + wb * b[0] + wc * c[0],
            wa * a[1] + wb * b[1] + wc * c[1],
            wa * a[2] + wb * b[2] + wc * c[2],
        ];
        (p, self.face_normal(i))
    }

    /// Parses `v` and `f` records of a Wavefront OBJ file. Faces must be
    /// triangles; `f a/b/c` forms and negative indices are accepted.
    pub fn parse_obj(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let mut it = line.split_whitespace();
            let bad = |what: &str| PinError::Geometry(format!("OBJ line {}: {what}", lineno + 1));
            match it.next() {
                Some("v") => {
                    let mut p = [0.0; 3];
                    for c in &mut p {
                        *c = it
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| bad("malformed vertex"))?;
                    }
                    vertices.push(p);
                }
                Some("f") => {
                    let idx = it
                        .map(|tok| {
                            let first = tok.split('/').next().unwrap_or("");
                            let i: i64 = first.parse().map_err(|_| bad("malformed face index"))?;
                            let n = vertices.len() as i64;
                            let resolved = if i < 0 { n + i } else { i - 1 };
                            if resolved < 0 {
                                return Err(bad("face index out of range"));
                            }
                            Ok(resolved as usize)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    if idx.len() != 3 {
                        return Err(bad("only triangular faces are supported"));
                    }
                    triangles.push([idx[0], idx[1], idx[2]]);
                }
                _ => {}
            }
        }
        TriMesh::new(vertices, triangles)
    }

    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_obj(&std::fs::read_to_string(path)?)
    }

    pub fn to_obj_string(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {:?} {:?} {:?}", v[0], v[1], v[2]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        s
    }

    pub fn save_obj(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_obj_string())?;
        Ok(())
    }

    /// Subdivided icosahedron projected onto a sphere, outward-facing.
    pub fn icosphere(subdivisions: usize, radius: f64) -> TriMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Point3> = [
            [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
            [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
            [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|&v| normalize(v))
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
            let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Point3>| -> usize {
                *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    verts.push(normalize(scale(add(verts[a], verts[b]), 0.5)));
                    verts.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for &[a, b, c] in &faces {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        let vertices = vertices.into_iter().map(|v| scale(v, radius)).collect();
        TriMesh { vertices, triangles: faces }
    }

    /// Largest distance between a triangle's plane and the sphere it
    /// approximates (the sagitta of the longest edge), for a mesh from
    /// [`TriMesh::icosphere`].
    pub fn icosphere_chord_error(&self, radius: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.triangles.len() {
            let [a, b, c] = self.triangle(i);
            let centroid = scale(add(add(a, b), c), 1.0 / 3.0);
            worst = worst.max(radius - norm(centroid));
        }
        worst
    }
}
