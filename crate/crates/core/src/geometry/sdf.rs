//! Signed distance to closed surfaces.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{PinError, Result};
use crate::rng::PinRng;

use super::vec3::{add, cross, dot, norm, normalize, scale, sub};
use super::{Bvh, Point3, TriMesh};

/// A closed surface with a signed distance (negative inside) and an
/// area-uniform surface sampler.
pub trait SurfaceShape: Sync {
    fn signed_distance(&self, p: Point3) -> Result<f64>;

    /// Area-uniform surface point and its outward unit normal.
    fn sample_surface(&self, rng: &mut PinRng) -> (Point3, Point3);

    /// Short identifier used in cache keys and reports.
    fn fingerprint(&self) -> u64;
}

/// Analytic sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: Point3,
    pub radius: f64,
}

impl Sphere {
    pub fn new(center: Point3, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(PinError::param("sphere radius must be positive"));
        }
        Ok(Sphere { center, radius })
    }
}

impl SurfaceShape for Sphere {
    fn signed_distance(&self, p: Point3) -> Result<f64> {
        Ok(norm(sub(p, self.center)) - self.radius)
    }

    fn sample_surface(&self, rng: &mut PinRng) -> (Point3, Point3) {
        loop {
            let d: Point3 = [
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
            ];
            if norm(d) > 1e-12 {
                let n = normalize(d);
                return (add(self.center, scale(n, self.radius)), n);
            }
        }
    }

    fn fingerprint(&self) -> u64 {
        let mut h = Fnv::default();
        h.write_str("sphere");
        for v in self.center.iter().chain([&self.radius]) {
            h.write_f64(*v);
        }
        h.finish()
    }
}

/// Signed distance to a closed triangle mesh.
///
/// Magnitude comes from a BVH closest-point query. The sign comes from the
/// generalised winding number; points where the winding number is not
/// clearly 0 or 1 fall back to ray-parity voting over three rays, and fail
/// when the rays disagree.
#[derive(Debug, Clone)]
pub struct MeshSdf {
    mesh: TriMesh,
    bvh: Bvh,
    area_cdf: Vec<f64>,
}

/// Squared distance under which a point counts as lying on the surface.
const ON_SURFACE2: f64 = 1e-24;

const RAYS: [Point3; 3] = [
    [0.5773502691896258, 0.5773502691896257, 0.5773502691896258],
    [-0.2672612419124244, 0.8017837257372732, -0.5345224838248488],
    [0.8164965809277261, -0.4082482904638631, -0.4082482904638629],
];

impl MeshSdf {
    pub fn new(mesh: TriMesh) -> Result<Self> {
        if !mesh.is_watertight() {
            return Err(PinError::Geometry(
                "mesh is not watertight; signed distance is undefined".into(),
            ));
        }
        let bvh = Bvh::build(&mesh);
        let area_cdf = mesh.area_cdf()?;
        Ok(MeshSdf { mesh, bvh, area_cdf })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn unsigned_distance(&self, p: Point3) -> f64 {
        self.bvh.closest(&self.mesh, p).map_or(f64::INFINITY, |(d2, _, _)| d2.sqrt())
    }

    /// Generalised winding number (van Oosterom–Strackee solid angles).
    pub fn winding_number(&self, p: Point3) -> f64 {
        let mut total = 0.0;
        for i in 0..self.mesh.triangles.len() {
            let [a, b, c] = self.mesh.triangle(i);
            let (a, b, c) = (sub(a, p), sub(b, p), sub(c, p));
            let (la, lb, lc) = (norm(a), norm(b), norm(c));
            let num = dot(a, cross(b, c));
            let den = la * lb * lc + dot(a, b) * lc + dot(a, c) * lb + dot(b, c) * la;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * PI)
    }

    fn ray_parity(&self, p: Point3, dir: Point3) -> bool {
        let mut hits = 0usize;
        for i in 0..self.mesh.triangles.len() {
            let [a, b, c] = self.mesh.triangle(i);
            let e1 = sub(b, a);
            let e2 = sub(c, a);
            let h = cross(dir, e2);
            let det = dot(e1, h);
            if det.abs() < 1e-15 {
                continue;
            }
            let inv = 1.0 / det;
            let s = sub(p, a);
            let u = inv * dot(s, h);
            if !(0.0..=1.0).contains(&u) {
                continue;
            }
            let q = cross(s, e1);
            let v = inv * dot(dir, q);
            if v < 0.0 || u + v > 1.0 {
                continue;
            }
            if inv * dot(e2, q) > 0.0 {
                hits += 1;
            }
        }
        hits % 2 == 1
    }

    pub fn is_inside(&self, p: Point3) -> Result<bool> {
        let w = self.winding_number(p).abs();
        if w < 0.25 {
            return Ok(false);
        }
        if (w - 1.0).abs() < 0.25 {
            return Ok(true);
        }
        let votes: Vec<bool> = RAYS.iter().map(|&d| self.ray_parity(p, d)).collect();
        if votes.iter().all(|&v| v == votes[0]) {
            Ok(votes[0])
        } else {
            Err(PinError::Geometry(format!(
                "cannot decide inside/outside for point {p:?} (winding number {w:.3})"
            )))
        }
    }
}

impl SurfaceShape for MeshSdf {
    fn signed_distance(&self, p: Point3) -> Result<f64> {
        let (d2, _, _) = self
            .bvh
            .closest(&self.mesh, p)
            .ok_or_else(|| PinError::Geometry("empty mesh".into()))?;
        if d2 <= ON_SURFACE2 {
            return Ok(0.0);
        }
        let d = d2.sqrt();
        Ok(if self.is_inside(p)? { -d } else { d })
    }

    fn sample_surface(&self, rng: &mut PinRng) -> (Point3, Point3) {
        self.mesh.sample_with_cdf(&self.area_cdf, rng)
    }

    fn fingerprint(&self) -> u64 {
        let mut h = Fnv::default();
        h.write_str("mesh");
        for v in self.mesh.vertices.iter().flatten() {
            h.write_f64(*v);
        }
        for t in self.mesh.triangles.iter().flatten() {
            h.write_u64(*t as u64);
        }
        h.finish()
    }
}

/// 64-bit FNV-1a, used for cache keys.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Fnv(u64);

impl Default for Fnv {
    fn default() -> Self {
        Fnv(0xcbf29ce484222325)
    }
}

impl Fnv {
    pub(crate) fn write_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    pub(crate) fn write_u64(&mut self, v: u64) {
        self.write_bytes(&v.to_le_bytes());
    }

    pub(crate) fn write_f64(&mut self, v: f64) {
        self.write_u64(v.to_bits());
    }

    pub(crate) fn write_str(&mut self, s: &str) {
        self.write_bytes(s.as_bytes());
    }

    pub(crate) fn finish(self) -> u64 {
        self.0
    }
}
