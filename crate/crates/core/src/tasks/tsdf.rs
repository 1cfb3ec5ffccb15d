//! Truncated signed distance samples around a closed surface.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::SampleBatch;
use crate::error::{PinError, Result};
use crate::geometry::{Fnv, Point3, SurfaceShape};
use crate::numerics::Tensor2;
use crate::rng::derive;

const TSDF_STREAM: u64 = 5;
const CACHE_MAGIC: &[u8; 8] = b"PINSDF\x00\x01";

/// Fractions of surface, near-surface and uniform samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMix {
    pub surface: f64,
    pub near: f64,
    pub uniform: f64,
}

impl Default for SampleMix {
    fn default() -> Self {
        SampleMix { surface: 0.3, near: 0.4, uniform: 0.3 }
    }
}

impl SampleMix {
    /// Per-kind sample counts; the uniform kind absorbs rounding.
    pub fn counts(&self, n_total: usize) -> Result<[usize; 3]> {
        let parts = [self.surface, self.near, self.uniform];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(PinError::param(format!("sample mix {parts:?} must be fractions summing to 1")));
        }
        let surface = (self.surface * n_total as f64).floor() as usize;
        let near = ((self.near * n_total as f64).floor() as usize).min(n_total - surface);
        Ok([surface, near, n_total - surface - near])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsdfParams {
    pub n_total: usize,
    pub mix: SampleMix,
    pub noise_std: f64,
    pub tau_max: f64,
    pub seed: u64,
}

impl Default for TsdfParams {
    fn default() -> Self {
        TsdfParams { n_total: 50_000, mix: SampleMix::default(), noise_std: 0.01, tau_max: 0.1, seed: 0 }
    }
}

impl TsdfParams {
    fn validate(&self) -> Result<()> {
        if self.n_total == 0 {
            return Err(PinError::param("n_total must be positive"));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(PinError::param("noise_std must be finite and non-negative"));
        }
        if !(self.tau_max > 0.0) || !self.tau_max.is_finite() {
            return Err(PinError::param("tau_max must be finite and positive"));
        }
        self.mix.counts(self.n_total).map(|_| ())
    }

    /// Cache key over the shape and every sampling parameter.
    pub fn cache_key(&self, shape: &dyn SurfaceShape) -> u64 {
        let mut h = Fnv::default();
        h.write_u64(shape.fingerprint());
        h.write_u64(self.n_total as u64);
        for v in [self.mix.surface, self.mix.near, self.mix.uniform, self.noise_std, self.tau_max] {
            h.write_f64(v);
        }
        h.write_u64(self.seed);
        h.finish()
    }
}

/// Sample points in `[-1, 1]³` with truncated signed distances. Points are
/// stored surface first, then near-surface, then uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfSampleSet {
    pub points: Vec<Point3>,
    pub distances: Vec<f64>,
    pub tau_max: f64,
    /// Surface, near-surface and uniform counts.
    pub counts: [usize; 3],
}

impl SdfSampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_batch(&self) -> Result<SampleBatch> {
        let coords = Tensor2::from_vec(self.len(), 3, self.points.iter().flatten().copied().collect())?;
        let targets = Tensor2::from_vec(self.len(), 1, self.distances.clone())?;
        SampleBatch::new(coords, targets)
    }

    pub fn write(&self, path: impl AsRef<Path>, key: u64) -> Result<()> {
        let mut buf = Vec::with_capacity(48 + self.len() * 32);
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&key.to_le_bytes());
        buf.extend_from_slice(&self.tau_max.to_le_bytes());
        for c in self.counts {
            buf.extend_from_slice(&(c as u64).to_le_bytes());
        }
        for (p, d) in self.points.iter().zip(&self.distances) {
            for v in p.iter().chain([d]) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::File::create(path)?.write_all(&buf)?;
        Ok(())
    }

    /// Reads a cached set; `Ok(None)` when the file was written for another key.
    pub fn read(path: impl AsRef<Path>, key: u64) -> Result<Option<Self>> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        let corrupt = || PinError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, "corrupt TSDF cache"));
        if bytes.len() < 48 || &bytes[..8] != CACHE_MAGIC {
            return Err(corrupt());
        }
        let word = |i: usize| u64::from_le_bytes(bytes[i * 8..i * 8 + 8].try_into().unwrap());
        if word(1) != key {
            return Ok(None);
        }
        let tau_max = f64::from_bits(word(2));
        let counts = [word(3) as usize, word(4) as usize, word(5) as usize];
        let n = counts.iter().sum::<usize>();
        if bytes.len() != 48 + n * 32 {
            return Err(corrupt());
        }
        let mut points = Vec::with_capacity(n);
        let mut distances = Vec::with_capacity(n);
        for i in 0..n {
            let base = 6 + i * 4;
            points.push([f64::from_bits(word(base)), f64::from_bits(word(base + 1)), f64::from_bits(word(base + 2))]);
            distances.push(f64::from_bits(word(base + 3)));
        }
        Ok(Some(SdfSampleSet { points, distances, tau_max, counts }))
    }
}

/// Draws surface, near-surface and uniform points and evaluates their
/// clamped signed distance. Points are drawn sequentially from one seeded
/// stream; only the distance evaluation runs in parallel, so the result
/// does not depend on the thread count.
pub fn sample_tsdf<S: SurfaceShape + ?Sized>(shape: &S, params: &TsdfParams) -> Result<SdfSampleSet> {
    params.validate()?;
    let counts = params.mix.counts(params.n_total)?;
    let mut rng = derive(params.seed, TSDF_STREAM);
    let noise = Normal::new(0.0, params.noise_std).map_err(|e| PinError::param(e.to_string()))?;
    let mut points = Vec::with_capacity(params.n_total);
    let mut on_surface = Vec::with_capacity(params.n_total);
    for _ in 0..counts[0] {
        let (p, _) = shape.sample_surface(&mut rng);
        points.push(clamp_cube(p));
        on_surface.push(true);
    }
    for _ in 0..counts[1] {
        let (p, n) = shape.sample_surface(&mut rng);
        let t: f64 = noise.sample(&mut rng);
        points.push(clamp_cube([p[0] + t * n[0], p[1] + t * n[1], p[2] + t * n[2]]));
        on_surface.push(false);
    }
    for _ in 0..counts[2] {
        points.push([rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)]);
        on_surface.push(false);
    }
    let tau = params.tau_max;
    let distances = points
        .par_iter()
        .zip(&on_surface)
        .map(|(&p, &surf)| if surf { Ok(0.0) } else { shape.signed_distance(p).map(|d| d.clamp(-tau, tau)) })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SdfSampleSet { points, distances, tau_max: tau, counts })
}

/// Loads the sample set from `dir` when a matching cache file exists,
/// otherwise samples and writes it.
pub fn sample_tsdf_cached<S: SurfaceShape>(shape: &S, params: &TsdfParams, dir: impl AsRef<Path>) -> Result<SdfSampleSet> {
    let key = params.cache_key(shape);
    let path: PathBuf = dir.as_ref().join(format!("tsdf-{key:016x}.bin"));
    if path.exists() {
        if let Some(set) = SdfSampleSet::read(&path, key)? {
            return Ok(set);
        }
    }
    let set = sample_tsdf(shape, params)?;
    fs::create_dir_all(dir.as_ref())?;
    set.write(&path, key)?;
    Ok(set)
}

fn clamp_cube(p: Point3) -> Point3 {
    p.map(|v| v.clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MeshSdf, Sphere, TriMesh};
    use crate::geometry::vec3::norm;

    fn small(n: usize) -> TsdfParams {
        TsdfParams { n_total: n, seed: 7, ..TsdfParams::default() }
    }

    #[test]
    fn counts_and_bounds() {
        let sphere = Sphere::new([0.0; 3], 0.5).unwrap();
        let set = sample_tsdf(&sphere, &small(1001)).unwrap();
        assert_eq!(set.counts, [300, 400, 301]);
        assert_eq!(set.len(), 1001);
        assert!(set.points.iter().flatten().all(|v| (-1.0..=1.0).contains(v)));
        assert!(set.distances.iter().all(|d| d.abs() <= 0.1));
        assert!(set.distances[..300].iter().all(|&d| d == 0.0));
        for (p, d) in set.points[700..].iter().zip(&set.distances[700..]) {
            assert_eq!(*d, (norm(*p) - 0.5).clamp(-0.1, 0.1));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let sphere = Sphere::new([0.0; 3], 0.5).unwrap();
        assert_eq!(sample_tsdf(&sphere, &small(300)).unwrap(), sample_tsdf(&sphere, &small(300)).unwrap());
        let other = TsdfParams { seed: 8, ..small(300) };
        assert_ne!(sample_tsdf(&sphere, &small(300)).unwrap(), sample_tsdf(&sphere, &other).unwrap());
    }

    #[test]
    fn invalid_mix_is_rejected() {
        let sphere = Sphere::new([0.0; 3], 0.5).unwrap();
        let bad = TsdfParams { mix: SampleMix { surface: 0.5, near: 0.5, uniform: 0.5 }, ..small(10) };
        assert!(sample_tsdf(&sphere, &bad).is_err());
        assert!(sample_tsdf(&sphere, &TsdfParams { tau_max: 0.0, ..small(10) }).is_err());
    }

    #[test]
    fn mesh_points_outside_bounding_box_are_positive() {
        let sdf = MeshSdf::new(TriMesh::icosphere(2, 0.5)).unwrap();
        let set = sample_tsdf(&sdf, &small(400)).unwrap();
        for (p, d) in set.points.iter().zip(&set.distances) {
            if p.iter().any(|v| v.abs() > 0.5) {
                assert!(*d > 0.0);
            }
        }
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let sphere = Sphere::new([0.0; 3], 0.5).unwrap();
        let a = sample_tsdf_cached(&sphere, &small(200), dir.path()).unwrap();
        let b = sample_tsdf_cached(&sphere, &small(200), dir.path()).unwrap();
        assert_eq!(a, b);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        let key = small(200).cache_key(&sphere);
        let path = dir.path().join(format!("tsdf-{key:016x}.bin"));
        assert!(SdfSampleSet::read(&path, key ^ 1).unwrap().is_none());
    }
}
