//! Triangle meshes, signed distance queries, isosurface extraction and
//! Chamfer distance.

mod bvh;
mod chamfer;
mod marching_cubes;
mod mesh;
mod sdf;
mod tables;
pub mod vec3;

pub use bvh::{closest_point_on_triangle, Bvh};
pub use chamfer::{chamfer_distance, directed_mean_distance, KdTree};
pub use marching_cubes::{marching_cubes, ScalarGrid};
pub use mesh::{NormalizeTransform, TriMesh};
pub use sdf::{MeshSdf, Sphere, SurfaceShape};
pub(crate) use sdf::Fnv;

pub type Point3 = [f64; 3];
