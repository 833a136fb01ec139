//! Meshes, topology, mesh I/O and the solenoidal loop basis.

mod enclosing;
pub mod gmsh;
mod loops;
mod mesh;
pub mod meshgen;
pub mod vec3;

pub use enclosing::min_enclosing_sphere;
pub use gmsh::{parse_mesh, parse_mesh_str, write_msh22, write_msh41, MeshFormat};
pub use loops::{build_loop_basis, constrained_tree, LoopBasis, LoopFunction};
pub use mesh::{extract_boundary, MeshDump, SurfaceMesh, VolumeMesh};
pub(crate) use mesh::TET_FACE_LOCAL;
pub use vec3::Vec3;
