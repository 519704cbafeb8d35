//! Structure subsolver: nonlinear heat conduction in a steel slab,
//! discretized with 1D Lagrange finite elements.

pub mod material;
pub mod mesh;
pub mod solver;

pub use material::Material;
pub use mesh::StructureMesh;
pub use solver::{assemble, NewtonMode, StructureSolver};
