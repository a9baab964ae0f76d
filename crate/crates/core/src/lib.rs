//! Physics-driven self-supervised point cloud pretraining at desk scale.
//!
//! The crate turns raw point clouds into two kinds of supervision and trains
//! a small dual-task network on them:
//!
//! * [`delaunay`] tetrahedralizes a cloud and prunes oversized cells,
//! * [`inertia`] derives a compressive load case from the principal axes,
//! * [`fem`] solves static linear elasticity for the ground-truth displacement,
//! * [`continuum`] evaluates deformation gradient, strain, stress and the
//!   nodal equilibrium residual of any displacement field,
//! * [`udf`] samples query points with unsigned-distance targets,
//! * [`losses`] implements the implicit, data-fidelity and physics-informed
//!   losses and their weighted sum,
//! * [`nn`] is a toy encoder with an implicit and a displacement decoder,
//!   trained with hand-written backpropagation, Adam and cosine annealing,
//! * [`pipeline`] generates synthetic shapes, builds datasets and runs the
//!   pretraining / linear-probe ablation.

pub mod cli;
pub mod continuum;
pub mod delaunay;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod inertia;
pub mod io;
pub mod losses;
pub mod nn;
pub mod pipeline;
pub mod spatial;
pub mod udf;

pub use error::{Error, Result};
pub use geometry::{normalize_unit_sphere, signed_volume, PointCloud, TetMesh, Transform, Vec3};
