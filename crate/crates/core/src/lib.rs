//! Skeleton-assisted rigid registration of corrupted 3D point clouds.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: point clouds, rigid transforms, a k-d tree, the closed-form
//!   Procrustes solver, sampling strategies, distances and error metrics.
//! * [`corruption`]: seeded generators for twelve corruption kinds at five
//!   severity levels.
//! * [`skeleton`]: skeletal-sphere extraction by direct optimisation of
//!   convex-combination weights.
//! * [`registration`]: soft-correspondence transform estimation, inlier
//!   ratios, weighted fusion of the raw-cloud and skeleton estimates, and an
//!   ICP baseline.

pub mod corruption;
pub mod error;
pub mod geometry;
pub mod registration;
pub mod skeleton;

pub use error::{Error, Result};
pub use geometry::{Label, PointCloud, RigidTransform, Vec3};
