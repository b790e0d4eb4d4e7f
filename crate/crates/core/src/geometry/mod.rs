//! Foundational types and numeric kernels.

mod cloud;
mod distance;
mod index;
pub mod io;
mod metrics;
mod procrustes;
mod sampling;
mod transform;

pub use cloud::{normalize_cloud, Aabb, Label, Normalization, PointCloud};
pub use distance::{chamfer_distance, l_ddl, CHAMFER_PREFACTOR};
pub use index::SpatialIndex;
pub use metrics::{rotation_error_degrees, translation_error, ErrorMetrics, RotationError};
pub use procrustes::{procrustes_solve, registration_error};
pub use sampling::{fps_indices, fps_indices_from, fps_sample, rds_indices, rds_sample};
pub use transform::{apply_transform, round_significant, RigidTransform, ROTATION_TOLERANCE};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
