//! Coordinate model of manifolds as finite disjoint unions of `ℝ^a × (S¹)^b` patches with
//! excluded balls, smooth maps with analytic or finite-difference Jacobians, an RK4 integrator
//! that detects domain escape, and subspace linear algebra.

pub mod linalg;
pub mod ode;
pub mod smooth_map;
pub mod space;

pub use linalg::{column_space, min_principal_angle, null_space, rank, subspace_residual};
pub use ode::{integrate, integrate_guarded, EscapeReason, OdeSettings, TrajectoryOutcome, TrajectoryStatus};
pub use smooth_map::{jacobian, SmoothMap};
pub use space::{normalize_angle, wrap_difference, CoordKind, Exclusion, Patch, Point, Space, Tangent};
