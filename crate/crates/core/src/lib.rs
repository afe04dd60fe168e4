//! Desk-scale vision-and-language navigation stack.
//!
//! The crate is organized in two layers:
//!
//! - a numeric core generic over the scalar type ([`scalar::Scalar`], `f32` or
//!   `f64`): rigid-body geometry, truncated-signed-distance fusion, and the
//!   trajectory metrics;
//! - concrete systems built on the `f64` aliases below: a deterministic
//!   synthetic RGB-D simulator, the topological memory graph, the
//!   grid-annotated prompt interface with pixel-action grounding, pluggable
//!   planner backends, and the episode evaluation harness.

pub mod scalar;

pub mod geometry;
pub mod tsdf;

pub mod draw;
pub mod metrics;
pub mod topo;

pub mod sim;

pub mod planner;
pub mod reasoning;

pub mod eval;

pub mod cli;

pub use scalar::Scalar;

/// Scalar type used by the simulator and evaluation layers.
pub type Real = f64;

pub type Vec3d = geometry::Vec3<Real>;
pub type Mat3d = geometry::Mat3<Real>;
pub type Pose3d = geometry::Pose3<Real>;
pub type AgentStated = geometry::AgentState<Real>;
pub type Intrinsicsd = geometry::CameraIntrinsics<Real>;
pub type CameraRigd = geometry::CameraRig<Real>;
pub type Rayd = geometry::Ray<Real>;
pub type Aabbd = geometry::Aabb<Real>;
pub type TsdfVolumed = tsdf::TsdfVolume<Real>;
pub type RgbdFramed = tsdf::RgbdFrame<Real>;
