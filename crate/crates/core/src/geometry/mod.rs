//! Rigid-body poses, camera models, pixel back-projection, and analytic ray
//! intersection — the shared math substrate for mapping, simulation, and
//! action grounding.
//!
//! Conventions, fixed once for the whole crate:
//! - world frame is z-up; the agent moves on the z = floor plane
//! - body frame is x-forward / y-left / z-up, yawing about world z
//! - camera frame is z-forward / x-right / y-down (depth along +z)

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{cast, Scalar};

mod vec3;
pub use vec3::{Mat3, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("depth must be positive, got {0}")]
    InvalidDepth(f64),
    #[error("pixel ({u:.2}, {v:.2}) outside image bounds {width}x{height}")]
    PixelOutOfBounds {
        u: f64,
        v: f64,
        width: u32,
        height: u32,
    },
    #[error("camera intrinsics invalid: {0}")]
    BadIntrinsics(String),
    #[error("rotation matrix is not orthonormal (|R R^T - I| = {0:.3e})")]
    NonOrthonormal(f64),
}

/// Wraps an angle to the half-open interval `(-pi, pi]`.
pub fn wrap_angle<S: Scalar>(angle: S) -> S {
    let two_pi = S::PI() + S::PI();
    let mut a = angle % two_pi;
    if a <= -S::PI() {
        a = a + two_pi;
    } else if a > S::PI() {
        a = a - two_pi;
    }
    a
}

/// Absolute angular distance between two headings, in `[0, pi]`.
pub fn angular_distance<S: Scalar>(a: S, b: S) -> S {
    wrap_angle(a - b).abs()
}

/// Rigid transform in SE(3): rotation (world-from-body) plus translation in
/// meters. Stored as an explicit 3x3 matrix; the agent's planar state only
/// ever yaws, but camera extrinsics need the full group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose3<S: Scalar> {
    pub rotation: Mat3<S>,
    pub translation: Vec3<S>,
}

impl<S: Scalar> Pose3<S> {
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zero(),
        }
    }

    pub fn new(rotation: Mat3<S>, translation: Vec3<S>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vec3<S>) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation,
        }
    }

    /// Pose that yaws about world z by `theta` and translates to `translation`.
    pub fn from_yaw_translation(theta: S, translation: Vec3<S>) -> Self {
        Self {
            rotation: Mat3::rotation_z(theta),
            translation,
        }
    }

    /// Applies `self` after `other`: the returned pose maps a point through
    /// `other` first.
    pub fn compose(&self, other: &Pose3<S>) -> Pose3<S> {
        Pose3 {
            rotation: self.rotation.mul_mat(&other.rotation),
            translation: self.rotation.mul_vec(other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose3<S> {
        let rt = self.rotation.transposed();
        Pose3 {
            rotation: rt,
            translation: -rt.mul_vec(self.translation),
        }
    }

    pub fn transform_point(&self, point: Vec3<S>) -> Vec3<S> {
        self.rotation.mul_vec(point) + self.translation
    }

    pub fn transform_vector(&self, vector: Vec3<S>) -> Vec3<S> {
        self.rotation.mul_vec(vector)
    }

    /// Max absolute entry of `R R^T - I`; zero for a perfect rotation.
    pub fn orthonormality_error(&self) -> S {
        let rrt = self.rotation.mul_mat(&self.rotation.transposed());
        let mut err = S::zero();
        for r in 0..3 {
            for c in 0..3 {
                let expect = if r == c { S::one() } else { S::zero() };
                err = err.max((rrt.get(r, c) - expect).abs());
            }
        }
        err
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let err = self.orthonormality_error();
        let det = self.rotation.determinant();
        if err > cast(1e-6) || (det - S::one()).abs() > cast(1e-6) {
            return Err(GeometryError::NonOrthonormal(err.to_f64_lossy()));
        }
        Ok(())
    }

    /// Row-major 4x4 homogeneous matrix, used by tests as an independent route.
    pub fn to_homogeneous(&self) -> [[S; 4]; 4] {
        let r = &self.rotation;
        let t = self.translation;
        [
            [r.get(0, 0), r.get(0, 1), r.get(0, 2), t.x],
            [r.get(1, 0), r.get(1, 1), r.get(1, 2), t.y],
            [r.get(2, 0), r.get(2, 1), r.get(2, 2), t.z],
            [S::zero(), S::zero(), S::zero(), S::one()],
        ]
    }
}

/// Planar agent state: position on the floor plane plus heading.
/// `theta` is kept normalized to `(-pi, pi]` by every constructor and mutation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState<S: Scalar> {
    pub x: S,
    pub y: S,
    pub theta: S,
}

impl<S: Scalar> AgentState<S> {
    pub fn new(x: S, y: S, theta: S) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> (S, S) {
        (self.x, self.y)
    }

    pub fn distance_to(&self, x: S, y: S) -> S {
        let dx = self.x - x;
        let dy = self.y - y;
        (dx * dx + dy * dy).sqrt()
    }

    /// World-from-body pose with the body origin on the floor plane.
    pub fn body_pose(&self, floor_height: S) -> Pose3<S> {
        Pose3::from_yaw_translation(self.theta, Vec3::new(self.x, self.y, floor_height))
    }
}

/// Pinhole camera model. `cx`/`cy` are in pixel-center coordinates where
/// pixel `(i, j)` has its center at `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics<S: Scalar> {
    pub fx: S,
    pub fy: S,
    pub cx: S,
    pub cy: S,
    pub width: u32,
    pub height: u32,
}

impl<S: Scalar> CameraIntrinsics<S> {
    pub fn new(fx: S, fy: S, cx: S, cy: S, width: u32, height: u32) -> Result<Self, GeometryError> {
        let this = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        this.validate()?;
        Ok(this)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.fx <= S::zero() || self.fy <= S::zero() {
            return Err(GeometryError::BadIntrinsics(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        let w = cast::<S>(self.width as f64);
        let h = cast::<S>(self.height as f64);
        if self.cx < S::zero() || self.cx >= w || self.cy < S::zero() || self.cy >= h {
            return Err(GeometryError::BadIntrinsics(format!(
                "principal point ({}, {}) outside {}x{}",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn contains_pixel(&self, u: S, v: S) -> bool {
        let half = cast::<S>(0.5);
        u >= -half
            && u <= cast::<S>(self.width as f64) - half
            && v >= -half
            && v <= cast::<S>(self.height as f64) - half
    }

    /// Forward perspective projection of a camera-frame point with z > 0.
    pub fn project(&self, point: Vec3<S>) -> Option<(S, S)> {
        if point.z <= S::zero() {
            return None;
        }
        Some((
            self.fx * point.x / point.z + self.cx,
            self.fy * point.y / point.z + self.cy,
        ))
    }
}

/// Lifts a pixel with known depth back into the camera frame. Depth is
/// measured along the optical (+z) axis.
pub fn back_project<S: Scalar>(
    pixel: (S, S),
    depth: S,
    intrinsics: &CameraIntrinsics<S>,
) -> Result<Vec3<S>, GeometryError> {
    if depth <= S::zero() || !depth.is_finite() {
        return Err(GeometryError::InvalidDepth(depth.to_f64_lossy()));
    }
    let (u, v) = pixel;
    if !intrinsics.contains_pixel(u, v) {
        return Err(GeometryError::PixelOutOfBounds {
            u: u.to_f64_lossy(),
            v: v.to_f64_lossy(),
            width: intrinsics.width,
            height: intrinsics.height,
        });
    }
    Ok(Vec3::new(
        (u - intrinsics.cx) * depth / intrinsics.fx,
        (v - intrinsics.cy) * depth / intrinsics.fy,
        depth,
    ))
}

/// Chains a camera-frame point through the camera extrinsic and the body pose
/// into the world frame.
pub fn to_world<S: Scalar>(
    point_camera: Vec3<S>,
    body_pose: &Pose3<S>,
    cam_extrinsic: &Pose3<S>,
) -> Vec3<S> {
    body_pose.transform_point(cam_extrinsic.transform_point(point_camera))
}

/// Rotating camera mount: a fixed height above the floor, an optional fixed
/// pitch, and the discrete yaw offsets the rig visits during a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRig<S: Scalar> {
    pub mount_height: S,
    pub pitch: S,
    yaw_offsets: Vec<S>,
}

impl<S: Scalar> CameraRig<S> {
    /// Rig with `steps` yaw stops evenly covering 360 degrees.
    pub fn with_steps(mount_height: S, pitch: S, steps: usize) -> Self {
        assert!(steps > 0, "rig needs at least one yaw stop");
        let two_pi = S::PI() + S::PI();
        let step = two_pi / cast(steps as f64);
        let yaw_offsets = (0..steps)
            .map(|i| wrap_angle(step * cast(i as f64)))
            .collect();
        Self {
            mount_height,
            pitch,
            yaw_offsets,
        }
    }

    pub fn yaw_offsets(&self) -> &[S] {
        &self.yaw_offsets
    }

    pub fn angular_step(&self) -> S {
        let two_pi = S::PI() + S::PI();
        two_pi / cast(self.yaw_offsets.len() as f64)
    }

    /// Body-from-camera extrinsic for the given rig yaw. At yaw 0 the camera
    /// looks along body +x; positive pitch tilts the optical axis down.
    pub fn extrinsic(&self, yaw: S) -> Pose3<S> {
        // Columns are the camera axes (x right, y down, z forward) expressed
        // in the body frame for yaw = 0, pitch = 0.
        let base = Mat3::from_columns(
            Vec3::new(S::zero(), -S::one(), S::zero()),
            Vec3::new(S::zero(), S::zero(), -S::one()),
            Vec3::new(S::one(), S::zero(), S::zero()),
        );
        // Pitch rotates about the camera x axis; the sign makes +pitch tilt
        // the optical axis toward the floor.
        let pitch_rot = Mat3::rotation_x(-self.pitch);
        let rotation = Mat3::rotation_z(yaw).mul_mat(&base).mul_mat(&pitch_rot);
        Pose3::new(rotation, Vec3::new(S::zero(), S::zero(), self.mount_height))
    }
}

/// Half-line with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray<S: Scalar> {
    pub origin: Vec3<S>,
    pub direction: Vec3<S>,
}

impl<S: Scalar> Ray<S> {
    /// Builds a ray, normalizing the direction. Panics on a zero direction.
    pub fn new(origin: Vec3<S>, direction: Vec3<S>) -> Self {
        let n = direction.norm();
        assert!(n > S::zero(), "ray direction must be nonzero");
        Self {
            origin,
            direction: direction / n,
        }
    }

    pub fn point_at(&self, t: S) -> Vec3<S> {
        self.origin + self.direction * t
    }
}

/// Axis-aligned box given by min/max corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb<S: Scalar> {
    pub min: Vec3<S>,
    pub max: Vec3<S>,
}

impl<S: Scalar> Aabb<S> {
    pub fn new(min: Vec3<S>, max: Vec3<S>) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y && min.z <= max.z);
        Self { min, max }
    }

    pub fn contains(&self, p: Vec3<S>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }
}

/// Slab-test ray/box intersection. Returns the smallest nonnegative `t` with
/// `origin + t * direction` on the box surface, or `None` on a miss. A ray
/// starting inside the box reports its exit distance.
pub fn ray_aabb_intersect<S: Scalar>(ray: &Ray<S>, aabb: &Aabb<S>) -> Option<S> {
    let mut t_near = S::neg_infinity();
    let mut t_far = S::infinity();
    let origin = [ray.origin.x, ray.origin.y, ray.origin.z];
    let dir = [ray.direction.x, ray.direction.y, ray.direction.z];
    let lo = [aabb.min.x, aabb.min.y, aabb.min.z];
    let hi = [aabb.max.x, aabb.max.y, aabb.max.z];
    for axis in 0..3 {
        if dir[axis] == S::zero() {
            if origin[axis] < lo[axis] || origin[axis] > hi[axis] {
                return None;
            }
        } else {
            let inv = S::one() / dir[axis];
            let mut t0 = (lo[axis] - origin[axis]) * inv;
            let mut t1 = (hi[axis] - origin[axis]) * inv;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_near = t_near.max(t0);
            t_far = t_far.min(t1);
            if t_near > t_far {
                return None;
            }
        }
    }
    if t_far < S::zero() {
        return None;
    }
    Some(if t_near >= S::zero() { t_near } else { t_far })
}
