//! Dense metric map: truncated-signed-distance fusion of RGB-D frames,
//! occupancy/surface queries, and the annotated bird's-eye-view render.

use thiserror::Error;

use crate::geometry::{
    ray_aabb_intersect, Aabb, AgentState, CameraIntrinsics, CameraRig, Pose3, Ray, Vec3,
};
use crate::scalar::{cast, Scalar};

mod bev;
mod snapshot;

pub use bev::{bev_pixel_to_world, render_bev, BevClass, BevImage, BEV_GRID_CELLS, BEV_PIXELS};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC};

#[derive(Debug, Error)]
pub enum TsdfError {
    #[error("frame is {got_w}x{got_h} but intrinsics expect {want_w}x{want_h}")]
    ShapeMismatch {
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("frame buffers are inconsistent: {0}")]
    BadFrame(String),
    #[error("query point ({x:.3}, {y:.3}, {z:.3}) outside volume bounds")]
    OutOfBounds { x: f64, y: f64, z: f64 },
    #[error("snapshot i/o failed: {0}")]
    Snapshot(#[from] std::io::Error),
    #[error("snapshot malformed: {0}")]
    BadSnapshot(String),
}

/// One RGB-D capture: color and depth share dimensions, depth is in meters
/// along the optical axis with 0 marking an invalid return. Carries the rig
/// yaw and the agent pose at capture time.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbdFrame<S: Scalar> {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB bytes, `height * width * 3`.
    pub color: Vec<u8>,
    /// Row-major depth in meters, `height * width`; 0 means no return.
    pub depth: Vec<S>,
    /// Capture time in seconds, strictly increasing within a scan.
    pub timestamp: f64,
    /// Rig rotation angle at capture.
    pub camera_yaw: S,
    /// World-from-body pose at capture.
    pub body_pose: Pose3<S>,
    /// Planar agent state at capture.
    pub agent_state: AgentState<S>,
}

impl<S: Scalar> RgbdFrame<S> {
    pub fn depth_at(&self, u: u32, v: u32) -> S {
        self.depth[(v * self.width + u) as usize]
    }

    pub fn color_at(&self, u: u32, v: u32) -> [u8; 3] {
        let i = ((v * self.width + u) * 3) as usize;
        [self.color[i], self.color[i + 1], self.color[i + 2]]
    }

    pub fn validate(&self, intrinsics: &CameraIntrinsics<S>) -> Result<(), TsdfError> {
        if self.width != intrinsics.width || self.height != intrinsics.height {
            return Err(TsdfError::ShapeMismatch {
                got_w: self.width,
                got_h: self.height,
                want_w: intrinsics.width,
                want_h: intrinsics.height,
            });
        }
        let n = (self.width * self.height) as usize;
        if self.depth.len() != n || self.color.len() != n * 3 {
            return Err(TsdfError::BadFrame(format!(
                "expected {} depth / {} color entries, got {} / {}",
                n,
                n * 3,
                self.depth.len(),
                self.color.len()
            )));
        }
        Ok(())
    }

    /// World-from-camera pose for this capture.
    pub fn camera_pose(&self, rig: &CameraRig<S>) -> Pose3<S> {
        self.body_pose.compose(&rig.extrinsic(self.camera_yaw))
    }
}

/// Default weight cap: keeps the running average responsive to corrections.
pub const DEFAULT_WEIGHT_CAP: f64 = 100.0;

/// Dense voxel grid of clamped signed distances and fusion weights.
///
/// Voxel `(i, j, k)` has its center at `origin + (i+0.5, j+0.5, k+0.5) *
/// voxel_size`; storage is x-fastest, then y, then z.
#[derive(Debug, Clone)]
pub struct TsdfVolume<S: Scalar> {
    origin: Vec3<S>,
    voxel_size: S,
    dims: [usize; 3],
    truncation: S,
    weight_cap: S,
    sdf: Vec<S>,
    weight: Vec<S>,
}

impl<S: Scalar> TsdfVolume<S> {
    /// Truncation defaults to four voxels.
    pub fn new(origin: Vec3<S>, voxel_size: S, dims: [usize; 3]) -> Self {
        let truncation = voxel_size * cast(4.0);
        Self::with_truncation(origin, voxel_size, dims, truncation)
    }

    pub fn with_truncation(
        origin: Vec3<S>,
        voxel_size: S,
        dims: [usize; 3],
        truncation: S,
    ) -> Self {
        assert!(voxel_size > S::zero() && truncation > S::zero());
        assert!(dims.iter().all(|&d| d > 0), "volume dims must be positive");
        let n = dims[0] * dims[1] * dims[2];
        Self {
            origin,
            voxel_size,
            dims,
            truncation,
            weight_cap: cast(DEFAULT_WEIGHT_CAP),
            sdf: vec![S::zero(); n],
            weight: vec![S::zero(); n],
        }
    }

    pub fn origin(&self) -> Vec3<S> {
        self.origin
    }

    pub fn voxel_size(&self) -> S {
        self.voxel_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn truncation(&self) -> S {
        self.truncation
    }

    pub fn bounds(&self) -> Aabb<S> {
        let extent = Vec3::new(
            self.voxel_size * cast(self.dims[0] as f64),
            self.voxel_size * cast(self.dims[1] as f64),
            self.voxel_size * cast(self.dims[2] as f64),
        );
        Aabb::new(self.origin, self.origin + extent)
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vec3<S> {
        let half = cast::<S>(0.5);
        self.origin
            + Vec3::new(
                (cast::<S>(i as f64) + half) * self.voxel_size,
                (cast::<S>(j as f64) + half) * self.voxel_size,
                (cast::<S>(k as f64) + half) * self.voxel_size,
            )
    }

    pub fn voxel(&self, i: usize, j: usize, k: usize) -> (S, S) {
        let idx = self.index(i, j, k);
        (self.sdf[idx], self.weight[idx])
    }

    /// Directly seeds a voxel; test scaffolding for query/raycast oracles.
    pub fn set_voxel(&mut self, i: usize, j: usize, k: usize, sdf: S, weight: S) {
        let idx = self.index(i, j, k);
        self.sdf[idx] = sdf;
        self.weight[idx] = weight;
    }

    /// True when no frame has ever touched the volume.
    pub fn is_empty(&self) -> bool {
        self.weight.iter().all(|w| *w == S::zero())
    }

    /// Tight world-space box around all observed voxels, or `None` when empty.
    pub fn observed_bounds(&self) -> Option<Aabb<S>> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                for i in 0..self.dims[0] {
                    if self.weight[self.index(i, j, k)] > S::zero() {
                        any = true;
                        let ijk = [i, j, k];
                        for a in 0..3 {
                            lo[a] = lo[a].min(ijk[a]);
                            hi[a] = hi[a].max(ijk[a]);
                        }
                    }
                }
            }
        }
        if !any {
            return None;
        }
        let min = self.origin
            + Vec3::new(
                cast::<S>(lo[0] as f64) * self.voxel_size,
                cast::<S>(lo[1] as f64) * self.voxel_size,
                cast::<S>(lo[2] as f64) * self.voxel_size,
            );
        let max = self.origin
            + Vec3::new(
                cast::<S>((hi[0] + 1) as f64) * self.voxel_size,
                cast::<S>((hi[1] + 1) as f64) * self.voxel_size,
                cast::<S>((hi[2] + 1) as f64) * self.voxel_size,
            );
        Some(Aabb::new(min, max))
    }

    pub(crate) fn raw_fields(&self) -> (&[S], &[S]) {
        (&self.sdf, &self.weight)
    }

    pub(crate) fn raw_fields_mut(&mut self) -> (&mut [S], &mut [S]) {
        (&mut self.sdf, &mut self.weight)
    }
}

/// Fuses one frame into the volume with the default per-frame weight of 1.
pub fn integrate_frame<S: Scalar>(
    volume: &mut TsdfVolume<S>,
    frame: &RgbdFrame<S>,
    intrinsics: &CameraIntrinsics<S>,
    rig: &CameraRig<S>,
) -> Result<(), TsdfError> {
    integrate_frame_with_weight(volume, frame, intrinsics, rig, S::one())
}

/// Weighted-running-average fusion. For every voxel that projects onto a
/// valid depth pixel, the projective signed distance is the observed depth
/// minus the voxel's depth along the optical axis; voxels more than one
/// truncation behind the surface are left untouched so later frames cannot
/// erode walls.
pub fn integrate_frame_with_weight<S: Scalar>(
    volume: &mut TsdfVolume<S>,
    frame: &RgbdFrame<S>,
    intrinsics: &CameraIntrinsics<S>,
    rig: &CameraRig<S>,
    frame_weight: S,
) -> Result<(), TsdfError> {
    frame.validate(intrinsics)?;
    let world_from_camera = frame.camera_pose(rig);
    let camera_from_world = world_from_camera.inverse();

    let trunc = volume.truncation;
    let cap = volume.weight_cap;
    let dims = volume.dims;
    let half = cast::<S>(0.5);

    for k in 0..dims[2] {
        for j in 0..dims[1] {
            // Hoist the per-row world/camera transform of the row start and
            // walk the x axis incrementally.
            let row_start = volume.voxel_center(0, j, k);
            let start_cam = camera_from_world.transform_point(row_start);
            let step_cam = camera_from_world.transform_vector(Vec3::new(
                volume.voxel_size,
                S::zero(),
                S::zero(),
            ));
            for i in 0..dims[0] {
                let p_cam = start_cam + step_cam * cast(i as f64);
                if p_cam.z <= S::zero() {
                    continue;
                }
                let u = intrinsics.fx * p_cam.x / p_cam.z + intrinsics.cx;
                let v = intrinsics.fy * p_cam.y / p_cam.z + intrinsics.cy;
                let ui = (u + half).floor().to_f64_lossy() as i64;
                let vi = (v + half).floor().to_f64_lossy() as i64;
                if ui < 0 || vi < 0 || ui >= frame.width as i64 || vi >= frame.height as i64 {
                    continue;
                }
                let depth = frame.depth_at(ui as u32, vi as u32);
                if depth <= S::zero() {
                    continue;
                }
                let sdf = depth - p_cam.z;
                if sdf < -trunc {
                    continue;
                }
                let value = if sdf > trunc { trunc } else { sdf };
                let idx = volume.index(i, j, k);
                let w_old = volume.weight[idx];
                let w_new = w_old + frame_weight;
                volume.sdf[idx] = (volume.sdf[idx] * w_old + value * frame_weight) / w_new;
                volume.weight[idx] = if w_new > cap { cap } else { w_new };
            }
        }
    }
    Ok(())
}

/// Trilinear read of the signed distance and weight at a world point.
/// A returned weight of 0 means the neighborhood is entirely unobserved.
pub fn query_sdf<S: Scalar>(volume: &TsdfVolume<S>, point: Vec3<S>) -> Result<(S, S), TsdfError> {
    if !volume.bounds().contains(point) {
        return Err(TsdfError::OutOfBounds {
            x: point.x.to_f64_lossy(),
            y: point.y.to_f64_lossy(),
            z: point.z.to_f64_lossy(),
        });
    }
    let (corners, fracs) = interp_cell(volume, point);
    let mut sdf = S::zero();
    let mut weight = S::zero();
    for (di, dj, dk, w) in trilinear_weights(fracs) {
        let idx = volume.index(corners[0] + di, corners[1] + dj, corners[2] + dk);
        sdf = sdf + volume.sdf[idx] * w;
        weight = weight + volume.weight[idx] * w;
    }
    Ok((sdf, weight))
}

/// Interpolation cell for a point: base voxel index plus per-axis fractions,
/// clamped so the half-voxel border band extrapolates from the edge cell.
fn interp_cell<S: Scalar>(volume: &TsdfVolume<S>, point: Vec3<S>) -> ([usize; 3], [S; 3]) {
    let half = cast::<S>(0.5);
    let rel = (point - volume.origin) / volume.voxel_size;
    let g = [rel.x - half, rel.y - half, rel.z - half];
    let mut base = [0usize; 3];
    let mut fracs = [S::zero(); 3];
    for a in 0..3 {
        let max_base = volume.dims[a].saturating_sub(2);
        let fl = g[a].floor();
        let mut b = fl.to_f64_lossy() as i64;
        let mut f = g[a] - fl;
        if b < 0 {
            b = 0;
            f = S::zero();
        } else if b as usize > max_base {
            b = max_base as i64;
            f = S::one();
        }
        base[a] = b as usize;
        fracs[a] = f;
    }
    (base, fracs)
}

fn trilinear_weights<S: Scalar>(f: [S; 3]) -> [(usize, usize, usize, S); 8] {
    let g = [S::one() - f[0], S::one() - f[1], S::one() - f[2]];
    [
        (0, 0, 0, g[0] * g[1] * g[2]),
        (1, 0, 0, f[0] * g[1] * g[2]),
        (0, 1, 0, g[0] * f[1] * g[2]),
        (1, 1, 0, f[0] * f[1] * g[2]),
        (0, 0, 1, g[0] * g[1] * f[2]),
        (1, 0, 1, f[0] * g[1] * f[2]),
        (0, 1, 1, g[0] * f[1] * f[2]),
        (1, 1, 1, f[0] * f[1] * f[2]),
    ]
}

/// Conservative sample for the raycaster: defined only where every corner of
/// the interpolation cell has been observed, so unknown space can never fake
/// a zero crossing.
fn sample_observed<S: Scalar>(volume: &TsdfVolume<S>, point: Vec3<S>) -> Option<S> {
    if !volume.bounds().contains(point) {
        return None;
    }
    let (corners, fracs) = interp_cell(volume, point);
    let mut sdf = S::zero();
    for (di, dj, dk, w) in trilinear_weights(fracs) {
        let idx = volume.index(corners[0] + di, corners[1] + dj, corners[2] + dk);
        if volume.weight[idx] <= S::zero() {
            return None;
        }
        sdf = sdf + volume.sdf[idx] * w;
    }
    Some(sdf)
}

/// Marches a ray through observed space and returns the surface point where
/// the signed distance first crosses from positive to non-positive, refined
/// by linear interpolation between the bracketing samples. Returns `None`
/// when the ray sees no crossing within `max_range` or only unknown space.
pub fn raycast_surface<S: Scalar>(
    volume: &TsdfVolume<S>,
    ray: &Ray<S>,
    max_range: S,
) -> Option<Vec3<S>> {
    let bounds = volume.bounds();
    let start_t = if bounds.contains(ray.origin) {
        S::zero()
    } else {
        ray_aabb_intersect(ray, &bounds)? + volume.voxel_size * cast(1e-3)
    };
    if start_t > max_range {
        return None;
    }

    let step = volume.voxel_size * cast(0.5);
    let mut t = start_t;
    let mut prev: Option<(S, S)> = None; // (t, sdf) of last observed sample
    while t <= max_range {
        match sample_observed(volume, ray.point_at(t)) {
            Some(sdf) => {
                if let Some((t0, sdf0)) = prev {
                    if sdf0 > S::zero() && sdf <= S::zero() {
                        let span = sdf0 - sdf;
                        let alpha = if span > S::zero() {
                            sdf0 / span
                        } else {
                            S::zero()
                        };
                        let t_hit = t0 + (t - t0) * alpha;
                        return Some(ray.point_at(t_hit));
                    }
                }
                prev = Some((t, sdf));
            }
            None => {
                // Unknown or out-of-volume sample breaks the bracket.
                prev = None;
                if !bounds.contains(ray.point_at(t)) && t > start_t {
                    return None;
                }
            }
        }
        t = t + step;
    }
    None
}
