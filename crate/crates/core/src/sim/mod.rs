//! Deterministic desk-scale simulator: analytic box scenes rendered to RGB-D
//! by raycasting, agent kinematics, and the rotate-then-translate local
//! controller realizing the transition function.

use thiserror::Error;

use crate::geometry::{ray_aabb_intersect, Ray, Vec3};
use crate::tsdf::RgbdFrame;
use crate::{Aabbd, AgentStated, CameraRigd, Intrinsicsd, Real};

mod files;
mod trajlog;

pub use files::{load_episode, load_scene, save_episode, save_scene};
pub use trajlog::{parse_trajectory, write_trajectory, TrajRecord};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("{what} violates scene invariants: {detail}")]
    Validation { what: String, detail: String },
    #[error("waypoint {dist:.3} m away exceeds planning horizon d_max = {d_max:.3} m")]
    HorizonExceeded { dist: f64, d_max: f64 },
}

/// One axis-aligned obstacle with a flat color and an object label.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBox {
    pub label: String,
    pub aabb: Aabbd,
    pub color: [u8; 3],
}

/// Analytic scene: a floor plane bounded by `bounds` plus axis-aligned boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub name: String,
    pub floor_height: Real,
    pub floor_color: [u8; 3],
    /// 2D extent of the world (and of the rendered floor).
    pub bounds_min: (Real, Real),
    pub bounds_max: (Real, Real),
    pub boxes: Vec<SceneBox>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let err = |detail: String| SimError::Validation {
            what: format!("scene '{}'", self.name),
            detail,
        };
        if self.bounds_min.0 >= self.bounds_max.0 || self.bounds_min.1 >= self.bounds_max.1 {
            return Err(err("bounds_min must be strictly below bounds_max".into()));
        }
        for b in &self.boxes {
            let a = &b.aabb;
            if a.min.x > a.max.x || a.min.y > a.max.y || a.min.z > a.max.z {
                return Err(err(format!("box '{}' has inverted corners", b.label)));
            }
            if a.min.x < self.bounds_min.0
                || a.min.y < self.bounds_min.1
                || a.max.x > self.bounds_max.0
                || a.max.y > self.bounds_max.1
            {
                return Err(err(format!(
                    "box '{}' lies outside the scene bounds",
                    b.label
                )));
            }
            if a.min.z < self.floor_height - 1e-9 {
                return Err(err(format!("box '{}' sinks below the floor", b.label)));
            }
        }
        Ok(())
    }

    /// Distance from a 2D point to the nearest box footprint that overlaps
    /// the agent's body slab; used for collision and free-space checks.
    pub fn clearance(&self, x: Real, y: Real) -> Real {
        let slab_lo = self.floor_height + 0.05;
        let slab_hi = self.floor_height + AGENT_BODY_HEIGHT;
        self.boxes
            .iter()
            .filter(|b| b.aabb.max.z > slab_lo && b.aabb.min.z < slab_hi)
            .map(|b| {
                let dx = (b.aabb.min.x - x).max(0.0).max(x - b.aabb.max.x);
                let dy = (b.aabb.min.y - y).max(0.0).max(y - b.aabb.max.y);
                (dx * dx + dy * dy).sqrt()
            })
            .fold(Real::INFINITY, Real::min)
    }

    pub fn in_bounds(&self, x: Real, y: Real) -> bool {
        x >= self.bounds_min.0
            && x <= self.bounds_max.0
            && y >= self.bounds_min.1
            && y <= self.bounds_max.1
    }

    /// Free space: inside bounds and at least `radius` from every obstacle.
    pub fn is_free(&self, x: Real, y: Real, radius: Real) -> bool {
        self.in_bounds(x, y) && self.clearance(x, y) >= radius
    }

    /// First analytic intersection of a world ray with the scene (boxes and
    /// the bounded floor plane). Returns (euclidean distance, box index or
    /// `None` for floor).
    pub fn raycast(&self, ray: &Ray<Real>, max_dist: Real) -> Option<(Real, Option<usize>)> {
        let mut best: Option<(Real, Option<usize>)> = None;
        for (idx, b) in self.boxes.iter().enumerate() {
            if let Some(t) = ray_aabb_intersect(ray, &b.aabb) {
                if t <= max_dist && best.map_or(true, |(bt, _)| t < bt) {
                    best = Some((t, Some(idx)));
                }
            }
        }
        if ray.direction.z != 0.0 {
            let t = (self.floor_height - ray.origin.z) / ray.direction.z;
            if t > 0.0 && t <= max_dist {
                let p = ray.point_at(t);
                if self.in_bounds(p.x, p.y) && best.map_or(true, |(bt, _)| t < bt) {
                    best = Some((t, None));
                }
            }
        }
        best
    }
}

/// Vertical extent of the agent body used for collision filtering.
pub const AGENT_BODY_HEIGHT: Real = 1.5;

/// Local controller parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    /// Maximum accepted waypoint distance (planning horizon), meters.
    pub d_max: Real,
    /// Translation per micro-step, meters.
    pub step_size: Real,
    /// Rotation per micro-step, radians.
    pub turn_rate: Real,
    /// Collision disc radius, meters.
    pub agent_radius: Real,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            d_max: 3.0,
            step_size: 0.1,
            turn_rate: 0.4,
            agent_radius: 0.18,
        }
    }
}

/// Default sensor head: 128x96 pixels with a 90 degree horizontal field of
/// view, 10 m depth range, mounted 1.25 m above the floor.
pub fn default_intrinsics() -> Intrinsicsd {
    Intrinsicsd::new(64.0, 64.0, 64.0, 48.0, 128, 96).expect("constants are valid")
}

pub fn default_rig() -> CameraRigd {
    CameraRigd::with_steps(1.25, 0.0, 8)
}

pub const MAX_DEPTH_M: Real = 10.0;

/// Renders one RGB-D frame by per-pixel nearest intersection over all boxes
/// and the floor. Depth is the hit distance along the optical axis, 0 beyond
/// `MAX_DEPTH_M`; color is the hit object's flat color over a black
/// background. Pure function of (scene, agent, yaw).
pub fn render_rgbd(
    scene: &SceneSpec,
    agent: &AgentStated,
    camera_yaw: Real,
    intrinsics: &Intrinsicsd,
    rig: &CameraRigd,
) -> RgbdFrame<Real> {
    let body_pose = agent.body_pose(scene.floor_height);
    let camera_pose = body_pose.compose(&rig.extrinsic(camera_yaw));
    let origin = camera_pose.translation;

    let (w, h) = (intrinsics.width, intrinsics.height);
    let n = (w * h) as usize;
    let mut depth = vec![0.0; n];
    let mut color = vec![0u8; n * 3];

    for v in 0..h {
        for u in 0..w {
            let dir_cam = Vec3::new(
                (u as Real - intrinsics.cx) / intrinsics.fx,
                (v as Real - intrinsics.cy) / intrinsics.fy,
                1.0,
            )
            .normalized();
            let dir_world = camera_pose.transform_vector(dir_cam);
            let ray = Ray {
                origin,
                direction: dir_world,
            };
            // Boxes and floor are tested out to the euclidean range matching
            // the axial depth limit.
            let max_t = MAX_DEPTH_M / dir_cam.z;
            if let Some((t, hit)) = scene.raycast(&ray, max_t) {
                let z = t * dir_cam.z;
                if z <= MAX_DEPTH_M {
                    let i = (v * w + u) as usize;
                    depth[i] = z;
                    let rgb = match hit {
                        Some(b) => scene.boxes[b].color,
                        None => scene.floor_color,
                    };
                    color[i * 3..i * 3 + 3].copy_from_slice(&rgb);
                }
            }
        }
    }

    RgbdFrame {
        width: w,
        height: h,
        color,
        depth,
        timestamp: 0.0,
        camera_yaw,
        body_pose,
        agent_state: *agent,
    }
}

/// One frame per rig yaw stop, timestamps strictly increasing from
/// `base_time`. The body stays put during the scan.
pub fn capture_rotation_scan(
    scene: &SceneSpec,
    agent: &AgentStated,
    intrinsics: &Intrinsicsd,
    rig: &CameraRigd,
    base_time: f64,
) -> Vec<RgbdFrame<Real>> {
    rig.yaw_offsets()
        .iter()
        .copied()
        .enumerate()
        .map(|(i, yaw)| {
            let mut frame = render_rgbd(scene, agent, yaw, intrinsics, rig);
            frame.timestamp = base_time + 0.1 * (i as f64 + 1.0);
            frame
        })
        .collect()
}

/// Result of driving toward a waypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointOutcome {
    pub state: AgentStated,
    pub reached: bool,
    /// Every micro-step, starting with the initial state.
    pub path: Vec<AgentStated>,
}

/// Rotate-then-translate micro-stepping toward `waypoint`. Every translation
/// micro-step collision-checks the agent disc against the scene; on contact
/// the agent stops in place with `reached = false`.
pub fn execute_waypoint(
    scene: &SceneSpec,
    state: &AgentStated,
    waypoint: (Real, Real),
    config: &ControllerConfig,
) -> Result<WaypointOutcome, SimError> {
    let dist = state.distance_to(waypoint.0, waypoint.1);
    if dist > config.d_max + 1e-9 {
        return Err(SimError::HorizonExceeded {
            dist,
            d_max: config.d_max,
        });
    }

    let mut current = *state;
    let mut path = vec![current];
    if dist <= config.step_size {
        return Ok(WaypointOutcome {
            state: current,
            reached: true,
            path,
        });
    }

    // Rotate in place toward the waypoint heading.
    let target_heading = (waypoint.1 - current.y).atan2(waypoint.0 - current.x);
    loop {
        let delta = crate::geometry::wrap_angle(target_heading - current.theta);
        if delta.abs() <= config.turn_rate {
            current = AgentStated::new(current.x, current.y, target_heading);
            path.push(current);
            break;
        }
        let step = config.turn_rate * delta.signum();
        current = AgentStated::new(current.x, current.y, current.theta + step);
        path.push(current);
    }

    // Translate along the (now exact) heading.
    let (dir_x, dir_y) = (current.theta.cos(), current.theta.sin());
    loop {
        let remaining = current.distance_to(waypoint.0, waypoint.1);
        if remaining <= config.step_size {
            return Ok(WaypointOutcome {
                state: current,
                reached: true,
                path,
            });
        }
        let nx = current.x + dir_x * config.step_size;
        let ny = current.y + dir_y * config.step_size;
        if !scene.is_free(nx, ny, config.agent_radius) {
            return Ok(WaypointOutcome {
                state: current,
                reached: false,
                path,
            });
        }
        current = AgentStated::new(nx, ny, current.theta);
        path.push(current);
    }
}

/// Episode definition: start, goal, instruction, and the reference data the
/// metric suite needs.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSpec {
    pub id: String,
    /// Scene file path, relative to the episode file.
    pub scene: String,
    pub start: AgentStated,
    pub goal: (Real, Real),
    pub instruction: String,
    pub success_radius: Real,
    pub shortest_path_length: Real,
    pub reference_path: Vec<(Real, Real)>,
    pub max_steps: u32,
}

impl EpisodeSpec {
    pub fn validate(&self, scene: &SceneSpec, agent_radius: Real) -> Result<(), SimError> {
        let err = |detail: String| SimError::Validation {
            what: format!("episode '{}'", self.id),
            detail,
        };
        if self.instruction.is_empty() {
            return Err(err("instruction must be nonempty".into()));
        }
        if self.shortest_path_length <= 0.0 {
            return Err(err("shortest_path_length must be positive".into()));
        }
        if self.success_radius <= 0.0 {
            return Err(err("success_radius must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(err("max_steps must be positive".into()));
        }
        if self.reference_path.is_empty() {
            return Err(err("reference_path must be nonempty".into()));
        }
        if !scene.is_free(self.start.x, self.start.y, agent_radius) {
            return Err(err(format!(
                "start ({}, {}) is not in free space",
                self.start.x, self.start.y
            )));
        }
        if !scene.is_free(self.goal.0, self.goal.1, agent_radius) {
            return Err(err(format!(
                "goal ({}, {}) is not in free space",
                self.goal.0, self.goal.1
            )));
        }
        Ok(())
    }
}
