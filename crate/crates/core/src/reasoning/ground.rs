//! Grounding pixel actions into metric waypoints.

use crate::geometry::{back_project, Ray, Vec3};
use crate::tsdf::{raycast_surface, TsdfVolume};
use crate::{AgentStated, CameraRigd, Intrinsicsd, Real};

use super::{ActionKind, PromptBundle, ReasoningError, SpatialAction, ViewId};

/// A grounded, executable waypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundedWaypoint {
    /// Navigable target on the floor plane, after clearance offset and
    /// horizon clamping.
    pub point: (Real, Real),
    pub z: Real,
    /// Raw surface hit for egocentric actions (`None` for map actions).
    pub surface: Option<Vec3<Real>>,
    /// Floor projection of the hit, before the clearance offset.
    pub floor_projection: (Real, Real),
    /// True when the target was pulled back to the planning horizon.
    pub clamped: bool,
}

/// Factor of the agent radius by which egocentric waypoints back away from
/// the struck surface along the ray's horizontal direction.
pub const SURFACE_CLEARANCE_FACTOR: Real = 1.5;

/// Converts a waypoint action into a metric target.
///
/// Egocentric selections cast the pixel ray into the fused volume from the
/// source frame's camera pose, project the hit to the floor plane, and pull
/// back `1.5 * agent_radius` horizontally so the target is navigable. Map
/// selections convert grid coordinates directly at floor height. Targets
/// farther than `d_max` are clamped onto the horizon circle and flagged.
#[allow(clippy::too_many_arguments)]
pub fn ground_action(
    action: &SpatialAction,
    bundle: &PromptBundle,
    volume: &TsdfVolume<Real>,
    intrinsics: &Intrinsicsd,
    rig: &CameraRigd,
    agent: &AgentStated,
    floor_height: Real,
    d_max: Real,
    agent_radius: Real,
) -> Result<GroundedWaypoint, ReasoningError> {
    let ActionKind::Waypoint { view, u, v } = action.kind else {
        return Err(ReasoningError::Validation(
            "only waypoint actions can be grounded".into(),
        ));
    };

    let (floor_projection, surface, target) = match view {
        ViewId::Bev => {
            let (x, y) = bundle
                .bev
                .normalized_to_world(u as Real, v as Real)
                .map_err(|e| ReasoningError::Validation(e.to_string()))?;
            ((x, y), None, (x, y))
        }
        ViewId::Ego(_) => {
            let ego = bundle
                .ego_view(view)
                .ok_or_else(|| ReasoningError::Validation(format!("view {view} not in prompt")))?;
            let frame = &ego.source;
            // Normalized grid -> continuous pixel coordinates (pixel centers
            // at integers).
            let px = u as Real / 1000.0 * frame.width as Real - 0.5;
            let py = v as Real / 1000.0 * frame.height as Real - 0.5;
            let dir_cam = back_project((px, py), 1.0, intrinsics)
                .map_err(|e| ReasoningError::Validation(e.to_string()))?;
            let camera_pose = frame.camera_pose(rig);
            let ray = Ray::new(
                camera_pose.translation,
                camera_pose.transform_vector(dir_cam),
            );
            let hit = raycast_surface(volume, &ray, crate::sim::MAX_DEPTH_M).ok_or_else(|| {
                ReasoningError::Grounding(format!(
                    "ray through {view} ({u}, {v}) found no observed surface"
                ))
            })?;
            let floor = (hit.x, hit.y);
            // Back away from the surface along the ray's horizontal direction.
            let horiz = ray.direction.xy_norm();
            let target = if horiz > 1e-9 {
                let hx = ray.direction.x / horiz;
                let hy = ray.direction.y / horiz;
                let pull = SURFACE_CLEARANCE_FACTOR * agent_radius;
                (hit.x - hx * pull, hit.y - hy * pull)
            } else {
                floor
            };
            (floor, Some(hit), target)
        }
    };

    // Clamp onto the planning-horizon circle around the agent.
    let dx = target.0 - agent.x;
    let dy = target.1 - agent.y;
    let dist = (dx * dx + dy * dy).sqrt();
    let (point, clamped) = if dist > d_max {
        let scale = d_max / dist;
        ((agent.x + dx * scale, agent.y + dy * scale), true)
    } else {
        (target, false)
    };

    Ok(GroundedWaypoint {
        point,
        z: floor_height,
        surface,
        floor_projection,
        clamped,
    })
}
