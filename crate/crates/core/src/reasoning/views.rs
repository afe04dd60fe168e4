//! Orthogonal view selection from the asynchronous perception stream.

use crate::geometry::{angular_distance, wrap_angle};
use crate::tsdf::RgbdFrame;
use crate::{AgentStated, Real};

use super::{ReasoningError, ViewSelectConfig};

/// Selects, for each cardinal direction relative to the current heading, the
/// spatially-near frame best aligned with that direction.
///
/// Directions are ordered front, right, back, left (0, 90, 180, 270 degrees
/// clockwise from the heading). Only frames captured within `delta_s` of the
/// current position are candidates; among them the one with the smallest
/// wrapped angular error wins, ties broken by the most recent timestamp.
pub fn select_orthogonal_views(
    frames: &[RgbdFrame<Real>],
    now: &AgentStated,
    config: &ViewSelectConfig,
) -> Result<[RgbdFrame<Real>; 4], ReasoningError> {
    let mut selected: Vec<RgbdFrame<Real>> = Vec::with_capacity(4);
    for k in 0..4u32 {
        let offset = Real::from(k) * std::f64::consts::FRAC_PI_2;
        let target = wrap_angle(now.theta - offset);
        let mut best: Option<(Real, f64, &RgbdFrame<Real>)> = None;
        for frame in frames {
            let d = now.distance_to(frame.agent_state.x, frame.agent_state.y);
            if d >= config.delta_s {
                continue;
            }
            let heading = wrap_angle(frame.agent_state.theta + frame.camera_yaw);
            let err = angular_distance(heading, target);
            let better = match &best {
                None => true,
                Some((best_err, best_ts, _)) => {
                    err < *best_err - 1e-12
                        || ((err - *best_err).abs() <= 1e-12 && frame.timestamp > *best_ts)
                }
            };
            if better {
                best = Some((err, frame.timestamp, frame));
            }
        }
        match best {
            Some((_, _, frame)) => selected.push(frame.clone()),
            None => {
                return Err(ReasoningError::Coverage {
                    delta_s: config.delta_s,
                    direction_deg: (k * 90) as i32,
                })
            }
        }
    }
    Ok(selected.try_into().expect("exactly four views collected"))
}
