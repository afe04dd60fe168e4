//! Test-only geometric baseline. It reads the privileged episode goal and
//! steers toward the observed free map pixel nearest to it, restricted to
//! pixels reachable along a straight collision-free line. It validates the
//! execution stack independently of any language model.

use serde_json::json;

use crate::reasoning::TaskPlan;
use crate::tsdf::{BevClass, BevImage};
use crate::Real;

use super::{PlannerBackend, PlannerError, PlannerRequest, PlannerResponse};

pub struct GreedyBackend {
    goal: (Real, Real),
    d_max: Real,
    agent_radius: Real,
}

impl GreedyBackend {
    pub fn new(goal: (Real, Real), d_max: Real, agent_radius: Real) -> Self {
        Self {
            goal,
            d_max,
            agent_radius,
        }
    }
}

impl PlannerBackend for GreedyBackend {
    fn id(&self) -> &str {
        "greedy"
    }

    fn decide(&mut self, request: &PlannerRequest<'_>) -> Result<PlannerResponse, PlannerError> {
        let bev = &request.prompt.bev;
        let agent = request.prompt.agent;
        let margin_px = (self.agent_radius / bev.meters_per_pixel).ceil().max(1.0) as i64;
        let blocked = inflate_occupied(bev, margin_px);

        // Candidates: free pixels with obstacle clearance, inside the horizon.
        let mut candidates: Vec<(Real, u32, u32)> = Vec::new();
        for row in 0..bev.height {
            for col in 0..bev.width {
                if bev.class_at(col, row) != BevClass::Free
                    || blocked[(row * bev.width + col) as usize]
                {
                    continue;
                }
                let (wx, wy) = bev.world_center_of_pixel(col, row);
                if agent.distance_to(wx, wy) > self.d_max - 0.05 {
                    continue;
                }
                let d_goal = ((wx - self.goal.0).powi(2) + (wy - self.goal.1).powi(2)).sqrt();
                candidates.push((d_goal, row, col));
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let agent_px = bev.pixel_for_world(agent.x, agent.y);
        let chosen = candidates.iter().find(|&&(_, row, col)| match agent_px {
            Some((ac, ar)) => line_clear(bev, &blocked, (ac, ar), (col, row)),
            None => false,
        });

        let raw = match chosen.or(candidates.first()) {
            Some(&(_, row, col)) => {
                let (wx, wy) = bev.world_center_of_pixel(col, row);
                let (u, v) = bev.world_to_normalized(wx, wy);
                let u = (u.round() as i64).clamp(0, 1000);
                let v = (v.round() as i64).clamp(0, 1000);
                json!({
                    "thought": "drive toward the reachable free space nearest the goal",
                    "todo": [{"text": "reach goal", "done": false}],
                    "action": {"type": "waypoint", "view": "bev", "u": u, "v": v}
                })
            }
            None => json!({
                "thought": "no reachable free space; stopping",
                "todo": [{"text": "reach goal", "done": false}],
                "action": {"type": "stop"}
            }),
        };

        Ok(PlannerResponse {
            raw: raw.to_string(),
            latency: 0.0,
            backend_id: self.id().to_string(),
        })
    }

    fn decompose_instruction(&mut self, instruction: &str) -> Result<TaskPlan, PlannerError> {
        if instruction.is_empty() {
            return Err(PlannerError::EmptyInstruction);
        }
        Ok(TaskPlan::from_texts(["reach goal".to_string()]))
    }
}

/// Occupied mask dilated by `margin` pixels (separable square dilation).
fn inflate_occupied(bev: &BevImage, margin: i64) -> Vec<bool> {
    let (w, h) = (bev.width as i64, bev.height as i64);
    let mut horizontal = vec![false; (w * h) as usize];
    for row in 0..h {
        for col in 0..w {
            if bev.class_at(col as u32, row as u32) == BevClass::Occupied {
                let lo = (col - margin).max(0);
                let hi = (col + margin).min(w - 1);
                for c in lo..=hi {
                    horizontal[(row * w + c) as usize] = true;
                }
            }
        }
    }
    let mut out = vec![false; (w * h) as usize];
    for row in 0..h {
        for col in 0..w {
            if horizontal[(row * w + col) as usize] {
                let lo = (row - margin).max(0);
                let hi = (row + margin).min(h - 1);
                for r in lo..=hi {
                    out[(r * w + col) as usize] = true;
                }
            }
        }
    }
    out
}

/// True when the straight segment between two pixels stays on the map and
/// clear of the inflated obstacle mask.
fn line_clear(bev: &BevImage, blocked: &[bool], from: (u32, u32), to: (u32, u32)) -> bool {
    let (x0, y0) = (from.0 as f64, from.1 as f64);
    let (x1, y1) = (to.0 as f64, to.1 as f64);
    let steps = ((x1 - x0).abs().max((y1 - y0).abs()) * 2.0).ceil().max(1.0) as usize;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let x = (x0 + (x1 - x0) * t).round() as i64;
        let y = (y0 + (y1 - y0) * t).round() as i64;
        if x < 0 || y < 0 || x >= bev.width as i64 || y >= bev.height as i64 {
            return false;
        }
        if blocked[(y * bev.width as i64 + x) as usize] {
            return false;
        }
    }
    true
}
