//! Regenerates the bundled fixtures: per-episode scripts for the scripted
//! backend and the golden images used by render regression tests.
//!
//! Scripts are produced by driving each episode along an authored
//! world-coordinate route, converting every leg into the grid coordinates of
//! the map rendered at that step, and recording the exact response bytes.
//! Because the whole pipeline is deterministic, replaying those bytes through
//! the scripted backend reproduces the run.
//!
//! Usage: `cargo run --bin mkfixtures` from anywhere in the workspace.

use std::path::PathBuf;

use serde_json::json;

use desknav::eval::{run_episode, EpisodeSinks, EvalConfig};
use desknav::planner::{
    save_script, GreedyBackend, PlannerBackend, PlannerError, PlannerRequest, PlannerResponse,
    ScriptedBackend, ScriptedPolicy,
};
use desknav::reasoning::TaskPlan;
use desknav::sim::{
    capture_rotation_scan, default_intrinsics, default_rig, load_episode, load_scene, render_rgbd,
};
use desknav::tsdf::{integrate_frame, render_bev, BevClass};
use desknav::AgentStated;

struct Route {
    episode: &'static str,
    plan: &'static [&'static str],
    waypoints: &'static [(f64, f64)],
}

const ROUTES: &[Route] = &[
    Route {
        episode: "br_cross",
        plan: &["Cross the room diagonally", "Stop in the far corner"],
        waypoints: &[(0.0, 0.0), (1.2, 1.2)],
    },
    Route {
        episode: "br_wall_hug",
        plan: &["Walk straight across the room", "Stop at the opposite wall"],
        waypoints: &[(0.0, 0.0), (1.5, 0.0)],
    },
    Route {
        episode: "br_corner",
        plan: &["Turn toward the opposite corner", "Cross the room"],
        waypoints: &[(0.0, 0.0), (-1.2, 1.2)],
    },
    Route {
        episode: "br_short",
        plan: &["Step forward and right"],
        waypoints: &[(0.8, -0.6)],
    },
    Route {
        episode: "oh_direct",
        plan: &["Pass left of the pillar", "Continue to the far corner"],
        waypoints: &[(-0.5, 1.0), (1.0, 2.0), (2.0, 2.0)],
    },
    Route {
        episode: "oh_skirt",
        plan: &["Follow the south wall east", "Stop at the east side"],
        waypoints: &[(-0.5, -2.5), (1.5, -2.5), (2.5, -2.5)],
    },
    Route {
        episode: "oh_diag",
        plan: &["Cross the hall diagonally", "Stop at the opposite corner"],
        waypoints: &[(0.3, 1.3), (-1.3, -0.7), (-2.5, -2.5)],
    },
    Route {
        episode: "oh_probe",
        plan: &["Walk north past the pillar", "Stop at the far side"],
        waypoints: &[(0.0, 0.5), (0.0, 2.0)],
    },
    Route {
        episode: "cl_leg1",
        plan: &["Walk down the corridor", "Stop before the bend"],
        waypoints: &[(3.0, 0.8)],
    },
    Route {
        episode: "cl_corner",
        plan: &["Walk to the bend", "Turn left", "Continue to the end"],
        waypoints: &[(3.2, 0.8), (4.2, 1.6), (4.2, 3.2)],
    },
    Route {
        episode: "cl_back",
        plan: &["Go south to the bend", "Turn right", "Walk to the west end"],
        waypoints: &[(4.2, 1.4), (3.2, 0.8), (0.8, 0.8)],
    },
    Route {
        episode: "cl_mid",
        plan: &[
            "Walk toward the bend",
            "Round the corner",
            "Stop midway up the leg",
        ],
        waypoints: &[(4.0, 0.8), (4.4, 1.8), (4.6, 2.4)],
    },
];

/// Drives the authored route and records every emitted response.
struct RouteBackend {
    waypoints: Vec<(f64, f64)>,
    plan: Vec<String>,
    cursor: usize,
    captured: Vec<(u32, String)>,
}

impl RouteBackend {
    fn new(route: &Route) -> Self {
        Self {
            waypoints: route.waypoints.to_vec(),
            plan: route.plan.iter().map(|s| s.to_string()).collect(),
            cursor: 0,
            captured: Vec::new(),
        }
    }
}

impl PlannerBackend for RouteBackend {
    fn id(&self) -> &str {
        "route"
    }

    fn decide(&mut self, request: &PlannerRequest<'_>) -> Result<PlannerResponse, PlannerError> {
        let raw = match self.waypoints.get(self.cursor) {
            Some(&(x, y)) => {
                self.cursor += 1;
                let (u, v) = request.prompt.bev.world_to_normalized(x, y);
                let done = self.cursor.min(self.plan.len());
                let todo: Vec<serde_json::Value> = self
                    .plan
                    .iter()
                    .enumerate()
                    .map(|(i, text)| json!({"text": text, "done": i < done}))
                    .collect();
                json!({
                    "thought": format!("heading for ({x:.1}, {y:.1})"),
                    "todo": todo,
                    "action": {"type": "waypoint", "view": "bev",
                               "u": u.round() as i64, "v": v.round() as i64}
                })
                .to_string()
            }
            None => json!({"thought": "route complete", "action": {"type": "stop"}}).to_string(),
        };
        self.captured.push((request.step, raw.clone()));
        Ok(PlannerResponse {
            raw,
            latency: 0.0,
            backend_id: "route".into(),
        })
    }

    fn decompose_instruction(&mut self, _instruction: &str) -> Result<TaskPlan, PlannerError> {
        Ok(TaskPlan::from_texts(self.plan.clone()))
    }
}

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn main() {
    let fixtures = fixtures_dir();
    let config = EvalConfig::default();

    // 1. Author one script per episode by running its route.
    for route in ROUTES {
        let episode_path = fixtures
            .join("episodes")
            .join(format!("{}.episode.toml", route.episode));
        let (episode, scene) =
            load_episode(&episode_path, config.controller.agent_radius).expect("episode loads");
        let mut backend = RouteBackend::new(route);
        let trace = run_episode(
            &episode,
            &scene,
            &mut backend,
            &config,
            EpisodeSinks::default(),
        )
        .expect("route run completes");
        assert!(
            trace.result.success && trace.result.ne < 0.5,
            "route for '{}' must reach its goal (got {:?})",
            route.episode,
            trace.result
        );
        let policy = ScriptedPolicy::new(
            backend.plan.clone(),
            backend.captured.clone(),
            json!({"thought": "route complete", "action": {"type": "stop"}}).to_string(),
        )
        .expect("captured script is valid");
        let script_path = fixtures
            .join("scripts")
            .join(format!("{}.script.toml", route.episode));
        save_script(&policy, &script_path).expect("script saves");
        println!(
            "{}: {} step(s), ne {:.3}",
            route.episode, trace.result.steps, trace.result.ne
        );
    }

    // 2. Verify the committed suite end to end under the scripted backend.
    let mut scripted_success = 0;
    let mut ne_sum = 0.0;
    for route in ROUTES {
        let episode_path = fixtures
            .join("episodes")
            .join(format!("{}.episode.toml", route.episode));
        let (episode, scene) =
            load_episode(&episode_path, config.controller.agent_radius).expect("episode loads");
        let script = desknav::planner::load_script(
            fixtures
                .join("scripts")
                .join(format!("{}.script.toml", route.episode)),
        )
        .expect("script loads");
        let mut backend = ScriptedBackend::new(script);
        let trace = run_episode(
            &episode,
            &scene,
            &mut backend,
            &config,
            EpisodeSinks::default(),
        )
        .expect("scripted run completes");
        if trace.result.success {
            scripted_success += 1;
        }
        ne_sum += trace.result.ne;
    }
    println!(
        "scripted suite: SR {}/{}  mean NE {:.3}",
        scripted_success,
        ROUTES.len(),
        ne_sum / ROUTES.len() as f64
    );
    assert_eq!(
        scripted_success,
        ROUTES.len(),
        "scripted suite must be 100% successful"
    );
    assert!(ne_sum / (ROUTES.len() as f64) < 0.5);

    // 3. Report greedy performance over the same suite.
    let mut greedy_success = 0;
    for route in ROUTES {
        let episode_path = fixtures
            .join("episodes")
            .join(format!("{}.episode.toml", route.episode));
        let (episode, scene) =
            load_episode(&episode_path, config.controller.agent_radius).expect("episode loads");
        let mut backend = GreedyBackend::new(
            episode.goal,
            config.controller.d_max,
            config.controller.agent_radius,
        );
        let trace = run_episode(
            &episode,
            &scene,
            &mut backend,
            &config,
            EpisodeSinks::default(),
        )
        .expect("greedy run completes");
        println!(
            "greedy {}: success={} ne={:.3} steps={} failure={}",
            route.episode,
            trace.result.success,
            trace.result.ne,
            trace.result.steps,
            trace.result.failure_code
        );
        if trace.result.success {
            greedy_success += 1;
        }
    }
    println!("greedy suite: SR {}/{}", greedy_success, ROUTES.len());

    // 4. Golden images: a fused box-room map and one annotated ego view.
    let scene = load_scene(fixtures.join("scenes").join("box_room.scene.toml")).expect("scene");
    let agent = AgentStated::new(0.0, 0.0, 0.0);
    let (intrinsics, rig) = (default_intrinsics(), default_rig());
    let mut volume = desknav::eval::volume_for_scene(&scene, config.voxel_size);
    for frame in capture_rotation_scan(&scene, &agent, &intrinsics, &rig, 0.0) {
        integrate_frame(&mut volume, &frame, &intrinsics, &rig).expect("fusion");
    }
    let bev = render_bev(&volume, &agent, &[(0.0, 0.0)], &[], scene.floor_height);
    // Structural review of the golden map before freezing it.
    let (c, r) = bev.pixel_for_world(0.0, 0.0).expect("agent on map");
    assert_eq!(
        bev.class_at(c, r),
        BevClass::Free,
        "room center must be free"
    );
    let (wc, wr) = bev.pixel_for_world(2.05, 0.0).expect("wall on map");
    assert_eq!(
        bev.class_at(wc, wr),
        BevClass::Occupied,
        "east wall must be occupied"
    );
    std::fs::write(
        fixtures.join("golden").join("bev_box_room.png"),
        bev.to_png_bytes(),
    )
    .expect("golden bev");

    let frame = render_rgbd(&scene, &agent, 0.0, &intrinsics, &rig);
    let annotated = desknav::reasoning::annotate_grid(&frame.color, frame.width, frame.height);
    std::fs::write(
        fixtures.join("golden").join("ego_grid_box_room.png"),
        desknav::draw::encode_png(&annotated, frame.width, frame.height),
    )
    .expect("golden ego");

    println!("fixtures regenerated under {}", fixtures.display());
}
