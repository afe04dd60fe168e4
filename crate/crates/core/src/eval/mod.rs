//! Episode runner and run-level reporting: drives the full loop — rotation
//! scan, fusion, topological update, view selection, prompt assembly,
//! decision, parsing, grounding, execution — and scores each episode.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::metrics;
use crate::planner::{
    instruction_digest, PlannerBackend, PlannerError, PlannerRequest, ReplayRecord, ReplayWriter,
    REPLAY_VERSION,
};
use crate::reasoning::{
    assemble_prompt, ground_action, parse_action, select_orthogonal_views, ActionKind,
    GroundedWaypoint, HistoryEntry, HistoryLog, PromptBundle, ReasoningError, SpatialAction,
    ViewSelectConfig, ALERT_ACTION_FAILED, ALERT_GROUNDING, ALERT_HORIZON, ALERT_INVALID_RESPONSE,
};
use crate::sim::{
    capture_rotation_scan, execute_waypoint, ControllerConfig, EpisodeSpec, SceneSpec, SimError,
    TrajRecord,
};
use crate::topo::{observe_pose, state_summary, MemoryConfig, TopoGraph};
use crate::tsdf::{integrate_frame, render_bev, TsdfVolume};
use crate::{AgentStated, Real, RgbdFramed, Vec3d};

mod report;
mod runconfig;

pub use report::{render_table, RunReport};
pub use runconfig::{load_run_config, BackendChoice, RunConfig};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error("artifact i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("run configuration: {0}")]
    Config(String),
}

/// Why an episode ended without a clean stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureCode {
    None,
    MaxSteps,
    BackendError,
    Stuck,
}

impl std::fmt::Display for FailureCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FailureCode::None => write!(f, "none"),
            FailureCode::MaxSteps => write!(f, "max-steps"),
            FailureCode::BackendError => write!(f, "backend-error"),
            FailureCode::Stuck => write!(f, "stuck"),
        }
    }
}

/// Per-episode metrics.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpisodeResult {
    pub episode_id: String,
    pub success: bool,
    /// Navigation error: final distance to goal, meters.
    pub ne: Real,
    /// Trajectory length, meters.
    pub tl: Real,
    /// Oracle success: ever entered the success radius.
    pub osr: bool,
    pub spl: Real,
    pub ndtw: Real,
    /// Reasoning steps consumed.
    pub steps: u32,
    pub failure_code: FailureCode,
}

/// Everything the loop needs beyond the episode itself.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub controller: ControllerConfig,
    pub memory: MemoryConfig,
    pub view_select: ViewSelectConfig,
    pub voxel_size: Real,
    /// Bad-response retries per step before the forward-probe fallback.
    pub max_retries: u32,
    /// Fallback forward probe distance, meters.
    pub probe_distance: Real,
    /// Movement below this for `stuck_steps` consecutive actions aborts.
    pub stuck_threshold: Real,
    pub stuck_steps: u32,
    /// Seconds per micro-step in trajectory logs.
    pub micro_step_dt: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            controller: ControllerConfig::default(),
            memory: MemoryConfig::default(),
            view_select: ViewSelectConfig::default(),
            voxel_size: 0.05,
            max_retries: 2,
            probe_distance: 0.5,
            stuck_threshold: 0.1,
            stuck_steps: 3,
            micro_step_dt: 0.05,
        }
    }
}

/// Volume sized to the scene bounds with margins on all sides.
pub fn volume_for_scene(scene: &SceneSpec, voxel_size: Real) -> TsdfVolume<Real> {
    let margin = 0.4;
    let min = Vec3d::new(
        scene.bounds_min.0 - margin,
        scene.bounds_min.1 - margin,
        scene.floor_height - 0.2,
    );
    let size_x = scene.bounds_max.0 - scene.bounds_min.0 + 2.0 * margin;
    let size_y = scene.bounds_max.1 - scene.bounds_min.1 + 2.0 * margin;
    let size_z = 2.7;
    let dims = [
        (size_x / voxel_size).ceil() as usize,
        (size_y / voxel_size).ceil() as usize,
        (size_z / voxel_size).ceil() as usize,
    ];
    TsdfVolume::new(min, voxel_size, dims)
}

/// Sinks for per-step artifacts and the replay log; both optional.
#[derive(Default)]
pub struct EpisodeSinks<'a> {
    pub artifact_dir: Option<PathBuf>,
    pub replay: Option<&'a mut ReplayWriter>,
}

/// Full trace of a finished episode, for logging and replay verification.
pub struct EpisodeTrace {
    pub result: EpisodeResult,
    pub trajectory: Vec<TrajRecord>,
    pub prompts: Vec<String>,
    pub responses: Vec<String>,
}

struct StepDecision {
    action: SpatialAction,
    grounded: Option<GroundedWaypoint>,
    /// True when the forward-probe fallback was used.
    probed: bool,
}

/// Runs one episode to completion. Backend transport failures abort with
/// `backend-error`; malformed responses are retried with an injected alert
/// and fall back to a short forward probe, so the episode always completes.
pub fn run_episode(
    episode: &EpisodeSpec,
    scene: &SceneSpec,
    backend: &mut dyn PlannerBackend,
    config: &EvalConfig,
    mut sinks: EpisodeSinks<'_>,
) -> Result<EpisodeTrace, EvalError> {
    let intrinsics = crate::sim::default_intrinsics();
    let rig = crate::sim::default_rig();
    let floor = scene.floor_height;

    let mut volume = volume_for_scene(scene, config.voxel_size);
    let mut graph = TopoGraph::new();
    let mut history = HistoryLog::default();
    let mut state = episode.start;
    let mut frames: Vec<RgbdFramed> = Vec::new();
    let mut trail: Vec<(Real, Real)> = vec![(state.x, state.y)];
    let mut waypoint_markers: Vec<(Real, Real)> = Vec::new();
    let mut trajectory = vec![TrajRecord {
        step: 0,
        t: 0.0,
        x: state.x,
        y: state.y,
        theta: state.theta,
    }];
    let mut prompts = Vec::new();
    let mut responses = Vec::new();
    let mut pending_alerts: Vec<String> = Vec::new();
    let mut small_moves = 0u32;
    let mut steps_used = 0u32;
    let mut micro_steps = 1u64;

    let mut failure = FailureCode::MaxSteps;

    // Initial plan decomposition.
    let plan = match backend.decompose_instruction(&episode.instruction) {
        Ok(plan) => plan,
        Err(_) => {
            let result = score_episode(episode, &state, &trajectory, 0, FailureCode::BackendError);
            return Ok(EpisodeTrace {
                result,
                trajectory,
                prompts,
                responses,
            });
        }
    };
    let mut plan = plan;
    if let Some(replay) = sinks.replay.as_deref_mut() {
        let texts: Vec<&str> = plan.items().iter().map(|(t, _)| t.as_str()).collect();
        replay.append(&ReplayRecord {
            v: REPLAY_VERSION,
            episode: episode.id.clone(),
            step: 0,
            kind: "decompose".into(),
            digest: instruction_digest(&episode.instruction),
            response: serde_json::to_string(&texts).expect("plan serializes"),
        })?;
    }

    for step in 0..episode.max_steps {
        if state.distance_to(episode.goal.0, episode.goal.1) <= episode.success_radius {
            failure = FailureCode::None;
            break;
        }
        steps_used = step + 1;

        // 1. Perception: rotation scan fused into the volume.
        let scan = capture_rotation_scan(scene, &state, &intrinsics, &rig, step as f64);
        for frame in &scan {
            integrate_frame(&mut volume, frame, &intrinsics, &rig)
                .expect("scan frames match the rig intrinsics");
        }
        frames.extend(scan);

        // 2. Topological memory update.
        observe_pose(&mut graph, (state.x, state.y, floor), &config.memory);

        // 3. Prompt assembly.
        let alerts = std::mem::take(&mut pending_alerts);
        let views = select_orthogonal_views(&frames, &state, &config.view_select)
            .expect("a fresh scan at the current pose covers all directions");
        let bev = render_bev(&volume, &state, &trail, &waypoint_markers, floor);
        let summary = state_summary(&graph, &config.memory);
        let prompt = assemble_prompt(
            bev,
            views,
            &plan,
            &summary,
            &history,
            &episode.instruction,
            &alerts,
            &state,
        );

        // 4. Decision with the retry-then-probe policy.
        let decision = match decide_with_retries(
            backend,
            episode,
            scene,
            &volume,
            &intrinsics,
            &rig,
            &state,
            config,
            prompt,
            step,
            alerts,
            &history,
            &mut sinks,
            &mut prompts,
            &mut responses,
        ) {
            Ok(d) => d,
            Err(EvalError::Planner(_)) => {
                failure = FailureCode::BackendError;
                break;
            }
            Err(other) => return Err(other),
        };

        if let ActionKind::Stop = decision.action.kind {
            failure = FailureCode::None;
            break;
        }
        let grounded = decision
            .grounded
            .expect("non-stop decisions carry a waypoint");
        if grounded.clamped {
            pending_alerts.push(ALERT_HORIZON.to_string());
        }

        // 5. Plan update.
        if let Some(update) = &decision.action.updated_plan {
            plan = plan.merged(update);
        }

        // 6. Execution.
        let outcome = match execute_waypoint(scene, &state, grounded.point, &config.controller) {
            Ok(outcome) => outcome,
            Err(SimError::HorizonExceeded { .. }) => {
                pending_alerts.push(ALERT_HORIZON.to_string());
                history.push(HistoryEntry {
                    step,
                    thought: decision.action.thought.clone(),
                    view: waypoint_view(&decision.action),
                    action: decision.action.describe(),
                    ok: false,
                });
                continue;
            }
            Err(other) => return Err(other.into()),
        };

        for s in &outcome.path[1..] {
            trajectory.push(TrajRecord {
                step,
                t: micro_steps as f64 * config.micro_step_dt,
                x: s.x,
                y: s.y,
                theta: s.theta,
            });
            micro_steps += 1;
        }
        let moved = state.distance_to(outcome.state.x, outcome.state.y);
        state = outcome.state;
        trail.push((state.x, state.y));
        waypoint_markers.push(grounded.point);

        if !outcome.reached {
            pending_alerts.push(ALERT_ACTION_FAILED.to_string());
        }
        history.push(HistoryEntry {
            step,
            thought: decision.action.thought.clone(),
            view: waypoint_view(&decision.action),
            action: if decision.probed {
                format!("fallback probe {:.1} m", config.probe_distance)
            } else {
                decision.action.describe()
            },
            ok: outcome.reached,
        });

        if moved < config.stuck_threshold {
            small_moves += 1;
            if small_moves >= config.stuck_steps {
                failure = FailureCode::Stuck;
                break;
            }
        } else {
            small_moves = 0;
        }

        if state.distance_to(episode.goal.0, episode.goal.1) <= episode.success_radius {
            failure = FailureCode::None;
            break;
        }
    }

    let result = score_episode(episode, &state, &trajectory, steps_used, failure);
    if let Some(dir) = &sinks.artifact_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join("trajectory.txt"),
            crate::sim::write_trajectory(&trajectory),
        )?;
    }
    Ok(EpisodeTrace {
        result,
        trajectory,
        prompts,
        responses,
    })
}

fn waypoint_view(action: &SpatialAction) -> Option<crate::reasoning::ViewId> {
    match action.kind {
        ActionKind::Waypoint { view, .. } => Some(view),
        ActionKind::Stop => None,
    }
}

/// One backend call per attempt: parse and ground the response, re-prompting
/// with an alert up to `max_retries` times, then fall back to a forward probe.
#[allow(clippy::too_many_arguments)]
fn decide_with_retries(
    backend: &mut dyn PlannerBackend,
    episode: &EpisodeSpec,
    scene: &SceneSpec,
    volume: &TsdfVolume<Real>,
    intrinsics: &crate::Intrinsicsd,
    rig: &crate::CameraRigd,
    state: &AgentStated,
    config: &EvalConfig,
    prompt: PromptBundle,
    step: u32,
    base_alerts: Vec<String>,
    history: &HistoryLog,
    sinks: &mut EpisodeSinks<'_>,
    prompts: &mut Vec<String>,
    responses: &mut Vec<String>,
) -> Result<StepDecision, EvalError> {
    let mut prompt = prompt;
    let mut alerts = base_alerts;
    for attempt in 0..=config.max_retries {
        let request = PlannerRequest {
            prompt: &prompt,
            step,
            episode_id: &episode.id,
        };
        let response = backend.decide(&request)?;
        let text = prompt.serialize_text();
        if let Some(replay) = sinks.replay.as_deref_mut() {
            replay.append(&ReplayRecord {
                v: REPLAY_VERSION,
                episode: episode.id.clone(),
                step,
                kind: "decide".into(),
                digest: prompt.digest(),
                response: response.raw.clone(),
            })?;
        }
        if let Some(dir) = &sinks.artifact_dir {
            write_step_artifacts(dir, step, attempt, &text, &response.raw, &prompt)?;
        }
        prompts.push(text);
        responses.push(response.raw.clone());

        let alert = match parse_action(&response.raw) {
            Ok(action) => match action.kind {
                ActionKind::Stop => {
                    return Ok(StepDecision {
                        action,
                        grounded: None,
                        probed: false,
                    })
                }
                ActionKind::Waypoint { .. } => {
                    match ground_action(
                        &action,
                        &prompt,
                        volume,
                        intrinsics,
                        rig,
                        state,
                        scene.floor_height,
                        config.controller.d_max,
                        config.controller.agent_radius,
                    ) {
                        Ok(grounded) => {
                            return Ok(StepDecision {
                                action,
                                grounded: Some(grounded),
                                probed: false,
                            })
                        }
                        Err(ReasoningError::Grounding(_)) => ALERT_GROUNDING,
                        Err(_) => ALERT_INVALID_RESPONSE,
                    }
                }
            },
            Err(_) => ALERT_INVALID_RESPONSE,
        };

        if attempt < config.max_retries {
            alerts.push(alert.to_string());
            prompt = assemble_prompt(
                prompt.bev.clone(),
                [
                    prompt.ego_views[0].source.clone(),
                    prompt.ego_views[1].source.clone(),
                    prompt.ego_views[2].source.clone(),
                    prompt.ego_views[3].source.clone(),
                ],
                &prompt.plan.clone(),
                &prompt.state_block_without_alerts(),
                history,
                &prompt.instruction.clone(),
                &alerts,
                state,
            );
        }
    }

    // Fallback: a short forward probe keeps the episode moving.
    let target = (
        state.x + state.theta.cos() * config.probe_distance,
        state.y + state.theta.sin() * config.probe_distance,
    );
    let action = SpatialAction {
        kind: ActionKind::Waypoint {
            view: crate::reasoning::ViewId::Bev,
            u: 500,
            v: 500,
        },
        thought: "fallback probe".into(),
        updated_plan: None,
    };
    let grounded = GroundedWaypoint {
        point: target,
        z: scene.floor_height,
        surface: None,
        floor_projection: target,
        clamped: false,
    };
    Ok(StepDecision {
        action,
        grounded: Some(grounded),
        probed: true,
    })
}

fn write_step_artifacts(
    dir: &Path,
    step: u32,
    attempt: u32,
    prompt_text: &str,
    response: &str,
    prompt: &PromptBundle,
) -> Result<(), EvalError> {
    let step_dir = dir.join(format!("step_{step:03}"));
    std::fs::create_dir_all(&step_dir)?;
    let suffix = if attempt == 0 {
        String::new()
    } else {
        format!("_retry{attempt}")
    };
    std::fs::write(step_dir.join(format!("prompt{suffix}.txt")), prompt_text)?;
    std::fs::write(step_dir.join(format!("response{suffix}.txt")), response)?;
    if attempt == 0 {
        std::fs::write(step_dir.join("bev.png"), prompt.bev.to_png_bytes())?;
        for view in &prompt.ego_views {
            std::fs::write(
                step_dir.join(format!("{}.png", view.id)),
                crate::draw::encode_png(&view.pixels, view.source.width, view.source.height),
            )?;
        }
    }
    Ok(())
}

/// Recomputes the metric suite from a trajectory log alone, as the `score`
/// command does. The failure code is not recoverable from a log.
pub fn score_trajectory(episode: &EpisodeSpec, trajectory: &[TrajRecord]) -> EpisodeResult {
    let final_state = trajectory
        .last()
        .map(|r| r.state())
        .unwrap_or(episode.start);
    let steps = trajectory.last().map(|r| r.step + 1).unwrap_or(0);
    score_episode(episode, &final_state, trajectory, steps, FailureCode::None)
}

fn score_episode(
    episode: &EpisodeSpec,
    final_state: &AgentStated,
    trajectory: &[TrajRecord],
    steps: u32,
    failure: FailureCode,
) -> EpisodeResult {
    let traj_xy: Vec<(Real, Real)> = trajectory.iter().map(|r| (r.x, r.y)).collect();
    let ne = metrics::navigation_error((final_state.x, final_state.y), episode.goal);
    let success = metrics::success(
        (final_state.x, final_state.y),
        episode.goal,
        episode.success_radius,
    );
    let tl = metrics::path_length(&traj_xy);
    let osr = metrics::oracle_success(&traj_xy, episode.goal, episode.success_radius);
    let spl = metrics::spl(success, episode.shortest_path_length, tl).unwrap_or(0.0);
    let ndtw =
        metrics::ndtw(&traj_xy, &episode.reference_path, episode.success_radius).unwrap_or(0.0);
    EpisodeResult {
        episode_id: episode.id.clone(),
        success,
        ne,
        tl,
        osr,
        spl,
        ndtw,
        steps,
        failure_code: failure,
    }
}
