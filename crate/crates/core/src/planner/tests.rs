use std::io::{Read, Write};
use std::net::TcpListener;

use crate::reasoning::{
    assemble_prompt, parse_action, ActionKind, HistoryLog, PromptBundle, TaskPlan, ViewId,
};
use crate::tsdf::{render_bev, RgbdFrame, TsdfVolume};
use crate::{AgentStated, Vec3d};

use super::*;

fn tiny_frame(yaw: f64) -> RgbdFrame<f64> {
    let agent = AgentStated::new(0.0, 0.0, 0.0);
    RgbdFrame {
        width: 2,
        height: 2,
        color: vec![0; 12],
        depth: vec![1.0; 4],
        timestamp: yaw,
        camera_yaw: yaw,
        body_pose: agent.body_pose(0.0),
        agent_state: agent,
    }
}

/// Bundle over a volume whose mid slab is fully observed free space.
fn free_space_bundle(agent: AgentStated) -> PromptBundle {
    let mut vol = TsdfVolume::<f64>::new(Vec3d::new(-4.0, -4.0, -0.5), 0.1, [80, 80, 25]);
    let dims = vol.dims();
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                vol.set_voxel(i, j, k, vol.truncation(), 1.0);
            }
        }
    }
    let bev = render_bev(&vol, &agent, &[], &[], -0.5);
    assemble_prompt(
        bev,
        [
            tiny_frame(0.0),
            tiny_frame(1.0),
            tiny_frame(2.0),
            tiny_frame(3.0),
        ],
        &TaskPlan::default(),
        "node: 0\nvisits: 1\nneighbors: 0\nvertical: Level\nalert: none\n",
        &HistoryLog::default(),
        "reach the goal",
        &[],
        &agent,
    )
}

mod scripted_tests {
    use super::*;

    fn policy() -> ScriptedPolicy {
        ScriptedPolicy::new(
            vec!["Exit the room".into(), "Turn left".into()],
            vec![
                (
                    0,
                    r#"{"action":{"type":"waypoint","view":"bev","u":500,"v":400}}"#.into(),
                ),
                (
                    1,
                    r#"{"action":{"type":"waypoint","view":"bev","u":600,"v":400}}"#.into(),
                ),
            ],
            r#"{"action":{"type":"stop"}}"#.into(),
        )
        .unwrap()
    }

    #[test]
    fn scripted_replays_fixture_bytes_verbatim() {
        let mut backend = ScriptedBackend::new(policy());
        let bundle = free_space_bundle(AgentStated::new(0.0, 0.0, 0.0));
        let req = PlannerRequest {
            prompt: &bundle,
            step: 0,
            episode_id: "ep",
        };
        let resp = backend.decide(&req).unwrap();
        assert_eq!(
            resp.raw,
            r#"{"action":{"type":"waypoint","view":"bev","u":500,"v":400}}"#
        );
        // Steps past the schedule get the terminal stop.
        let req9 = PlannerRequest {
            prompt: &bundle,
            step: 9,
            episode_id: "ep",
        };
        assert_eq!(
            backend.decide(&req9).unwrap().raw,
            r#"{"action":{"type":"stop"}}"#
        );
    }

    #[test]
    fn scripted_is_deterministic_across_runs() {
        let bundle = free_space_bundle(AgentStated::new(0.0, 0.0, 0.0));
        let run = || -> Vec<String> {
            let mut backend = ScriptedBackend::new(policy());
            (0..4)
                .map(|step| {
                    let req = PlannerRequest {
                        prompt: &bundle,
                        step,
                        episode_id: "ep",
                    };
                    backend.decide(&req).unwrap().raw
                })
                .collect()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn scripted_decompose_returns_fixture_plan() {
        let mut backend = ScriptedBackend::new(policy());
        let plan = backend
            .decompose_instruction("Exit the room and turn left")
            .unwrap();
        assert_eq!(
            plan.items(),
            &[
                ("Exit the room".to_string(), false),
                ("Turn left".to_string(), false)
            ]
        );
        assert!(matches!(
            backend.decompose_instruction(""),
            Err(PlannerError::EmptyInstruction)
        ));
    }

    #[test]
    fn duplicate_trigger_steps_are_rejected() {
        let res = ScriptedPolicy::new(
            vec![],
            vec![(0, "a".into()), (0, "b".into())],
            "stop".into(),
        );
        assert!(matches!(res, Err(PlannerError::Script(_))));
    }

    #[test]
    fn script_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ep.script.toml");
        let policy = policy();
        save_script(&policy, &path).unwrap();
        let back = load_script(&path).unwrap();
        assert_eq!(policy, back);
    }
}

mod greedy_tests {
    use super::*;

    #[test]
    fn greedy_emissions_conform_to_the_schema() {
        let agent = AgentStated::new(0.0, 0.0, 0.0);
        let bundle = free_space_bundle(agent);
        let mut backend = GreedyBackend::new((2.0, 0.0), 3.0, 0.18);
        for step in 0..5 {
            let req = PlannerRequest {
                prompt: &bundle,
                step,
                episode_id: "ep",
            };
            let resp = backend.decide(&req).unwrap();
            assert!(parse_action(&resp.raw).is_ok(), "unparseable: {}", resp.raw);
        }
    }

    #[test]
    fn greedy_targets_lie_near_the_goal_ray() {
        // Open observed space, goal 2 m ahead: the chosen map pixel grounds
        // within 0.3 m of the straight line to the goal.
        let agent = AgentStated::new(0.0, 0.0, 0.0);
        let bundle = free_space_bundle(agent);
        let goal = (2.0, 0.0);
        let mut backend = GreedyBackend::new(goal, 3.0, 0.18);
        let req = PlannerRequest {
            prompt: &bundle,
            step: 0,
            episode_id: "ep",
        };
        let action = parse_action(&backend.decide(&req).unwrap().raw).unwrap();
        let ActionKind::Waypoint { view, u, v } = action.kind else {
            panic!("expected waypoint")
        };
        assert_eq!(view, ViewId::Bev);
        let (wx, wy) = bundle.bev.normalized_to_world(u as f64, v as f64).unwrap();
        // Goal is reachable within d_max, so greedy should pick (nearly) it.
        let off_ray = wy.abs();
        assert!(
            off_ray < 0.3,
            "waypoint ({wx:.2}, {wy:.2}) strays {off_ray:.2} m off the ray"
        );
        assert!((wx - goal.0).abs() < 0.3);
    }

    #[test]
    fn greedy_decompose_is_single_item() {
        let mut backend = GreedyBackend::new((1.0, 0.0), 3.0, 0.18);
        let plan = backend.decompose_instruction("whatever").unwrap();
        assert_eq!(plan.items(), &[("reach goal".to_string(), false)]);
    }
}

mod replay_tests {
    use super::*;

    #[test]
    fn replay_serves_logged_responses_and_detects_drift() {
        let bundle = free_space_bundle(AgentStated::new(0.0, 0.0, 0.0));
        let digest = bundle.digest();
        let records = vec![
            ReplayRecord {
                v: REPLAY_VERSION,
                episode: "ep".into(),
                step: 0,
                kind: "decide".into(),
                digest: digest.clone(),
                response: "resp0".into(),
            },
            ReplayRecord {
                v: REPLAY_VERSION,
                episode: "ep".into(),
                step: 1,
                kind: "decide".into(),
                digest: "bogus".into(),
                response: "resp1".into(),
            },
        ];
        let mut backend = ReplayBackend::from_records(records, "remote");
        let req0 = PlannerRequest {
            prompt: &bundle,
            step: 0,
            episode_id: "ep",
        };
        assert_eq!(backend.decide(&req0).unwrap().raw, "resp0");
        let req1 = PlannerRequest {
            prompt: &bundle,
            step: 1,
            episode_id: "ep",
        };
        assert!(matches!(
            backend.decide(&req1),
            Err(PlannerError::ReplayMismatch { .. })
        ));
    }

    #[test]
    fn replay_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.replay.jsonl");
        let record = ReplayRecord {
            v: REPLAY_VERSION,
            episode: "ep".into(),
            step: 0,
            kind: "decide".into(),
            digest: "d".into(),
            response: r#"{"action":{"type":"stop"}}"#.into(),
        };
        let mut writer = ReplayWriter::create(&path).unwrap();
        writer.append(&record).unwrap();
        drop(writer);
        let records = replay::load_replay(&path).unwrap();
        assert_eq!(records, vec![record]);
    }
}

mod remote_tests {
    use super::*;

    /// Minimal one-shot HTTP echo stub: answers each request with
    /// `{"text": "echo:<kind>"}`.
    fn spawn_echo_stub(responses: usize) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for _ in 0..responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = Vec::new();
                let mut chunk = [0u8; 4096];
                let body_start;
                loop {
                    let n = stream.read(&mut chunk).unwrap();
                    buf.extend_from_slice(&chunk[..n]);
                    if let Some(pos) = find_header_end(&buf) {
                        body_start = pos;
                        break;
                    }
                }
                let header = String::from_utf8_lossy(&buf[..body_start]).to_string();
                let content_length: usize = header
                    .lines()
                    .find_map(|l| {
                        let l = l.to_ascii_lowercase();
                        l.strip_prefix("content-length:")
                            .map(|v| v.trim().parse().unwrap())
                    })
                    .unwrap_or(0);
                while buf.len() < body_start + content_length {
                    let n = stream.read(&mut chunk).unwrap();
                    buf.extend_from_slice(&chunk[..n]);
                }
                let body = String::from_utf8_lossy(&buf[body_start..]).to_string();
                let parsed: serde_json::Value = serde_json::from_str(&body).unwrap();
                let kind = parsed["kind"].as_str().unwrap_or("?").to_string();
                let reply = format!(r#"{{"text": "echo:{kind}"}}"#);
                let response = format!(
                    "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n{}",
                    reply.len(),
                    reply
                );
                stream.write_all(response.as_bytes()).unwrap();
                bodies.push(body);
            }
            bodies
        });
        (format!("http://{addr}/plan"), handle)
    }

    fn find_header_end(buf: &[u8]) -> Option<usize> {
        buf.windows(4).position(|w| w == b"\r\n\r\n").map(|p| p + 4)
    }

    #[test]
    fn remote_round_trips_against_loopback_stub() {
        let (endpoint, handle) = spawn_echo_stub(1);
        let mut backend = RemoteBackend::new(RemoteConfig::new(endpoint)).unwrap();
        let bundle = free_space_bundle(AgentStated::new(0.0, 0.0, 0.0));
        let req = PlannerRequest {
            prompt: &bundle,
            step: 0,
            episode_id: "ep",
        };
        let resp = backend.decide(&req).unwrap();
        assert_eq!(resp.raw, "echo:decide");
        assert_eq!(resp.backend_id, "remote");
        let bodies = handle.join().unwrap();
        let body: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
        assert_eq!(body["protocol"], "desknav/1");
        assert_eq!(body["step"], 0);
        assert_eq!(body["images"].as_array().unwrap().len(), 5);
        assert_eq!(body["text"].as_str().unwrap(), bundle.serialize_text());
    }

    #[test]
    fn transport_failures_exhaust_the_retry_budget() {
        // Nothing listens on this port; all attempts fail fast.
        let mut config = RemoteConfig::new("http://127.0.0.1:1/plan");
        config.max_retries = 2;
        config.backoff_base_s = 0.01;
        config.timeout_s = 1.0;
        let mut backend = RemoteBackend::new(config).unwrap();
        let bundle = free_space_bundle(AgentStated::new(0.0, 0.0, 0.0));
        let req = PlannerRequest {
            prompt: &bundle,
            step: 0,
            episode_id: "ep",
        };
        match backend.decide(&req) {
            Err(PlannerError::Exhausted { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }
}
