//! Command-line interface: `run`, `replay`, `render-map`, `score`, and
//! `validate-scene`.
//!
//! Exit codes: 0 success, 2 configuration or file-format error, 3 validation
//! failure, 4 backend failure, 5 replay divergence, 1 anything else.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::eval::{
    load_run_config, render_table, run_episode, score_trajectory, BackendChoice, EpisodeSinks,
    EvalConfig, EvalError, FailureCode, RunReport,
};
use crate::planner::{
    load_script, GreedyBackend, PlannerBackend, RemoteBackend, ReplayBackend, ReplayWriter,
    ScriptedBackend,
};
use crate::sim::{
    capture_rotation_scan, default_intrinsics, default_rig, load_episode, load_scene,
    parse_trajectory,
};
use crate::tsdf::{integrate_frame, render_bev};
use crate::Real;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_BACKEND: i32 = 4;
pub const EXIT_REPLAY_DIVERGED: i32 = 5;

#[derive(Parser)]
#[command(
    name = "desknav",
    about = "Desk-scale vision-and-language navigation stack",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an episode suite from a run configuration file.
    Run {
        /// Run configuration (TOML).
        #[arg(long)]
        episodes: PathBuf,
        /// Override the configured backend (scripted|greedy|remote|replay).
        #[arg(long)]
        backend: Option<String>,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a suite from its logged responses and verify bit-exact results.
    Replay {
        /// Run configuration (TOML).
        #[arg(long)]
        episodes: PathBuf,
        /// Directory holding <episode>.replay.jsonl and report.json from the
        /// original run.
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Fuse a rotation scan at each reasoning step of a trajectory log and
    /// export one map PNG per step.
    RenderMap {
        #[arg(long)]
        episode: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute metrics from a trajectory log.
    Score {
        #[arg(long)]
        episode: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
    },
    /// Check a scene file against its invariants.
    ValidateScene { scene: PathBuf },
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            classify(&err)
        }
    }
}

fn classify(err: &EvalError) -> i32 {
    match err {
        EvalError::Config(_) => EXIT_CONFIG,
        EvalError::Sim(crate::sim::SimError::Parse { .. }) => EXIT_CONFIG,
        EvalError::Sim(crate::sim::SimError::Validation { .. }) => EXIT_VALIDATION,
        EvalError::Planner(_) => EXIT_BACKEND,
        _ => EXIT_ERROR,
    }
}

fn dispatch(cli: Cli) -> Result<i32, EvalError> {
    match cli.command {
        Command::Run {
            episodes,
            backend,
            out,
        } => cmd_run(&episodes, backend.as_deref(), out),
        Command::Replay { episodes, run_dir } => cmd_replay(&episodes, &run_dir),
        Command::RenderMap {
            episode,
            trajectory,
            out,
        } => cmd_render_map(&episode, &trajectory, &out),
        Command::Score {
            episode,
            trajectory,
        } => cmd_score(&episode, &trajectory),
        Command::ValidateScene { scene } => cmd_validate_scene(&scene),
    }
}

fn make_backend(
    choice: &BackendChoice,
    episode_id: &str,
    goal: (Real, Real),
    eval: &EvalConfig,
) -> Result<Box<dyn PlannerBackend>, EvalError> {
    Ok(match choice {
        BackendChoice::Scripted { script_dir } => {
            let path = script_dir.join(format!("{episode_id}.script.toml"));
            Box::new(ScriptedBackend::new(load_script(path)?))
        }
        BackendChoice::Greedy => Box::new(GreedyBackend::new(
            goal,
            eval.controller.d_max,
            eval.controller.agent_radius,
        )),
        BackendChoice::Remote(config) => Box::new(RemoteBackend::new(config.clone())?),
        BackendChoice::Replay { replay_dir } => {
            let path = replay_dir.join(format!("{episode_id}.replay.jsonl"));
            Box::new(ReplayBackend::from_file(path, "logged")?)
        }
    })
}

fn override_backend(config: &mut crate::eval::RunConfig, name: &str) -> Result<(), EvalError> {
    config.backend = match name {
        "greedy" => BackendChoice::Greedy,
        "scripted" | "remote" | "replay" => match (&config.backend, name) {
            (BackendChoice::Scripted { .. }, "scripted")
            | (BackendChoice::Remote(_), "remote")
            | (BackendChoice::Replay { .. }, "replay") => return Ok(()),
            _ => {
                return Err(EvalError::Config(format!(
                    "cannot override to '{name}': the run config lacks its settings"
                )))
            }
        },
        other => return Err(EvalError::Config(format!("unknown backend '{other}'"))),
    };
    Ok(())
}

fn cmd_run(
    config_path: &Path,
    backend_override: Option<&str>,
    out: Option<PathBuf>,
) -> Result<i32, EvalError> {
    let mut config = load_run_config(config_path)?;
    if let Some(name) = backend_override {
        override_backend(&mut config, name)?;
    }
    if let Some(out) = out {
        config.output_dir = out;
    }
    std::fs::create_dir_all(&config.output_dir)?;

    let backend_name = match &config.backend {
        BackendChoice::Scripted { .. } => "scripted",
        BackendChoice::Greedy => "greedy",
        BackendChoice::Remote(_) => "remote",
        BackendChoice::Replay { .. } => "replay",
    };

    let mut results = Vec::new();
    let mut backend_failed = false;
    for path in &config.episode_paths {
        let (episode, scene) = load_episode(path, config.eval.controller.agent_radius)?;
        let mut backend = make_backend(&config.backend, &episode.id, episode.goal, &config.eval)?;
        let mut replay_writer = ReplayWriter::create(
            config
                .output_dir
                .join(format!("{}.replay.jsonl", episode.id)),
        )?;
        let sinks = EpisodeSinks {
            artifact_dir: Some(config.output_dir.join("artifacts").join(&episode.id)),
            replay: Some(&mut replay_writer),
        };
        let trace = run_episode(&episode, &scene, backend.as_mut(), &config.eval, sinks)?;
        println!(
            "{}: success={} ne={:.3} steps={} failure={}",
            episode.id,
            trace.result.success,
            trace.result.ne,
            trace.result.steps,
            trace.result.failure_code
        );
        if trace.result.failure_code == FailureCode::BackendError {
            backend_failed = true;
        }
        results.push(trace.result);
    }

    let report = RunReport::new(backend_name, &config.digest, results);
    std::fs::write(config.output_dir.join("report.json"), report.to_json())?;
    let table = render_table(&report);
    std::fs::write(config.output_dir.join("report.txt"), &table)?;
    print!("{table}");
    Ok(if backend_failed {
        EXIT_BACKEND
    } else {
        EXIT_OK
    })
}

fn cmd_replay(config_path: &Path, run_dir: &Path) -> Result<i32, EvalError> {
    let mut config = load_run_config(config_path)?;
    config.backend = BackendChoice::Replay {
        replay_dir: run_dir.to_path_buf(),
    };

    let original = RunReport::from_json(&std::fs::read_to_string(run_dir.join("report.json"))?)?;

    let mut results = Vec::new();
    for path in &config.episode_paths {
        let (episode, scene) = load_episode(path, config.eval.controller.agent_radius)?;
        let mut backend = make_backend(&config.backend, &episode.id, episode.goal, &config.eval)?;
        let trace = run_episode(
            &episode,
            &scene,
            backend.as_mut(),
            &config.eval,
            EpisodeSinks::default(),
        )?;
        if trace.result.failure_code == FailureCode::BackendError {
            eprintln!("replay of '{}' diverged from the log", episode.id);
            return Ok(EXIT_REPLAY_DIVERGED);
        }
        results.push(trace.result);
    }

    let report = RunReport::new(&original.backend_id, &original.config_digest, results);
    if report.episodes != original.episodes {
        eprintln!("replayed metrics differ from the original report:");
        for (new, old) in report.episodes.iter().zip(original.episodes.iter()) {
            if new != old {
                eprintln!("  {}: logged {:?}", old.episode_id, old);
                eprintln!("  {}: replayed {:?}", new.episode_id, new);
            }
        }
        return Ok(EXIT_REPLAY_DIVERGED);
    }
    println!(
        "replay reproduced {} episode(s) bit-exactly",
        report.episodes.len()
    );
    Ok(EXIT_OK)
}

fn cmd_render_map(episode_path: &Path, traj_path: &Path, out: &Path) -> Result<i32, EvalError> {
    let eval = EvalConfig::default();
    let (episode, scene) = load_episode(episode_path, eval.controller.agent_radius)?;
    let records = parse_trajectory(&std::fs::read_to_string(traj_path)?)?;
    if records.is_empty() {
        return Err(EvalError::Config("trajectory log holds no records".into()));
    }
    std::fs::create_dir_all(out)?;

    let (intrinsics, rig) = (default_intrinsics(), default_rig());
    let mut volume = crate::eval::volume_for_scene(&scene, eval.voxel_size);
    let mut trail: Vec<(Real, Real)> = Vec::new();
    let mut step = None;
    for record in &records {
        trail.push((record.x, record.y));
        if step == Some(record.step) {
            continue;
        }
        step = Some(record.step);
        // Scan from the first pose of each reasoning step, as the runner does.
        let state = record.state();
        for frame in capture_rotation_scan(&scene, &state, &intrinsics, &rig, record.step as f64) {
            integrate_frame(&mut volume, &frame, &intrinsics, &rig)
                .expect("scan frames match the rig intrinsics");
        }
        let bev = render_bev(&volume, &state, &trail, &[], scene.floor_height);
        std::fs::write(
            out.join(format!("step_{:03}.png", record.step)),
            bev.to_png_bytes(),
        )?;
    }
    println!(
        "wrote {} map image(s) to {}",
        step.map(|s| s + 1).unwrap_or(0),
        out.display()
    );
    let _ = episode;
    Ok(EXIT_OK)
}

fn cmd_score(episode_path: &Path, traj_path: &Path) -> Result<i32, EvalError> {
    let eval = EvalConfig::default();
    let (episode, _scene) = load_episode(episode_path, eval.controller.agent_radius)?;
    let records = parse_trajectory(&std::fs::read_to_string(traj_path)?)?;
    let result = score_trajectory(&episode, &records);
    println!(
        "episode {}\nSR   {}\nOSR  {}\nNE   {:.4}\nTL   {:.4}\nSPL  {:.4}\nnDTW {:.4}",
        result.episode_id,
        if result.success { 1 } else { 0 },
        if result.osr { 1 } else { 0 },
        result.ne,
        result.tl,
        result.spl,
        result.ndtw
    );
    Ok(EXIT_OK)
}

fn cmd_validate_scene(path: &Path) -> Result<i32, EvalError> {
    match load_scene(path) {
        Ok(scene) => {
            println!(
                "scene '{}' ok: {} box(es), floor at {} m, bounds [{}, {}] x [{}, {}]",
                scene.name,
                scene.boxes.len(),
                scene.floor_height,
                scene.bounds_min.0,
                scene.bounds_max.0,
                scene.bounds_min.1,
                scene.bounds_max.1
            );
            Ok(EXIT_OK)
        }
        Err(crate::sim::SimError::Validation { what, detail }) => {
            eprintln!("invalid: {what}: {detail}");
            Ok(EXIT_VALIDATION)
        }
        Err(other) => Err(other.into()),
    }
}
