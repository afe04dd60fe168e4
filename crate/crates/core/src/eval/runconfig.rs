//! Run configuration file: scene/episode locations, backend choice,
//! thresholds, seed, and output directory.
//!
//! ```toml
//! version = 1
//! episode_dir = "episodes"
//! episodes = ["ep01.episode.toml"]
//! output_dir = "runs/out"
//! seed = 7
//!
//! [backend]
//! kind = "scripted"          # scripted | greedy | remote | replay
//! script_dir = "scripts"     # scripted: <episode id>.script.toml
//! replay_dir = "runs/out"    # replay: <episode id>.replay.jsonl
//!
//! [backend.remote]
//! endpoint = "http://127.0.0.1:8080/plan"
//!
//! [thresholds]
//! delta_merge = 0.8
//! tau_loop = 3
//! delta_s = 0.5
//! d_max = 3.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::planner::RemoteConfig;
use crate::Real;

use super::{EvalConfig, EvalError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfigFile {
    version: u32,
    #[serde(default)]
    episode_dir: Option<String>,
    episodes: Vec<String>,
    output_dir: String,
    #[serde(default)]
    seed: u64,
    backend: BackendSection,
    #[serde(default)]
    thresholds: Thresholds,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BackendSection {
    kind: String,
    #[serde(default)]
    script_dir: Option<String>,
    #[serde(default)]
    replay_dir: Option<String>,
    #[serde(default)]
    remote: Option<RemoteConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Thresholds {
    delta_merge: Real,
    tau_loop: u32,
    delta_s: Real,
    d_max: Real,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            delta_merge: 0.8,
            tau_loop: 3,
            delta_s: 0.5,
            d_max: 3.0,
        }
    }
}

/// Which backend drives the run.
#[derive(Debug, Clone)]
pub enum BackendChoice {
    Scripted { script_dir: PathBuf },
    Greedy,
    Remote(RemoteConfig),
    Replay { replay_dir: PathBuf },
}

/// A fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Absolute episode file paths, in file order.
    pub episode_paths: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub backend: BackendChoice,
    pub eval: EvalConfig,
    /// SHA-256 of the raw config file bytes.
    pub digest: String,
}

pub fn load_run_config(path: impl AsRef<Path>) -> Result<RunConfig, EvalError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let raw: RunConfigFile =
        toml::from_str(std::str::from_utf8(&bytes).map_err(|e| EvalError::Config(e.to_string()))?)
            .map_err(|e| EvalError::Config(format!("{}: {e}", path.display())))?;
    if raw.version != 1 {
        return Err(EvalError::Config(format!(
            "{}: unsupported run config version {}",
            path.display(),
            raw.version
        )));
    }
    if raw.episodes.is_empty() {
        return Err(EvalError::Config(format!(
            "{}: key 'episodes' lists no files",
            path.display()
        )));
    }

    let base = path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();
    let episode_base = match &raw.episode_dir {
        Some(dir) => base.join(dir),
        None => base.clone(),
    };
    let episode_paths = raw.episodes.iter().map(|e| episode_base.join(e)).collect();

    let backend = match raw.backend.kind.as_str() {
        "scripted" => {
            let dir = raw.backend.script_dir.as_ref().ok_or_else(|| {
                EvalError::Config("backend.kind = 'scripted' needs key 'backend.script_dir'".into())
            })?;
            BackendChoice::Scripted {
                script_dir: base.join(dir),
            }
        }
        "greedy" => BackendChoice::Greedy,
        "remote" => {
            let mut remote = raw.backend.remote.clone().ok_or_else(|| {
                EvalError::Config("backend.kind = 'remote' needs table 'backend.remote'".into())
            })?;
            remote.apply_env_overrides();
            BackendChoice::Remote(remote)
        }
        "replay" => {
            let dir = raw.backend.replay_dir.as_ref().ok_or_else(|| {
                EvalError::Config("backend.kind = 'replay' needs key 'backend.replay_dir'".into())
            })?;
            BackendChoice::Replay {
                replay_dir: base.join(dir),
            }
        }
        other => {
            return Err(EvalError::Config(format!(
                "backend.kind '{other}' is not one of scripted|greedy|remote|replay"
            )))
        }
    };

    let mut eval = EvalConfig::default();
    eval.memory.delta_merge = raw.thresholds.delta_merge;
    eval.memory.tau_loop = raw.thresholds.tau_loop;
    eval.view_select.delta_s = raw.thresholds.delta_s;
    eval.controller.d_max = raw.thresholds.d_max;

    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();

    Ok(RunConfig {
        episode_paths,
        output_dir: base.join(raw.output_dir),
        seed: raw.seed,
        backend,
        eval,
        digest,
    })
}
