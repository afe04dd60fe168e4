//! Versioned scene and episode files. Both are TOML with explicit `version`
//! fields; all invariants are checked eagerly on load.
//!
//! Scene (`*.scene.toml`):
//! ```toml
//! version = 1
//! name = "box_room"
//! floor_height = 0.0            # meters; the floor plane
//! floor_color = [90, 90, 95]    # rendered floor RGB
//! bounds_min = [-2.6, -2.6]     # 2D world extent (floor spans it)
//! bounds_max = [2.6, 2.6]
//!
//! [[boxes]]                     # axis-aligned obstacles
//! label = "wall_north"
//! min = [-2.1, 2.0, 0.0]        # meters, world frame
//! max = [2.1, 2.1, 2.0]
//! color = [200, 60, 60]
//! ```
//!
//! Episode (`*.episode.toml`):
//! ```toml
//! version = 1
//! id = "br_short"
//! scene = "../scenes/box_room.scene.toml"   # relative to this file
//! start = [0.0, 0.0, 0.0]                   # x, y, theta
//! goal = [0.8, -0.6]
//! instruction = "Move a short way forward and to your right."
//! success_radius = 0.35                     # meters
//! shortest_path_length = 1.0                # meters, for SPL
//! reference_path = [[0.0, 0.0], [0.8, -0.6]]
//! max_steps = 20                            # reasoning-step cap
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::{Aabbd, AgentStated, Real};

use super::{EpisodeSpec, SceneBox, SceneSpec, SimError};

const SCENE_VERSION: u32 = 1;
const EPISODE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct SceneFile {
    version: u32,
    name: String,
    floor_height: Real,
    floor_color: [u8; 3],
    bounds_min: [Real; 2],
    bounds_max: [Real; 2],
    #[serde(default)]
    boxes: Vec<BoxFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BoxFile {
    label: String,
    min: [Real; 3],
    max: [Real; 3],
    color: [u8; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct EpisodeFile {
    version: u32,
    id: String,
    scene: String,
    /// x, y, theta.
    start: [Real; 3],
    goal: [Real; 2],
    instruction: String,
    success_radius: Real,
    shortest_path_length: Real,
    reference_path: Vec<[Real; 2]>,
    max_steps: u32,
}

fn read_to_string(path: &Path) -> Result<String, SimError> {
    std::fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_err(path: &Path, detail: impl std::fmt::Display) -> SimError {
    SimError::Parse {
        path: path.display().to_string(),
        detail: detail.to_string(),
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneSpec, SimError> {
    let path = path.as_ref();
    let raw: SceneFile = toml::from_str(&read_to_string(path)?).map_err(|e| parse_err(path, e))?;
    if raw.version != SCENE_VERSION {
        return Err(parse_err(
            path,
            format!("unsupported scene version {}", raw.version),
        ));
    }
    let scene = SceneSpec {
        name: raw.name,
        floor_height: raw.floor_height,
        floor_color: raw.floor_color,
        bounds_min: (raw.bounds_min[0], raw.bounds_min[1]),
        bounds_max: (raw.bounds_max[0], raw.bounds_max[1]),
        boxes: raw
            .boxes
            .into_iter()
            .map(|b| SceneBox {
                label: b.label,
                aabb: Aabbd {
                    min: Vec3::new(b.min[0], b.min[1], b.min[2]),
                    max: Vec3::new(b.max[0], b.max[1], b.max[2]),
                },
                color: b.color,
            })
            .collect(),
    };
    scene.validate()?;
    Ok(scene)
}

pub fn save_scene(scene: &SceneSpec, path: impl AsRef<Path>) -> Result<(), SimError> {
    let path = path.as_ref();
    let raw = SceneFile {
        version: SCENE_VERSION,
        name: scene.name.clone(),
        floor_height: scene.floor_height,
        floor_color: scene.floor_color,
        bounds_min: [scene.bounds_min.0, scene.bounds_min.1],
        bounds_max: [scene.bounds_max.0, scene.bounds_max.1],
        boxes: scene
            .boxes
            .iter()
            .map(|b| BoxFile {
                label: b.label.clone(),
                min: [b.aabb.min.x, b.aabb.min.y, b.aabb.min.z],
                max: [b.aabb.max.x, b.aabb.max.y, b.aabb.max.z],
                color: b.color,
            })
            .collect(),
    };
    let text = toml::to_string_pretty(&raw).map_err(|e| parse_err(path, e))?;
    std::fs::write(path, text).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads an episode and its scene (resolved relative to the episode file).
/// Validation runs eagerly with the given collision radius.
pub fn load_episode(
    path: impl AsRef<Path>,
    agent_radius: Real,
) -> Result<(EpisodeSpec, SceneSpec), SimError> {
    let path = path.as_ref();
    let raw: EpisodeFile =
        toml::from_str(&read_to_string(path)?).map_err(|e| parse_err(path, e))?;
    if raw.version != EPISODE_VERSION {
        return Err(parse_err(
            path,
            format!("unsupported episode version {}", raw.version),
        ));
    }
    let scene_path = path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&raw.scene);
    let scene = load_scene(&scene_path)?;
    let episode = EpisodeSpec {
        id: raw.id,
        scene: raw.scene,
        start: AgentStated::new(raw.start[0], raw.start[1], raw.start[2]),
        goal: (raw.goal[0], raw.goal[1]),
        instruction: raw.instruction,
        success_radius: raw.success_radius,
        shortest_path_length: raw.shortest_path_length,
        reference_path: raw.reference_path.iter().map(|p| (p[0], p[1])).collect(),
        max_steps: raw.max_steps,
    };
    episode.validate(&scene, agent_radius)?;
    Ok((episode, scene))
}

pub fn save_episode(episode: &EpisodeSpec, path: impl AsRef<Path>) -> Result<(), SimError> {
    let path = path.as_ref();
    let raw = EpisodeFile {
        version: EPISODE_VERSION,
        id: episode.id.clone(),
        scene: episode.scene.clone(),
        start: [episode.start.x, episode.start.y, episode.start.theta],
        goal: [episode.goal.0, episode.goal.1],
        instruction: episode.instruction.clone(),
        success_radius: episode.success_radius,
        shortest_path_length: episode.shortest_path_length,
        reference_path: episode
            .reference_path
            .iter()
            .map(|&(x, y)| [x, y])
            .collect(),
        max_steps: episode.max_steps,
    };
    let text = toml::to_string_pretty(&raw).map_err(|e| parse_err(path, e))?;
    std::fs::write(path, text).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })
}
