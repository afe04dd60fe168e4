//! Planner backends behind one interface: a scripted oracle for
//! deterministic tests, a goal-seeking geometric baseline for validating the
//! execution stack, a remote HTTP client for real language-model services,
//! and a replay backend that re-serves logged responses.

use thiserror::Error;

use crate::reasoning::{PromptBundle, TaskPlan};

mod greedy;
mod remote;
mod replay;
mod scripted;

pub use greedy::GreedyBackend;
pub use remote::{RemoteBackend, RemoteConfig};
pub use replay::{
    instruction_digest, load_replay, ReplayBackend, ReplayRecord, ReplayWriter, REPLAY_VERSION,
};
pub use scripted::{load_script, save_script, ScriptedBackend, ScriptedPolicy};

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("backend transport failed after {attempts} attempt(s): {detail}")]
    Exhausted { attempts: u32, detail: String },
    #[error("script invalid: {0}")]
    Script(String),
    #[error("backend configuration invalid: {0}")]
    Config(String),
    #[error("replay mismatch at step {step}: {detail}")]
    ReplayMismatch { step: u32, detail: String },
    #[error("empty instruction")]
    EmptyInstruction,
    #[error("i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

/// One reasoning-step request. Step indices are strictly increasing within
/// an episode.
pub struct PlannerRequest<'a> {
    pub prompt: &'a PromptBundle,
    pub step: u32,
    pub episode_id: &'a str,
}

/// Raw decision text plus bookkeeping. The text is parsed downstream by
/// `reasoning::parse_action`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerResponse {
    pub raw: String,
    pub latency: f64,
    pub backend_id: String,
}

/// The decision brain interface the navigation loop drives.
pub trait PlannerBackend {
    fn id(&self) -> &str;

    /// One decision per reasoning step.
    fn decide(&mut self, request: &PlannerRequest<'_>) -> Result<PlannerResponse, PlannerError>;

    /// Decomposes the instruction into the initial checklist.
    fn decompose_instruction(&mut self, instruction: &str) -> Result<TaskPlan, PlannerError>;
}

#[cfg(test)]
mod tests;
