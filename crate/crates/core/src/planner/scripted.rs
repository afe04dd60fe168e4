//! Scripted oracle backend: replays authored responses verbatim.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::reasoning::TaskPlan;

use super::{PlannerBackend, PlannerError, PlannerRequest, PlannerResponse};

const SCRIPT_VERSION: u32 = 1;

/// Deterministic response schedule: verbatim text per trigger step, a
/// terminal stop response for every step past the last trigger, and the
/// fixture task plan returned by decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedPolicy {
    pub plan: Vec<String>,
    steps: BTreeMap<u32, String>,
    pub stop_response: String,
}

impl ScriptedPolicy {
    pub fn new(
        plan: Vec<String>,
        steps: Vec<(u32, String)>,
        stop_response: String,
    ) -> Result<Self, PlannerError> {
        let mut map = BTreeMap::new();
        for (step, response) in steps {
            if response.is_empty() {
                return Err(PlannerError::Script(format!(
                    "step {step} has an empty response"
                )));
            }
            if map.insert(step, response).is_some() {
                return Err(PlannerError::Script(format!(
                    "duplicate trigger step {step}"
                )));
            }
        }
        if stop_response.is_empty() {
            return Err(PlannerError::Script(
                "stop_response must be nonempty".into(),
            ));
        }
        Ok(Self {
            plan,
            steps: map,
            stop_response,
        })
    }

    pub fn response_for(&self, step: u32) -> &str {
        self.steps
            .get(&step)
            .map_or(&self.stop_response, |s| s.as_str())
    }

    pub fn steps(&self) -> impl Iterator<Item = (u32, &str)> {
        self.steps.iter().map(|(k, v)| (*k, v.as_str()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScriptFile {
    version: u32,
    #[serde(default)]
    plan: Vec<String>,
    stop_response: String,
    #[serde(default)]
    steps: Vec<ScriptStep>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScriptStep {
    step: u32,
    response: String,
}

pub fn load_script(path: impl AsRef<Path>) -> Result<ScriptedPolicy, PlannerError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let raw: ScriptFile = toml::from_str(&text)
        .map_err(|e| PlannerError::Script(format!("{}: {e}", path.display())))?;
    if raw.version != SCRIPT_VERSION {
        return Err(PlannerError::Script(format!(
            "unsupported script version {}",
            raw.version
        )));
    }
    ScriptedPolicy::new(
        raw.plan,
        raw.steps
            .into_iter()
            .map(|s| (s.step, s.response))
            .collect(),
        raw.stop_response,
    )
}

pub fn save_script(policy: &ScriptedPolicy, path: impl AsRef<Path>) -> Result<(), PlannerError> {
    let raw = ScriptFile {
        version: SCRIPT_VERSION,
        plan: policy.plan.clone(),
        stop_response: policy.stop_response.clone(),
        steps: policy
            .steps()
            .map(|(step, response)| ScriptStep {
                step,
                response: response.to_string(),
            })
            .collect(),
    };
    let text = toml::to_string_pretty(&raw).map_err(|e| PlannerError::Script(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub struct ScriptedBackend {
    policy: ScriptedPolicy,
}

impl ScriptedBackend {
    pub fn new(policy: ScriptedPolicy) -> Self {
        Self { policy }
    }
}

impl PlannerBackend for ScriptedBackend {
    fn id(&self) -> &str {
        "scripted"
    }

    fn decide(&mut self, request: &PlannerRequest<'_>) -> Result<PlannerResponse, PlannerError> {
        Ok(PlannerResponse {
            raw: self.policy.response_for(request.step).to_string(),
            latency: 0.0,
            backend_id: self.id().to_string(),
        })
    }

    fn decompose_instruction(&mut self, instruction: &str) -> Result<TaskPlan, PlannerError> {
        if instruction.is_empty() {
            return Err(PlannerError::EmptyInstruction);
        }
        if self.policy.plan.is_empty() {
            return Ok(TaskPlan::from_texts([instruction.to_string()]));
        }
        Ok(TaskPlan::from_texts(self.policy.plan.clone()))
    }
}
