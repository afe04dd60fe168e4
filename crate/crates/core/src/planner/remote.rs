//! Remote planner client.
//!
//! One HTTP POST per reasoning step; no streaming. The request body is JSON:
//!
//! ```json
//! {
//!   "protocol": "desknav/1",
//!   "episode": "ep01", "step": 3, "kind": "decide",
//!   "text": "<serialized prompt>",
//!   "images": [{"name": "bev", "png_base64": "..."}, ...]
//! }
//! ```
//!
//! The service answers `{"text": "<raw response>"}`. Decomposition requests
//! use `kind: "decompose"` with the instruction as `text` and no images.

use std::time::{Duration, Instant};

use base64::Engine;
use serde::Deserialize;
use serde_json::json;

use crate::reasoning::{parse_action, TaskPlan};

use super::{PlannerBackend, PlannerError, PlannerRequest, PlannerResponse};

/// Endpoint, auth, timeout, and retry policy. Values from a config file can
/// be overridden by `DESKNAV_ENDPOINT`, `DESKNAV_AUTH_TOKEN`, and
/// `DESKNAV_TIMEOUT_S`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    #[serde(default)]
    pub auth_token: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_base_s: f64,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    2
}

fn default_backoff() -> f64 {
    0.5
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            auth_token: None,
            timeout_s: default_timeout(),
            max_retries: default_retries(),
            backoff_base_s: default_backoff(),
        }
    }

    pub fn apply_env_overrides(&mut self) {
        if let Ok(v) = std::env::var("DESKNAV_ENDPOINT") {
            self.endpoint = v;
        }
        if let Ok(v) = std::env::var("DESKNAV_AUTH_TOKEN") {
            self.auth_token = Some(v);
        }
        if let Ok(v) = std::env::var("DESKNAV_TIMEOUT_S") {
            if let Ok(t) = v.parse() {
                self.timeout_s = t;
            }
        }
    }
}

#[derive(Debug, Deserialize)]
struct ServiceReply {
    text: String,
}

pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, PlannerError> {
        if config.endpoint.is_empty() {
            return Err(PlannerError::Config("remote endpoint must be set".into()));
        }
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs_f64(config.timeout_s))
            .build();
        Ok(Self { config, agent })
    }

    /// Sends one request with the configured retry budget and exponential
    /// backoff; returns the service's raw text.
    fn call(&self, body: serde_json::Value) -> Result<String, PlannerError> {
        let attempts = self.config.max_retries + 1;
        let mut last_err = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = self.config.backoff_base_s * 2f64.powi(attempt as i32 - 1);
                std::thread::sleep(Duration::from_secs_f64(backoff));
            }
            let mut request = self.agent.post(&self.config.endpoint);
            if let Some(token) = &self.config.auth_token {
                request = request.set("authorization", &format!("Bearer {token}"));
            }
            match request.send_json(body.clone()) {
                Ok(response) => match response.into_json::<ServiceReply>() {
                    Ok(reply) if !reply.text.is_empty() => return Ok(reply.text),
                    Ok(_) => last_err = "service returned empty text".into(),
                    Err(e) => last_err = format!("malformed service reply: {e}"),
                },
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(PlannerError::Exhausted {
            attempts,
            detail: last_err,
        })
    }
}

impl PlannerBackend for RemoteBackend {
    fn id(&self) -> &str {
        "remote"
    }

    fn decide(&mut self, request: &PlannerRequest<'_>) -> Result<PlannerResponse, PlannerError> {
        let engine = base64::engine::general_purpose::STANDARD;
        let images: Vec<serde_json::Value> = request
            .prompt
            .image_attachments()
            .into_iter()
            .map(|(name, bytes)| json!({"name": name, "png_base64": engine.encode(bytes)}))
            .collect();
        let body = json!({
            "protocol": "desknav/1",
            "episode": request.episode_id,
            "step": request.step,
            "kind": "decide",
            "text": request.prompt.serialize_text(),
            "images": images,
        });
        let started = Instant::now();
        let raw = self.call(body)?;
        Ok(PlannerResponse {
            raw,
            latency: started.elapsed().as_secs_f64(),
            backend_id: self.id().to_string(),
        })
    }

    fn decompose_instruction(&mut self, instruction: &str) -> Result<TaskPlan, PlannerError> {
        if instruction.is_empty() {
            return Err(PlannerError::EmptyInstruction);
        }
        let body = json!({
            "protocol": "desknav/1",
            "episode": "",
            "step": 0,
            "kind": "decompose",
            "text": instruction,
            "images": [],
        });
        let raw = self.call(body)?;
        // The decomposition reply uses the same response schema; its checklist
        // becomes the initial plan.
        match parse_action(&raw) {
            Ok(action) => match action.updated_plan {
                Some(plan) if !plan.is_empty() => Ok(plan),
                _ => Ok(TaskPlan::from_texts([instruction.to_string()])),
            },
            Err(_) => Ok(TaskPlan::from_texts([instruction.to_string()])),
        }
    }
}
