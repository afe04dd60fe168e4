//! Replay log: ordered (request digest, response text) records that allow
//! re-executing an episode offline, bit-exactly, without the original
//! backend.
//!
//! The file is JSON lines; every record carries the format version. Decide
//! records store the backend's raw response text; decompose records store
//! the resulting plan as a JSON string array, so any backend's decomposition
//! replays identically.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::reasoning::TaskPlan;

use super::{PlannerBackend, PlannerError, PlannerRequest, PlannerResponse};

pub const REPLAY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub v: u32,
    pub episode: String,
    pub step: u32,
    /// `decide` or `decompose`.
    pub kind: String,
    /// Content digest of the request (prompt digest, or instruction hash for
    /// decomposition).
    pub digest: String,
    pub response: String,
}

pub fn instruction_digest(instruction: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(instruction.as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Appends records to a replay file as they happen.
pub struct ReplayWriter {
    out: std::io::BufWriter<std::fs::File>,
}

impl ReplayWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, PlannerError> {
        let file = std::fs::File::create(path)?;
        Ok(Self {
            out: std::io::BufWriter::new(file),
        })
    }

    pub fn append(&mut self, record: &ReplayRecord) -> Result<(), PlannerError> {
        let line = serde_json::to_string(record)
            .map_err(|e| PlannerError::Config(format!("replay record serialization: {e}")))?;
        writeln!(self.out, "{line}")?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn load_replay(path: impl AsRef<Path>) -> Result<Vec<ReplayRecord>, PlannerError> {
    let file = std::fs::File::open(path)?;
    let mut records = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ReplayRecord = serde_json::from_str(&line)
            .map_err(|e| PlannerError::Config(format!("replay line {}: {e}", i + 1)))?;
        if record.v != REPLAY_VERSION {
            return Err(PlannerError::Config(format!(
                "replay line {}: unsupported version {}",
                i + 1,
                record.v
            )));
        }
        records.push(record);
    }
    Ok(records)
}

/// Serves logged responses back in order, verifying that each request
/// matches the recorded digest so drift cannot go unnoticed.
pub struct ReplayBackend {
    records: Vec<ReplayRecord>,
    cursor: usize,
    source_backend: String,
}

impl ReplayBackend {
    pub fn from_file(path: impl AsRef<Path>, source_backend: &str) -> Result<Self, PlannerError> {
        Ok(Self {
            records: load_replay(path)?,
            cursor: 0,
            source_backend: format!("replay:{source_backend}"),
        })
    }

    pub fn from_records(records: Vec<ReplayRecord>, source_backend: &str) -> Self {
        Self {
            records,
            cursor: 0,
            source_backend: format!("replay:{source_backend}"),
        }
    }

    fn next_record(
        &mut self,
        kind: &str,
        step: u32,
        digest: &str,
        episode: Option<&str>,
    ) -> Result<String, PlannerError> {
        let record = self
            .records
            .get(self.cursor)
            .ok_or_else(|| PlannerError::ReplayMismatch {
                step,
                detail: "replay log exhausted".into(),
            })?;
        if record.kind != kind
            || record.step != step
            || episode.is_some_and(|e| record.episode != e)
        {
            return Err(PlannerError::ReplayMismatch {
                step,
                detail: format!(
                    "expected {kind}@{step} for '{}', log has {}@{} for '{}'",
                    episode.unwrap_or("<any>"),
                    record.kind,
                    record.step,
                    record.episode
                ),
            });
        }
        if record.digest != digest {
            return Err(PlannerError::ReplayMismatch {
                step,
                detail: "request digest differs from the logged run".into(),
            });
        }
        self.cursor += 1;
        Ok(record.response.clone())
    }
}

impl PlannerBackend for ReplayBackend {
    fn id(&self) -> &str {
        &self.source_backend
    }

    fn decide(&mut self, request: &PlannerRequest<'_>) -> Result<PlannerResponse, PlannerError> {
        let digest = request.prompt.digest();
        let raw = self.next_record("decide", request.step, &digest, Some(request.episode_id))?;
        Ok(PlannerResponse {
            raw,
            latency: 0.0,
            backend_id: self.source_backend.clone(),
        })
    }

    fn decompose_instruction(&mut self, instruction: &str) -> Result<TaskPlan, PlannerError> {
        if instruction.is_empty() {
            return Err(PlannerError::EmptyInstruction);
        }
        let digest = instruction_digest(instruction);
        let raw = self.next_record("decompose", 0, &digest, None)?;
        let plan: Vec<String> = serde_json::from_str(&raw)
            .map_err(|e| PlannerError::Config(format!("replayed plan malformed: {e}")))?;
        Ok(TaskPlan::from_texts(plan))
    }
}
