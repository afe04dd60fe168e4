//! Run-level report: machine-readable JSON plus a human summary table.
//! Episodes are ordered by id, so identical runs serialize to identical
//! bytes.

use serde::{Deserialize, Serialize};

use crate::Real;

use super::{EpisodeResult, EvalError, FailureCode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: u32,
    pub backend_id: String,
    /// Digest of the run configuration that produced this report.
    pub config_digest: String,
    pub episodes: Vec<EpisodeResult>,
    pub aggregates: Aggregates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    /// Success rate over episodes, in [0, 1].
    pub sr: Real,
    pub osr: Real,
    pub spl: Real,
    pub ndtw: Real,
    pub ne: Real,
    pub tl: Real,
    pub episodes: usize,
}

impl RunReport {
    /// Builds the report; episodes are sorted by id for deterministic bytes.
    pub fn new(backend_id: &str, config_digest: &str, mut episodes: Vec<EpisodeResult>) -> Self {
        episodes.sort_by(|a, b| a.episode_id.cmp(&b.episode_id));
        let n = episodes.len().max(1) as Real;
        let mean = |f: &dyn Fn(&EpisodeResult) -> Real| -> Real {
            episodes.iter().map(|e| f(e)).sum::<Real>() / n
        };
        let aggregates = Aggregates {
            sr: mean(&|e| if e.success { 1.0 } else { 0.0 }),
            osr: mean(&|e| if e.osr { 1.0 } else { 0.0 }),
            spl: mean(&|e| e.spl),
            ndtw: mean(&|e| e.ndtw),
            ne: mean(&|e| e.ne),
            tl: mean(&|e| e.tl),
            episodes: episodes.len(),
        };
        Self {
            version: 1,
            backend_id: backend_id.to_string(),
            config_digest: config_digest.to_string(),
            episodes,
            aggregates,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        serde_json::from_str(text).map_err(|e| EvalError::Config(format!("report malformed: {e}")))
    }
}

/// Fixed-width human summary.
pub fn render_table(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "backend: {}  episodes: {}  config: {}\n",
        report.backend_id,
        report.aggregates.episodes,
        &report.config_digest[..report.config_digest.len().min(12)],
    ));
    out.push_str(&format!(
        "{:<16} {:>4} {:>4} {:>7} {:>7} {:>7} {:>7} {:>5}  {}\n",
        "episode", "SR", "OSR", "NE", "TL", "SPL", "nDTW", "steps", "failure"
    ));
    for e in &report.episodes {
        out.push_str(&format!(
            "{:<16} {:>4} {:>4} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>5}  {}\n",
            e.episode_id,
            if e.success { 1 } else { 0 },
            if e.osr { 1 } else { 0 },
            e.ne,
            e.tl,
            e.spl,
            e.ndtw,
            e.steps,
            e.failure_code,
        ));
    }
    let a = &report.aggregates;
    out.push_str(&format!(
        "{:<16} {:>4.2} {:>4.2} {:>7.3} {:>7.3} {:>7.3} {:>7.3}\n",
        "mean", a.sr, a.osr, a.ne, a.tl, a.spl, a.ndtw
    ));
    out
}

impl EpisodeResult {
    pub fn failure_is(&self, code: FailureCode) -> bool {
        self.failure_code == code
    }
}
