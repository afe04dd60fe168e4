//! Prompt assembly and its canonical serialization.
//!
//! The text layout is fixed and versioned; identical inputs serialize to
//! identical bytes, which the replay machinery relies on. Blocks appear in
//! the order: task plan, state (with alerts), history, instruction.

use sha2::{Digest, Sha256};

use crate::draw::encode_png;
use crate::tsdf::BevImage;
use crate::{AgentStated, Real};

use super::{annotate_grid, EgoView, HistoryLog, TaskPlan, ViewId};

pub const PROMPT_FORMAT_VERSION: &str = "prompt v1";

/// Everything the planner sees for one reasoning step: the annotated
/// top-down map, four grid-annotated egocentric views, and the ordered text
/// blocks.
#[derive(Debug, Clone)]
pub struct PromptBundle {
    pub bev: BevImage,
    /// Exactly four views: front, right, back, left.
    pub ego_views: Vec<EgoView>,
    pub plan: TaskPlan,
    /// Topological/physical state block including the alert lines.
    pub state_block: String,
    pub history_block: String,
    pub instruction: String,
    /// Agent state at prompt time.
    pub agent: AgentStated,
}

impl PromptBundle {
    /// Canonical byte-exact text form.
    pub fn serialize_text(&self) -> String {
        let mut out = String::new();
        out.push_str(PROMPT_FORMAT_VERSION);
        out.push('\n');
        out.push_str("== TASK PLAN ==\n");
        out.push_str(&self.plan.render());
        out.push_str("== STATE ==\n");
        out.push_str(&self.state_block);
        out.push_str("== HISTORY ==\n");
        out.push_str(&self.history_block);
        out.push_str("== INSTRUCTION ==\n");
        out.push_str(&self.instruction);
        out.push('\n');
        out
    }

    /// Named PNG attachments: the map first, then the four ego views.
    pub fn image_attachments(&self) -> Vec<(String, Vec<u8>)> {
        let mut out = vec![("bev".to_string(), self.bev.to_png_bytes())];
        for view in &self.ego_views {
            out.push((
                view.id.to_string(),
                encode_png(&view.pixels, view.source.width, view.source.height),
            ));
        }
        out
    }

    /// Content digest over text and image bytes; keys replay records.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.serialize_text().as_bytes());
        for (name, bytes) in self.image_attachments() {
            hasher.update(name.as_bytes());
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(&bytes);
        }
        hex_string(&hasher.finalize())
    }

    pub fn ego_view(&self, id: ViewId) -> Option<&EgoView> {
        self.ego_views.iter().find(|v| v.id == id)
    }

    /// State block minus the runtime `alerts:` line; used when re-prompting
    /// with an updated alert set.
    pub fn state_block_without_alerts(&self) -> String {
        self.state_block
            .lines()
            .filter(|l| !l.starts_with("alerts:"))
            .map(|l| format!("{l}\n"))
            .collect()
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Builds the prompt bundle from the step's artifacts. `topo_summary` is the
/// graph state block; `alerts` are this step's runtime safety alerts,
/// rendered inside the state block (an explicit `alerts: none` line when
/// empty). History is truncated to its sliding window by `render`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_prompt(
    bev: BevImage,
    ego_frames: [crate::tsdf::RgbdFrame<Real>; 4],
    plan: &TaskPlan,
    topo_summary: &str,
    history: &HistoryLog,
    instruction: &str,
    alerts: &[String],
    agent: &AgentStated,
) -> PromptBundle {
    let ego_views = ego_frames
        .into_iter()
        .enumerate()
        .map(|(i, frame)| EgoView {
            id: ViewId::Ego(i as u8),
            pixels: annotate_grid(&frame.color, frame.width, frame.height),
            source: frame,
        })
        .collect();

    let mut state_block = String::from(topo_summary);
    if !state_block.ends_with('\n') && !state_block.is_empty() {
        state_block.push('\n');
    }
    if alerts.is_empty() {
        state_block.push_str("alerts: none\n");
    } else {
        state_block.push_str(&format!("alerts: {}\n", alerts.join("; ")));
    }

    PromptBundle {
        bev,
        ego_views,
        plan: plan.clone(),
        state_block,
        history_block: history.render(),
        instruction: instruction.to_string(),
        agent: *agent,
    }
}
