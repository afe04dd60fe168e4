//! The bridge between the metric world state and a language planner: selects
//! orthogonal views, overlays coordinate grids, assembles the multimodal
//! prompt, parses structured actions, and grounds pixel actions to metric
//! waypoints.

use thiserror::Error;

mod annotate;
mod ground;
mod parse;
mod prompt;
mod views;

pub use annotate::annotate_grid;
pub use ground::{ground_action, GroundedWaypoint};
pub use parse::parse_action;
pub use prompt::{assemble_prompt, PromptBundle, PROMPT_FORMAT_VERSION};
pub use views::select_orthogonal_views;

use crate::tsdf::RgbdFrame;
use crate::Real;

/// Alert text injected when the controller reported a failed action.
pub const ALERT_ACTION_FAILED: &str = "WARNING: Previous action failed";
/// Alert text injected when a grounded waypoint had to be clamped to d_max.
pub const ALERT_HORIZON: &str = "WARNING: Waypoint beyond planning horizon; clamped to d_max";
/// Alert text injected after an unparseable or invalid planner response.
pub const ALERT_INVALID_RESPONSE: &str =
    "WARNING: Previous response was invalid; answer strictly in the documented schema";
/// Alert text injected when a pixel action grounded into unknown space.
pub const ALERT_GROUNDING: &str =
    "WARNING: Selected pixel hit unknown space; choose an observed location";

#[derive(Debug, Error)]
pub enum ReasoningError {
    #[error("no response object found: {0}")]
    Parse(String),
    #[error("response violates the action schema: {0}")]
    Validation(String),
    #[error("no frame within {delta_s} m covers the {direction_deg} degree view")]
    Coverage { delta_s: Real, direction_deg: i32 },
    #[error("action does not ground to observed space: {0}")]
    Grounding(String),
}

/// View identifiers a planner can select: the top-down map or one of the
/// four egocentric views ordered front, right, back, left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewId {
    Bev,
    Ego(u8),
}

impl ViewId {
    pub fn parse(s: &str) -> Option<ViewId> {
        match s {
            "bev" => Some(ViewId::Bev),
            "ego_0" => Some(ViewId::Ego(0)),
            "ego_1" => Some(ViewId::Ego(1)),
            "ego_2" => Some(ViewId::Ego(2)),
            "ego_3" => Some(ViewId::Ego(3)),
            _ => None,
        }
    }
}

impl std::fmt::Display for ViewId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ViewId::Bev => write!(f, "bev"),
            ViewId::Ego(i) => write!(f, "ego_{i}"),
        }
    }
}

/// Ordered checklist decomposed from the instruction; the planner may update
/// it every step, but completed items stay completed and are never deleted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaskPlan {
    items: Vec<(String, bool)>,
}

impl TaskPlan {
    pub fn new(items: Vec<(String, bool)>) -> Self {
        Self { items }
    }

    pub fn from_texts<I: IntoIterator<Item = String>>(texts: I) -> Self {
        Self {
            items: texts.into_iter().map(|t| (t, false)).collect(),
        }
    }

    pub fn items(&self) -> &[(String, bool)] {
        &self.items
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Applies a planner update under checklist semantics: retained items keep
    /// their order, done flags never revert, completed items missing from the
    /// update are preserved, and new items are appended in update order.
    pub fn merged(&self, update: &TaskPlan) -> TaskPlan {
        let mut items: Vec<(String, bool)> = Vec::new();
        for (text, was_done) in &self.items {
            match update.items.iter().find(|(t, _)| t == text) {
                Some((_, now_done)) => items.push((text.clone(), *was_done || *now_done)),
                None if *was_done => items.push((text.clone(), true)),
                None => {}
            }
        }
        for (text, done) in &update.items {
            if !items.iter().any(|(t, _)| t == text) {
                items.push((text.clone(), *done));
            }
        }
        TaskPlan { items }
    }

    /// Renders the checklist block; one `[x]`/`[ ]` line per item.
    pub fn render(&self) -> String {
        if self.items.is_empty() {
            return "(no plan)\n".to_string();
        }
        let mut out = String::new();
        for (text, done) in &self.items {
            out.push_str(if *done { "[x] " } else { "[ ] " });
            out.push_str(text);
            out.push('\n');
        }
        out
    }
}

/// One executed reasoning step remembered for the prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub step: u32,
    pub thought: String,
    pub view: Option<ViewId>,
    /// Short action descriptor, e.g. `waypoint (512,730)` or `stop`.
    pub action: String,
    /// Whether execution succeeded.
    pub ok: bool,
}

/// Sliding-window execution log; rendering exposes at most `window` most
/// recent entries.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryLog {
    entries: Vec<HistoryEntry>,
    window: usize,
}

impl Default for HistoryLog {
    fn default() -> Self {
        Self::new(5)
    }
}

impl HistoryLog {
    pub fn new(window: usize) -> Self {
        Self {
            entries: Vec::new(),
            window,
        }
    }

    pub fn push(&mut self, entry: HistoryEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn last(&self) -> Option<&HistoryEntry> {
        self.entries.last()
    }

    /// Renders the most recent `window` entries, oldest first.
    pub fn render(&self) -> String {
        if self.entries.is_empty() {
            return "(no history)\n".to_string();
        }
        let start = self.entries.len().saturating_sub(self.window);
        let mut out = String::new();
        for e in &self.entries[start..] {
            let view = e.view.map_or_else(|| "-".to_string(), |v| v.to_string());
            let ok = if e.ok { "ok" } else { "failed" };
            out.push_str(&format!(
                "step {} | view {} | {} | {} | {}\n",
                e.step, view, e.action, ok, e.thought
            ));
        }
        out
    }
}

/// Parsed planner decision.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialAction {
    pub kind: ActionKind,
    pub thought: String,
    /// Updated checklist, when the response carried one.
    pub updated_plan: Option<TaskPlan>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionKind {
    /// Navigate toward the pixel `(u, v)` of `view`, normalized to [0, 1000].
    Waypoint {
        view: ViewId,
        u: u32,
        v: u32,
    },
    Stop,
}

impl SpatialAction {
    pub fn describe(&self) -> String {
        match self.kind {
            ActionKind::Waypoint { view, u, v } => format!("waypoint {view} ({u},{v})"),
            ActionKind::Stop => "stop".to_string(),
        }
    }
}

/// A grid-annotated egocentric view together with its source frame, kept for
/// grounding the planner's pixel selections.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoView {
    pub id: ViewId,
    /// Annotated RGB pixels, same dimensions as the source frame.
    pub pixels: Vec<u8>,
    pub source: RgbdFrame<Real>,
}

/// Spatial-proximity threshold for view selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewSelectConfig {
    pub delta_s: Real,
}

impl Default for ViewSelectConfig {
    fn default() -> Self {
        Self { delta_s: 0.5 }
    }
}
