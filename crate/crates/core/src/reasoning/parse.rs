//! Defensive parsing of planner responses.
//!
//! Responses follow a documented JSON schema but may arrive wrapped in prose
//! or code fences; the parser locates the outermost JSON object by brace
//! matching (string- and escape-aware) and validates every field. It is
//! total: any byte input yields either an action or an error, never a panic.

use serde::Deserialize;

use super::{ActionKind, ReasoningError, SpatialAction, TaskPlan, ViewId};

/// Documented response schema.
#[derive(Debug, Deserialize)]
struct RawResponse {
    #[serde(default)]
    thought: Option<String>,
    #[serde(default)]
    todo: Option<Vec<RawTodo>>,
    action: RawAction,
}

#[derive(Debug, Deserialize)]
struct RawTodo {
    text: String,
    #[serde(default)]
    done: bool,
}

#[derive(Debug, Deserialize)]
struct RawAction {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    view: Option<String>,
    #[serde(default)]
    u: Option<i64>,
    #[serde(default)]
    v: Option<i64>,
}

/// Extracts the first balanced top-level JSON object from arbitrary text.
fn extract_object(text: &str) -> Option<&str> {
    let bytes = text.as_bytes();
    let start = bytes.iter().position(|&b| b == b'{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Parses a planner response into a [`SpatialAction`], validating view ids
/// and coordinate ranges. Surrounding prose is tolerated.
pub fn parse_action(response: &str) -> Result<SpatialAction, ReasoningError> {
    let object = extract_object(response)
        .ok_or_else(|| ReasoningError::Parse("no JSON object in response".into()))?;
    let raw: RawResponse =
        serde_json::from_str(object).map_err(|e| ReasoningError::Parse(e.to_string()))?;

    let kind = match raw.action.kind.as_str() {
        "stop" => ActionKind::Stop,
        "waypoint" => {
            let view_str =
                raw.action.view.as_deref().ok_or_else(|| {
                    ReasoningError::Validation("waypoint action needs a view".into())
                })?;
            let view = ViewId::parse(view_str).ok_or_else(|| {
                ReasoningError::Validation(format!("unknown view id '{view_str}'"))
            })?;
            let u = raw
                .action
                .u
                .ok_or_else(|| ReasoningError::Validation("waypoint action needs u".into()))?;
            let v = raw
                .action
                .v
                .ok_or_else(|| ReasoningError::Validation("waypoint action needs v".into()))?;
            if !(0..=1000).contains(&u) || !(0..=1000).contains(&v) {
                return Err(ReasoningError::Validation(format!(
                    "coordinates ({u}, {v}) outside [0, 1000]"
                )));
            }
            ActionKind::Waypoint {
                view,
                u: u as u32,
                v: v as u32,
            }
        }
        other => {
            return Err(ReasoningError::Validation(format!(
                "unknown action type '{other}'"
            )))
        }
    };

    Ok(SpatialAction {
        kind,
        thought: raw.thought.unwrap_or_default(),
        updated_plan: raw
            .todo
            .map(|items| TaskPlan::new(items.into_iter().map(|t| (t.text, t.done)).collect())),
    })
}
