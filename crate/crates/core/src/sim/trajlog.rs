//! Trajectory log: line-oriented text, one record per micro-step, consumed
//! by the evaluation harness and the `score` / `render-map` commands.
//!
//! Format:
//! ```text
//! traj v1
//! <step> <t> <x> <y> <theta>
//! ```
//! `step` is the reasoning-step index the micro-step belongs to; floats use
//! Rust's shortest round-trip formatting, so parse(write(log)) is exact.

use crate::{AgentStated, Real};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajRecord {
    pub step: u32,
    pub t: f64,
    pub x: Real,
    pub y: Real,
    pub theta: Real,
}

impl TrajRecord {
    pub fn state(&self) -> AgentStated {
        AgentStated::new(self.x, self.y, self.theta)
    }
}

pub fn write_trajectory(records: &[TrajRecord]) -> String {
    let mut out = String::from("traj v1\n");
    for r in records {
        out.push_str(&format!("{} {} {} {} {}\n", r.step, r.t, r.x, r.y, r.theta));
    }
    out
}

pub fn parse_trajectory(text: &str) -> Result<Vec<TrajRecord>, SimError> {
    let err = |line: usize, detail: String| SimError::Parse {
        path: format!("<trajectory line {}>", line + 1),
        detail,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "traj v1")) => {}
        Some((i, other)) => return Err(err(i, format!("expected 'traj v1', got '{other}'"))),
        None => return Err(err(0, "empty trajectory".into())),
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(i, format!("expected 5 fields, got {}", fields.len())));
        }
        records.push(TrajRecord {
            step: fields[0]
                .parse()
                .map_err(|e| err(i, format!("bad step: {e}")))?,
            t: fields[1]
                .parse()
                .map_err(|e| err(i, format!("bad t: {e}")))?,
            x: fields[2]
                .parse()
                .map_err(|e| err(i, format!("bad x: {e}")))?,
            y: fields[3]
                .parse()
                .map_err(|e| err(i, format!("bad y: {e}")))?,
            theta: fields[4]
                .parse()
                .map_err(|e| err(i, format!("bad theta: {e}")))?,
        });
    }
    Ok(records)
}
