//! Topological memory: spatial node clustering with visit counts, traversal
//! edges, loop detection, and the vertical-awareness status that feeds the
//! prompt state block.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Alert injected into the prompt when the current node's visit count
/// exceeds the loop threshold.
pub const LOOP_ALERT: &str = "CRITICAL: Potential Loop Detected";

#[derive(Debug, Error)]
pub enum TopoError {
    #[error("graph text malformed at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("graph i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Clustering and alert thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryConfig {
    /// Poses closer than this to an existing node merge into it (meters).
    pub delta_merge: f64,
    /// Visit counts strictly above this trigger the loop alert.
    pub tau_loop: u32,
    /// Height change beyond this reports upstairs/downstairs (meters).
    pub delta_h: f64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            delta_merge: 0.8,
            tau_loop: 3,
            delta_h: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopoNode {
    pub id: u32,
    /// Anchor position, frozen at creation.
    pub position: (f64, f64),
    pub visit_count: u32,
    /// Height at creation time.
    pub floor_height: f64,
}

/// Node/edge abstraction of visited space. Single writer: only the
/// navigation loop mutates it; summaries are pure reads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TopoGraph {
    nodes: Vec<TopoNode>,
    edges: BTreeSet<(u32, u32)>,
    current: Option<u32>,
    height_now: f64,
    height_prev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerticalStatus {
    Level,
    Upstairs,
    Downstairs,
}

impl fmt::Display for VerticalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerticalStatus::Level => write!(f, "Level"),
            VerticalStatus::Upstairs => write!(f, "Upstairs"),
            VerticalStatus::Downstairs => write!(f, "Downstairs"),
        }
    }
}

impl TopoGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &[TopoNode] {
        &self.nodes
    }

    pub fn node(&self, id: u32) -> Option<&TopoNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn current_node(&self) -> Option<&TopoNode> {
        self.current.and_then(|id| self.node(id))
    }

    /// Undirected edge set, stored with the smaller id first.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbor_count(&self, id: u32) -> usize {
        self.edges
            .iter()
            .filter(|(a, b)| *a == id || *b == id)
            .count()
    }

    pub fn heights(&self) -> (f64, f64) {
        (self.height_now, self.height_prev)
    }
}

/// Clusters a new pose into the graph. Poses within `delta_merge` of an
/// existing node merge into it; the visit count increments only when
/// arriving from a different node, so rotating in place cannot trigger the
/// loop alert. Returns the current node id and whether it was just created.
pub fn observe_pose(
    graph: &mut TopoGraph,
    pose: (f64, f64, f64),
    config: &MemoryConfig,
) -> (u32, bool) {
    let (x, y, height) = pose;
    graph.height_prev = if graph.nodes.is_empty() {
        height
    } else {
        graph.height_now
    };
    graph.height_now = height;

    let nearest = graph
        .nodes
        .iter()
        .map(|n| {
            let d = ((n.position.0 - x).powi(2) + (n.position.1 - y).powi(2)).sqrt();
            (n.id, d)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let previous = graph.current;
    let (id, created) = match nearest {
        Some((nid, d)) if d < config.delta_merge => {
            if previous != Some(nid) {
                let node = graph
                    .nodes
                    .iter_mut()
                    .find(|n| n.id == nid)
                    .expect("id from scan");
                node.visit_count += 1;
            }
            (nid, false)
        }
        _ => {
            let id = graph.nodes.iter().map(|n| n.id + 1).max().unwrap_or(0);
            graph.nodes.push(TopoNode {
                id,
                position: (x, y),
                visit_count: 1,
                floor_height: height,
            });
            (id, true)
        }
    };

    if let Some(prev) = previous {
        if prev != id {
            graph.edges.insert((prev.min(id), prev.max(id)));
        }
    }
    graph.current = Some(id);
    (id, created)
}

/// Loop check on the current node: fires strictly above the threshold.
pub fn detect_loop(graph: &TopoGraph, config: &MemoryConfig) -> Option<&'static str> {
    let node = graph.current_node()?;
    (node.visit_count > config.tau_loop).then_some(LOOP_ALERT)
}

/// Classifies a height change against the vertical-awareness threshold.
pub fn vertical_status(height_now: f64, height_ref: f64, config: &MemoryConfig) -> VerticalStatus {
    let dh = height_now - height_ref;
    if dh > config.delta_h {
        VerticalStatus::Upstairs
    } else if dh < -config.delta_h {
        VerticalStatus::Downstairs
    } else {
        VerticalStatus::Level
    }
}

/// Deterministic text block describing the agent's situation in the graph;
/// byte-identical for identical graphs.
pub fn state_summary(graph: &TopoGraph, config: &MemoryConfig) -> String {
    let mut out = String::new();
    match graph.current_node() {
        Some(node) => {
            out.push_str(&format!("node: {}\n", node.id));
            out.push_str(&format!("visits: {}\n", node.visit_count));
            out.push_str(&format!("neighbors: {}\n", graph.neighbor_count(node.id)));
        }
        None => out.push_str("node: none\nvisits: 0\nneighbors: 0\n"),
    }
    let (now, prev) = graph.heights();
    out.push_str(&format!(
        "vertical: {}\n",
        vertical_status(now, prev, config)
    ));
    match detect_loop(graph, config) {
        Some(alert) => out.push_str(&format!("alert: {alert}\n")),
        None => out.push_str("alert: none\n"),
    }
    out
}

/// Serializes the graph to the line-oriented replay format.
pub fn export_text(graph: &TopoGraph) -> String {
    let mut out = String::from("topo v1\n");
    for n in &graph.nodes {
        out.push_str(&format!(
            "node {} {} {} {} {}\n",
            n.id, n.position.0, n.position.1, n.floor_height, n.visit_count
        ));
    }
    for (a, b) in &graph.edges {
        out.push_str(&format!("edge {a} {b}\n"));
    }
    if let Some(c) = graph.current {
        out.push_str(&format!("current {c}\n"));
    }
    out.push_str(&format!(
        "height {} {}\n",
        graph.height_now, graph.height_prev
    ));
    out
}

pub fn import_text(text: &str) -> Result<TopoGraph, TopoError> {
    let mut lines = text.lines().enumerate();
    let err = |line: usize, reason: &str| TopoError::Parse {
        line: line + 1,
        reason: reason.into(),
    };
    match lines.next() {
        Some((_, "topo v1")) => {}
        Some((i, other)) => {
            return Err(err(i, &format!("expected header 'topo v1', got '{other}'")))
        }
        None => return Err(err(0, "empty input")),
    }
    let mut graph = TopoGraph::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let kind = parts.next().unwrap();
        let fields: Vec<&str> = parts.collect();
        match kind {
            "node" => {
                if fields.len() != 5 {
                    return Err(err(i, "node needs: id x y height count"));
                }
                let parse_f = |s: &str| s.parse::<f64>().map_err(|e| err(i, &e.to_string()));
                let id = fields[0]
                    .parse::<u32>()
                    .map_err(|e| err(i, &e.to_string()))?;
                graph.nodes.push(TopoNode {
                    id,
                    position: (parse_f(fields[1])?, parse_f(fields[2])?),
                    floor_height: parse_f(fields[3])?,
                    visit_count: fields[4].parse().map_err(|_| err(i, "bad count"))?,
                });
            }
            "edge" => {
                if fields.len() != 2 {
                    return Err(err(i, "edge needs: a b"));
                }
                let a: u32 = fields[0].parse().map_err(|_| err(i, "bad edge id"))?;
                let b: u32 = fields[1].parse().map_err(|_| err(i, "bad edge id"))?;
                if graph.node(a).is_none() || graph.node(b).is_none() {
                    return Err(err(i, "edge references missing node"));
                }
                graph.edges.insert((a.min(b), a.max(b)));
            }
            "current" => {
                let c: u32 = fields[0].parse().map_err(|_| err(i, "bad current id"))?;
                if graph.node(c).is_none() {
                    return Err(err(i, "current references missing node"));
                }
                graph.current = Some(c);
            }
            "height" => {
                if fields.len() != 2 {
                    return Err(err(i, "height needs: now prev"));
                }
                graph.height_now = fields[0].parse().map_err(|_| err(i, "bad height"))?;
                graph.height_prev = fields[1].parse().map_err(|_| err(i, "bad height"))?;
            }
            other => return Err(err(i, &format!("unknown record '{other}'"))),
        }
    }
    Ok(graph)
}
