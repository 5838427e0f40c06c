//! Optional transition log used by the invariant suite.

use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::meta::BlockState;
use crate::graph::VertexId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionEvent {
    pub t_ns: u64,
    pub block: u32,
    pub from: BlockState,
    pub to: BlockState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexEventKind {
    /// Part of the frontier a round started with.
    Seeded,
    Activated,
    Processed,
}

/// Vertex-level record of a synchronous round. `seq` is a global total order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexEvent {
    pub seq: u64,
    pub round: u64,
    pub vertex: VertexId,
    pub kind: VertexEventKind,
}

#[derive(Debug)]
pub struct EventLog {
    start: Instant,
    seq: AtomicU64,
    transitions: Mutex<Vec<TransitionEvent>>,
    vertices: Mutex<Vec<VertexEvent>>,
}

impl Default for EventLog {
    fn default() -> Self {
        EventLog {
            start: Instant::now(),
            seq: AtomicU64::new(0),
            transitions: Mutex::new(Vec::new()),
            vertices: Mutex::new(Vec::new()),
        }
    }
}

impl EventLog {
    /// Must be called while holding the block's meta lock so the per-block
    /// order in the log matches the real order.
    pub(crate) fn transition(&self, block: u32, from: BlockState, to: BlockState) {
        let t_ns = self.start.elapsed().as_nanos() as u64;
        self.transitions
            .lock()
            .unwrap()
            .push(TransitionEvent { t_ns, block, from, to });
    }

    pub(crate) fn vertex(&self, round: u64, vertex: VertexId, kind: VertexEventKind) {
        let mut v = self.vertices.lock().unwrap();
        let seq = self.seq.fetch_add(1, Ordering::Relaxed);
        v.push(VertexEvent { seq, round, vertex, kind });
    }

    pub fn transitions(&self) -> Vec<TransitionEvent> {
        self.transitions.lock().unwrap().clone()
    }

    pub fn vertex_events(&self) -> Vec<VertexEvent> {
        self.vertices.lock().unwrap().clone()
    }

    /// Transitions whose edge is not in the state machine, or whose `from`
    /// does not match the block's previous `to`.
    pub fn illegal_transitions(&self) -> Vec<TransitionEvent> {
        let log = self.transitions.lock().unwrap();
        let mut last = std::collections::HashMap::new();
        let mut bad = Vec::new();
        for e in log.iter() {
            let prev = last.insert(e.block, e.to).unwrap_or(BlockState::Inactive);
            if prev != e.from || !BlockState::is_legal(e.from, e.to) {
                bad.push(*e);
            }
        }
        bad
    }

    pub fn write_json_lines<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in self.transitions.lock().unwrap().iter() {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}
