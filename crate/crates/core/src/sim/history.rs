use std::sync::Arc;

use thiserror::Error;

use crate::objects::{Invocation, ProcessId, Value};

use super::ObjectId;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Invoke(Invocation),
    Response(Value),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub process: ProcessId,
    pub object: ObjectId,
    pub kind: EventKind,
}

/// A completed or pending operation extracted from a history.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Operation {
    pub process: ProcessId,
    pub object: ObjectId,
    pub invocation: Invocation,
    pub response: Option<Value>,
    pub invoked_at: usize,
    pub responded_at: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum HistoryError {
    #[error("event {pos}: process {process} invoked while an operation is pending")]
    OverlappingInvocation { pos: usize, process: usize },
    #[error("event {pos}: response from process {process} without a pending invocation")]
    UnmatchedResponse { pos: usize, process: usize },
    #[error("event {pos}: response on object {got} but the pending invocation targets {expected}")]
    WrongObject { pos: usize, expected: usize, got: usize },
}

/// An ordered sequence of invocation and response events, with object names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct History {
    pub object_names: Arc<[String]>,
    pub events: Vec<Event>,
}

impl History {
    pub fn new(object_names: Arc<[String]>) -> Self {
        Self { object_names, events: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn push(&mut self, process: ProcessId, object: ObjectId, kind: EventKind) {
        self.events.push(Event { process, object, kind });
    }

    pub fn object_name(&self, id: ObjectId) -> &str {
        self.object_names.get(id.0).map(String::as_str).unwrap_or("?")
    }

    /// The first `len` events.
    pub fn prefix(&self, len: usize) -> History {
        History { object_names: self.object_names.clone(), events: self.events[..len.min(self.len())].to_vec() }
    }

    /// Checks per-process alternation and pairs events into operations,
    /// ordered by invocation.
    pub fn operations(&self) -> Result<Vec<Operation>, HistoryError> {
        let mut ops: Vec<Operation> = Vec::new();
        let mut pending: Vec<(ProcessId, usize)> = Vec::new();
        for (pos, e) in self.events.iter().enumerate() {
            let slot = pending.iter().position(|(p, _)| *p == e.process);
            match &e.kind {
                EventKind::Invoke(inv) => {
                    if slot.is_some() {
                        return Err(HistoryError::OverlappingInvocation { pos, process: e.process.0 });
                    }
                    pending.push((e.process, ops.len()));
                    ops.push(Operation {
                        process: e.process,
                        object: e.object,
                        invocation: inv.clone(),
                        response: None,
                        invoked_at: pos,
                        responded_at: None,
                    });
                }
                EventKind::Response(v) => {
                    let Some(slot) = slot else {
                        return Err(HistoryError::UnmatchedResponse { pos, process: e.process.0 });
                    };
                    let (_, idx) = pending.swap_remove(slot);
                    let op = &mut ops[idx];
                    if op.object != e.object {
                        return Err(HistoryError::WrongObject { pos, expected: op.object.0, got: e.object.0 });
                    }
                    op.response = Some(*v);
                    op.responded_at = Some(pos);
                }
            }
        }
        Ok(ops)
    }

    pub fn is_well_formed(&self) -> bool {
        self.operations().is_ok()
    }
}
