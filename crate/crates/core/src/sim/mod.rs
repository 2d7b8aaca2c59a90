//! Deterministic interleaving simulator.
//!
//! Processes are [`ProcessProgram`]s over shared base objects. A [`World`]
//! executes exactly one atomic base-object operation per scheduler step and
//! records two histories: the base-object history (every atomic step) and
//! the high-level operation history delimited by the programs' `Begin`/`End`
//! markers. Crashes are permanent stops at step boundaries.

mod history;
mod program;
mod schedule;
mod world;

pub use history::{Event, EventKind, History, HistoryError, Operation};
pub use program::{ArithOp, Cmp, Instr, Label, Local, Operand, ProcessProgram, ProgramBuilder};
pub use schedule::{
    enumerate_schedules, next_events, sample_run, sample_schedule, CrashPoint, ExploreOptions, Explored, Schedule,
    ScheduleEnumerator, ScheduleEvent, DEFAULT_MAX_SCHEDULES,
};
pub use world::{Config, Counters, OpRecord, ProcState, Status, World};

use std::fmt;

use thiserror::Error;

use crate::objects::{ObjectError, ProcessId};

/// Index of a shared object inside a [`World`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inadmissible {
    Unknown,
    Crashed,
    Terminated,
    OutOfRange,
}

impl fmt::Display for Inadmissible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Inadmissible::Unknown => "is not part of this world",
            Inadmissible::Crashed => "has crashed",
            Inadmissible::Terminated => "has already returned",
            Inadmissible::OutOfRange => "crash point lies beyond the schedule",
        })
    }
}

fn fmt_position(p: &Option<usize>) -> String {
    p.map(|p| format!("schedule position {p}: ")).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SimError {
    #[error("{}process {process} {reason}", fmt_position(.position))]
    Inadmissible { position: Option<usize>, process: ProcessId, reason: Inadmissible },
    #[error("process {process} on object `{object}`: {source}")]
    Object { process: ProcessId, object: String, source: ObjectError },
    #[error("process {process} at pc {pc}: {reason}")]
    ProgramFault { process: ProcessId, pc: usize, reason: String },
    #[error("resource cap exceeded: more than {cap} {what}")]
    Resource { what: &'static str, cap: usize },
    #[error("program of process {0} has a loop without a declared step bound")]
    Unbounded(ProcessId),
    #[error("process {0} appears twice")]
    DuplicateProcess(ProcessId),
}

impl SimError {
    pub fn is_resource(&self) -> bool {
        matches!(self, SimError::Resource { .. })
    }
}
