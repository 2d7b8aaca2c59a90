//! Property checkers over simulated executions and sequential specs.

pub mod commute;
pub mod consensus;
pub mod linearize;
pub mod valency;
pub mod waitfree;

pub use commute::{classify_pair, commutes, is_read_only_at, pair_sweep, PairClass, SweepConfig, SweepReport};
pub use consensus::{check_consensus, evaluate_run, Clause, ConsensusOutcome};
pub use linearize::{check_linearizable, find_linearization, LinOptions, LinResult, DEFAULT_MAX_OPS};
pub use valency::{classify_valency, Valence, ValencyMap, ValencyOptions, DEFAULT_MAX_CONFIGS};
pub use waitfree::{check_waitfree, WaitFreeOutcome};

use thiserror::Error;

use crate::objects::ObjectError;
use crate::sim::{History, HistoryError, Schedule, SimError};

/// How the schedule space of a world is covered.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExploreMode {
    Exhaustive,
    Sampled { count: usize, seed: u64 },
    Explicit(Schedule),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub schedules_explored: usize,
    pub configurations: usize,
}

/// Outcome of a check. A failing verdict always carries a replayable
/// witness: a schedule, a history, or both.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub check: &'static str,
    pub pass: bool,
    /// The violated clause.
    pub clause: Option<String>,
    pub witness_schedule: Option<Schedule>,
    pub witness_history: Option<History>,
    pub stats: Stats,
}

impl Verdict {
    pub fn pass(check: &'static str, stats: Stats) -> Self {
        Self { check, pass: true, clause: None, witness_schedule: None, witness_history: None, stats }
    }

    pub fn fail(check: &'static str, clause: String, stats: Stats) -> Self {
        Self { check, pass: false, clause: Some(clause), witness_schedule: None, witness_history: None, stats }
    }

    pub fn with_schedule(mut self, s: Schedule) -> Self {
        self.witness_schedule = Some(s);
        self
    }

    pub fn with_history(mut self, h: History) -> Self {
        self.witness_history = Some(h);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum VerifyError {
    #[error("resource cap exceeded: more than {cap} {what}")]
    Resource { what: &'static str, cap: usize },
    #[error(transparent)]
    Sim(SimError),
    #[error(transparent)]
    Object(#[from] ObjectError),
    #[error("malformed history: {0}")]
    History(#[from] HistoryError),
}

impl From<SimError> for VerifyError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Resource { what, cap } => VerifyError::Resource { what, cap },
            other => VerifyError::Sim(other),
        }
    }
}

impl VerifyError {
    pub fn is_resource(&self) -> bool {
        matches!(self, VerifyError::Resource { .. })
    }
}
