//! The two constructions as simulator programs.
//!
//! [`consensus`] builds a consensus protocol among the `k` enabled spenders
//! of a token account in a synchronization state. [`restricted`] implements
//! a token whose approvals stay within `k` spenders per account on top of a
//! k-shared asset-transfer object and one register per (account, process).

pub mod consensus;
pub mod restricted;

pub use consensus::ConsensusScenario;
pub use restricted::{failed_underlying_transfers, RestrictedTokenInstance, Variant};

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::objects::{ObjectError, ProcessId};
use crate::sim::SimError;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum AlgorithmError {
    #[error("witness account a{account} is not in S_k: {reason}")]
    NotSyncState { account: usize, reason: String },
    #[error("allowance {allowance} of {spender} exceeds the witness balance {balance}")]
    AllowanceExceedsBalance { spender: ProcessId, allowance: u64, balance: u64 },
    #[error("consensus needs a destination account distinct from the witness")]
    NoDestination,
    #[error("{0} is not an enabled spender of the witness account")]
    NotParticipant(ProcessId),
    #[error("no proposal for participant {0}")]
    MissingProposal(ProcessId),
    #[error("invocation `{0}` is not a token operation")]
    NotTokenOp(&'static str),
    #[error(transparent)]
    Object(#[from] ObjectError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
