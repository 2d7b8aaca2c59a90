//! Sequential specifications of the shared base objects.
//!
//! Every object is a deterministic transition function over an explicit
//! state value: `apply(state, caller, invocation) -> (state', response)`.
//! Failed domain operations (response `false`) return the input state
//! untouched; malformed invocations are reported as [`ObjectError`], which
//! is distinct from a domain-level `false`.
//!
//! Accounts and processes are dense indices. Their human-readable names
//! live in a [`Roster`], which is only consulted at the I/O boundary.

mod asset;
mod consensus;
mod register;
mod restricted;
mod token;

pub use asset::{AssetState, OwnerSet};
pub use consensus::ConsensusState;
pub use register::RegisterState;
pub use restricted::RestrictedToken;
pub use token::TokenState;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on accounts/processes; owner sets are stored as bitmasks.
pub const MAX_PARTIES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AccountId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProcessId(pub usize);

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// A response, a register content, or a program-local value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    /// The distinguished unset value.
    #[default]
    Bottom,
    Bool(bool),
    Nat(u64),
}

impl Value {
    pub fn as_nat(self) -> Option<u64> {
        match self {
            Value::Nat(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn to_json(self) -> serde_json::Value {
        match self {
            Value::Bottom => serde_json::Value::Null,
            Value::Bool(b) => serde_json::Value::Bool(b),
            Value::Nat(n) => serde_json::Value::from(n),
        }
    }

    pub fn from_json(v: &serde_json::Value) -> Option<Value> {
        match v {
            serde_json::Value::Null => Some(Value::Bottom),
            serde_json::Value::Bool(b) => Some(Value::Bool(*b)),
            serde_json::Value::Number(n) => n.as_u64().map(Value::Nat),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bottom => f.write_str("⊥"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Nat(n) => write!(f, "{n}"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = serde_json::Value::deserialize(d)?;
        Value::from_json(&raw)
            .ok_or_else(|| serde::de::Error::custom("expected null, a boolean or a non-negative integer"))
    }
}

/// An operation invocation on one of the base objects.
///
/// Token methods follow the ERC20 object: `transfer` moves tokens out of the
/// caller's own account. Asset-transfer `transfer` names its source
/// explicitly and is a distinct variant.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Invocation {
    Transfer { to: AccountId, value: u64 },
    TransferFrom { from: AccountId, to: AccountId, value: u64 },
    Approve { spender: ProcessId, value: u64 },
    BalanceOf { account: AccountId },
    Allowance { account: AccountId, spender: ProcessId },
    TotalSupply,
    AssetTransfer { from: AccountId, to: AccountId, value: u64 },
    /// Owner-map reconfiguration of an asset-transfer object.
    SetOwners { account: AccountId, owners: OwnerSet },
    Read,
    Write { value: Value },
    Propose { value: u64 },
}

impl Invocation {
    pub fn method(&self) -> &'static str {
        match self {
            Invocation::Transfer { .. } | Invocation::AssetTransfer { .. } => "transfer",
            Invocation::TransferFrom { .. } => "transferFrom",
            Invocation::Approve { .. } => "approve",
            Invocation::BalanceOf { .. } => "balanceOf",
            Invocation::Allowance { .. } => "allowance",
            Invocation::TotalSupply => "totalSupply",
            Invocation::SetOwners { .. } => "setOwners",
            Invocation::Read => "read",
            Invocation::Write { .. } => "write",
            Invocation::Propose { .. } => "propose",
        }
    }

    /// True for methods that can never change the object state.
    pub fn is_intrinsic_read(&self) -> bool {
        matches!(
            self,
            Invocation::BalanceOf { .. }
                | Invocation::Allowance { .. }
                | Invocation::TotalSupply
                | Invocation::Read
        )
    }

    /// Replaces the numeric payload (the transferred/approved/written value).
    /// Used by programs whose arguments are computed at run time.
    pub fn with_value(&self, v: Value) -> Option<Invocation> {
        let mut out = self.clone();
        match &mut out {
            Invocation::Transfer { value, .. }
            | Invocation::TransferFrom { value, .. }
            | Invocation::Approve { value, .. }
            | Invocation::AssetTransfer { value, .. }
            | Invocation::Propose { value } => *value = v.as_nat()?,
            Invocation::Write { value } => *value = v,
            _ => return None,
        }
        Some(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ObjectError {
    #[error("unknown account index {0}")]
    UnknownAccount(usize),
    #[error("unknown process index {0}")]
    UnknownProcess(usize),
    #[error("method `{method}` is not supported by {object} objects")]
    UnsupportedMethod { object: &'static str, method: &'static str },
    #[error("process {0} already proposed to this consensus object")]
    RepeatedPropose(usize),
    #[error("owner set of size {size} exceeds the sharing bound {k}")]
    SharingBound { size: usize, k: usize },
    #[error("total supply overflows 64-bit token units")]
    SupplyOverflow,
    #[error("state dimensions do not match: {0}")]
    Shape(String),
}

/// Names for accounts and processes. For token objects account `i` is owned
/// by process `i`, so one name list per side suffices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Roster {
    pub accounts: Vec<String>,
    pub processes: Vec<String>,
}

impl Roster {
    pub fn new(accounts: Vec<String>, processes: Vec<String>) -> Self {
        Self { accounts, processes }
    }

    /// `a_A, a_B, …` owned by `A, B, …`.
    pub fn lettered(n: usize) -> Self {
        let processes: Vec<String> =
            (0..n).map(|i| ((b'A' + (i % 26) as u8) as char).to_string()).collect();
        let accounts = processes.iter().map(|p| format!("a_{p}")).collect();
        Self { accounts, processes }
    }

    pub fn account(&self, name: &str) -> Option<AccountId> {
        self.accounts.iter().position(|a| a == name).map(AccountId)
    }

    pub fn process(&self, name: &str) -> Option<ProcessId> {
        self.processes.iter().position(|p| p == name).map(ProcessId)
    }

    pub fn account_name(&self, a: AccountId) -> &str {
        self.accounts.get(a.0).map(String::as_str).unwrap_or("?")
    }

    pub fn process_name(&self, p: ProcessId) -> &str {
        self.processes.get(p.0).map(String::as_str).unwrap_or("?")
    }
}

/// Any base object the simulator can host, and any sequential specification
/// the linearizability checker can replay.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SharedObject {
    Register(RegisterState),
    Token(TokenState),
    Asset(AssetState),
    Consensus(ConsensusState),
    Restricted(RestrictedToken),
}

impl SharedObject {
    pub fn kind(&self) -> &'static str {
        match self {
            SharedObject::Register(_) => "register",
            SharedObject::Token(_) => "token",
            SharedObject::Asset(_) => "asset-transfer",
            SharedObject::Consensus(_) => "consensus",
            SharedObject::Restricted(_) => "restricted-token",
        }
    }

    pub fn apply(&self, caller: ProcessId, op: &Invocation) -> Result<(SharedObject, Value), ObjectError> {
        Ok(match self {
            SharedObject::Register(s) => {
                let (s, r) = s.apply(op)?;
                (SharedObject::Register(s), r)
            }
            SharedObject::Token(s) => {
                let (s, r) = s.apply(caller, op)?;
                (SharedObject::Token(s), r)
            }
            SharedObject::Asset(s) => {
                let (s, r) = s.apply(caller, op)?;
                (SharedObject::Asset(s), r)
            }
            SharedObject::Consensus(s) => {
                let (s, r) = s.apply(caller, op)?;
                (SharedObject::Consensus(s), r)
            }
            SharedObject::Restricted(s) => {
                let (s, r) = s.apply(caller, op)?;
                (SharedObject::Restricted(s), r)
            }
        })
    }
}
