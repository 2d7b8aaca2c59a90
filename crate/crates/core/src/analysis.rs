//! Synchronization-level analysis of token states.
//!
//! Computes enabled spenders, the `Q_k` class of a state, the unique-transfer
//! predicate, the synchronization levels a state witnesses, and single-step
//! escalation witnesses (an owner `approve` that lifts a state from `Q_k`
//! to `Q_{k+1}`).

use serde::Serialize;
use thiserror::Error;

use crate::objects::{AccountId, Invocation, OwnerSet, ProcessId, TokenState};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("unknown account index {0}")]
    UnknownAccount(usize),
    #[error("account {account} has {spenders} enabled spenders but the state is in Q_{k}")]
    NotMaximal { account: usize, spenders: usize, k: usize },
    #[error("account {0} has zero balance")]
    ZeroBalance(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpenderSet {
    pub account: AccountId,
    pub spenders: OwnerSet,
}

/// A `(level, witness)` pair: `witness` has exactly `level` enabled spenders
/// and satisfies the unique-transfer predicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct SyncLevel {
    pub level: usize,
    pub witness: AccountId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyncClassification {
    pub k: usize,
    pub sync_levels: Vec<SyncLevel>,
}

/// A proposed escalation step: `caller` invokes `op` on the token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Escalation {
    pub caller: ProcessId,
    pub op: Invocation,
}

fn check(state: &TokenState, a: AccountId) -> Result<(), AnalysisError> {
    if a.0 < state.accounts() {
        Ok(())
    } else {
        Err(AnalysisError::UnknownAccount(a.0))
    }
}

fn spender_mask(state: &TokenState, a: AccountId) -> OwnerSet {
    let owner = OwnerSet::singleton(state.owner(a));
    if state.balance(a) == 0 {
        return owner;
    }
    let bits = state
        .allowance_row(a)
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0)
        .fold(owner.bits(), |m, (p, _)| m | (1 << p));
    OwnerSet::from_bits(bits)
}

/// σ(a): the owner plus every positive-allowance process, or just the owner
/// when the balance is zero.
pub fn enabled_spenders(state: &TokenState, a: AccountId) -> Result<SpenderSet, AnalysisError> {
    check(state, a)?;
    Ok(SpenderSet { account: a, spenders: spender_mask(state, a) })
}

/// The unique `k` with the state in `Q_k`: the largest enabled-spender set.
pub fn class_k(state: &TokenState) -> usize {
    (0..state.accounts()).map(|a| spender_mask(state, AccountId(a)).len()).max().unwrap_or(0)
}

pub fn unique_transfer(state: &TokenState, a: AccountId) -> Result<bool, AnalysisError> {
    check(state, a)?;
    let balance = state.balance(a);
    if balance == 0 {
        return Ok(false);
    }
    let sigma = spender_mask(state, a);
    if sigma.len() <= 2 {
        return Ok(true);
    }
    let owner = state.owner(a);
    let others: Vec<u64> = sigma.iter().filter(|&p| p != owner).map(|p| state.allowance(a, p)).collect();
    // Every pair sums above the balance iff the two smallest do.
    let mut sorted = others;
    sorted.sort_unstable();
    Ok(sorted.len() < 2 || sorted[0] as u128 + sorted[1] as u128 > balance as u128)
}

pub fn sync_levels(state: &TokenState) -> SyncClassification {
    let mut sync_levels = Vec::new();
    for a in (0..state.accounts()).map(AccountId) {
        // both calls are infallible for in-range accounts
        if unique_transfer(state, a) == Ok(true) {
            sync_levels.push(SyncLevel { level: spender_mask(state, a).len(), witness: a });
        }
    }
    sync_levels.sort();
    SyncClassification { k: class_k(state), sync_levels }
}

/// An owner `approve` that raises the state's class from `k` to `k + 1` by
/// enabling the smallest-index process not yet enabled on `a`.
///
/// Requires `a` to be a maximal account (`|σ(a)| = class_k`) with positive
/// balance. Returns `None` when every process already spends from `a`.
pub fn escalation_witness(state: &TokenState, a: AccountId) -> Result<Option<Escalation>, AnalysisError> {
    check(state, a)?;
    let sigma = spender_mask(state, a);
    let k = class_k(state);
    if sigma.len() != k {
        return Err(AnalysisError::NotMaximal { account: a.0, spenders: sigma.len(), k });
    }
    if state.balance(a) == 0 {
        return Err(AnalysisError::ZeroBalance(a.0));
    }
    let target = (0..state.accounts()).map(ProcessId).find(|p| !sigma.contains(*p));
    Ok(target.map(|spender| Escalation {
        caller: state.owner(a),
        op: Invocation::Approve { spender, value: 1 },
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objects::Value;

    fn q2() -> TokenState {
        let mut s = TokenState::with_balances(vec![7, 3, 0]).unwrap();
        s.set_allowance(AccountId(1), ProcessId(2), 5);
        s
    }

    fn three_spenders(a2: u64, a3: u64) -> TokenState {
        let mut s = TokenState::with_balances(vec![10, 0, 0]).unwrap();
        s.set_allowance(AccountId(0), ProcessId(1), a2);
        s.set_allowance(AccountId(0), ProcessId(2), a3);
        s
    }

    fn set(ps: &[usize]) -> OwnerSet {
        ps.iter().map(|&p| ProcessId(p)).collect()
    }

    #[test]
    fn spenders_of_example_state() {
        assert_eq!(enabled_spenders(&q2(), AccountId(1)).unwrap().spenders, set(&[1, 2]));
    }

    #[test]
    fn zero_balance_means_owner_only() {
        let mut s = TokenState::with_balances(vec![0, 4]).unwrap();
        s.set_allowance(AccountId(0), ProcessId(1), 5);
        assert_eq!(enabled_spenders(&s, AccountId(0)).unwrap().spenders, set(&[0]));
        assert!(!unique_transfer(&s, AccountId(0)).unwrap());
    }

    #[test]
    fn no_allowances_means_owner_only() {
        let s = TokenState::with_balances(vec![10, 0, 0]).unwrap();
        assert_eq!(enabled_spenders(&s, AccountId(0)).unwrap().spenders, set(&[0]));
        assert_eq!(class_k(&s), 1);
    }

    #[test]
    fn classes() {
        assert_eq!(class_k(&q2()), 2);
        assert_eq!(class_k(&three_spenders(6, 6)), 3);
    }

    #[test]
    fn unique_transfer_cases() {
        assert!(unique_transfer(&q2(), AccountId(1)).unwrap());
        assert!(!unique_transfer(&three_spenders(3, 4), AccountId(0)).unwrap());
        assert!(unique_transfer(&three_spenders(6, 6), AccountId(0)).unwrap());
    }

    #[test]
    fn sync_levels_of_example_state() {
        let c = sync_levels(&q2());
        assert_eq!(c.k, 2);
        // a_A has balance 7 and no spenders besides its owner: level 1
        assert_eq!(
            c.sync_levels,
            vec![
                SyncLevel { level: 1, witness: AccountId(0) },
                SyncLevel { level: 2, witness: AccountId(1) }
            ]
        );
    }

    #[test]
    fn no_level_three_witness_without_unique_transfer() {
        let c = sync_levels(&three_spenders(3, 4));
        assert_eq!(c.k, 3);
        assert!(!c.sync_levels.iter().any(|l| l.level == 3));
    }

    #[test]
    fn escalation_from_example_state() {
        let e = escalation_witness(&q2(), AccountId(1)).unwrap().unwrap();
        assert_eq!(e.caller, ProcessId(1));
        assert_eq!(e.op, Invocation::Approve { spender: ProcessId(0), value: 1 });
        let (next, r) = q2().apply(e.caller, &e.op).unwrap();
        assert_eq!(r, Value::Bool(true));
        assert_eq!(class_k(&next), 3);
    }

    #[test]
    fn escalation_from_initial_state() {
        let q0 = TokenState::with_balances(vec![10, 0, 0]).unwrap();
        let e = escalation_witness(&q0, AccountId(0)).unwrap().unwrap();
        assert_eq!(e.caller, ProcessId(0));
        assert_eq!(e.op, Invocation::Approve { spender: ProcessId(1), value: 1 });
        assert_eq!(class_k(&q0.apply(e.caller, &e.op).unwrap().0), 2);
    }

    #[test]
    fn escalation_saturated() {
        assert_eq!(escalation_witness(&three_spenders(6, 6), AccountId(0)).unwrap(), None);
    }

    #[test]
    fn escalation_preconditions() {
        assert!(matches!(escalation_witness(&q2(), AccountId(2)), Err(AnalysisError::NotMaximal { .. })));
        let s = TokenState::with_balances(vec![0, 0]).unwrap();
        assert_eq!(escalation_witness(&s, AccountId(0)), Err(AnalysisError::ZeroBalance(0)));
        assert_eq!(enabled_spenders(&s, AccountId(5)), Err(AnalysisError::UnknownAccount(5)));
    }
}
