//! Linearizability checking by depth-first search over linearization
//! orders, memoized on (set of linearized operations, object state).
//!
//! Completed operations must all be linearized with matching responses.
//! A pending operation may be linearized at any point after its invocation,
//! with any response, or left out.

use std::collections::HashSet;

use crate::objects::SharedObject;
use crate::sim::{History, Operation};

use super::VerifyError;

pub const DEFAULT_MAX_OPS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinOptions {
    pub max_ops: usize,
}

impl Default for LinOptions {
    fn default() -> Self {
        Self { max_ops: DEFAULT_MAX_OPS }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinResult {
    pub linearizable: bool,
    /// A valid order of operation indices when linearizable.
    pub order: Option<Vec<usize>>,
    /// Length in events of the shortest non-linearizable prefix.
    pub failing_prefix: Option<usize>,
    pub operations: usize,
    /// Search nodes expanded on the full history.
    pub explored: usize,
}

struct Search<'a> {
    ops: &'a [Operation],
    completed: u64,
    failed: HashSet<(u64, SharedObject)>,
    order: Vec<usize>,
    explored: usize,
}

impl Search<'_> {
    fn dfs(&mut self, done: u64, obj: &SharedObject) -> Result<bool, VerifyError> {
        if done & self.completed == self.completed {
            return Ok(true);
        }
        if self.failed.contains(&(done, obj.clone())) {
            return Ok(false);
        }
        self.explored += 1;
        // an operation is minimal if it was invoked before every pending
        // completed operation responded
        let horizon = (0..self.ops.len())
            .filter(|&i| done & (1 << i) == 0)
            .filter_map(|i| self.ops[i].responded_at)
            .min()
            .unwrap_or(usize::MAX);
        for i in 0..self.ops.len() {
            let op = &self.ops[i];
            if done & (1 << i) != 0 || op.invoked_at > horizon {
                continue;
            }
            let (next, r) = obj.apply(op.process, &op.invocation)?;
            if op.response.is_some_and(|want| want != r) {
                continue;
            }
            self.order.push(i);
            if self.dfs(done | (1 << i), &next)? {
                return Ok(true);
            }
            self.order.pop();
        }
        self.failed.insert((done, obj.clone()));
        Ok(false)
    }
}

/// A linearization order of `ops` (indices into `ops`), if one exists.
pub fn find_linearization(ops: &[Operation], initial: &SharedObject) -> Result<(Option<Vec<usize>>, usize), VerifyError> {
    if ops.len() > 64 {
        return Err(VerifyError::Resource { what: "operations", cap: 64 });
    }
    let completed = (0..ops.len()).filter(|&i| ops[i].response.is_some()).fold(0u64, |m, i| m | (1 << i));
    let mut s = Search { ops, completed, failed: HashSet::new(), order: Vec::new(), explored: 0 };
    let ok = s.dfs(0, initial)?;
    Ok((ok.then_some(s.order), s.explored))
}

/// Checks `history` (a single-object history) against the sequential
/// object `initial`. On failure also reports the shortest failing prefix.
pub fn check_linearizable(history: &History, initial: &SharedObject, opts: LinOptions) -> Result<LinResult, VerifyError> {
    let ops = history.operations()?;
    if ops.len() > opts.max_ops {
        return Err(VerifyError::Resource { what: "operations", cap: opts.max_ops });
    }
    let (order, explored) = find_linearization(&ops, initial)?;
    let mut result = LinResult {
        linearizable: order.is_some(),
        order,
        failing_prefix: None,
        operations: ops.len(),
        explored,
    };
    if !result.linearizable {
        for len in 1..=history.len() {
            let prefix = history.prefix(len).operations()?;
            if find_linearization(&prefix, initial)?.0.is_none() {
                result.failing_prefix = Some(len);
                break;
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objects::{AccountId, Invocation, ProcessId, RegisterState, TokenState, Value};
    use crate::sim::{EventKind, ObjectId};

    fn push(h: &mut History, p: usize, kind: EventKind) {
        h.push(ProcessId(p), ObjectId(0), kind);
    }

    fn inv(h: &mut History, p: usize, i: Invocation) {
        push(h, p, EventKind::Invoke(i));
    }

    fn res(h: &mut History, p: usize, v: Value) {
        push(h, p, EventKind::Response(v));
    }

    fn token(balances: Vec<u64>) -> SharedObject {
        SharedObject::Token(TokenState::with_balances(balances).unwrap())
    }

    fn history() -> History {
        History::new(vec!["T".to_string()].into())
    }

    #[test]
    fn stale_read_after_completed_transfer_fails() {
        let mut h = history();
        inv(&mut h, 0, Invocation::Transfer { to: AccountId(1), value: 5 });
        res(&mut h, 0, Value::Bool(true));
        inv(&mut h, 1, Invocation::BalanceOf { account: AccountId(0) });
        res(&mut h, 1, Value::Nat(5));
        let r = check_linearizable(&h, &token(vec![5, 0]), LinOptions::default()).unwrap();
        assert!(!r.linearizable);
        assert_eq!(r.failing_prefix, Some(4));
    }

    #[test]
    fn overlapping_read_may_precede() {
        let mut h = history();
        inv(&mut h, 1, Invocation::BalanceOf { account: AccountId(0) });
        inv(&mut h, 0, Invocation::Transfer { to: AccountId(1), value: 5 });
        res(&mut h, 0, Value::Bool(true));
        res(&mut h, 1, Value::Nat(5));
        let r = check_linearizable(&h, &token(vec![5, 0]), LinOptions::default()).unwrap();
        assert!(r.linearizable);
        assert_eq!(r.order, Some(vec![0, 1]));
    }

    #[test]
    fn contending_transfer_froms() {
        let mut s = TokenState::with_balances(vec![5, 0, 0]).unwrap();
        s.set_allowance(AccountId(0), ProcessId(1), 5);
        s.set_allowance(AccountId(0), ProcessId(2), 5);
        let tf = Invocation::TransferFrom { from: AccountId(0), to: AccountId(1), value: 5 };
        let mut h = history();
        inv(&mut h, 1, tf.clone());
        inv(&mut h, 2, tf.clone());
        res(&mut h, 2, Value::Bool(false));
        res(&mut h, 1, Value::Bool(true));
        let obj = SharedObject::Token(s.clone());
        assert!(check_linearizable(&h, &obj, LinOptions::default()).unwrap().linearizable);

        let mut h = history();
        inv(&mut h, 1, tf.clone());
        inv(&mut h, 2, tf);
        res(&mut h, 2, Value::Bool(true));
        res(&mut h, 1, Value::Bool(true));
        assert!(!check_linearizable(&h, &obj, LinOptions::default()).unwrap().linearizable);
    }

    #[test]
    fn pending_operations_may_take_effect_or_not() {
        let reg = SharedObject::Register(RegisterState::default());
        let mut h = history();
        inv(&mut h, 0, Invocation::Write { value: Value::Nat(1) });
        inv(&mut h, 1, Invocation::Read);
        res(&mut h, 1, Value::Nat(1));
        assert!(check_linearizable(&h, &reg, LinOptions::default()).unwrap().linearizable);
        let mut h = history();
        inv(&mut h, 0, Invocation::Write { value: Value::Nat(1) });
        inv(&mut h, 1, Invocation::Read);
        res(&mut h, 1, Value::Bottom);
        assert!(check_linearizable(&h, &reg, LinOptions::default()).unwrap().linearizable);
    }

    #[test]
    fn operation_bound_is_a_resource_error() {
        let reg = SharedObject::Register(RegisterState::default());
        let mut h = history();
        for _ in 0..3 {
            inv(&mut h, 0, Invocation::Read);
            res(&mut h, 0, Value::Bottom);
        }
        let err = check_linearizable(&h, &reg, LinOptions { max_ops: 2 }).unwrap_err();
        assert!(err.is_resource());
    }
}
