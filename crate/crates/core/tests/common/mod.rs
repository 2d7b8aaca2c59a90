//! Independent oracles shared by the integration tests. Nothing here calls
//! into the analysis or verification code it is compared against.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use tokensync::objects::{AccountId, Invocation, ProcessId, SharedObject, TokenState, Value};
use tokensync::sim::{EventKind, History, ObjectId};

// ---------------------------------------------------------------------------
// spender analysis, evaluated straight from the definitions

/// Owner of account `a` is process `a`.
pub fn sigma(balances: &[u64], allowance: impl Fn(usize, usize) -> u64, a: usize) -> BTreeSet<usize> {
    let mut s = BTreeSet::from([a]);
    if balances[a] > 0 {
        s.extend((0..balances.len()).filter(|&p| allowance(a, p) > 0));
    }
    s
}

pub struct OracleState {
    pub balances: Vec<u64>,
    /// Row-major `[account][process]`.
    pub allowances: Vec<u64>,
}

impl OracleState {
    pub fn n(&self) -> usize {
        self.balances.len()
    }

    pub fn allowance(&self, a: usize, p: usize) -> u64 {
        self.allowances[a * self.n() + p]
    }

    pub fn sigma(&self, a: usize) -> BTreeSet<usize> {
        sigma(&self.balances, |a, p| self.allowance(a, p), a)
    }

    /// Every `k` whose class contains this state: some account has exactly
    /// `k` spenders and none has more.
    pub fn classes(&self) -> Vec<usize> {
        (1..=self.n())
            .filter(|&k| {
                let sizes: Vec<usize> = (0..self.n()).map(|a| self.sigma(a).len()).collect();
                sizes.iter().any(|&s| s == k) && sizes.iter().all(|&s| s <= k)
            })
            .collect()
    }

    pub fn unique_transfer(&self, a: usize) -> bool {
        let s = self.sigma(a);
        if self.balances[a] == 0 {
            return false;
        }
        if s.len() <= 2 {
            return true;
        }
        let others: Vec<usize> = s.iter().copied().filter(|&p| p != a).collect();
        for (i, &p) in others.iter().enumerate() {
            for &q in &others[i + 1..] {
                if self.allowance(a, p) + self.allowance(a, q) <= self.balances[a] {
                    return false;
                }
            }
        }
        true
    }

    pub fn sync_levels(&self) -> BTreeSet<(usize, usize)> {
        (0..self.n()).filter(|&a| self.unique_transfer(a)).map(|a| (self.sigma(a).len(), a)).collect()
    }

    pub fn to_token(&self) -> TokenState {
        TokenState::new(self.balances.clone(), self.allowances.clone()).unwrap()
    }
}

/// All states with `n` accounts, balances `0..=max_balance`, non-self
/// allowances `0..=max_allowance` and zero self-allowances.
pub fn oracle_states(n: usize, max_balance: u64, max_allowance: u64) -> Vec<OracleState> {
    let mut out = vec![OracleState { balances: vec![], allowances: vec![0; n * n] }];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..=max_balance).map(move |b| {
                    let mut balances = s.balances.clone();
                    balances.push(b);
                    OracleState { balances, allowances: s.allowances.clone() }
                })
            })
            .collect();
    }
    for a in 0..n {
        for p in (0..n).filter(|&p| p != a) {
            out = out
                .into_iter()
                .flat_map(|s| {
                    (0..=max_allowance).map(move |v| {
                        let mut allowances = s.allowances.clone();
                        allowances[a * n + p] = v;
                        OracleState { balances: s.balances.clone(), allowances }
                    })
                })
                .collect();
        }
    }
    out
}

// ---------------------------------------------------------------------------
// linearizability by trying every order

pub struct OracleOp {
    pub process: ProcessId,
    pub op: Invocation,
    pub response: Option<Value>,
    pub invoked: usize,
    pub responded: Option<usize>,
}

pub fn oracle_ops(h: &History) -> Vec<OracleOp> {
    let mut ops: Vec<OracleOp> = Vec::new();
    for (i, e) in h.events.iter().enumerate() {
        match &e.kind {
            EventKind::Invoke(op) => ops.push(OracleOp {
                process: e.process,
                op: op.clone(),
                response: None,
                invoked: i,
                responded: None,
            }),
            EventKind::Response(v) => {
                let o = ops.iter_mut().rev().find(|o| o.process == e.process).expect("response after invoke");
                o.response = Some(*v);
                o.responded = Some(i);
            }
        }
    }
    ops
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Tries every subset of pending operations and every order of the chosen
/// operations.
pub fn brute_force_linearizable(h: &History, initial: &SharedObject) -> bool {
    let ops = oracle_ops(h);
    let pending: Vec<usize> = (0..ops.len()).filter(|&i| ops[i].response.is_none()).collect();
    let done: Vec<usize> = (0..ops.len()).filter(|&i| ops[i].response.is_some()).collect();
    for mask in 0..(1u32 << pending.len()) {
        let mut chosen = done.clone();
        chosen.extend(pending.iter().enumerate().filter(|(b, _)| mask & (1 << b) != 0).map(|(_, &i)| i));
        'order: for order in permutations(&chosen) {
            for (x, &i) in order.iter().enumerate() {
                for &j in &order[x + 1..] {
                    if ops[j].responded.is_some_and(|r| r < ops[i].invoked) {
                        continue 'order;
                    }
                }
            }
            let mut obj = initial.clone();
            for &i in &order {
                let (next, r) = obj.apply(ops[i].process, &ops[i].op).unwrap();
                if ops[i].response.is_some_and(|want| want != r) {
                    continue 'order;
                }
                obj = next;
            }
            return true;
        }
    }
    false
}

// ---------------------------------------------------------------------------
// random token histories

pub fn random_token_op(rng: &mut impl Rng, n: usize) -> Invocation {
    let acct = |rng: &mut dyn rand::RngCore| AccountId(rng.random_range(0..n));
    match rng.random_range(0..5) {
        0 => Invocation::Transfer { to: acct(rng), value: rng.random_range(0..3) },
        1 => Invocation::TransferFrom { from: acct(rng), to: acct(rng), value: rng.random_range(0..3) },
        2 => Invocation::Approve { spender: ProcessId(rng.random_range(0..n)), value: rng.random_range(0..3) },
        3 => Invocation::BalanceOf { account: acct(rng) },
        _ => Invocation::TotalSupply,
    }
}

/// A well-formed concurrent history of at most `max_events` events on a
/// token object. Responses are what some sequential run would return,
/// occasionally replaced by a plausible wrong value.
pub fn random_token_history(rng: &mut impl Rng, initial: &TokenState, max_events: usize) -> History {
    let n = initial.accounts();
    let mut h = History::new(Arc::from(vec!["T".to_string()]));
    let mut state = initial.clone();
    // per process: the open invocation, if any
    let mut open: Vec<Option<Invocation>> = vec![None; n];
    while h.events.len() < max_events {
        let p = rng.random_range(0..n);
        match open[p].take() {
            None => {
                let op = random_token_op(rng, n);
                h.push(ProcessId(p), ObjectId(0), EventKind::Invoke(op.clone()));
                open[p] = Some(op);
            }
            Some(op) => {
                let (next, r) = state.apply(ProcessId(p), &op).unwrap();
                state = next;
                let r = if rng.random_bool(0.15) { perturb(rng, r) } else { r };
                h.push(ProcessId(p), ObjectId(0), EventKind::Response(r));
            }
        }
    }
    h
}

fn perturb(rng: &mut impl Rng, r: Value) -> Value {
    match r {
        Value::Bool(b) => Value::Bool(!b),
        Value::Nat(v) => Value::Nat(v + rng.random_range(1..3)),
        Value::Bottom => Value::Bottom,
    }
}
