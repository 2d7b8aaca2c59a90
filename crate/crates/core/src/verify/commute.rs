//! Commutativity and read-only classification of token operation pairs,
//! and the exhaustive sweep showing that every non-commuting pair of
//! state-changing steps by distinct processes is a funds contention on one
//! source account or an approval racing the approved spender.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::objects::{AccountId, Invocation, ObjectError, ProcessId, TokenState, Value};

type Step<'a> = (ProcessId, &'a Invocation);

/// True iff both orders reach the same state and each operation gets the
/// same response in both orders.
pub fn commutes(state: &TokenState, a: Step<'_>, b: Step<'_>) -> Result<bool, ObjectError> {
    let (qa, ra) = state.apply(a.0, a.1)?;
    let (qb, rb) = state.apply(b.0, b.1)?;
    commutes_from(&qa, ra, &qb, rb, a, b)
}

fn commutes_from(
    qa: &TokenState,
    ra: Value,
    qb: &TokenState,
    rb: Value,
    a: Step<'_>,
    b: Step<'_>,
) -> Result<bool, ObjectError> {
    let (qab, rb_after) = qa.apply(b.0, b.1)?;
    if rb_after != rb {
        return Ok(false);
    }
    let (qba, ra_after) = qb.apply(a.0, a.1)?;
    Ok(ra_after == ra && qab == qba)
}

/// True iff applying the operation leaves the state unchanged, whether it
/// is an intrinsic read or a failing update.
pub fn is_read_only_at(state: &TokenState, caller: ProcessId, op: &Invocation) -> Result<bool, ObjectError> {
    Ok(op.is_intrinsic_read() || state.apply(caller, op)?.0 == *state)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    ReadOnly,
    Commutes,
    /// Both steps debit the same source account.
    SameSourceContention,
    /// An owner's approve and a transferFrom by the approved spender on the
    /// owner's account.
    ApproveSpenderRace,
    Unclassified,
}

/// The account an operation debits, if any.
fn debited(caller: ProcessId, op: &Invocation) -> Option<AccountId> {
    match *op {
        Invocation::Transfer { .. } => Some(AccountId(caller.0)),
        Invocation::TransferFrom { from, .. } => Some(from),
        _ => None,
    }
}

fn approve_race(a: Step<'_>, b: Step<'_>) -> bool {
    match (a.1, b.1) {
        (Invocation::Approve { spender, .. }, Invocation::TransferFrom { from, .. }) => {
            *spender == b.0 && from.0 == a.0 .0
        }
        _ => false,
    }
}

fn pattern(a: Step<'_>, b: Step<'_>) -> PairClass {
    match (debited(a.0, a.1), debited(b.0, b.1)) {
        (Some(x), Some(y)) if x == y => return PairClass::SameSourceContention,
        _ => {}
    }
    if approve_race(a, b) || approve_race(b, a) {
        PairClass::ApproveSpenderRace
    } else {
        PairClass::Unclassified
    }
}

/// Read-only takes precedence over commuting, which takes precedence over
/// the contention patterns.
pub fn classify_pair(state: &TokenState, a: Step<'_>, b: Step<'_>) -> Result<PairClass, ObjectError> {
    if is_read_only_at(state, a.0, a.1)? || is_read_only_at(state, b.0, b.1)? {
        return Ok(PairClass::ReadOnly);
    }
    if commutes(state, a, b)? {
        return Ok(PairClass::Commutes);
    }
    Ok(pattern(a, b))
}

/// Every token invocation over `n` accounts with amounts in `0..=max_value`.
pub fn token_invocations(n: usize, max_value: u64) -> Vec<Invocation> {
    let accounts = || (0..n).map(AccountId);
    let processes = || (0..n).map(ProcessId);
    let values = || 0..=max_value;
    let mut out = Vec::new();
    for to in accounts() {
        out.extend(values().map(|value| Invocation::Transfer { to, value }));
    }
    for from in accounts() {
        for to in accounts() {
            out.extend(values().map(|value| Invocation::TransferFrom { from, to, value }));
        }
    }
    for spender in processes() {
        out.extend(values().map(|value| Invocation::Approve { spender, value }));
    }
    out.extend(accounts().map(|account| Invocation::BalanceOf { account }));
    for account in accounts() {
        out.extend(processes().map(|spender| Invocation::Allowance { account, spender }));
    }
    out.push(Invocation::TotalSupply);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepConfig {
    pub n: usize,
    pub max_balance: u64,
    /// Bound on non-owner allowances; self-allowances are fixed at 0.
    pub max_allowance: u64,
    pub max_value: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { n: 3, max_balance: 2, max_allowance: 2, max_value: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepReport {
    pub states: usize,
    pub pairs: usize,
    pub counts: BTreeMap<PairClass, usize>,
    /// Up to ten unclassified examples.
    pub unclassified: Vec<(TokenState, (ProcessId, Invocation), (ProcessId, Invocation))>,
}

/// Every token state of the configured shape, in lexicographic order.
pub fn token_states(n: usize, max_balance: u64, max_allowance: u64) -> impl Iterator<Item = TokenState> {
    let free: Vec<(usize, usize)> =
        (0..n).flat_map(|a| (0..n).filter(move |&p| p != a).map(move |p| (a, p))).collect();
    let digits = n + free.len();
    let radix: Vec<u64> = (0..digits).map(|d| if d < n { max_balance + 1 } else { max_allowance + 1 }).collect();
    let total: u64 = radix.iter().product();
    (0..total).map(move |mut code| {
        let mut balances = vec![0; n];
        let mut allowances = vec![0; n * n];
        for d in (0..digits).rev() {
            let v = code % radix[d];
            code /= radix[d];
            if d < n {
                balances[d] = v;
            } else {
                let (a, p) = free[d - n];
                allowances[a * n + p] = v;
            }
        }
        TokenState::new(balances, allowances).expect("small values")
    })
}

/// Classifies every unordered pair of steps by distinct processes, over
/// every state of the configured shape.
pub fn pair_sweep(cfg: SweepConfig) -> SweepReport {
    let ops = token_invocations(cfg.n, cfg.max_value);
    let steps: Vec<(ProcessId, &Invocation)> =
        (0..cfg.n).map(ProcessId).flat_map(|p| ops.iter().map(move |op| (p, op))).collect();
    let mut report = SweepReport { states: 0, pairs: 0, counts: BTreeMap::new(), unclassified: Vec::new() };
    for state in token_states(cfg.n, cfg.max_balance, cfg.max_allowance) {
        report.states += 1;
        // successor and read-only flag of every step at this state
        let succ: Vec<(TokenState, Value, bool)> = steps
            .iter()
            .map(|&(p, op)| {
                let (q, r) = state.apply(p, op).expect("well-formed sweep invocation");
                let ro = op.is_intrinsic_read() || q == state;
                (q, r, ro)
            })
            .collect();
        let live: Vec<usize> = (0..steps.len()).filter(|&i| !succ[i].2).collect();
        let mut read_only = 0;
        for i in 0..steps.len() {
            for j in i + 1..steps.len() {
                if steps[i].0 != steps[j].0 && (succ[i].2 || succ[j].2) {
                    read_only += 1;
                }
            }
        }
        report.pairs += read_only;
        *report.counts.entry(PairClass::ReadOnly).or_default() += read_only;
        for (x, &i) in live.iter().enumerate() {
            for &j in &live[x + 1..] {
                let (a, b) = (steps[i], steps[j]);
                if a.0 == b.0 {
                    continue;
                }
                report.pairs += 1;
                let (qa, ra, _) = &succ[i];
                let (qb, rb, _) = &succ[j];
                let class = if commutes_from(qa, *ra, qb, *rb, a, b).expect("well-formed") {
                    PairClass::Commutes
                } else {
                    pattern(a, b)
                };
                *report.counts.entry(class).or_default() += 1;
                if class == PairClass::Unclassified && report.unclassified.len() < 10 {
                    report.unclassified.push((state.clone(), (a.0, a.1.clone()), (b.0, b.1.clone())));
                }
            }
        }
    }
    report
}
