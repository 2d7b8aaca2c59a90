//! A token restricted to `k` spenders per account, built from a k-shared
//! asset-transfer object and one allowance register `R_a[j]` per account
//! `a` and process `p_j`.
//!
//! Balances live in the asset-transfer object; allowances live in the
//! registers. Register updates are plain reads and writes, so
//! `R -= v` is a read step followed by a write step.

use serde::{Deserialize, Serialize};

use crate::objects::{
    AccountId, AssetState, Invocation, OwnerSet, ProcessId, RegisterState, RestrictedToken, SharedObject, TokenState,
    Value,
};
use crate::sim::{ArithOp, Cmp, EventKind, History, ObjectId, Operand, ProcessProgram, ProgramBuilder, World};

use super::AlgorithmError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// The register is decremented before the asset transfer and stays
    /// decremented when the transfer fails.
    Literal,
    /// Writes the old register value back when the asset transfer fails.
    Strict,
}

const ASSET: ObjectId = ObjectId(0);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RestrictedTokenInstance {
    initial: TokenState,
    k: usize,
    variant: Variant,
}

impl RestrictedTokenInstance {
    /// `initial` must have at most `k` spenders (owner plus positive
    /// allowances) on every account.
    pub fn new(initial: TokenState, k: usize, variant: Variant) -> Result<Self, AlgorithmError> {
        RestrictedToken::new(initial.clone(), k)?;
        Ok(Self { initial, k, variant })
    }

    pub fn initial(&self) -> &TokenState {
        &self.initial
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn n(&self) -> usize {
        self.initial.accounts()
    }

    /// The sequential object this instance implements.
    pub fn spec(&self) -> SharedObject {
        SharedObject::Restricted(RestrictedToken { state: self.initial.clone(), k: self.k })
    }

    pub fn register(&self, a: AccountId, p: ProcessId) -> ObjectId {
        ObjectId(1 + a.0 * self.n() + p.0)
    }

    fn registers_of(&self, a: AccountId) -> Vec<ObjectId> {
        (0..self.n()).map(|j| self.register(a, ProcessId(j))).collect()
    }

    fn initial_owners(&self, a: AccountId) -> OwnerSet {
        let owner = OwnerSet::singleton(self.initial.owner(a));
        (0..self.n()).map(ProcessId).filter(|&p| self.initial.allowance(a, p) > 0).fold(owner, OwnerSet::with)
    }

    pub fn objects(&self) -> Result<Vec<(String, SharedObject)>, AlgorithmError> {
        let n = self.n();
        let owners = (0..n).map(|a| self.initial_owners(AccountId(a))).collect();
        let asset = AssetState::new(self.initial.balances().to_vec(), owners, self.k, n)?;
        let mut out = vec![("kAT".to_string(), SharedObject::Asset(asset))];
        for a in (0..n).map(AccountId) {
            for p in (0..n).map(ProcessId) {
                let reg = RegisterState::new(Value::Nat(self.initial.allowance(a, p)));
                out.push((format!("R[{a}][{p}]"), SharedObject::Register(reg)));
            }
        }
        Ok(out)
    }

    /// Worst-case atomic steps of one operation.
    pub fn step_bound(&self, op: &Invocation) -> usize {
        match op {
            Invocation::TransferFrom { .. } => match self.variant {
                Variant::Literal => 3,
                Variant::Strict => 4,
            },
            Invocation::Approve { .. } => 2 * self.n(),
            _ => 1,
        }
    }

    fn check(&self, caller: ProcessId, op: &Invocation) -> Result<(), AlgorithmError> {
        let n = self.n();
        let bad_account = |a: &AccountId| a.0 >= n;
        let (accounts, processes): (Vec<AccountId>, Vec<ProcessId>) = match *op {
            Invocation::Transfer { to, .. } => (vec![to], vec![]),
            Invocation::TransferFrom { from, to, .. } => (vec![from, to], vec![]),
            Invocation::Approve { spender, .. } => (vec![], vec![spender]),
            Invocation::BalanceOf { account } => (vec![account], vec![]),
            Invocation::Allowance { account, spender } => (vec![account], vec![spender]),
            Invocation::TotalSupply => (vec![], vec![]),
            ref other => return Err(AlgorithmError::NotTokenOp(other.method())),
        };
        if let Some(a) = accounts.iter().find(|a| bad_account(a)) {
            return Err(crate::objects::ObjectError::UnknownAccount(a.0).into());
        }
        if let Some(p) = processes.iter().chain([&caller]).find(|p| p.0 >= n) {
            return Err(crate::objects::ObjectError::UnknownProcess(p.0).into());
        }
        Ok(())
    }

    /// Appends the code of one operation by `caller`.
    pub fn emit(&self, b: &mut ProgramBuilder, caller: ProcessId, op: &Invocation) -> Result<(), AlgorithmError> {
        self.check(caller, op)?;
        let own = self.initial.account_of(caller);
        b.begin(op.clone());
        match *op {
            Invocation::Transfer { to, value } => {
                let r = b.call(ASSET, Invocation::AssetTransfer { from: own, to, value });
                b.end(Operand::Local(r));
            }
            Invocation::BalanceOf { .. } | Invocation::TotalSupply => {
                let r = b.call(ASSET, op.clone());
                b.end(Operand::Local(r));
            }
            Invocation::Allowance { account, spender } => {
                let r = b.call(self.register(account, spender), Invocation::Read);
                b.end(Operand::Local(r));
            }
            Invocation::TransferFrom { from, to, value } => self.emit_transfer_from(b, caller, from, to, value),
            Invocation::Approve { spender, value } => self.emit_approve(b, caller, spender, value),
            _ => unreachable!("rejected by check"),
        }
        Ok(())
    }

    fn emit_transfer_from(&self, b: &mut ProgramBuilder, caller: ProcessId, from: AccountId, to: AccountId, v: u64) {
        let reg = self.register(from, caller);
        let (refuse, done) = (b.label(), b.label());
        let old = b.call(reg, Invocation::Read);
        b.jump_if(Operand::Local(old), Cmp::Lt, Operand::nat(v), refuse);
        let dec = b.arith(Operand::Local(old), ArithOp::Sub, Operand::nat(v));
        b.call_with(reg, Invocation::Write { value: Value::Bottom }, Operand::Local(dec));
        let moved = b.call(ASSET, Invocation::AssetTransfer { from, to, value: v });
        if self.variant == Variant::Strict {
            let respond = b.label();
            b.jump_if(Operand::Local(moved), Cmp::Eq, Operand::Const(Value::Bool(true)), respond);
            b.call_with(reg, Invocation::Write { value: Value::Bottom }, Operand::Local(old));
            b.bind(respond);
        }
        b.end(Operand::Local(moved));
        b.jump(done);
        b.bind(refuse);
        b.end(Operand::Const(Value::Bool(false)));
        b.bind(done);
    }

    /// Reads the old value; a new spender on a full account is refused;
    /// writes the new value; when a spender was added, refreshes the owner
    /// map of every account.
    fn emit_approve(&self, b: &mut ProgramBuilder, caller: ProcessId, spender: ProcessId, v: u64) {
        let own = self.initial.account_of(caller);
        let target = self.register(own, spender);
        let (write, granted, refuse, done) = (b.label(), b.label(), b.label(), b.label());
        let old = b.call(target, Invocation::Read);
        if v > 0 && spender != caller {
            b.jump_if(Operand::Local(old), Cmp::Ne, Operand::nat(0), write);
            let count = b.local();
            b.set(count, Operand::nat(0));
            for m in (0..self.n()).map(ProcessId).filter(|&m| m != caller && m != spender) {
                let skip = b.label();
                let x = b.call(self.register(own, m), Invocation::Read);
                b.jump_if(Operand::Local(x), Cmp::Eq, Operand::nat(0), skip);
                b.arith_into(count, Operand::Local(count), ArithOp::Add, Operand::nat(1));
                b.bind(skip);
            }
            // owner + `count` others + the new spender must fit in k
            b.jump_if(Operand::Local(count), Cmp::Ge, Operand::nat(self.k.saturating_sub(1) as u64), refuse);
        }
        b.bind(write);
        b.call(target, Invocation::Write { value: Value::Nat(v) });
        if v > 0 {
            b.jump_if(Operand::Local(old), Cmp::Ne, Operand::nat(0), granted);
            for a in (0..self.n()).map(AccountId) {
                b.refresh_owners(ASSET, a, self.initial.owner(a), self.registers_of(a));
            }
        }
        b.bind(granted);
        b.end(Operand::Const(Value::Bool(true)));
        b.jump(done);
        b.bind(refuse);
        b.end(Operand::Const(Value::Bool(false)));
        b.bind(done);
    }

    /// A program running `ops` in order, then returning ⊥.
    pub fn program(&self, caller: ProcessId, ops: &[Invocation]) -> Result<ProcessProgram, AlgorithmError> {
        let mut b = ProgramBuilder::new();
        for op in ops {
            self.emit(&mut b, caller, op)?;
        }
        b.declare_bound(ops.iter().map(|op| self.step_bound(op)).max().unwrap_or(0));
        b.ret(Operand::Const(Value::Bottom));
        Ok(b.build(caller))
    }

    pub fn world(&self, workload: &[(ProcessId, Vec<Invocation>)]) -> Result<World, AlgorithmError> {
        let programs =
            workload.iter().map(|(p, ops)| self.program(*p, ops)).collect::<Result<Vec<_>, _>>()?;
        Ok(World::new(self.objects()?, programs, "T")?)
    }

    /// The token state represented by a world of this instance.
    pub fn token_view(&self, world: &World) -> TokenState {
        let n = self.n();
        let SharedObject::Asset(asset) = world.object(ASSET) else { unreachable!("slot 0 holds the asset object") };
        let mut allowances = Vec::with_capacity(n * n);
        for a in (0..n).map(AccountId) {
            for p in (0..n).map(ProcessId) {
                let SharedObject::Register(r) = world.object(self.register(a, p)) else { unreachable!() };
                allowances.push(r.value.as_nat().unwrap_or(0));
            }
        }
        TokenState::new(asset.balances().to_vec(), allowances).expect("dimensions match the instance")
    }

    /// Size of `{owner} ∪ {p_j : R_a[j] > 0}` for every account.
    pub fn spender_counts(&self, world: &World) -> Vec<usize> {
        let view = self.token_view(world);
        let t = RestrictedToken { state: view, k: self.k };
        (0..self.n()).map(|a| t.spender_count(AccountId(a))).collect()
    }

    /// The current owner map of the asset-transfer object.
    pub fn owner_map(&self, world: &World) -> Vec<OwnerSet> {
        let SharedObject::Asset(asset) = world.object(ASSET) else { unreachable!() };
        (0..self.n()).map(|a| asset.owners(AccountId(a))).collect()
    }
}

/// Number of asset transfers issued by `transferFrom` (the process's
/// previous step was a register write) that returned false.
pub fn failed_underlying_transfers(history: &History) -> usize {
    let mut last_was_write = std::collections::HashMap::new();
    let mut pending: std::collections::HashMap<ProcessId, bool> = std::collections::HashMap::new();
    let mut failures = 0;
    for e in &history.events {
        match &e.kind {
            EventKind::Invoke(inv) => {
                let after_write = last_was_write.get(&e.process).copied().unwrap_or(false);
                pending.insert(e.process, matches!(inv, Invocation::AssetTransfer { .. }) && after_write);
                last_was_write.insert(e.process, matches!(inv, Invocation::Write { .. }));
            }
            EventKind::Response(v) => {
                if pending.remove(&e.process) == Some(true) && *v == Value::Bool(false) {
                    failures += 1;
                }
            }
        }
    }
    failures
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Status;

    fn state(balances: Vec<u64>, allowances: &[(usize, usize, u64)]) -> TokenState {
        let mut s = TokenState::with_balances(balances).unwrap();
        for &(a, p, v) in allowances {
            s.set_allowance(AccountId(a), ProcessId(p), v);
        }
        s
    }

    fn solo(inst: &RestrictedTokenInstance, p: usize, op: Invocation) -> (World, Value) {
        let mut w = inst.world(&[(ProcessId(p), vec![op])]).unwrap();
        while w.is_running(ProcessId(p)) {
            w.step(ProcessId(p)).unwrap();
        }
        let rec = w.counters(ProcessId(p)).unwrap().completed[0].clone();
        assert!(rec.steps <= inst.step_bound(&rec.invocation));
        (w, rec.response)
    }

    fn tf(from: usize, to: usize, value: u64) -> Invocation {
        Invocation::TransferFrom { from: AccountId(from), to: AccountId(to), value }
    }

    fn approve(spender: usize, value: u64) -> Invocation {
        Invocation::Approve { spender: ProcessId(spender), value }
    }

    #[test]
    fn transfer_from_success_and_refusal() {
        let inst = RestrictedTokenInstance::new(state(vec![5, 0, 0], &[(0, 1, 5)]), 2, Variant::Literal).unwrap();
        let (w, r) = solo(&inst, 1, tf(0, 1, 5));
        assert_eq!(r, Value::Bool(true));
        let view = inst.token_view(&w);
        assert_eq!(view.balances(), &[0, 5, 0]);
        assert_eq!(view.allowance(AccountId(0), ProcessId(1)), 0);

        let inst = RestrictedTokenInstance::new(state(vec![5, 0, 0], &[(0, 1, 1)]), 2, Variant::Literal).unwrap();
        let (w, r) = solo(&inst, 1, tf(0, 1, 5));
        assert_eq!(r, Value::Bool(false));
        assert_eq!(&inst.token_view(&w), inst.initial());
    }

    #[test]
    fn failed_asset_transfer_literal_vs_strict() {
        let s = state(vec![0, 0, 0], &[(0, 1, 5)]);
        let lit = RestrictedTokenInstance::new(s.clone(), 2, Variant::Literal).unwrap();
        let (w, r) = solo(&lit, 1, tf(0, 1, 5));
        assert_eq!(r, Value::Bool(false));
        assert_eq!(lit.token_view(&w).allowance(AccountId(0), ProcessId(1)), 0);
        assert_eq!(failed_underlying_transfers(w.history()), 1);

        let strict = RestrictedTokenInstance::new(s, 2, Variant::Strict).unwrap();
        let (w, r) = solo(&strict, 1, tf(0, 1, 5));
        assert_eq!(r, Value::Bool(false));
        assert_eq!(strict.token_view(&w).allowance(AccountId(0), ProcessId(1)), 5);
        assert_eq!(w.counters(ProcessId(1)).unwrap().completed[0].steps, 4);
    }

    #[test]
    fn approve_guard_and_refresh() {
        let inst = RestrictedTokenInstance::new(state(vec![5, 0, 0], &[(0, 1, 4)]), 2, Variant::Strict).unwrap();
        let (w, r) = solo(&inst, 0, approve(2, 1));
        assert_eq!(r, Value::Bool(false));
        assert_eq!(&inst.token_view(&w), inst.initial());

        let (w, r) = solo(&inst, 0, approve(1, 0));
        assert_eq!(r, Value::Bool(true));
        assert_eq!(inst.token_view(&w).allowance(AccountId(0), ProcessId(1)), 0);
        // zeroing never shrinks the owner map
        assert_eq!(inst.owner_map(&w)[0], OwnerSet::from_iter([ProcessId(0), ProcessId(1)]));

        let inst = RestrictedTokenInstance::new(state(vec![5, 0, 0], &[]), 2, Variant::Strict).unwrap();
        let (w, r) = solo(&inst, 0, approve(1, 4));
        assert_eq!(r, Value::Bool(true));
        assert_eq!(inst.owner_map(&w)[0], OwnerSet::from_iter([ProcessId(0), ProcessId(1)]));
        assert_eq!(w.counters(ProcessId(0)).unwrap().completed[0].steps, 6);
    }

    #[test]
    fn delegated_operations() {
        let inst = RestrictedTokenInstance::new(state(vec![5, 0, 0], &[(0, 1, 4)]), 2, Variant::Literal).unwrap();
        let (w, r) = solo(&inst, 0, Invocation::Transfer { to: AccountId(1), value: 3 });
        assert_eq!(r, Value::Bool(true));
        assert_eq!(inst.token_view(&w).balances(), &[2, 3, 0]);
        let (_, r) = solo(&inst, 2, Invocation::Allowance { account: AccountId(0), spender: ProcessId(1) });
        assert_eq!(r, Value::Nat(4));
        let inst = RestrictedTokenInstance::new(state(vec![2, 3, 0], &[]), 2, Variant::Literal).unwrap();
        let (_, r) = solo(&inst, 1, Invocation::TotalSupply);
        assert_eq!(r, Value::Nat(5));
        let (_, r) = solo(&inst, 1, Invocation::BalanceOf { account: AccountId(1) });
        assert_eq!(r, Value::Nat(3));
    }

    #[test]
    fn rejects_bad_input() {
        let s = state(vec![5, 0, 0], &[(0, 1, 1), (0, 2, 1)]);
        assert!(RestrictedTokenInstance::new(s.clone(), 2, Variant::Literal).is_err());
        let inst = RestrictedTokenInstance::new(s, 3, Variant::Literal).unwrap();
        assert!(inst.program(ProcessId(0), &[Invocation::Read]).is_err());
        assert!(inst.program(ProcessId(0), &[tf(7, 0, 1)]).is_err());
        assert!(inst.program(ProcessId(5), &[Invocation::TotalSupply]).is_err());
    }

    #[test]
    fn multi_op_program_returns() {
        let inst = RestrictedTokenInstance::new(state(vec![5, 0, 0], &[]), 2, Variant::Strict).unwrap();
        let mut w = inst.world(&[(ProcessId(0), vec![approve(1, 2), Invocation::TotalSupply])]).unwrap();
        while w.is_running(ProcessId(0)) {
            w.step(ProcessId(0)).unwrap();
        }
        assert_eq!(w.status(ProcessId(0)), Some(Status::Returned(Value::Bottom)));
        assert_eq!(w.op_history().operations().unwrap().len(), 2);
    }
}
