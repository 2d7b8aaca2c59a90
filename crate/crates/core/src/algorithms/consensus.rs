//! Consensus among the enabled spenders of one account.
//!
//! Every participant writes its proposal to its own register, then tries to
//! move funds out of the witness account `a_1`: the owner transfers the full
//! balance, every other participant transfers its full allowance. At most one
//! of these succeeds. A participant whose allowance is now zero is the
//! winner; if no allowance is zero the owner won.

use std::collections::BTreeMap;

use crate::analysis::{enabled_spenders, unique_transfer};
use crate::objects::{AccountId, Invocation, ProcessId, RegisterState, SharedObject, TokenState, Value};
use crate::sim::{Cmp, ObjectId, Operand, ProcessProgram, ProgramBuilder, World};

use super::AlgorithmError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsensusScenario {
    state: TokenState,
    witness: AccountId,
    /// Participants in register order (owner first) with their proposals.
    proposals: Vec<(ProcessId, u64)>,
}

impl ConsensusScenario {
    /// Checks the shape of the scenario only. S_k membership and the
    /// allowance bound are checked by [`validate`](Self::validate), so that
    /// invalid scenarios can still be run as negative controls.
    pub fn new(
        state: TokenState,
        witness: AccountId,
        proposals: &BTreeMap<ProcessId, u64>,
    ) -> Result<Self, AlgorithmError> {
        let sigma = enabled_spenders(&state, witness)?.spenders;
        if state.accounts() < 2 {
            return Err(AlgorithmError::NoDestination);
        }
        let owner = state.owner(witness);
        let order: Vec<ProcessId> =
            std::iter::once(owner).chain(sigma.iter().filter(|&p| p != owner)).collect();
        if let Some(&p) = proposals.keys().find(|p| !sigma.contains(**p)) {
            return Err(AlgorithmError::NotParticipant(p));
        }
        let proposals = order
            .into_iter()
            .map(|p| proposals.get(&p).map(|&v| (p, v)).ok_or(AlgorithmError::MissingProposal(p)))
            .collect::<Result<_, _>>()?;
        Ok(Self { state, witness, proposals })
    }

    pub fn state(&self) -> &TokenState {
        &self.state
    }

    pub fn witness(&self) -> AccountId {
        self.witness
    }

    pub fn k(&self) -> usize {
        self.proposals.len()
    }

    pub fn participants(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.proposals.iter().map(|(p, _)| *p)
    }

    pub fn proposals(&self) -> &[(ProcessId, u64)] {
        &self.proposals
    }

    pub fn proposal_values(&self) -> Vec<Value> {
        self.proposals.iter().map(|&(_, v)| Value::Nat(v)).collect()
    }

    /// The lowest-index account other than the witness.
    pub fn destination(&self) -> AccountId {
        AccountId(if self.witness.0 == 0 { 1 } else { 0 })
    }

    pub fn balance(&self) -> u64 {
        self.state.balance(self.witness)
    }

    /// Atomic steps per propose: write, token operation, `k - 1` allowance
    /// reads, one register read.
    pub fn step_bound(&self) -> usize {
        self.k() + 2
    }

    /// S_k membership at the witness plus `A_j <= B` for every spender.
    pub fn validate(&self) -> Result<(), AlgorithmError> {
        if !unique_transfer(&self.state, self.witness)? {
            return Err(AlgorithmError::NotSyncState {
                account: self.witness.0,
                reason: "two non-owner allowances sum to at most the balance".into(),
            });
        }
        let balance = self.balance();
        for p in self.participants().skip(1) {
            let allowance = self.state.allowance(self.witness, p);
            if allowance > balance {
                return Err(AlgorithmError::AllowanceExceedsBalance { spender: p, allowance, balance });
            }
        }
        Ok(())
    }

    pub fn program(&self, p: ProcessId) -> Result<ProcessProgram, AlgorithmError> {
        self.validate()?;
        self.program_unchecked(p)
    }

    pub fn program_unchecked(&self, p: ProcessId) -> Result<ProcessProgram, AlgorithmError> {
        let i = self.proposals.iter().position(|(q, _)| *q == p).ok_or(AlgorithmError::NotParticipant(p))?;
        let k = self.k();
        let register = |j: usize| ObjectId(j);
        let token = ObjectId(k);
        let (a1, ad) = (self.witness, self.destination());
        let v = self.proposals[i].1;

        let mut b = ProgramBuilder::new();
        b.declare_bound(self.step_bound());
        b.begin(Invocation::Propose { value: v });
        b.call(register(i), Invocation::Write { value: Value::Nat(v) });
        if i == 0 {
            b.call(token, Invocation::Transfer { to: ad, value: self.balance() });
        } else {
            let value = self.state.allowance(a1, p);
            b.call(token, Invocation::TransferFrom { from: a1, to: ad, value });
        }
        let winners: Vec<_> = (1..k).map(|_| b.label()).collect();
        for (j, &label) in (1..k).zip(&winners) {
            let spender = self.proposals[j].0;
            let r = b.call(token, Invocation::Allowance { account: a1, spender });
            b.jump_if(Operand::Local(r), Cmp::Eq, Operand::nat(0), label);
        }
        let decide = |b: &mut ProgramBuilder, j: usize| {
            let d = b.call(register(j), Invocation::Read);
            b.end(Operand::Local(d));
            b.ret(Operand::Local(d));
        };
        decide(&mut b, 0);
        for (j, label) in (1..k).zip(winners) {
            b.bind(label);
            decide(&mut b, j);
        }
        Ok(b.build(p))
    }

    pub fn objects(&self) -> Vec<(String, SharedObject)> {
        (1..=self.k())
            .map(|j| (format!("R[{j}]"), SharedObject::Register(RegisterState::default())))
            .chain(std::iter::once(("T".to_string(), SharedObject::Token(self.state.clone()))))
            .collect()
    }

    pub fn world(&self) -> Result<World, AlgorithmError> {
        self.validate()?;
        self.world_unchecked()
    }

    /// The protocol world without S_k or allowance checks.
    pub fn world_unchecked(&self) -> Result<World, AlgorithmError> {
        let programs =
            self.participants().map(|p| self.program_unchecked(p)).collect::<Result<Vec<_>, _>>()?;
        Ok(World::new(self.objects(), programs, "C")?)
    }
}
