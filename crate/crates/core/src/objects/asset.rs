use smallvec::SmallVec;

use super::{AccountId, Invocation, ObjectError, ProcessId, Value, MAX_PARTIES};

/// A set of processes, stored as a bitmask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OwnerSet(u64);

impl OwnerSet {
    pub const EMPTY: OwnerSet = OwnerSet(0);

    pub fn from_bits(bits: u64) -> Self {
        Self(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(p: ProcessId) -> Self {
        Self(1 << p.0)
    }

    pub fn contains(self, p: ProcessId) -> bool {
        p.0 < MAX_PARTIES && self.0 & (1 << p.0) != 0
    }

    pub fn insert(&mut self, p: ProcessId) {
        self.0 |= 1 << p.0;
    }

    pub fn with(mut self, p: ProcessId) -> Self {
        self.insert(p);
        self
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = ProcessId> {
        (0..MAX_PARTIES).filter(move |i| self.0 & (1 << i) != 0).map(ProcessId)
    }
}

impl FromIterator<ProcessId> for OwnerSet {
    fn from_iter<I: IntoIterator<Item = ProcessId>>(iter: I) -> Self {
        let mut s = OwnerSet::EMPTY;
        for p in iter {
            s.insert(p);
        }
        s
    }
}

/// State of a k-shared asset-transfer object: balances plus the owner map μ.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AssetState {
    balances: SmallVec<[u64; 4]>,
    owners: SmallVec<[OwnerSet; 4]>,
    k: usize,
    processes: usize,
}

impl AssetState {
    pub fn new(balances: Vec<u64>, owners: Vec<OwnerSet>, k: usize, processes: usize) -> Result<Self, ObjectError> {
        if balances.len() != owners.len() || balances.is_empty() || balances.len() > MAX_PARTIES {
            return Err(ObjectError::Shape(format!("{} balances, {} owner sets", balances.len(), owners.len())));
        }
        if processes > MAX_PARTIES {
            return Err(ObjectError::Shape(format!("{processes} processes")));
        }
        for set in &owners {
            if set.len() > k {
                return Err(ObjectError::SharingBound { size: set.len(), k });
            }
            if let Some(p) = set.iter().find(|p| p.0 >= processes) {
                return Err(ObjectError::UnknownProcess(p.0));
            }
        }
        balances
            .iter()
            .try_fold(0u64, |acc, b| acc.checked_add(*b))
            .ok_or(ObjectError::SupplyOverflow)?;
        Ok(Self { balances: balances.into(), owners: owners.into(), k, processes })
    }

    pub fn accounts(&self) -> usize {
        self.balances.len()
    }

    pub fn sharing_bound(&self) -> usize {
        self.k
    }

    pub fn balance(&self, a: AccountId) -> u64 {
        self.balances[a.0]
    }

    pub fn balances(&self) -> &[u64] {
        &self.balances
    }

    pub fn owners(&self, a: AccountId) -> OwnerSet {
        self.owners[a.0]
    }

    fn check_account(&self, a: AccountId) -> Result<(), ObjectError> {
        if a.0 < self.accounts() {
            Ok(())
        } else {
            Err(ObjectError::UnknownAccount(a.0))
        }
    }

    pub fn apply(&self, caller: ProcessId, op: &Invocation) -> Result<(AssetState, Value), ObjectError> {
        if caller.0 >= self.processes {
            return Err(ObjectError::UnknownProcess(caller.0));
        }
        match *op {
            Invocation::AssetTransfer { from, to, value } => {
                self.check_account(from)?;
                self.check_account(to)?;
                if !self.owners(from).contains(caller) || self.balance(from) < value {
                    return Ok((self.clone(), Value::Bool(false)));
                }
                let mut next = self.clone();
                next.balances[from.0] -= value;
                next.balances[to.0] += value;
                Ok((next, Value::Bool(true)))
            }
            Invocation::BalanceOf { account } => {
                self.check_account(account)?;
                Ok((self.clone(), Value::Nat(self.balance(account))))
            }
            // Atomic read of the whole balance map, used by the restricted
            // token's totalSupply.
            Invocation::TotalSupply => Ok((self.clone(), Value::Nat(self.balances.iter().sum()))),
            Invocation::SetOwners { account, owners } => {
                self.check_account(account)?;
                // an oversized owner set is a refused update, not a fault
                if owners.len() > self.k {
                    return Ok((self.clone(), Value::Bool(false)));
                }
                if let Some(p) = owners.iter().find(|p| p.0 >= self.processes) {
                    return Err(ObjectError::UnknownProcess(p.0));
                }
                let mut next = self.clone();
                next.owners[account.0] = owners;
                Ok((next, Value::Bool(true)))
            }
            ref other => Err(ObjectError::UnsupportedMethod { object: "asset-transfer", method: other.method() }),
        }
    }
}
