use smallvec::SmallVec;

use super::{AccountId, Invocation, ObjectError, ProcessId, Value};

/// Balances and allowances of an ERC20 token object over `n` accounts.
///
/// Account `i` is owned by process `i`. `allowances` is a flattened
/// `n × n` matrix indexed by `(account, spender)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenState {
    balances: SmallVec<[u64; 4]>,
    allowances: SmallVec<[u64; 16]>,
}

impl TokenState {
    /// Builds a state from a balance vector and a row-major allowance matrix.
    ///
    /// The total supply must fit in 64 bits; since transfers conserve it no
    /// later transition can overflow.
    pub fn new(balances: Vec<u64>, allowances: Vec<u64>) -> Result<Self, ObjectError> {
        let n = balances.len();
        if n == 0 || n > super::MAX_PARTIES {
            return Err(ObjectError::Shape(format!("{n} accounts")));
        }
        if allowances.len() != n * n {
            return Err(ObjectError::Shape(format!(
                "{} allowance entries for {n} accounts",
                allowances.len()
            )));
        }
        balances
            .iter()
            .try_fold(0u64, |acc, b| acc.checked_add(*b))
            .ok_or(ObjectError::SupplyOverflow)?;
        Ok(Self { balances: balances.into(), allowances: allowances.into() })
    }

    /// `n` accounts, given balances, all allowances zero.
    pub fn with_balances(balances: Vec<u64>) -> Result<Self, ObjectError> {
        let n = balances.len();
        Self::new(balances, vec![0; n * n])
    }

    pub fn accounts(&self) -> usize {
        self.balances.len()
    }

    pub fn balance(&self, a: AccountId) -> u64 {
        self.balances[a.0]
    }

    pub fn allowance(&self, a: AccountId, p: ProcessId) -> u64 {
        self.allowances[a.0 * self.accounts() + p.0]
    }

    pub fn balances(&self) -> &[u64] {
        &self.balances
    }

    /// Allowances granted from `a`, indexed by spender.
    pub fn allowance_row(&self, a: AccountId) -> &[u64] {
        let n = self.accounts();
        &self.allowances[a.0 * n..(a.0 + 1) * n]
    }

    pub fn total_supply(&self) -> u64 {
        // cannot overflow: checked at construction and conserved afterwards
        self.balances.iter().sum()
    }

    pub fn set_allowance(&mut self, a: AccountId, p: ProcessId, v: u64) {
        let n = self.accounts();
        self.allowances[a.0 * n + p.0] = v;
    }

    pub fn owner(&self, a: AccountId) -> ProcessId {
        ProcessId(a.0)
    }

    pub fn account_of(&self, p: ProcessId) -> AccountId {
        AccountId(p.0)
    }

    fn check_account(&self, a: AccountId) -> Result<(), ObjectError> {
        if a.0 < self.accounts() {
            Ok(())
        } else {
            Err(ObjectError::UnknownAccount(a.0))
        }
    }

    fn check_process(&self, p: ProcessId) -> Result<(), ObjectError> {
        if p.0 < self.accounts() {
            Ok(())
        } else {
            Err(ObjectError::UnknownProcess(p.0))
        }
    }

    fn move_tokens(&mut self, from: AccountId, to: AccountId, v: u64) {
        self.balances[from.0] -= v;
        self.balances[to.0] += v;
    }

    /// The token transition function.
    pub fn apply(&self, caller: ProcessId, op: &Invocation) -> Result<(TokenState, Value), ObjectError> {
        self.check_process(caller)?;
        let own = self.account_of(caller);
        match *op {
            Invocation::Transfer { to, value } => {
                self.check_account(to)?;
                if self.balance(own) < value {
                    return Ok((self.clone(), Value::Bool(false)));
                }
                let mut next = self.clone();
                next.move_tokens(own, to, value);
                Ok((next, Value::Bool(true)))
            }
            Invocation::TransferFrom { from, to, value } => {
                self.check_account(from)?;
                self.check_account(to)?;
                let allowed = self.allowance(from, caller);
                if self.balance(from) < value || allowed < value {
                    return Ok((self.clone(), Value::Bool(false)));
                }
                let mut next = self.clone();
                next.move_tokens(from, to, value);
                next.set_allowance(from, caller, allowed - value);
                Ok((next, Value::Bool(true)))
            }
            Invocation::Approve { spender, value } => {
                self.check_process(spender)?;
                let mut next = self.clone();
                next.set_allowance(own, spender, value);
                Ok((next, Value::Bool(true)))
            }
            Invocation::BalanceOf { account } => {
                self.check_account(account)?;
                Ok((self.clone(), Value::Nat(self.balance(account))))
            }
            Invocation::Allowance { account, spender } => {
                self.check_account(account)?;
                self.check_process(spender)?;
                Ok((self.clone(), Value::Nat(self.allowance(account, spender))))
            }
            Invocation::TotalSupply => Ok((self.clone(), Value::Nat(self.total_supply()))),
            ref other => Err(ObjectError::UnsupportedMethod { object: "token", method: other.method() }),
        }
    }
}
