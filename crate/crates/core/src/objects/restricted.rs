use super::{Invocation, ObjectError, ProcessId, TokenState, Value};

/// Token object whose approvals are confined to at most `k` spenders per
/// account.
///
/// Spenders are counted on allowances alone, balance ignored:
/// `{owner} ∪ {p : α(a, p) > 0}`. An `approve` that would add a new member
/// to a full set returns `false` and leaves the state unchanged; every other
/// transition is the plain token transition.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RestrictedToken {
    pub state: TokenState,
    pub k: usize,
}

impl RestrictedToken {
    pub fn new(state: TokenState, k: usize) -> Result<Self, ObjectError> {
        let this = Self { state, k };
        for a in 0..this.state.accounts() {
            let size = this.spender_count(super::AccountId(a));
            if size > k {
                return Err(ObjectError::SharingBound { size, k });
            }
        }
        Ok(this)
    }

    /// `|{owner} ∪ {p : α(a, p) > 0}|`.
    pub fn spender_count(&self, a: super::AccountId) -> usize {
        let owner = self.state.owner(a);
        1 + self
            .state
            .allowance_row(a)
            .iter()
            .enumerate()
            .filter(|&(p, &v)| p != owner.0 && v > 0)
            .count()
    }

    pub fn apply(&self, caller: ProcessId, op: &Invocation) -> Result<(RestrictedToken, Value), ObjectError> {
        if let Invocation::Approve { spender, value } = *op {
            if caller.0 < self.state.accounts() && spender.0 < self.state.accounts() {
                let own = self.state.account_of(caller);
                let grows = value > 0 && spender != caller && self.state.allowance(own, spender) == 0;
                if grows && self.spender_count(own) >= self.k {
                    return Ok((self.clone(), Value::Bool(false)));
                }
            }
        }
        let (state, r) = self.state.apply(caller, op)?;
        Ok((RestrictedToken { state, k: self.k }, r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objects::AccountId;

    #[test]
    fn approve_beyond_bound_fails() {
        let mut s = TokenState::with_balances(vec![5, 0, 0]).unwrap();
        s.set_allowance(AccountId(0), ProcessId(1), 4);
        let t = RestrictedToken::new(s, 2).unwrap();
        let (next, r) = t.apply(ProcessId(0), &Invocation::Approve { spender: ProcessId(2), value: 1 }).unwrap();
        assert_eq!((next, r), (t.clone(), Value::Bool(false)));
        // updating or revoking an existing spender is fine
        let (next, r) = t.apply(ProcessId(0), &Invocation::Approve { spender: ProcessId(1), value: 0 }).unwrap();
        assert_eq!(r, Value::Bool(true));
        assert_eq!(next.state.allowance(AccountId(0), ProcessId(1)), 0);
        let (_, r) = next.apply(ProcessId(0), &Invocation::Approve { spender: ProcessId(2), value: 1 }).unwrap();
        assert_eq!(r, Value::Bool(true));
    }

    #[test]
    fn initial_state_must_respect_bound() {
        let mut s = TokenState::with_balances(vec![5, 0, 0]).unwrap();
        s.set_allowance(AccountId(0), ProcessId(1), 1);
        s.set_allowance(AccountId(0), ProcessId(2), 1);
        assert!(RestrictedToken::new(s.clone(), 2).is_err());
        assert!(RestrictedToken::new(s, 3).is_ok());
    }
}
