use super::{Invocation, ObjectError, OwnerSet, ProcessId, Value};

/// Sequential reference specification of a single-shot consensus object:
/// the first proposal in the linear order is the decision.
///
/// This is an oracle for checking histories, not an implementation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConsensusState {
    pub decided: Option<u64>,
    proposed: OwnerSet,
}

impl ConsensusState {
    pub fn apply(&self, caller: ProcessId, op: &Invocation) -> Result<(ConsensusState, Value), ObjectError> {
        match *op {
            Invocation::Propose { value } => {
                if caller.0 >= super::MAX_PARTIES {
                    return Err(ObjectError::UnknownProcess(caller.0));
                }
                if self.proposed.contains(caller) {
                    return Err(ObjectError::RepeatedPropose(caller.0));
                }
                let decided = self.decided.unwrap_or(value);
                let next = ConsensusState { decided: Some(decided), proposed: self.proposed.with(caller) };
                Ok((next, Value::Nat(decided)))
            }
            ref other => Err(ObjectError::UnsupportedMethod { object: "consensus", method: other.method() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn propose(s: &ConsensusState, p: usize, v: u64) -> Result<(ConsensusState, Value), ObjectError> {
        s.apply(ProcessId(p), &Invocation::Propose { value: v })
    }

    #[test]
    fn first_proposal_wins() {
        let (s, d) = propose(&ConsensusState::default(), 0, 4).unwrap();
        assert_eq!(d, Value::Nat(4));
        assert_eq!(propose(&s, 1, 9).unwrap().1, Value::Nat(4));
    }

    #[test]
    fn order_dependent() {
        let (s, d1) = propose(&ConsensusState::default(), 1, 9).unwrap();
        let (_, d0) = propose(&s, 0, 4).unwrap();
        assert_eq!((d1, d0), (Value::Nat(9), Value::Nat(9)));
    }

    #[test]
    fn single_shot() {
        let (s, _) = propose(&ConsensusState::default(), 0, 4).unwrap();
        assert_eq!(propose(&s, 0, 5), Err(ObjectError::RepeatedPropose(0)));
    }
}
