use super::{Invocation, ObjectError, Value};

/// An atomic read/write register. Starts at ⊥.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegisterState {
    pub value: Value,
}

impl RegisterState {
    pub fn new(value: Value) -> Self {
        Self { value }
    }

    pub fn apply(&self, op: &Invocation) -> Result<(RegisterState, Value), ObjectError> {
        match *op {
            Invocation::Read => Ok((*self, self.value)),
            Invocation::Write { value } => Ok((RegisterState { value }, Value::Bool(true))),
            ref other => Err(ObjectError::UnsupportedMethod { object: "register", method: other.method() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_value_written() {
        let r = RegisterState::default();
        assert_eq!(r.apply(&Invocation::Read).unwrap(), (r, Value::Bottom));
        let (r, ack) = r.apply(&Invocation::Write { value: Value::Nat(7) }).unwrap();
        assert_eq!(ack, Value::Bool(true));
        assert_eq!(r.apply(&Invocation::Read).unwrap().1, Value::Nat(7));
    }

    #[test]
    fn rejects_token_methods() {
        assert!(RegisterState::default().apply(&Invocation::TotalSupply).is_err());
    }
}
