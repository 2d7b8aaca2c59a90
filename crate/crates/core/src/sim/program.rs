//! Process programs: a tiny control-flow IR whose only shared-memory
//! effects are atomic base-object calls.

use std::sync::Arc;

use crate::objects::{AccountId, Invocation, ProcessId, Value};

use super::ObjectId;

pub type Local = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Const(Value),
    Local(Local),
}

impl Operand {
    pub fn nat(v: u64) -> Self {
        Operand::Const(Value::Nat(v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    /// Ordering comparisons are only defined between naturals and are false
    /// otherwise; equality is structural.
    pub fn eval(self, lhs: Value, rhs: Value) -> bool {
        match self {
            Cmp::Eq => lhs == rhs,
            Cmp::Ne => lhs != rhs,
            _ => match (lhs, rhs) {
                (Value::Nat(l), Value::Nat(r)) => match self {
                    Cmp::Lt => l < r,
                    Cmp::Le => l <= r,
                    Cmp::Gt => l > r,
                    Cmp::Ge => l >= r,
                    Cmp::Eq | Cmp::Ne => unreachable!(),
                },
                _ => false,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Instr {
    /// One atomic step: invoke `op` on `object`. When `value` is set its
    /// evaluation replaces the numeric payload of `op`.
    Call { object: ObjectId, op: Invocation, value: Option<Operand>, dest: Option<Local> },
    /// One atomic step: set the owner map of `account` on the asset-transfer
    /// object to `{owner} ∪ {p_j : registers[j] > 0}`.
    RefreshOwners { asset: ObjectId, account: AccountId, owner: ProcessId, registers: Vec<ObjectId> },
    Set { dest: Local, src: Operand },
    Arith { dest: Local, lhs: Operand, op: ArithOp, rhs: Operand },
    JumpIf { lhs: Operand, cmp: Cmp, rhs: Operand, target: usize },
    Jump(usize),
    /// Marks the invocation of a high-level operation.
    Begin(Invocation),
    /// Marks the response of the current high-level operation.
    End(Operand),
    Return(Operand),
}

impl Instr {
    pub fn is_step(&self) -> bool {
        matches!(self, Instr::Call { .. } | Instr::RefreshOwners { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessProgram {
    pub process: ProcessId,
    pub code: Arc<[Instr]>,
    pub locals: usize,
    /// Declared upper bound on atomic steps per high-level operation.
    pub step_bound: Option<usize>,
}

impl ProcessProgram {
    pub fn has_backward_jump(&self) -> bool {
        self.code.iter().enumerate().any(|(pc, i)| match i {
            Instr::Jump(t) | Instr::JumpIf { target: t, .. } => *t <= pc,
            _ => false,
        })
    }

    /// Loop-free programs are bounded by their length; anything with a back
    /// edge needs a declared bound.
    pub fn is_statically_bounded(&self) -> bool {
        !self.has_backward_jump() || self.step_bound.is_some()
    }

    /// Straight-line upper bound on atomic steps when the program is loop-free.
    pub fn static_step_count(&self) -> Option<usize> {
        if self.has_backward_jump() {
            None
        } else {
            Some(self.code.iter().filter(|i| i.is_step()).count())
        }
    }
}

/// Forward-reference label, resolved by [`ProgramBuilder::build`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Label(usize);

#[derive(Debug, Default)]
pub struct ProgramBuilder {
    code: Vec<Instr>,
    labels: Vec<Option<usize>>,
    locals: usize,
    step_bound: Option<usize>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn local(&mut self) -> Local {
        self.locals += 1;
        self.locals - 1
    }

    pub fn label(&mut self) -> Label {
        self.labels.push(None);
        Label(self.labels.len() - 1)
    }

    pub fn bind(&mut self, l: Label) {
        self.labels[l.0] = Some(self.code.len());
    }

    pub fn declare_bound(&mut self, steps: usize) -> &mut Self {
        self.step_bound = Some(steps);
        self
    }

    pub fn call(&mut self, object: ObjectId, op: Invocation) -> Local {
        let dest = self.local();
        self.code.push(Instr::Call { object, op, value: None, dest: Some(dest) });
        dest
    }

    pub fn call_with(&mut self, object: ObjectId, op: Invocation, value: Operand) -> Local {
        let dest = self.local();
        self.code.push(Instr::Call { object, op, value: Some(value), dest: Some(dest) });
        dest
    }

    pub fn refresh_owners(&mut self, asset: ObjectId, account: AccountId, owner: ProcessId, registers: Vec<ObjectId>) {
        self.code.push(Instr::RefreshOwners { asset, account, owner, registers });
    }

    pub fn set(&mut self, dest: Local, src: Operand) {
        self.code.push(Instr::Set { dest, src });
    }

    pub fn arith(&mut self, lhs: Operand, op: ArithOp, rhs: Operand) -> Local {
        let dest = self.local();
        self.code.push(Instr::Arith { dest, lhs, op, rhs });
        dest
    }

    pub fn arith_into(&mut self, dest: Local, lhs: Operand, op: ArithOp, rhs: Operand) {
        self.code.push(Instr::Arith { dest, lhs, op, rhs });
    }

    pub fn jump_if(&mut self, lhs: Operand, cmp: Cmp, rhs: Operand, target: Label) {
        self.code.push(Instr::JumpIf { lhs, cmp, rhs, target: target.0 });
    }

    pub fn jump(&mut self, target: Label) {
        self.code.push(Instr::Jump(target.0));
    }

    pub fn begin(&mut self, op: Invocation) {
        self.code.push(Instr::Begin(op));
    }

    pub fn end(&mut self, result: Operand) {
        self.code.push(Instr::End(result));
    }

    pub fn ret(&mut self, result: Operand) {
        self.code.push(Instr::Return(result));
    }

    /// Resolves labels. Panics on an unbound label, which is a builder bug.
    pub fn build(mut self, process: ProcessId) -> ProcessProgram {
        let labels = self.labels;
        for instr in &mut self.code {
            if let Instr::Jump(t) | Instr::JumpIf { target: t, .. } = instr {
                *t = labels[*t].expect("unbound label");
            }
        }
        ProcessProgram { process, code: self.code.into(), locals: self.locals, step_bound: self.step_bound }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons_on_bottom_are_false() {
        assert!(!Cmp::Lt.eval(Value::Bottom, Value::Nat(1)));
        assert!(Cmp::Ne.eval(Value::Bottom, Value::Nat(1)));
        assert!(Cmp::Ge.eval(Value::Nat(3), Value::Nat(3)));
    }

    #[test]
    fn loops_need_declared_bounds() {
        let mut b = ProgramBuilder::new();
        let top = b.label();
        b.bind(top);
        let r = b.call(ObjectId(0), Invocation::Read);
        b.jump_if(Operand::Local(r), Cmp::Eq, Operand::Const(Value::Bottom), top);
        b.ret(Operand::Local(r));
        let p = b.build(ProcessId(0));
        assert!(p.has_backward_jump());
        assert!(!p.is_statically_bounded());
        assert_eq!(p.static_step_count(), None);
    }

    #[test]
    fn straight_line_step_count() {
        let mut b = ProgramBuilder::new();
        b.call(ObjectId(0), Invocation::Write { value: Value::Nat(1) });
        b.call(ObjectId(0), Invocation::Read);
        b.ret(Operand::nat(0));
        let p = b.build(ProcessId(0));
        assert!(p.is_statically_bounded());
        assert_eq!(p.static_step_count(), Some(2));
    }
}
