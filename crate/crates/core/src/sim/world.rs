use std::sync::Arc;

use smallvec::SmallVec;

use crate::objects::{Invocation, OwnerSet, ProcessId, SharedObject, Value};

use super::history::{EventKind, History};
use super::program::{ArithOp, Instr, Operand, ProcessProgram};
use super::{Inadmissible, ObjectId, Schedule, SimError};

/// Local instructions a process may execute between two atomic steps.
const LOCAL_FUEL: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Running,
    Returned(Value),
    Crashed,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProcState {
    pub pc: usize,
    pub locals: SmallVec<[Value; 8]>,
    pub status: Status,
}

/// The part of a world that determines its future: object states plus
/// program counters and local stores. Histories are excluded so that
/// configurations reached along different paths compare equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Config {
    pub objects: Vec<SharedObject>,
    pub procs: Vec<ProcState>,
}

/// A completed high-level operation and the atomic steps it took.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpRecord {
    pub invocation: Invocation,
    pub response: Value,
    pub steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub steps: usize,
    pub current: Option<(Invocation, usize)>,
    pub completed: Vec<OpRecord>,
}

/// Shared objects plus the processes operating on them, executed one atomic
/// step at a time.
#[derive(Clone, Debug)]
pub struct World {
    programs: Arc<[ProcessProgram]>,
    object_names: Arc<[String]>,
    config: Config,
    history: History,
    op_history: History,
    counters: Vec<Counters>,
}

impl World {
    /// `op_object` names the implemented object in the high-level history.
    pub fn new(
        objects: Vec<(String, SharedObject)>,
        programs: Vec<ProcessProgram>,
        op_object: &str,
    ) -> Result<World, SimError> {
        let (names, states): (Vec<String>, Vec<SharedObject>) = objects.into_iter().unzip();
        let object_names: Arc<[String]> = names.into();
        for (i, p) in programs.iter().enumerate() {
            if programs[..i].iter().any(|q| q.process == p.process) {
                return Err(SimError::DuplicateProcess(p.process));
            }
        }
        let procs = programs
            .iter()
            .map(|p| ProcState { pc: 0, locals: SmallVec::from_elem(Value::Bottom, p.locals), status: Status::Running })
            .collect();
        let mut world = World {
            counters: vec![Counters::default(); programs.len()],
            programs: programs.into(),
            history: History::new(object_names.clone()),
            op_history: History::new(vec![op_object.to_string()].into()),
            object_names,
            config: Config { objects: states, procs },
        };
        for slot in 0..world.programs.len() {
            world.settle(slot)?;
        }
        Ok(world)
    }

    pub fn processes(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.programs.iter().map(|p| p.process)
    }

    pub fn programs(&self) -> &[ProcessProgram] {
        &self.programs
    }

    pub fn slot_of(&self, p: ProcessId) -> Option<usize> {
        self.programs.iter().position(|prog| prog.process == p)
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn op_history(&self) -> &History {
        &self.op_history
    }

    pub fn object_names(&self) -> &[String] {
        &self.object_names
    }

    pub fn object(&self, id: ObjectId) -> &SharedObject {
        &self.config.objects[id.0]
    }

    pub fn object_id(&self, name: &str) -> Option<ObjectId> {
        self.object_names.iter().position(|n| n == name).map(ObjectId)
    }

    pub fn counters(&self, p: ProcessId) -> Option<&Counters> {
        self.slot_of(p).map(|s| &self.counters[s])
    }

    pub fn status(&self, p: ProcessId) -> Option<Status> {
        self.slot_of(p).map(|s| self.config.procs[s].status)
    }

    pub fn is_running(&self, p: ProcessId) -> bool {
        self.status(p) == Some(Status::Running)
    }

    /// Processes that may take the next step, in program order.
    pub fn running(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.programs
            .iter()
            .zip(&self.config.procs)
            .filter(|(_, s)| s.status == Status::Running)
            .map(|(p, _)| p.process)
    }

    pub fn is_terminal(&self) -> bool {
        self.running().next().is_none()
    }

    /// Per-process return values; `None` for crashed or unfinished processes.
    pub fn returns(&self) -> Vec<(ProcessId, Option<Value>)> {
        self.programs
            .iter()
            .zip(&self.config.procs)
            .map(|(p, s)| match s.status {
                Status::Returned(v) => (p.process, Some(v)),
                _ => (p.process, None),
            })
            .collect()
    }

    fn admissible(&self, p: ProcessId, position: Option<usize>) -> Result<usize, SimError> {
        let reject = |reason| SimError::Inadmissible { position, process: p, reason };
        let slot = self.slot_of(p).ok_or(reject(Inadmissible::Unknown))?;
        match self.config.procs[slot].status {
            Status::Running => Ok(slot),
            Status::Crashed => Err(reject(Inadmissible::Crashed)),
            Status::Returned(_) => Err(reject(Inadmissible::Terminated)),
        }
    }

    /// Executes exactly one atomic base-object operation of `p`.
    pub fn step(&mut self, p: ProcessId) -> Result<(), SimError> {
        self.step_at(p, None)
    }

    pub(crate) fn step_at(&mut self, p: ProcessId, position: Option<usize>) -> Result<(), SimError> {
        let slot = self.admissible(p, position)?;
        let mut fuel = LOCAL_FUEL;
        loop {
            if self.config.procs[slot].status != Status::Running {
                break;
            }
            let pc = self.config.procs[slot].pc;
            let instr = self.programs[slot].code.get(pc).cloned().ok_or_else(|| self.fault(slot, "fell off the end"))?;
            if instr.is_step() {
                self.exec_step(slot, &instr)?;
                self.config.procs[slot].pc += 1;
                break;
            }
            self.exec_local(slot, &instr)?;
            fuel -= 1;
            if fuel == 0 {
                return Err(self.fault(slot, "local computation does not reach a step"));
            }
        }
        self.settle(slot)
    }

    /// Permanently stops `p` at the current step boundary.
    pub fn crash(&mut self, p: ProcessId) -> Result<(), SimError> {
        self.crash_at(p, None)
    }

    pub(crate) fn crash_at(&mut self, p: ProcessId, position: Option<usize>) -> Result<(), SimError> {
        let slot = self.admissible(p, position)?;
        self.config.procs[slot].status = Status::Crashed;
        Ok(())
    }

    /// Runs local instructions eagerly, stopping before the next atomic step
    /// or the next operation boundary.
    fn settle(&mut self, slot: usize) -> Result<(), SimError> {
        let mut fuel = LOCAL_FUEL;
        while self.config.procs[slot].status == Status::Running {
            let pc = self.config.procs[slot].pc;
            let instr = self.programs[slot].code.get(pc).cloned().ok_or_else(|| self.fault(slot, "fell off the end"))?;
            if instr.is_step() || matches!(instr, Instr::Begin(_)) {
                break;
            }
            self.exec_local(slot, &instr)?;
            fuel -= 1;
            if fuel == 0 {
                return Err(self.fault(slot, "local computation does not reach a step"));
            }
        }
        Ok(())
    }

    fn fault(&self, slot: usize, reason: &str) -> SimError {
        SimError::ProgramFault {
            process: self.programs[slot].process,
            pc: self.config.procs[slot].pc,
            reason: reason.to_string(),
        }
    }

    fn eval(&self, slot: usize, o: Operand) -> Value {
        match o {
            Operand::Const(v) => v,
            Operand::Local(l) => self.config.procs[slot].locals[l],
        }
    }

    fn exec_local(&mut self, slot: usize, instr: &Instr) -> Result<(), SimError> {
        let process = self.programs[slot].process;
        let next = self.config.procs[slot].pc + 1;
        match instr {
            Instr::Set { dest, src } => {
                let v = self.eval(slot, *src);
                self.config.procs[slot].locals[*dest] = v;
            }
            Instr::Arith { dest, lhs, op, rhs } => {
                let (l, r) = (self.eval(slot, *lhs), self.eval(slot, *rhs));
                let (Some(l), Some(r)) = (l.as_nat(), r.as_nat()) else {
                    return Err(self.fault(slot, "arithmetic on a non-natural value"));
                };
                let v = match op {
                    ArithOp::Add => l.checked_add(r),
                    ArithOp::Sub => l.checked_sub(r),
                }
                .ok_or_else(|| self.fault(slot, "arithmetic overflow"))?;
                self.config.procs[slot].locals[*dest] = Value::Nat(v);
            }
            Instr::JumpIf { lhs, cmp, rhs, target } => {
                let taken = cmp.eval(self.eval(slot, *lhs), self.eval(slot, *rhs));
                self.config.procs[slot].pc = if taken { *target } else { next };
                return Ok(());
            }
            Instr::Jump(target) => {
                self.config.procs[slot].pc = *target;
                return Ok(());
            }
            Instr::Begin(inv) => {
                if self.counters[slot].current.is_some() {
                    return Err(self.fault(slot, "operation begun inside another"));
                }
                self.op_history.push(process, ObjectId(0), EventKind::Invoke(inv.clone()));
                self.counters[slot].current = Some((inv.clone(), 0));
            }
            Instr::End(result) => {
                let v = self.eval(slot, *result);
                let (invocation, steps) =
                    self.counters[slot].current.take().ok_or_else(|| self.fault(slot, "end without begin"))?;
                self.op_history.push(process, ObjectId(0), EventKind::Response(v));
                self.counters[slot].completed.push(OpRecord { invocation, response: v, steps });
            }
            Instr::Return(result) => {
                let v = self.eval(slot, *result);
                self.config.procs[slot].status = Status::Returned(v);
                return Ok(());
            }
            Instr::Call { .. } | Instr::RefreshOwners { .. } => unreachable!("atomic steps are not local"),
        }
        self.config.procs[slot].pc = next;
        Ok(())
    }

    fn exec_step(&mut self, slot: usize, instr: &Instr) -> Result<(), SimError> {
        let process = self.programs[slot].process;
        let (object, op, dest) = match instr {
            Instr::Call { object, op, value, dest } => {
                let op = match value {
                    None => op.clone(),
                    Some(o) => {
                        let v = self.eval(slot, *o);
                        op.with_value(v).ok_or_else(|| self.fault(slot, "operand does not fit the invocation"))?
                    }
                };
                (*object, op, *dest)
            }
            Instr::RefreshOwners { asset, account, owner, registers } => {
                let mut owners = OwnerSet::singleton(*owner);
                for (j, r) in registers.iter().enumerate() {
                    if let SharedObject::Register(reg) = self.object(*r) {
                        if matches!(reg.value, Value::Nat(v) if v > 0) {
                            owners.insert(ProcessId(j));
                        }
                    } else {
                        return Err(self.fault(slot, "owner refresh reads a non-register"));
                    }
                }
                (*asset, Invocation::SetOwners { account: *account, owners }, None)
            }
            _ => unreachable!(),
        };
        let target = self.config.objects.get(object.0).ok_or_else(|| self.fault(slot, "unknown object"))?;
        let (next, response) = target.apply(process, &op).map_err(|source| SimError::Object {
            process,
            object: self.object_names[object.0].clone(),
            source,
        })?;
        self.config.objects[object.0] = next;
        self.history.push(process, object, EventKind::Invoke(op));
        self.history.push(process, object, EventKind::Response(response));
        if let Some(d) = dest {
            self.config.procs[slot].locals[d] = response;
        }
        let c = &mut self.counters[slot];
        c.steps += 1;
        if let Some((_, n)) = &mut c.current {
            *n += 1;
        }
        Ok(())
    }

    /// Runs `schedule` on a copy of this world.
    pub fn run(&self, schedule: &Schedule) -> Result<World, SimError> {
        let mut w = self.clone();
        w.run_in_place(schedule)?;
        Ok(w)
    }

    pub fn run_in_place(&mut self, schedule: &Schedule) -> Result<(), SimError> {
        if let Some(c) = schedule.crashes.iter().find(|c| c.position > schedule.steps.len()) {
            return Err(SimError::Inadmissible {
                position: Some(c.position),
                process: c.process,
                reason: Inadmissible::OutOfRange,
            });
        }
        for pos in 0..=schedule.steps.len() {
            for c in schedule.crashes.iter().filter(|c| c.position == pos) {
                self.crash_at(c.process, Some(pos))?;
            }
            if let Some(&p) = schedule.steps.get(pos) {
                self.step_at(p, Some(pos))?;
            }
        }
        Ok(())
    }
}
