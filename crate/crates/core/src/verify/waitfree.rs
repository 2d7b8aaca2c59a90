//! Step-bound checking: no operation of a live process may take more atomic
//! steps than its bound, under any schedule or crash pattern.

use crate::objects::Invocation;
use crate::sim::{next_events, ExploreOptions, Schedule, ScheduleEvent, World};

use super::{Stats, Verdict, VerifyError};

#[derive(Clone, Debug, PartialEq)]
pub struct WaitFreeOutcome {
    pub verdict: Verdict,
    pub max_op_steps: usize,
}

/// Steps taken by `slot`'s current operation, or since its last completed
/// operation when the program does not mark operations.
fn current_steps(world: &World, p: crate::objects::ProcessId) -> (Option<Invocation>, usize) {
    let c = world.counters(p).expect("process of this world");
    match &c.current {
        Some((inv, n)) => (Some(inv.clone()), *n),
        None => (None, c.steps - c.completed.iter().map(|r| r.steps).sum::<usize>()),
    }
}

/// Exhaustive depth-first check. The bound of an operation is
/// `op_bound(invocation)` when given, else the program's declared bound,
/// else its loop-free step count. A program with a loop and no declared
/// bound fails immediately.
pub fn check_waitfree(
    world: &World,
    op_bound: Option<&dyn Fn(&Invocation) -> usize>,
    opts: ExploreOptions,
) -> Result<WaitFreeOutcome, VerifyError> {
    const CHECK: &str = "waitfree";
    let mut declared = Vec::new();
    for prog in world.programs() {
        match prog.step_bound.or_else(|| prog.static_step_count()) {
            Some(b) => declared.push((prog.process, b)),
            None => {
                let v = Verdict::fail(CHECK, format!("{} loops without a declared step bound", prog.process), Stats::default())
                    .with_schedule(Schedule::default());
                return Ok(WaitFreeOutcome { verdict: v, max_op_steps: 0 });
            }
        }
    }
    let bound_of = |p, inv: &Option<Invocation>| match (op_bound, inv) {
        (Some(f), Some(inv)) => f(inv),
        _ => declared.iter().find(|(q, _)| *q == p).map(|(_, b)| *b).unwrap_or(0),
    };

    struct Frame {
        world: World,
        choices: Vec<ScheduleEvent>,
        next: usize,
    }
    let mut stats = Stats { schedules_explored: 0, configurations: 1 };
    let mut max_op_steps = 0;
    let mut events: Vec<ScheduleEvent> = Vec::new();
    let mut stack =
        vec![Frame { world: world.clone(), choices: next_events(world, &events, &opts), next: 0 }];
    while let Some(top) = stack.last_mut() {
        if top.choices.is_empty() {
            stats.schedules_explored += 1;
            if stats.schedules_explored > opts.max_schedules {
                return Err(VerifyError::Resource { what: "schedules", cap: opts.max_schedules });
            }
        }
        if top.next == top.choices.len() {
            stack.pop();
            events.pop();
            continue;
        }
        let event = top.choices[top.next];
        top.next += 1;
        let mut w = top.world.clone();
        match event {
            ScheduleEvent::Step(p) => w.step(p)?,
            ScheduleEvent::Crash(p) => w.crash(p)?,
        }
        events.push(event);
        stats.configurations += 1;
        if let ScheduleEvent::Step(p) = event {
            let (inv, steps) = current_steps(&w, p);
            let finished = w.counters(p).and_then(|c| c.completed.last()).map(|r| (Some(r.invocation.clone()), r.steps));
            // an operation that just completed is measured on its record
            let (inv, steps) = match finished {
                Some((i, s)) if inv.is_none() && steps == 0 => (i, s),
                _ => (inv, steps),
            };
            max_op_steps = max_op_steps.max(steps);
            let bound = bound_of(p, &inv);
            if steps > bound {
                let what = inv.map(|i| i.method()).unwrap_or("program");
                let v = Verdict::fail(CHECK, format!("{p}: {what} took {steps} steps, bound {bound}"), stats)
                    .with_schedule(Schedule::from_events(&events))
                    .with_history(w.history().clone());
                return Ok(WaitFreeOutcome { verdict: v, max_op_steps });
            }
        }
        let choices = next_events(&w, &events, &opts);
        stack.push(Frame { world: w, choices, next: 0 });
    }
    Ok(WaitFreeOutcome { verdict: Verdict::pass(CHECK, stats), max_op_steps })
}
