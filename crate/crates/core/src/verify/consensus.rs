//! Termination, validity and agreement over a set of schedules.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::objects::Value;
use crate::sim::{enumerate_schedules, sample_run, ExploreOptions, Status, World};

use super::{ExploreMode, Stats, Verdict, VerifyError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Clause {
    Termination,
    Validity,
    Agreement,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Clause::Termination => "termination",
            Clause::Validity => "validity",
            Clause::Agreement => "agreement",
        })
    }
}

/// Checks a finished run. Crashed processes are exempt from termination.
pub fn evaluate_run(world: &World, proposals: &[Value]) -> Option<(Clause, String)> {
    let mut decided: Option<(crate::objects::ProcessId, Value)> = None;
    for p in world.processes().collect::<Vec<_>>() {
        match world.status(p) {
            Some(Status::Crashed) => {}
            Some(Status::Running) | None => return Some((Clause::Termination, format!("{p} did not return"))),
            Some(Status::Returned(v)) => {
                if !proposals.contains(&v) {
                    return Some((Clause::Validity, format!("{p} returned {v}, which nobody proposed")));
                }
                match decided {
                    Some((q, w)) if w != v => {
                        return Some((Clause::Agreement, format!("{q} decided {w} but {p} decided {v}")));
                    }
                    None => decided = Some((p, v)),
                    _ => {}
                }
            }
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusOutcome {
    pub verdict: Verdict,
    /// Largest number of atomic steps any completed operation took.
    pub max_op_steps: usize,
}

fn op_steps(world: &World) -> usize {
    world
        .processes()
        .filter_map(|p| world.counters(p))
        .flat_map(|c| c.completed.iter().map(|r| r.steps))
        .max()
        .unwrap_or(0)
}

/// Runs the check in lexicographic schedule order and stops at the first
/// violating schedule. With sampling, crashes are injected with probability
/// 0.1 per scheduling decision when `opts.crashes` is set.
pub fn check_consensus(
    world: &World,
    proposals: &[Value],
    mode: &ExploreMode,
    opts: ExploreOptions,
) -> Result<ConsensusOutcome, VerifyError> {
    const CHECK: &str = "consensus";
    let mut stats = Stats::default();
    let mut max_op_steps = 0;
    let mut visit = |w: &World, stats: Stats| -> Option<Verdict> {
        max_op_steps = max_op_steps.max(op_steps(w));
        evaluate_run(w, proposals).map(|(clause, detail)| {
            Verdict::fail(CHECK, format!("{clause}: {detail}"), stats).with_history(w.op_history().clone())
        })
    };
    match mode {
        ExploreMode::Exhaustive => {
            let mut it = enumerate_schedules(world, opts)?;
            while let Some(run) = it.next() {
                let run = run?;
                stats = Stats { schedules_explored: it.produced(), configurations: it.visited() };
                if let Some(v) = visit(&run.world, stats) {
                    return Ok(ConsensusOutcome { verdict: v.with_schedule(run.schedule), max_op_steps });
                }
            }
        }
        ExploreMode::Sampled { count, seed } => {
            let mut seeds = ChaCha8Rng::seed_from_u64(*seed);
            let crash_probability = if opts.crashes { 0.1 } else { 0.0 };
            for i in 0..*count {
                let run = sample_run(world, seeds.random(), crash_probability, opts.max_steps_per_process * 64)?;
                stats.schedules_explored = i + 1;
                stats.configurations += run.schedule.steps.len() + run.schedule.crashes.len() + 1;
                if let Some(v) = visit(&run.world, stats) {
                    return Ok(ConsensusOutcome { verdict: v.with_schedule(run.schedule), max_op_steps });
                }
            }
        }
        ExploreMode::Explicit(schedule) => {
            let w = world.run(schedule)?;
            stats = Stats { schedules_explored: 1, configurations: schedule.steps.len() + schedule.crashes.len() + 1 };
            if let Some(v) = visit(&w, stats) {
                return Ok(ConsensusOutcome { verdict: v.with_schedule(schedule.clone()), max_op_steps });
            }
        }
    }
    Ok(ConsensusOutcome { verdict: Verdict::pass(CHECK, stats), max_op_steps })
}
