use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::objects::ProcessId;

use super::{SimError, World};

/// Permanent stop of `process` before step `position` of the schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CrashPoint {
    pub process: ProcessId,
    pub position: usize,
}

/// Step order plus crash points.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Schedule {
    pub steps: Vec<ProcessId>,
    pub crashes: Vec<CrashPoint>,
}

/// One scheduler decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScheduleEvent {
    Step(ProcessId),
    Crash(ProcessId),
}

impl Schedule {
    pub fn solo(p: ProcessId, steps: usize) -> Self {
        Schedule { steps: vec![p; steps], crashes: Vec::new() }
    }

    pub fn from_events(events: &[ScheduleEvent]) -> Self {
        let mut s = Schedule::default();
        for e in events {
            match *e {
                ScheduleEvent::Step(p) => s.steps.push(p),
                ScheduleEvent::Crash(p) => s.crashes.push(CrashPoint { process: p, position: s.steps.len() }),
            }
        }
        s
    }

    /// Crashes at a position come before the step at that position.
    pub fn events(&self) -> Vec<ScheduleEvent> {
        let mut out = Vec::with_capacity(self.steps.len() + self.crashes.len());
        for pos in 0..=self.steps.len() {
            out.extend(self.crashes.iter().filter(|c| c.position == pos).map(|c| ScheduleEvent::Crash(c.process)));
            if let Some(&p) = self.steps.get(pos) {
                out.push(ScheduleEvent::Step(p));
            }
        }
        out
    }

    pub fn crashed(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.crashes.iter().map(|c| c.process)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExploreOptions {
    /// Also enumerate every crash-prefix variant.
    pub crashes: bool,
    pub max_crashes: Option<usize>,
    /// Cap on the number of maximal schedules produced.
    pub max_schedules: usize,
    /// Guard against programs whose step count is not actually bounded.
    pub max_steps_per_process: usize,
}

pub const DEFAULT_MAX_SCHEDULES: usize = 5_000_000;

impl Default for ExploreOptions {
    fn default() -> Self {
        Self { crashes: false, max_crashes: None, max_schedules: DEFAULT_MAX_SCHEDULES, max_steps_per_process: 1_000 }
    }
}

impl ExploreOptions {
    pub fn with_crashes(mut self, on: bool) -> Self {
        self.crashes = on;
        self
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.max_schedules = cap;
        self
    }
}

/// A maximal schedule together with the world it produces.
#[derive(Clone, Debug)]
pub struct Explored {
    pub schedule: Schedule,
    pub world: World,
}

struct Frame {
    world: World,
    choices: Vec<ScheduleEvent>,
    next: usize,
}

/// Depth-first enumeration of every maximal admissible schedule, in
/// lexicographic order of scheduler events (`Step` before `Crash`, lower
/// process index first).
///
/// A crash of `p` is only emitted right after a step of `p`, or at the very
/// start in increasing process order; every distinct outcome (interleaving
/// plus set of crashed processes) is therefore produced exactly once.
pub struct ScheduleEnumerator {
    opts: ExploreOptions,
    stack: Vec<Frame>,
    events: Vec<ScheduleEvent>,
    produced: usize,
    visited: usize,
    failed: bool,
}

/// Every maximal admissible schedule of `world`.
pub fn enumerate_schedules(world: &World, opts: ExploreOptions) -> Result<ScheduleEnumerator, SimError> {
    if let Some(p) = world.programs().iter().find(|p| !p.is_statically_bounded()) {
        return Err(SimError::Unbounded(p.process));
    }
    Ok(ScheduleEnumerator::unchecked(world, opts))
}

impl ScheduleEnumerator {
    /// Skips the static-boundedness check; runaway programs are caught by
    /// `max_steps_per_process`.
    pub fn unchecked(world: &World, opts: ExploreOptions) -> Self {
        let mut this = ScheduleEnumerator { opts, stack: Vec::new(), events: Vec::new(), produced: 0, visited: 1, failed: false };
        let choices = this.choices(world);
        this.stack.push(Frame { world: world.clone(), choices, next: 0 });
        this
    }

    pub fn produced(&self) -> usize {
        self.produced
    }

    /// Configurations entered so far, counting the initial one.
    pub fn visited(&self) -> usize {
        self.visited
    }

    fn choices(&self, world: &World) -> Vec<ScheduleEvent> {
        next_events(world, &self.events, &self.opts)
    }
}

/// Scheduler choices after `prefix`, in lexicographic order. Crashes follow
/// the canonical rule of [`ScheduleEnumerator`].
pub fn next_events(world: &World, prefix: &[ScheduleEvent], opts: &ExploreOptions) -> Vec<ScheduleEvent> {
    let mut out: Vec<ScheduleEvent> = world.running().map(ScheduleEvent::Step).collect();
    let crashes = prefix.iter().filter(|e| matches!(e, ScheduleEvent::Crash(_))).count();
    if opts.crashes && opts.max_crashes.is_none_or(|m| crashes < m) {
        let only_crashes_so_far = prefix.iter().all(|e| matches!(e, ScheduleEvent::Crash(_)));
        for p in world.running() {
            let allowed = match prefix.last() {
                Some(ScheduleEvent::Step(q)) => *q == p,
                Some(ScheduleEvent::Crash(q)) => only_crashes_so_far && *q < p,
                None => true,
            };
            if allowed {
                out.push(ScheduleEvent::Crash(p));
            }
        }
    }
    out
}

impl Iterator for ScheduleEnumerator {
    type Item = Result<Explored, SimError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let top = self.stack.last_mut()?;
            if top.choices.is_empty() {
                let frame = self.stack.pop().expect("non-empty stack");
                let schedule = Schedule::from_events(&self.events);
                self.events.pop();
                self.produced += 1;
                if self.produced > self.opts.max_schedules {
                    self.failed = true;
                    return Some(Err(SimError::Resource { what: "schedules", cap: self.opts.max_schedules }));
                }
                return Some(Ok(Explored { schedule, world: frame.world }));
            }
            if top.next == top.choices.len() {
                self.stack.pop();
                self.events.pop();
                continue;
            }
            let event = top.choices[top.next];
            top.next += 1;
            let mut world = top.world.clone();
            let applied = match event {
                ScheduleEvent::Step(p) => world.step(p),
                ScheduleEvent::Crash(p) => world.crash(p),
            };
            if let Err(e) = applied {
                self.failed = true;
                return Some(Err(e));
            }
            if let ScheduleEvent::Step(p) = event {
                if world.counters(p).is_some_and(|c| c.steps > self.opts.max_steps_per_process) {
                    self.failed = true;
                    return Some(Err(SimError::Resource {
                        what: "steps per process",
                        cap: self.opts.max_steps_per_process,
                    }));
                }
            }
            self.events.push(event);
            self.visited += 1;
            let choices = self.choices(&world);
            self.stack.push(Frame { world, choices, next: 0 });
        }
    }
}

/// A uniformly random maximal schedule: each step picks one of the running
/// processes. With `crash_probability > 0` a chosen process instead crashes
/// with that probability.
pub fn sample_run(world: &World, seed: u64, crash_probability: f64, max_steps: usize) -> Result<Explored, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = world.clone();
    let mut events = Vec::new();
    loop {
        let running: Vec<ProcessId> = w.running().collect();
        if running.is_empty() {
            break;
        }
        if events.len() >= max_steps {
            return Err(SimError::Resource { what: "sampled schedule length", cap: max_steps });
        }
        let p = running[rng.random_range(0..running.len())];
        if crash_probability > 0.0 && rng.random_bool(crash_probability.min(1.0)) {
            w.crash(p)?;
            events.push(ScheduleEvent::Crash(p));
        } else {
            w.step(p)?;
            events.push(ScheduleEvent::Step(p));
        }
    }
    Ok(Explored { schedule: Schedule::from_events(&events), world: w })
}

/// A seeded random crash-free maximal schedule.
pub fn sample_schedule(world: &World, seed: u64) -> Result<Schedule, SimError> {
    sample_run(world, seed, 0.0, 1_000_000).map(|e| e.schedule)
}
