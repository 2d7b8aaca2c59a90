//! Valency of reachable protocol configurations: which decisions remain
//! reachable from each configuration, and which bivalent configurations
//! are critical.

use std::collections::{HashMap, VecDeque};

use crate::objects::Value;
use crate::sim::{next_events, Config, ExploreOptions, Schedule, ScheduleEvent, Status, World};

use super::VerifyError;

pub const DEFAULT_MAX_CONFIGS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ValencyOptions {
    pub crashes: bool,
    pub max_configs: usize,
}

impl Default for ValencyOptions {
    fn default() -> Self {
        Self { crashes: false, max_configs: DEFAULT_MAX_CONFIGS }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Valence {
    /// No decision is reachable (every continuation crashes or returns ⊥
    /// only when ⊥ is not counted).
    Undecided,
    Univalent(Value),
    Bivalent,
}

#[derive(Clone, Debug)]
pub struct ValencyNode {
    pub config: Config,
    /// Values already returned by some process in this configuration.
    pub returned: Vec<Value>,
    /// Every decision reachable from here, sorted.
    pub reachable: Vec<Value>,
    pub successors: Vec<(ScheduleEvent, usize)>,
    /// Discovery parent, for reconstructing a path from the root.
    parent: Option<(usize, ScheduleEvent)>,
}

#[derive(Clone, Debug)]
pub struct ValencyMap {
    pub nodes: Vec<ValencyNode>,
    index: HashMap<Config, usize>,
}

fn returned(w: &World) -> Vec<Value> {
    let mut v: Vec<Value> = w
        .processes()
        .filter_map(|p| match w.status(p) {
            Some(Status::Returned(v)) => Some(v),
            _ => None,
        })
        .collect();
    v.sort();
    v.dedup();
    v
}

fn merge(into: &mut Vec<Value>, from: &[Value]) -> bool {
    let before = into.len();
    for v in from {
        if let Err(pos) = into.binary_search(v) {
            into.insert(pos, *v);
        }
    }
    into.len() != before
}

/// Breadth-first exploration of every configuration reachable from
/// `world`, followed by a fixpoint propagation of reachable decisions.
pub fn classify_valency(world: &World, opts: ValencyOptions) -> Result<ValencyMap, VerifyError> {
    let explore = ExploreOptions { crashes: opts.crashes, ..ExploreOptions::default() };
    let mut map = ValencyMap { nodes: Vec::new(), index: HashMap::new() };
    let mut queue: VecDeque<(usize, World)> = VecDeque::new();
    let root = returned(world);
    map.index.insert(world.config().clone(), 0);
    map.nodes.push(ValencyNode {
        config: world.config().clone(),
        reachable: root.clone(),
        returned: root,
        successors: Vec::new(),
        parent: None,
    });
    queue.push_back((0, world.clone()));
    while let Some((id, w)) = queue.pop_front() {
        // crash placement is not canonicalized here: any running process
        // may crash at any configuration
        let mut events: Vec<ScheduleEvent> = next_events(&w, &[], &ExploreOptions { crashes: false, ..explore });
        if opts.crashes {
            events.extend(w.running().map(ScheduleEvent::Crash));
        }
        for event in events {
            let mut next = w.clone();
            match event {
                ScheduleEvent::Step(p) => next.step(p)?,
                ScheduleEvent::Crash(p) => next.crash(p)?,
            }
            let target = match map.index.get(next.config()) {
                Some(&t) => t,
                None => {
                    let t = map.nodes.len();
                    if t >= opts.max_configs {
                        return Err(VerifyError::Resource { what: "configurations", cap: opts.max_configs });
                    }
                    let r = returned(&next);
                    map.index.insert(next.config().clone(), t);
                    map.nodes.push(ValencyNode {
                        config: next.config().clone(),
                        reachable: r.clone(),
                        returned: r,
                        successors: Vec::new(),
                        parent: Some((id, event)),
                    });
                    queue.push_back((t, next));
                    t
                }
            };
            map.nodes[id].successors.push((event, target));
        }
    }
    loop {
        let mut changed = false;
        for id in (0..map.nodes.len()).rev() {
            let succ: Vec<usize> = map.nodes[id].successors.iter().map(|&(_, t)| t).collect();
            for t in succ {
                let from = map.nodes[t].reachable.clone();
                changed |= merge(&mut map.nodes[id].reachable, &from);
            }
        }
        if !changed {
            break;
        }
    }
    Ok(map)
}

impl ValencyMap {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn id_of(&self, c: &Config) -> Option<usize> {
        self.index.get(c).copied()
    }

    pub fn valence(&self, id: usize) -> Valence {
        match self.nodes[id].reachable.as_slice() {
            [] => Valence::Undecided,
            [v] => Valence::Univalent(*v),
            _ => Valence::Bivalent,
        }
    }

    /// Bivalent configurations all of whose successors are univalent.
    pub fn critical(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&id| {
                self.valence(id) == Valence::Bivalent
                    && !self.nodes[id].successors.is_empty()
                    && self.nodes[id].successors.iter().all(|&(_, t)| matches!(self.valence(t), Valence::Univalent(_)))
            })
            .collect()
    }

    /// Events leading from the initial configuration to `id`.
    pub fn path_to(&self, id: usize) -> Vec<ScheduleEvent> {
        let mut out = Vec::new();
        let mut cur = id;
        while let Some((parent, e)) = self.nodes[cur].parent {
            out.push(e);
            cur = parent;
        }
        out.reverse();
        out
    }

    /// A shortest continuation from `id` to a configuration in which some
    /// process has returned `v`.
    pub fn witness(&self, id: usize, v: Value) -> Option<Vec<ScheduleEvent>> {
        let mut prev: HashMap<usize, (usize, ScheduleEvent)> = HashMap::new();
        let mut queue = VecDeque::from([id]);
        let mut seen = vec![false; self.nodes.len()];
        seen[id] = true;
        while let Some(cur) = queue.pop_front() {
            if self.nodes[cur].returned.contains(&v) {
                let mut out = Vec::new();
                let mut c = cur;
                while c != id {
                    let (p, e) = prev[&c];
                    out.push(e);
                    c = p;
                }
                out.reverse();
                return Some(out);
            }
            for &(e, t) in &self.nodes[cur].successors {
                if !seen[t] && self.nodes[t].reachable.contains(&v) {
                    seen[t] = true;
                    prev.insert(t, (cur, e));
                    queue.push_back(t);
                }
            }
        }
        None
    }

    /// The schedule reaching `id` followed by its witness for `v`.
    pub fn witness_schedule(&self, id: usize, v: Value) -> Option<Schedule> {
        let mut events = self.path_to(id);
        events.extend(self.witness(id, v)?);
        Some(Schedule::from_events(&events))
    }
}
