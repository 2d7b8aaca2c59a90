//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Exits nonzero when a criterion outside `EXPECTED_RED` fails, or when an
//! expected-red criterion unexpectedly passes.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tokensync::algorithms::{failed_underlying_transfers, ConsensusScenario, RestrictedTokenInstance, Variant};
use tokensync::analysis::{class_k, enabled_spenders, escalation_witness, sync_levels, unique_transfer};
use tokensync::cli::{execute, Request};
use tokensync::objects::{AccountId, Invocation, ProcessId, SharedObject, TokenState, Value};
use tokensync::sim::{sample_run, ExploreOptions, Schedule, ScheduleEvent};
use tokensync::verify::{
    check_consensus, check_linearizable, check_waitfree, classify_valency, evaluate_run, pair_sweep, ExploreMode,
    LinOptions, PairClass, SweepConfig, Valence, ValencyOptions,
};

use common::{brute_force_linearizable, oracle_states, random_token_history};

// ---------------------------------------------------------------------------
// pinned limits

const REPLAY_LIMIT: Duration = Duration::from_secs(1);
const CONSENSUS_LIMIT: Duration = Duration::from_secs(60);
const SWEEP_LIMIT: Duration = Duration::from_secs(30);
const VALENCY_LIMIT: Duration = Duration::from_secs(10);
const CORPUS_SIZE: usize = 1000;
const CORPUS_SEED: u64 = 1;
const CORPUS_MAX_OPS: usize = 5;
const ORACLE_HISTORIES: usize = 500;
const ORACLE_MAX_EVENTS: usize = 8;
const ORACLE_SEED: u64 = 7;

/// Criteria known to fail; see the README.
const EXPECTED_RED: &[&str] = &["6a"];

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn line(id: &'static str, pass: bool, detail: impl Into<String>) -> Line {
    Line { id, pass, detail: detail.into() }
}

fn p(i: usize) -> ProcessId {
    ProcessId(i)
}

fn a(i: usize) -> AccountId {
    AccountId(i)
}

/// The owner of account 0 holds `balance`; process `j + 1` has allowance
/// `allowances[j]` on it. Process `i` proposes `i`.
fn canonical(balance: u64, allowances: &[u64]) -> ConsensusScenario {
    let n = allowances.len() + 1;
    let mut balances = vec![0; n];
    balances[0] = balance;
    let mut s = TokenState::with_balances(balances).unwrap();
    for (j, &v) in allowances.iter().enumerate() {
        s.set_allowance(a(0), p(j + 1), v);
    }
    let proposals: BTreeMap<_, _> = (0..n).map(|i| (p(i), i as u64)).collect();
    ConsensusScenario::new(s, a(0), &proposals).unwrap()
}

// ---------------------------------------------------------------------------
// 1

fn example_replay() -> Line {
    let t = Instant::now();
    let mut s = TokenState::with_balances(vec![10, 0, 0]).unwrap();
    let steps = [
        (p(0), Invocation::TotalSupply, Value::Nat(10)),
        (p(0), Invocation::Transfer { to: a(1), value: 3 }, Value::Bool(true)),
        (p(1), Invocation::Approve { spender: p(2), value: 5 }, Value::Bool(true)),
        (p(2), Invocation::TransferFrom { from: a(1), to: a(2), value: 5 }, Value::Bool(false)),
        (p(2), Invocation::TransferFrom { from: a(1), to: a(0), value: 1 }, Value::Bool(true)),
    ];
    let mut responses = Vec::new();
    for (caller, op, _) in &steps {
        let (next, r) = s.apply(*caller, op).unwrap();
        responses.push(r);
        s = next;
    }
    let want: Vec<Value> = steps.iter().map(|s| s.2).collect();
    let direct = responses == want && s.balances() == [8, 2, 0] && s.allowance(a(1), p(2)) == 4;
    let out = execute(&Request::ReplayExample);
    let report = &out.report;
    let cli_final = &report["final"];
    let cli = report["pass"] == true
        && cli_final["balances"] == serde_json::json!({"a_A": 8, "a_B": 2, "a_C": 0})
        && cli_final["allowances"]["a_B"]["C"] == 4;
    let elapsed = t.elapsed();
    line(
        "1",
        direct && cli && elapsed < REPLAY_LIMIT,
        format!("balances {:?}, allowance(a_B,C)={}, responses {responses:?}, {elapsed:.2?}", s.balances(), s.allowance(a(1), p(2))),
    )
}

// ---------------------------------------------------------------------------
// 2 and 3

fn exhaustive_consensus() -> (Line, Line) {
    let mut ok2 = true;
    let mut ok3 = true;
    let mut d2 = Vec::new();
    let mut d3 = Vec::new();
    for (balance, allowances) in [(5, vec![5]), (10, vec![6, 6])] {
        let sc = canonical(balance, &allowances);
        sc.validate().unwrap();
        let w = sc.world().unwrap();
        let t = Instant::now();
        let out = check_consensus(&w, &sc.proposal_values(), &ExploreMode::Exhaustive, ExploreOptions::default().with_crashes(true));
        let elapsed = t.elapsed();
        match out {
            Ok(out) => {
                let v = &out.verdict;
                ok2 &= v.pass && elapsed < CONSENSUS_LIMIT;
                // every non-crashed process returned (termination holds) and
                // no completed propose overran the bound
                ok3 &= v.pass && out.max_op_steps <= sc.step_bound();
                d2.push(format!(
                    "k={}: {} schedules, {} configurations, {}, {elapsed:.2?}",
                    sc.k(),
                    v.stats.schedules_explored,
                    v.stats.configurations,
                    v.clause.as_deref().unwrap_or("no violation"),
                ));
                d3.push(format!("k={}: max {} steps, bound {}", sc.k(), out.max_op_steps, sc.step_bound()));
            }
            Err(e) => {
                ok2 = false;
                ok3 = false;
                d2.push(format!("k={}: {e}", sc.k()));
            }
        }
    }
    (line("2", ok2, d2.join("; ")), line("3", ok3, d3.join("; ")))
}

// ---------------------------------------------------------------------------
// 4

fn disagreement_control() -> Line {
    let sc = canonical(10, &[3, 4]);
    let w = sc.world_unchecked().unwrap();
    let proposals = sc.proposal_values();
    let out = check_consensus(&w, &proposals, &ExploreMode::Exhaustive, ExploreOptions::default().with_crashes(true)).unwrap();
    let v = out.verdict;
    let Some(schedule) = v.witness_schedule.clone().filter(|_| !v.pass) else {
        return line("4", false, "no violation found");
    };
    let clause = v.clause.unwrap_or_default();
    let replayed = w.run(&schedule).ok().and_then(|r| evaluate_run(&r, &proposals));
    let same = replayed.as_ref().is_some_and(|(c, d)| format!("{c}: {d}") == clause);
    line(
        "4",
        clause.starts_with("agreement") && same,
        format!(
            "k={} unique_transfer={}: {clause} after {} schedules, witness of {} steps replays {}",
            sc.k(),
            unique_transfer(sc.state(), a(0)).unwrap(),
            v.stats.schedules_explored,
            schedule.steps.len(),
            if same { "identically" } else { "differently" },
        ),
    )
}

// ---------------------------------------------------------------------------
// 5

fn overdrawn_allowance_control() -> Line {
    let sc = canonical(5, &[7]);
    let w = sc.world_unchecked().unwrap();
    let proposals = sc.proposal_values();
    let mut run = w.clone();
    let mut events = vec![ScheduleEvent::Crash(p(0))];
    run.crash(p(0)).unwrap();
    while run.is_running(p(1)) {
        run.step(p(1)).unwrap();
        events.push(ScheduleEvent::Step(p(1)));
    }
    let returned = run.returns().into_iter().find(|(q, _)| *q == p(1)).and_then(|(_, v)| v);
    let schedule = Schedule::from_events(&events);
    let out = check_consensus(&w, &proposals, &ExploreMode::Explicit(schedule), ExploreOptions::default()).unwrap();
    let clause = out.verdict.clause.unwrap_or_default();
    line(
        "5",
        returned == Some(Value::Bottom) && clause.starts_with("validity"),
        format!("p1 solo returned {}, flagged as '{clause}'", returned.map_or("nothing".into(), |v| v.to_string())),
    )
}

// ---------------------------------------------------------------------------
// 6

/// Random initial state in the restricted class (at most one non-owner
/// allowance per account) and a workload of at most `CORPUS_MAX_OPS` ops.
fn corpus_case(rng: &mut ChaCha8Rng) -> (TokenState, Vec<(ProcessId, Vec<Invocation>)>) {
    let mut s = TokenState::with_balances((0..3).map(|_| rng.random_range(0..4)).collect()).unwrap();
    for acct in 0..3 {
        let spender = (acct + 1 + rng.random_range(0..2)) % 3;
        if rng.random_bool(0.6) {
            s.set_allowance(a(acct), p(spender), rng.random_range(1..4));
        }
    }
    let mut work = Vec::new();
    let mut left = CORPUS_MAX_OPS;
    for proc in 0..3 {
        let count = rng.random_range(1..=2.min(left));
        left -= count;
        let ops = (0..count)
            .map(|_| match rng.random_range(0..5) {
                0 => Invocation::Transfer { to: a(rng.random_range(0..3)), value: rng.random_range(1..4) },
                1 | 2 => Invocation::TransferFrom {
                    from: a(rng.random_range(0..3)),
                    to: a(rng.random_range(0..3)),
                    value: rng.random_range(1..4),
                },
                3 => Invocation::Approve { spender: p(rng.random_range(0..3)), value: rng.random_range(0..3) },
                _ => Invocation::BalanceOf { account: a(rng.random_range(0..3)) },
            })
            .collect();
        work.push((p(proc), ops));
        if left == 0 {
            break;
        }
    }
    (s, work)
}

struct CorpusResult {
    histories: usize,
    success_path: usize,
    bad: usize,
    bad_success_path: usize,
    max_events: usize,
}

fn run_corpus(variant: Variant) -> CorpusResult {
    let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED);
    let mut r = CorpusResult { histories: 0, success_path: 0, bad: 0, bad_success_path: 0, max_events: 0 };
    for _ in 0..CORPUS_SIZE {
        let (s, work) = corpus_case(&mut rng);
        let inst = RestrictedTokenInstance::new(s, 2, variant).unwrap();
        let w = inst.world(&work).unwrap();
        let run = sample_run(&w, rng.random(), 0.0, 10_000).unwrap();
        let history = run.world.op_history();
        let success = failed_underlying_transfers(run.world.history()) == 0;
        let lin = check_linearizable(history, &inst.spec(), LinOptions::default()).unwrap().linearizable;
        r.histories += 1;
        r.max_events = r.max_events.max(history.len());
        r.success_path += success as usize;
        r.bad += !lin as usize;
        r.bad_success_path += (!lin && success) as usize;
    }
    r
}

fn restricted_strict() -> Line {
    let r = run_corpus(Variant::Strict);
    line(
        "6a",
        r.bad == 0,
        format!("strict: {}/{} histories not linearizable (≤ {} events)", r.bad, r.histories, r.max_events),
    )
}

fn restricted_literal() -> Line {
    let r = run_corpus(Variant::Literal);
    line(
        "6b",
        r.bad_success_path == 0 && r.success_path > 0,
        format!(
            "literal: {}/{} success-path histories not linearizable ({} failing overall)",
            r.bad_success_path, r.success_path, r.bad
        ),
    )
}

/// Every owner approve that would give a third enabled spender, run solo
/// through the implementation and applied to the sequential object.
fn approve_beyond_k() -> Line {
    let k = 2;
    let (mut attempts, mut refused) = (0, 0);
    for o in oracle_states(3, 2, 2) {
        let counts: Vec<usize> =
            (0..3).map(|acct| 1 + (0..3).filter(|&q| q != acct && o.allowance(acct, q) > 0).count()).collect();
        if counts.iter().any(|&c| c > k) {
            continue;
        }
        let s = o.to_token();
        for owner in 0..3 {
            if counts[owner] < k {
                continue;
            }
            for spender in (0..3).filter(|&q| q != owner && o.allowance(owner, q) == 0) {
                let op = Invocation::Approve { spender: p(spender), value: 1 };
                for variant in [Variant::Literal, Variant::Strict] {
                    let inst = RestrictedTokenInstance::new(s.clone(), k, variant).unwrap();
                    let (_, spec_r) = inst.spec().apply(p(owner), &op).unwrap();
                    let mut w = inst.world(&[(p(owner), vec![op.clone()])]).unwrap();
                    while w.is_running(p(owner)) {
                        w.step(p(owner)).unwrap();
                    }
                    let impl_r = w.counters(p(owner)).and_then(|c| c.completed.last()).map(|r| r.response);
                    attempts += 2;
                    refused += (spec_r == Value::Bool(false)) as usize + (impl_r == Some(Value::Bool(false))) as usize;
                }
            }
        }
    }
    line("6c", attempts > 0 && refused == attempts, format!("{refused}/{attempts} attempts returned false"))
}

fn restricted_step_bounds() -> Line {
    let mut s = TokenState::with_balances(vec![4, 3, 0]).unwrap();
    s.set_allowance(a(0), p(1), 2);
    s.set_allowance(a(1), p(2), 1);
    let menu0 = [
        Invocation::Transfer { to: a(1), value: 1 },
        Invocation::Approve { spender: p(1), value: 0 },
        Invocation::Approve { spender: p(2), value: 1 },
        Invocation::TransferFrom { from: a(1), to: a(2), value: 1 },
        Invocation::BalanceOf { account: a(0) },
    ];
    let menu1 = [
        Invocation::TransferFrom { from: a(0), to: a(2), value: 2 },
        Invocation::Transfer { to: a(0), value: 3 },
        Invocation::Approve { spender: p(2), value: 2 },
        Invocation::Allowance { account: a(0), spender: p(1) },
        Invocation::TotalSupply,
    ];
    let (mut worlds, mut schedules, mut max_steps, mut failures) = (0, 0, 0, Vec::new());
    for variant in [Variant::Literal, Variant::Strict] {
        let inst = RestrictedTokenInstance::new(s.clone(), 2, variant).unwrap();
        let bound = |op: &Invocation| inst.step_bound(op);
        for x in &menu0 {
            for y in &menu1 {
                let w = inst.world(&[(p(0), vec![x.clone()]), (p(1), vec![y.clone()])]).unwrap();
                let out = check_waitfree(&w, Some(&bound), ExploreOptions::default().with_crashes(true)).unwrap();
                worlds += 1;
                schedules += out.verdict.stats.schedules_explored;
                max_steps = max_steps.max(out.max_op_steps);
                if !out.verdict.pass {
                    failures.push(format!("{variant:?} {} || {}: {}", x.method(), y.method(), out.verdict.clause.unwrap_or_default()));
                }
            }
        }
    }
    // the consensus protocol between two processes
    let sc = canonical(5, &[5]);
    let out = check_waitfree(&sc.world().unwrap(), None, ExploreOptions::default().with_crashes(true)).unwrap();
    worlds += 1;
    schedules += out.verdict.stats.schedules_explored;
    if !out.verdict.pass {
        failures.push(format!("propose: {}", out.verdict.clause.unwrap_or_default()));
    }
    line(
        "6d",
        failures.is_empty(),
        format!(
            "{worlds} two-process workloads, {schedules} schedules, max {max_steps} steps per operation{}",
            failures.first().map(|f| format!(", first failure {f}")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------------------
// 7

fn analysis_oracle() -> Line {
    let t = Instant::now();
    let (mut states, mut mismatches, mut escalations) = (0, 0, 0);
    let mut first = None;
    for o in oracle_states(3, 3, 3) {
        states += 1;
        let s = o.to_token();
        let k = class_k(&s);
        let mut ok = o.classes() == vec![k];
        for acct in 0..3 {
            let sigma: BTreeSet<usize> = enabled_spenders(&s, a(acct)).unwrap().spenders.iter().map(|q| q.0).collect();
            ok &= sigma == o.sigma(acct);
            ok &= unique_transfer(&s, a(acct)).unwrap() == o.unique_transfer(acct);
            if o.sigma(acct).len() == k && o.balances[acct] > 0 {
                if let Some(e) = escalation_witness(&s, a(acct)).unwrap() {
                    escalations += 1;
                    let (next, r) = s.apply(e.caller, &e.op).unwrap();
                    let after = common::OracleState { balances: next.balances().to_vec(), allowances: allowances_of(&next) };
                    ok &= r == Value::Bool(true) && after.classes() == vec![k + 1];
                }
            }
        }
        let levels: BTreeSet<(usize, usize)> =
            sync_levels(&s).sync_levels.iter().map(|l| (l.level, l.witness.0)).collect();
        ok &= levels == o.sync_levels();
        if !ok {
            mismatches += 1;
            first.get_or_insert_with(|| format!("{:?} / {:?}", o.balances, o.allowances));
        }
    }
    let elapsed = t.elapsed();
    line(
        "7",
        mismatches == 0 && states == 1 << 18 && elapsed < SWEEP_LIMIT,
        format!(
            "{states} states, {escalations} escalations checked, {mismatches} mismatches{}, {elapsed:.2?}",
            first.map(|f| format!(" (first {f})")).unwrap_or_default()
        ),
    )
}

fn allowances_of(s: &TokenState) -> Vec<u64> {
    (0..s.accounts()).flat_map(|acct| s.allowance_row(a(acct)).to_vec()).collect()
}

// ---------------------------------------------------------------------------
// 8

fn checker_vs_oracle() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(ORACLE_SEED);
    let (mut disagreements, mut linearizable) = (0, 0);
    for _ in 0..ORACLE_HISTORIES {
        let mut s = TokenState::with_balances((0..3).map(|_| rng.random_range(0..3)).collect()).unwrap();
        s.set_allowance(a(rng.random_range(0..3)), p(rng.random_range(0..3)), rng.random_range(0..3));
        let events = rng.random_range(2..=ORACLE_MAX_EVENTS);
        let h = random_token_history(&mut rng, &s, events);
        let initial = SharedObject::Token(s);
        let got = check_linearizable(&h, &initial, LinOptions::default()).unwrap().linearizable;
        let want = brute_force_linearizable(&h, &initial);
        disagreements += (got != want) as usize;
        linearizable += want as usize;
    }
    line(
        "8",
        disagreements == 0,
        format!(
            "{ORACLE_HISTORIES} histories ({linearizable} linearizable, {} not), {disagreements} disagreements",
            ORACLE_HISTORIES - linearizable
        ),
    )
}

// ---------------------------------------------------------------------------
// 9

fn pair_classification() -> Line {
    let r = pair_sweep(SweepConfig::default());
    let unclassified = r.counts.get(&PairClass::Unclassified).copied().unwrap_or(0);
    let counts: Vec<String> = r.counts.iter().map(|(c, n)| format!("{c:?}={n}")).collect();
    line(
        "9",
        unclassified == 0 && r.pairs > 0,
        format!("{} states, {} pairs: {}", r.states, r.pairs, counts.join(", ")),
    )
}

// ---------------------------------------------------------------------------
// 10

fn valency() -> Line {
    let t = Instant::now();
    let sc = canonical(5, &[5]);
    let map = match classify_valency(&sc.world().unwrap(), ValencyOptions::default()) {
        Ok(m) => m,
        Err(e) => return line("10", false, e.to_string()),
    };
    let critical = map.critical();
    let all_univalent = critical.iter().all(|&c| {
        map.nodes[c].successors.iter().all(|&(_, s)| matches!(map.valence(s), Valence::Univalent(_)))
    });
    let elapsed = t.elapsed();
    let initial = map.valence(map.initial());
    line(
        "10",
        initial == Valence::Bivalent && !critical.is_empty() && all_univalent && elapsed < VALENCY_LIMIT,
        format!("{} configurations, initial {initial:?}, {} critical, {elapsed:.2?}", map.len(), critical.len()),
    )
}

fn main() -> ExitCode {
    let (c2, c3) = exhaustive_consensus();
    let criteria: Vec<(&str, Box<dyn Fn() -> Line>)> = vec![
        ("example replay", Box::new(example_replay)),
        ("consensus, every schedule", Box::new(move || line("2", c2.pass, c2.detail.clone()))),
        ("consensus step bound", Box::new(move || line("3", c3.pass, c3.detail.clone()))),
        ("disagreement without unique transfer", Box::new(disagreement_control)),
        ("allowance above balance", Box::new(overdrawn_allowance_control)),
        ("restricted token, strict", Box::new(restricted_strict)),
        ("restricted token, literal success path", Box::new(restricted_literal)),
        ("approve beyond k", Box::new(approve_beyond_k)),
        ("restricted token step bounds", Box::new(restricted_step_bounds)),
        ("analysis vs brute force", Box::new(analysis_oracle)),
        ("linearizability checker vs permutations", Box::new(checker_vs_oracle)),
        ("pairwise step classification", Box::new(pair_classification)),
        ("valency", Box::new(valency)),
    ];
    let mut unexpected = 0;
    for (name, run) in &criteria {
        let l = run();
        let expected_red = EXPECTED_RED.contains(&l.id);
        let tag = match (l.pass, expected_red) {
            (true, false) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
            (true, true) => "PASS (unexpected)",
        };
        unexpected += (l.pass == expected_red) as usize;
        println!("[{:>3}] {tag:<17} {name}: {}", l.id, l.detail);
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria did not match their expected outcome");
        ExitCode::FAILURE
    }
}
