//! Command front end shared by the binary and the C interface.
//!
//! A [`Request`] names a command and carries its already-loaded inputs;
//! [`execute`] runs it and returns the JSON report, a human-readable
//! summary and the exit status.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use crate::algorithms::{failed_underlying_transfers, ConsensusScenario, RestrictedTokenInstance, Variant};
use crate::analysis::{class_k, enabled_spenders, escalation_witness, sync_levels, unique_transfer};
use crate::codec::{
    history_from_json, history_to_json, invocation_text, parse_step, schedule_from_json, schedule_to_json,
    state_to_json, verdict_to_json, Algorithm, CodecError, Scenario, ScenarioFile, ScheduleSpec,
};
use crate::objects::{
    AccountId, ConsensusState, Invocation, RegisterState, Roster, SharedObject, TokenState, Value,
};
use crate::sim::{enumerate_schedules, sample_run, ExploreOptions, History, ScheduleEvent, World, DEFAULT_MAX_SCHEDULES};
use crate::verify::{
    check_consensus, check_linearizable, check_waitfree, classify_pair, classify_valency, commutes, is_read_only_at,
    ExploreMode, LinOptions, Stats, Valence, ValencyOptions, Verdict, VerifyError,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Pass = 0,
    Violation = 1,
    InputError = 2,
    ResourceBound = 3,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        self as u8
    }
}

/// Flags shared by the exploring commands. Unset flags fall back to the
/// scenario file, then to defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFlags {
    #[serde(default)]
    pub exhaustive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crashes: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_schedules: Option<usize>,
    /// An explicit `{steps, crashes}` schedule to replay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Json>,
}

/// Sequential object a history is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Token,
    Restricted,
    Register,
    Consensus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Request {
    Classify {
        scenario: ScenarioFile,
    },
    Consensus {
        scenario: ScenarioFile,
        #[serde(default)]
        flags: RunFlags,
    },
    Linearize {
        #[serde(default)]
        scenario: Option<ScenarioFile>,
        #[serde(default)]
        history: Option<Json>,
        #[serde(default)]
        object: Option<ObjectKind>,
        #[serde(default)]
        flags: RunFlags,
    },
    Valency {
        scenario: ScenarioFile,
        #[serde(default)]
        flags: RunFlags,
    },
    Commute {
        scenario: ScenarioFile,
        op1: String,
        op2: String,
    },
    ReplayExample,
    Waitfree {
        scenario: ScenarioFile,
        #[serde(default)]
        flags: RunFlags,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Outcome {
    pub exit: ExitStatus,
    pub report: Json,
    /// Human-readable summary.
    pub text: String,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Resource { what: &'static str, cap: usize },
}

impl From<CodecError> for Failure {
    fn from(e: CodecError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Resource { what, cap } => Failure::Resource { what, cap },
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<crate::algorithms::AlgorithmError> for Failure {
    fn from(e: crate::algorithms::AlgorithmError) -> Self {
        match e {
            crate::algorithms::AlgorithmError::Sim(s) => VerifyError::from(s).into(),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<crate::sim::SimError> for Failure {
    fn from(e: crate::sim::SimError) -> Self {
        VerifyError::from(e).into()
    }
}

fn input<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Input(msg.into()))
}

impl Request {
    pub fn command(&self) -> &'static str {
        match self {
            Request::Classify { .. } => "classify",
            Request::Consensus { .. } => "consensus",
            Request::Linearize { .. } => "linearize",
            Request::Valency { .. } => "valency",
            Request::Commute { .. } => "commute",
            Request::ReplayExample => "replay-example",
            Request::Waitfree { .. } => "waitfree",
        }
    }
}

/// Parses a JSON request and runs it. Malformed requests yield exit 2.
pub fn execute_json(text: &str) -> Outcome {
    match serde_json::from_str::<Request>(text) {
        Ok(r) => execute(&r),
        Err(e) => failure_outcome("request", Failure::Input(format!("invalid request: {e}"))),
    }
}

pub fn execute(request: &Request) -> Outcome {
    let result = match request {
        Request::Classify { scenario } => classify(scenario),
        Request::Consensus { scenario, flags } => consensus(scenario, flags),
        Request::Linearize { scenario, history, object, flags } => {
            linearize(scenario.as_ref(), history.as_ref(), *object, flags)
        }
        Request::Valency { scenario, flags } => valency(scenario, flags),
        Request::Commute { scenario, op1, op2 } => commute(scenario, op1, op2),
        Request::ReplayExample => Ok(replay_example()),
        Request::Waitfree { scenario, flags } => waitfree(scenario, flags),
    };
    result.unwrap_or_else(|f| failure_outcome(request.command(), f))
}

fn failure_outcome(check: &str, f: Failure) -> Outcome {
    match f {
        Failure::Input(msg) => Outcome {
            exit: ExitStatus::InputError,
            report: json!({"check": check, "pass": false, "error": msg}),
            text: format!("{check}: input error: {msg}"),
        },
        Failure::Resource { what, cap } => Outcome {
            exit: ExitStatus::ResourceBound,
            report: json!({"check": check, "pass": false, "error": "resource cap exceeded", "resource": what, "cap": cap}),
            text: format!("{check}: resource cap exceeded: more than {cap} {what}"),
        },
    }
}

fn verdict_outcome(v: &Verdict, roster: &Roster, extra: Json, text: String) -> Outcome {
    let mut m = verdict_to_json(v, roster);
    if let Json::Object(extra) = extra {
        m.extend(extra);
    }
    Outcome { exit: if v.pass { ExitStatus::Pass } else { ExitStatus::Violation }, report: Json::Object(m), text }
}

struct Exploration {
    mode: ExploreMode,
    opts: ExploreOptions,
    seed: u64,
}

impl Exploration {
    fn resolve(sc: &Scenario, flags: &RunFlags, crash_default: bool) -> Result<Self, Failure> {
        let file = &sc.file;
        let seed = flags.seed.or(file.seed).unwrap_or(0);
        let mode = if let Some(s) = &flags.schedule {
            ExploreMode::Explicit(schedule_from_json(s, &sc.roster)?)
        } else if let Some(count) = flags.samples {
            ExploreMode::Sampled { count, seed }
        } else if flags.exhaustive {
            ExploreMode::Exhaustive
        } else {
            match &file.schedule {
                None | Some(ScheduleSpec::Exhaustive) => ExploreMode::Exhaustive,
                Some(ScheduleSpec::Sample { count }) => ExploreMode::Sampled { count: *count, seed },
                Some(ScheduleSpec::Explicit { .. }) => ExploreMode::Explicit(sc.schedule().expect("explicit")?),
            }
        };
        let opts = ExploreOptions {
            crashes: flags.crashes.or(file.crashes).unwrap_or(crash_default),
            max_schedules: flags.max_schedules.or(file.max_schedules).unwrap_or(DEFAULT_MAX_SCHEDULES),
            ..ExploreOptions::default()
        };
        Ok(Self { mode, opts, seed })
    }

    fn describe(&self, roster: &Roster) -> Json {
        let mode = match &self.mode {
            ExploreMode::Exhaustive => json!({"mode": "exhaustive"}),
            ExploreMode::Sampled { count, .. } => json!({"mode": "sample", "count": count}),
            ExploreMode::Explicit(s) => json!({"mode": "explicit", "schedule": schedule_to_json(s, roster)}),
        };
        json!({"schedule": mode, "seed": self.seed, "crashes": self.opts.crashes, "max_schedules": self.opts.max_schedules})
    }
}

fn merge(mut a: Json, b: Json) -> Json {
    if let (Json::Object(a), Json::Object(b)) = (&mut a, b) {
        a.extend(b);
    }
    a
}

fn classify(file: &ScenarioFile) -> Result<Outcome, Failure> {
    let sc = file.validate()?;
    let (state, roster) = (&sc.state, &sc.roster);
    let n = state.accounts();
    let mut spenders = serde_json::Map::new();
    let mut unique = serde_json::Map::new();
    let mut escalations = Vec::new();
    let k = class_k(state);
    for a in (0..n).map(AccountId) {
        let sigma = enabled_spenders(state, a).expect("declared account").spenders;
        let names: Vec<&str> = sigma.iter().map(|p| roster.process_name(p)).collect();
        spenders.insert(roster.account_name(a).into(), json!(names));
        unique.insert(roster.account_name(a).into(), json!(unique_transfer(state, a).expect("declared account")));
        if let Ok(Some(e)) = escalation_witness(state, a) {
            escalations.push(json!({
                "account": roster.account_name(a),
                "caller": roster.process_name(e.caller),
                "op": invocation_text(&e.op, roster),
            }));
        }
    }
    let levels = sync_levels(state);
    let level_json: Vec<Json> = levels
        .sync_levels
        .iter()
        .map(|l| json!({"level": l.level, "witness": roster.account_name(l.witness)}))
        .collect();
    let mut text = format!("state is in Q_{k}\n");
    for l in &levels.sync_levels {
        let _ = writeln!(text, "  synchronization level {} witnessed by {}", l.level, roster.account_name(l.witness));
    }
    for e in &escalations {
        let _ = writeln!(text, "  escalation: {} issues {} on {}", e["caller"], e["op"], e["account"]);
    }
    Ok(Outcome {
        exit: ExitStatus::Pass,
        report: json!({
            "check": "classify",
            "pass": true,
            "k": k,
            "per_account_spenders": spenders,
            "unique_transfer": unique,
            "sync_levels": level_json,
            "escalation_witnesses": escalations,
        }),
        text,
    })
}

/// The highest synchronization level's witness, lowest index first; else
/// the first account with the most enabled spenders.
fn default_witness(state: &TokenState) -> AccountId {
    let levels = sync_levels(state).sync_levels;
    if let Some(top) = levels.iter().map(|l| l.level).max() {
        return levels.iter().find(|l| l.level == top).expect("non-empty").witness;
    }
    let size = |a: usize| enabled_spenders(state, AccountId(a)).map(|s| s.spenders.len()).unwrap_or(0);
    let best = (0..state.accounts()).map(size).max().unwrap_or(0);
    AccountId((0..state.accounts()).find(|&a| size(a) == best).unwrap_or(0))
}

fn consensus_scenario(sc: &Scenario) -> Result<ConsensusScenario, Failure> {
    if !matches!(sc.file.algorithm, None | Some(Algorithm::Consensus)) {
        return input("this command runs the consensus protocol (algorithm \"alg1\")");
    }
    let witness = sc.witness().unwrap_or_else(|| default_witness(&sc.state));
    let mut proposals = sc.proposals();
    if proposals.is_empty() {
        // participant j proposes j
        let sigma = enabled_spenders(&sc.state, witness).map_err(|e| Failure::Input(e.to_string()))?.spenders;
        let owner = sc.state.owner(witness);
        let order = std::iter::once(owner).chain(sigma.iter().filter(|&p| p != owner));
        proposals = order.enumerate().map(|(j, p)| (p, j as u64)).collect();
    }
    Ok(ConsensusScenario::new(sc.state.clone(), witness, &proposals)?)
}

fn consensus_facts(cs: &ConsensusScenario, roster: &Roster) -> Json {
    let participants: Vec<Json> = cs
        .proposals()
        .iter()
        .map(|&(p, v)| json!({"process": roster.process_name(p), "proposal": v}))
        .collect();
    json!({
        "witness_account": roster.account_name(cs.witness()),
        "k": cs.k(),
        "participants": participants,
        "step_bound": cs.step_bound(),
        "precondition": match cs.validate() { Ok(()) => "ok".to_string(), Err(e) => e.to_string() },
    })
}

fn consensus(file: &ScenarioFile, flags: &RunFlags) -> Result<Outcome, Failure> {
    let sc = file.validate()?;
    let cs = consensus_scenario(&sc)?;
    let ex = Exploration::resolve(&sc, flags, true)?;
    let world = cs.world_unchecked()?;
    let out = check_consensus(&world, &cs.proposal_values(), &ex.mode, ex.opts)?;
    let v = &out.verdict;
    let text = format!(
        "consensus: {} after {} schedules; max steps per propose {} (bound {})",
        if v.pass { "pass".to_string() } else { format!("violation ({})", v.clause.as_deref().unwrap_or("")) },
        v.stats.schedules_explored,
        out.max_op_steps,
        cs.step_bound()
    );
    let extra = merge(
        merge(consensus_facts(&cs, &sc.roster), ex.describe(&sc.roster)),
        json!({"max_op_steps": out.max_op_steps}),
    );
    Ok(verdict_outcome(v, &sc.roster, extra, text))
}

fn restricted_instance(sc: &Scenario, flags: &RunFlags) -> Result<RestrictedTokenInstance, Failure> {
    let variant = match (flags.variant, sc.file.algorithm) {
        (Some(v), _) => v,
        (None, Some(Algorithm::RestrictedLiteral)) => Variant::Literal,
        (None, Some(Algorithm::RestrictedStrict)) => Variant::Strict,
        _ => return input("expected algorithm \"alg2-literal\" or \"alg2-strict\""),
    };
    let k = sc.file.k.unwrap_or_else(|| class_k(&sc.state));
    Ok(RestrictedTokenInstance::new(sc.state.clone(), k, variant)?)
}

fn linearize(
    file: Option<&ScenarioFile>,
    history: Option<&Json>,
    object: Option<ObjectKind>,
    flags: &RunFlags,
) -> Result<Outcome, Failure> {
    match (file, history) {
        (_, Some(h)) => linearize_history(file, h, object),
        (Some(f), None) => linearize_runs(f, flags),
        (None, None) => input("linearize needs a history or a scenario with a workload"),
    }
}

fn linearize_history(file: Option<&ScenarioFile>, raw: &Json, object: Option<ObjectKind>) -> Result<Outcome, Failure> {
    let sc = file.map(ScenarioFile::validate).transpose()?;
    let roster = match &sc {
        Some(sc) => sc.roster.clone(),
        None => {
            // processes named in the history, each owning `a_<name>`
            let mut names: Vec<String> = Vec::new();
            for e in raw.as_array().into_iter().flatten() {
                if let Some(p) = e.get("process").and_then(Json::as_str) {
                    if !names.iter().any(|n| n == p) {
                        names.push(p.to_string());
                    }
                }
            }
            Roster::new(names.iter().map(|p| format!("a_{p}")).collect(), names)
        }
    };
    let history = history_from_json(raw, &roster)?;
    let kind = object.unwrap_or(if sc.is_some() { ObjectKind::Token } else { ObjectKind::Register });
    let initial = match (kind, &sc) {
        (ObjectKind::Token, Some(sc)) => SharedObject::Token(sc.state.clone()),
        (ObjectKind::Restricted, Some(sc)) => {
            let k = sc.file.k.unwrap_or_else(|| class_k(&sc.state));
            SharedObject::Restricted(
                crate::objects::RestrictedToken::new(sc.state.clone(), k).map_err(|e| Failure::Input(e.to_string()))?,
            )
        }
        (ObjectKind::Token | ObjectKind::Restricted, None) => {
            return input("token histories need a scenario with the initial state")
        }
        (ObjectKind::Register, _) => SharedObject::Register(RegisterState::default()),
        (ObjectKind::Consensus, _) => SharedObject::Consensus(ConsensusState::default()),
    };
    let r = check_linearizable(&history, &initial, LinOptions::default())?;
    let mut v = if r.linearizable {
        Verdict::pass("linearize", Stats { schedules_explored: 0, configurations: r.explored })
    } else {
        Verdict::fail("linearize", "no linearization".into(), Stats { schedules_explored: 0, configurations: r.explored })
    };
    if let Some(len) = r.failing_prefix {
        v = v.with_history(history.prefix(len));
    }
    let text = match r.failing_prefix {
        None => format!("linearizable ({} operations)", r.operations),
        Some(len) => format!("not linearizable; shortest failing prefix has {len} events"),
    };
    let extra = json!({
        "object": kind,
        "operations": r.operations,
        "order": r.order,
        "failing_prefix": r.failing_prefix,
    });
    Ok(verdict_outcome(&v, &roster, extra, text))
}

/// Runs the scenario's implementation and checks every produced history.
fn linearize_runs(file: &ScenarioFile, flags: &RunFlags) -> Result<Outcome, Failure> {
    let sc = file.validate()?;
    let ex = Exploration::resolve(&sc, flags, false)?;
    let (world, spec, extra) = match sc.file.algorithm {
        Some(Algorithm::Consensus) => {
            let cs = consensus_scenario(&sc)?;
            (cs.world_unchecked()?, SharedObject::Consensus(ConsensusState::default()), consensus_facts(&cs, &sc.roster))
        }
        _ => {
            let inst = restricted_instance(&sc, flags)?;
            let workload = sc.workload()?;
            if workload.is_empty() {
                return input("the scenario has no workload");
            }
            let facts = json!({"k": inst.k(), "variant": inst.variant()});
            (inst.world(&workload)?, inst.spec(), facts)
        }
    };
    let mut stats = Stats::default();
    let check = |w: &World, stats: Stats| -> Result<Option<Verdict>, Failure> {
        let r = check_linearizable(w.op_history(), &spec, LinOptions::default())?;
        Ok((!r.linearizable).then(|| {
            let prefix = r.failing_prefix.unwrap_or(w.op_history().len());
            Verdict::fail("linearize", format!("history not linearizable; failing prefix of {prefix} events"), stats)
                .with_history(w.op_history().clone())
        }))
    };
    let mut failure: Option<(Verdict, World)> = None;
    match &ex.mode {
        ExploreMode::Explicit(s) => {
            let w = world.run(s)?;
            stats = Stats { schedules_explored: 1, configurations: s.steps.len() + s.crashes.len() + 1 };
            if let Some(v) = check(&w, stats)? {
                failure = Some((v.with_schedule(s.clone()), w));
            }
        }
        ExploreMode::Sampled { count, seed } => {
            use rand::{Rng, SeedableRng};
            let mut seeds = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
            let p = if ex.opts.crashes { 0.1 } else { 0.0 };
            for i in 0..*count {
                let run = sample_run(&world, seeds.random(), p, ex.opts.max_steps_per_process * 64)?;
                stats.schedules_explored = i + 1;
                stats.configurations += run.schedule.steps.len() + run.schedule.crashes.len() + 1;
                if let Some(v) = check(&run.world, stats)? {
                    failure = Some((v.with_schedule(run.schedule), run.world));
                    break;
                }
            }
        }
        ExploreMode::Exhaustive => {
            let mut it = enumerate_schedules(&world, ex.opts)?;
            while let Some(run) = it.next() {
                let run = run?;
                stats = Stats { schedules_explored: it.produced(), configurations: it.visited() };
                if let Some(v) = check(&run.world, stats)? {
                    failure = Some((v.with_schedule(run.schedule), run.world));
                    break;
                }
            }
        }
    }
    let extra = merge(extra, ex.describe(&sc.roster));
    Ok(match failure {
        None => {
            let text = format!("linearize: all {} runs linearizable", stats.schedules_explored);
            verdict_outcome(&Verdict::pass("linearize", stats), &sc.roster, extra, text)
        }
        Some((v, w)) => {
            let failed = failed_underlying_transfers(w.history());
            let text = format!("linearize: violation after {} runs", v.stats.schedules_explored);
            let extra = merge(
                extra,
                json!({"failed_underlying_transfers": failed, "step_history": history_to_json(w.history(), &sc.roster)}),
            );
            verdict_outcome(&v, &sc.roster, extra, text)
        }
    })
}

fn event_json(e: ScheduleEvent, roster: &Roster) -> Json {
    match e {
        ScheduleEvent::Step(p) => json!({"step": roster.process_name(p)}),
        ScheduleEvent::Crash(p) => json!({"crash": roster.process_name(p)}),
    }
}

fn valence_json(v: Valence) -> Json {
    match v {
        Valence::Undecided => json!("undecided"),
        Valence::Bivalent => json!("bivalent"),
        Valence::Univalent(x) => json!({"univalent": x.to_json()}),
    }
}

fn valency(file: &ScenarioFile, flags: &RunFlags) -> Result<Outcome, Failure> {
    let sc = file.validate()?;
    let cs = consensus_scenario(&sc)?;
    let world = cs.world_unchecked()?;
    let opts = ValencyOptions {
        crashes: flags.crashes.or(file.crashes).unwrap_or(false),
        max_configs: flags.max_schedules.or(file.max_schedules).unwrap_or(crate::verify::DEFAULT_MAX_CONFIGS),
    };
    let map = classify_valency(&world, opts)?;
    let initial = map.valence(map.initial());
    let critical = map.critical();
    let roster = &sc.roster;
    let critical_json: Vec<Json> = critical
        .iter()
        .take(16)
        .map(|&id| {
            let successors: Vec<Json> = map.nodes[id]
                .successors
                .iter()
                .map(|&(e, t)| merge(event_json(e, roster), json!({"valence": valence_json(map.valence(t))})))
                .collect();
            json!({
                "path": map.path_to(id).into_iter().map(|e| event_json(e, roster)).collect::<Vec<_>>(),
                "successors": successors,
            })
        })
        .collect();
    let witnesses: Vec<Json> = map.nodes[map.initial()]
        .reachable
        .iter()
        .filter_map(|&v| map.witness_schedule(map.initial(), v).map(|s| json!({"decision": v.to_json(), "schedule": schedule_to_json(&s, roster)})))
        .collect();
    let pass = !(initial == Valence::Bivalent && critical.is_empty());
    let stats = Stats { schedules_explored: 0, configurations: map.len() };
    let v = if pass {
        Verdict::pass("valency", stats)
    } else {
        Verdict::fail("valency", "bivalent initial configuration without a reachable critical configuration".into(), stats)
    };
    let text = format!(
        "valency: initial configuration {:?}; {} critical configurations among {}",
        initial,
        critical.len(),
        map.len()
    );
    let extra = merge(
        consensus_facts(&cs, roster),
        json!({
            "crashes": opts.crashes,
            "initial_valence": valence_json(initial),
            "critical_count": critical.len(),
            "critical": critical_json,
            "decision_witnesses": witnesses,
        }),
    );
    Ok(verdict_outcome(&v, roster, extra, text))
}

fn commute(file: &ScenarioFile, op1: &str, op2: &str) -> Result<Outcome, Failure> {
    let sc = file.validate()?;
    let (p1, i1) = parse_step(op1, &sc.roster)?;
    let (p2, i2) = parse_step(op2, &sc.roster)?;
    let obj_err = |e: crate::objects::ObjectError| Failure::Input(e.to_string());
    let c = commutes(&sc.state, (p1, &i1), (p2, &i2)).map_err(obj_err)?;
    let ro1 = is_read_only_at(&sc.state, p1, &i1).map_err(obj_err)?;
    let ro2 = is_read_only_at(&sc.state, p2, &i2).map_err(obj_err)?;
    let class = classify_pair(&sc.state, (p1, &i1), (p2, &i2)).map_err(obj_err)?;
    let stats = Stats::default();
    let v = if c { Verdict::pass("commute", stats) } else { Verdict::fail("commute", "the two orders differ".into(), stats) };
    let text = format!("{op1} and {op2} {} ({class:?})", if c { "commute" } else { "do not commute" });
    let extra = json!({"commutes": c, "read_only": [ro1, ro2], "class": class});
    Ok(verdict_outcome(&v, &sc.roster, extra, text))
}

fn waitfree(file: &ScenarioFile, flags: &RunFlags) -> Result<Outcome, Failure> {
    let sc = file.validate()?;
    if flags.samples.is_some() || flags.schedule.is_some() {
        return input("waitfree always explores exhaustively");
    }
    let crashes = flags.crashes.or(file.crashes).unwrap_or(true);
    let opts = ExploreOptions {
        crashes,
        max_schedules: flags.max_schedules.or(file.max_schedules).unwrap_or(DEFAULT_MAX_SCHEDULES),
        ..ExploreOptions::default()
    };
    let (out, facts) = match file.algorithm {
        None | Some(Algorithm::Consensus) => {
            let cs = consensus_scenario(&sc)?;
            (check_waitfree(&cs.world_unchecked()?, None, opts)?, consensus_facts(&cs, &sc.roster))
        }
        _ => {
            let inst = restricted_instance(&sc, flags)?;
            let workload = sc.workload()?;
            if workload.is_empty() {
                return input("the scenario has no workload");
            }
            let bound = |i: &Invocation| inst.step_bound(i);
            let mut bounds = BTreeMap::new();
            for op in workload.iter().flat_map(|(_, ops)| ops) {
                bounds.insert(op.method(), inst.step_bound(op));
            }
            let out = check_waitfree(&inst.world(&workload)?, Some(&bound), opts)?;
            (out, json!({"k": inst.k(), "variant": inst.variant(), "step_bounds": bounds}))
        }
    };
    let text = format!(
        "waitfree: {} after {} schedules; max steps per operation {}",
        if out.verdict.pass { "pass" } else { "violation" },
        out.verdict.stats.schedules_explored,
        out.max_op_steps
    );
    let extra = merge(facts, json!({"crashes": crashes, "max_op_steps": out.max_op_steps}));
    Ok(verdict_outcome(&out.verdict, &sc.roster, extra, text))
}

/// One step of the worked token example.
pub struct ExampleStep {
    pub caller: &'static str,
    pub op: &'static str,
    pub response: Value,
    pub balances: [u64; 3],
    /// Nonzero allowances as (account, spender, value).
    pub allowances: &'static [(&'static str, &'static str, u64)],
}

/// Three processes A, B, C; A starts with 10 tokens. Expected responses and
/// states after every operation.
pub const EXAMPLE: [ExampleStep; 5] = [
    ExampleStep { caller: "A", op: "totalSupply()", response: Value::Nat(10), balances: [10, 0, 0], allowances: &[] },
    ExampleStep { caller: "A", op: "transfer(a_B, 3)", response: Value::Bool(true), balances: [7, 3, 0], allowances: &[] },
    ExampleStep {
        caller: "B",
        op: "approve(C, 5)",
        response: Value::Bool(true),
        balances: [7, 3, 0],
        allowances: &[("a_B", "C", 5)],
    },
    ExampleStep {
        caller: "C",
        op: "transferFrom(a_B, a_C, 5)",
        response: Value::Bool(false),
        balances: [7, 3, 0],
        allowances: &[("a_B", "C", 5)],
    },
    ExampleStep {
        caller: "C",
        op: "transferFrom(a_B, a_A, 1)",
        response: Value::Bool(true),
        balances: [8, 2, 0],
        allowances: &[("a_B", "C", 4)],
    },
];

fn example_initial() -> TokenState {
    TokenState::with_balances(vec![10, 0, 0]).expect("small supply")
}

fn expected_state(step: &ExampleStep, roster: &Roster) -> TokenState {
    let mut s = TokenState::with_balances(step.balances.to_vec()).expect("small supply");
    for &(a, p, v) in step.allowances {
        s.set_allowance(roster.account(a).expect("example account"), roster.process(p).expect("example process"), v);
    }
    s
}

/// Replays the worked example through the token object, comparing every
/// response and intermediate state, then checks that the resulting
/// sequential history is linearizable.
pub fn replay_example() -> Outcome {
    let roster = Roster::lettered(3);
    let mut state = example_initial();
    let mut history = History::new(std::sync::Arc::from(vec!["T".to_string()]));
    let mut steps = Vec::new();
    let mut ok = true;
    let mut text = String::from("q0: balances [10, 0, 0], no allowances\n");
    for (i, step) in EXAMPLE.iter().enumerate() {
        let (p, op) = parse_step(&format!("{}:{}", step.caller, step.op), &roster).expect("example step parses");
        let (next, r) = state.apply(p, &op).expect("example step applies");
        history.push(p, crate::sim::ObjectId(0), crate::sim::EventKind::Invoke(op.clone()));
        history.push(p, crate::sim::ObjectId(0), crate::sim::EventKind::Response(r));
        let want = expected_state(step, &roster);
        let matches = r == step.response && next == want;
        ok &= matches;
        let label = if i == 0 { "q0".to_string() } else { format!("q{i}") };
        let _ = writeln!(
            text,
            "{}: {} -> {} ; {} balances {:?}{}",
            step.caller,
            step.op,
            r,
            label,
            next.balances(),
            if matches { "" } else { "  MISMATCH" }
        );
        steps.push(json!({
            "caller": step.caller,
            "op": step.op,
            "response": r.to_json(),
            "expected_response": step.response.to_json(),
            "state": label,
            "after": state_to_json(&next, &roster),
            "matches": matches,
        }));
        state = next;
    }
    let lin = check_linearizable(&history, &SharedObject::Token(example_initial()), LinOptions::default())
        .map(|r| r.linearizable)
        .unwrap_or(false);
    ok &= lin;
    let _ = writeln!(text, "sequential history linearizable: {lin}");
    Outcome {
        exit: if ok { ExitStatus::Pass } else { ExitStatus::Violation },
        report: json!({
            "check": "replay-example",
            "pass": ok,
            "steps": steps,
            "final": state_to_json(&state, &roster),
            "history_linearizable": lin,
            "history": history_to_json(&history, &roster),
        }),
        text,
    }
}
