//! JSON interchange: scenario files, histories, schedules and reports.
//!
//! Accounts and processes are referred to by name in every file. Process
//! order is the owner order of the declared accounts, so account `i` is
//! owned by process `i` internally.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::objects::{
    AccountId, Invocation, ObjectError, OwnerSet, ProcessId, Roster, TokenState, Value, MAX_PARTIES,
};
use crate::sim::{CrashPoint, Event, EventKind, History, ObjectId, Schedule};
use crate::verify::Verdict;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Object(#[from] ObjectError),
}

fn schema<T>(msg: impl Into<String>) -> Result<T, CodecError> {
    Err(CodecError::Schema(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "alg1")]
    Consensus,
    #[serde(rename = "alg2-literal")]
    RestrictedLiteral,
    #[serde(rename = "alg2-strict")]
    RestrictedStrict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrashSpec {
    pub process: String,
    pub position: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScheduleSpec {
    Exhaustive,
    Sample {
        count: usize,
    },
    Explicit {
        steps: Vec<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        crashes: Vec<CrashSpec>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpSpec {
    pub method: String,
    #[serde(default)]
    pub args: Vec<Json>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub accounts: Vec<String>,
    pub owners: BTreeMap<String, String>,
    #[serde(default)]
    pub balances: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub allowances: BTreeMap<String, BTreeMap<String, u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<Algorithm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub proposals: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crashes: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_schedules: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub workload: BTreeMap<String, Vec<OpSpec>>,
}

/// A scenario whose names have been resolved and whose state is valid.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub roster: Roster,
    pub state: TokenState,
    pub file: ScenarioFile,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, CodecError> {
        serde_json::from_str(text).map_err(|e| CodecError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Builds a file for `state` with lettered names (`a_A` owned by `A`).
    pub fn from_state(state: &TokenState) -> Self {
        let roster = Roster::lettered(state.accounts());
        let mut allowances = BTreeMap::new();
        for (a, name) in roster.accounts.iter().enumerate() {
            let row: BTreeMap<String, u64> = state
                .allowance_row(AccountId(a))
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > 0)
                .map(|(p, &v)| (roster.processes[p].clone(), v))
                .collect();
            if !row.is_empty() {
                allowances.insert(name.clone(), row);
            }
        }
        ScenarioFile {
            accounts: roster.accounts.clone(),
            owners: roster.accounts.iter().cloned().zip(roster.processes.iter().cloned()).collect(),
            balances: roster.accounts.iter().cloned().zip(state.balances().iter().copied()).collect(),
            allowances,
            algorithm: None,
            k: None,
            witness: None,
            proposals: BTreeMap::new(),
            schedule: None,
            seed: None,
            crashes: None,
            max_schedules: None,
            workload: BTreeMap::new(),
        }
    }

    /// Checks every cross-reference and builds the token state.
    pub fn validate(&self) -> Result<Scenario, CodecError> {
        let n = self.accounts.len();
        if n == 0 || n > MAX_PARTIES {
            return schema(format!("between 1 and {MAX_PARTIES} accounts are required, got {n}"));
        }
        let declared: BTreeSet<&String> = self.accounts.iter().collect();
        if declared.len() != n {
            return schema("account names must be distinct");
        }
        if let Some(a) = self.owners.keys().find(|a| !declared.contains(a)) {
            return schema(format!("owners: undeclared account `{a}`"));
        }
        let processes: Vec<String> = self
            .accounts
            .iter()
            .map(|a| self.owners.get(a).cloned().ok_or_else(|| CodecError::Schema(format!("account `{a}` has no owner"))))
            .collect::<Result<_, _>>()?;
        if processes.iter().collect::<BTreeSet<_>>().len() != n {
            return schema("owners must map accounts to distinct processes");
        }
        let roster = Roster::new(self.accounts.clone(), processes);
        let account = |name: &str, ctx: &str| {
            roster.account(name).ok_or_else(|| CodecError::Schema(format!("{ctx}: undeclared account `{name}`")))
        };
        let process = |name: &str, ctx: &str| {
            roster.process(name).ok_or_else(|| CodecError::Schema(format!("{ctx}: undeclared process `{name}`")))
        };
        let mut balances = vec![0; n];
        for (name, &b) in &self.balances {
            balances[account(name, "balances")?.0] = b;
        }
        let mut state = TokenState::with_balances(balances)?;
        for (name, row) in &self.allowances {
            let a = account(name, "allowances")?;
            for (p, &v) in row {
                state.set_allowance(a, process(p, "allowances")?, v);
            }
        }
        if let Some(w) = &self.witness {
            account(w, "witness")?;
        }
        for p in self.proposals.keys().chain(self.workload.keys()) {
            process(p, "proposals/workload")?;
        }
        if let Some(ScheduleSpec::Explicit { steps, crashes }) = &self.schedule {
            for p in steps.iter().chain(crashes.iter().map(|c| &c.process)) {
                process(p, "schedule")?;
            }
        }
        if self.k == Some(0) {
            return schema("k must be positive");
        }
        let scenario = Scenario { roster, state, file: self.clone() };
        for (p, ops) in &self.workload {
            for op in ops {
                scenario.invocation(op).map_err(|e| CodecError::Schema(format!("workload of `{p}`: {e}")))?;
            }
        }
        Ok(scenario)
    }
}

impl Scenario {
    pub fn invocation(&self, op: &OpSpec) -> Result<Invocation, CodecError> {
        invocation_from_json(&op.method, &op.args, &self.roster)
    }

    pub fn proposals(&self) -> BTreeMap<ProcessId, u64> {
        self.file.proposals.iter().map(|(p, &v)| (self.roster.process(p).expect("validated"), v)).collect()
    }

    pub fn workload(&self) -> Result<Vec<(ProcessId, Vec<Invocation>)>, CodecError> {
        let mut out: Vec<(ProcessId, Vec<Invocation>)> = self
            .file
            .workload
            .iter()
            .map(|(p, ops)| {
                let ops = ops.iter().map(|o| self.invocation(o)).collect::<Result<_, _>>()?;
                Ok((self.roster.process(p).expect("validated"), ops))
            })
            .collect::<Result<_, CodecError>>()?;
        out.sort_by_key(|(p, _)| *p);
        Ok(out)
    }

    pub fn witness(&self) -> Option<AccountId> {
        self.file.witness.as_deref().and_then(|w| self.roster.account(w))
    }

    pub fn schedule(&self) -> Option<Result<Schedule, CodecError>> {
        match &self.file.schedule {
            Some(ScheduleSpec::Explicit { steps, crashes }) => Some(explicit_schedule(steps, crashes, &self.roster)),
            _ => None,
        }
    }
}

pub fn explicit_schedule(steps: &[String], crashes: &[CrashSpec], roster: &Roster) -> Result<Schedule, CodecError> {
    let process = |name: &str| {
        roster.process(name).ok_or_else(|| CodecError::Schema(format!("schedule: undeclared process `{name}`")))
    };
    Ok(Schedule {
        steps: steps.iter().map(|s| process(s)).collect::<Result<_, _>>()?,
        crashes: crashes
            .iter()
            .map(|c| Ok(CrashPoint { process: process(&c.process)?, position: c.position }))
            .collect::<Result<_, CodecError>>()?,
    })
}

pub fn schedule_to_json(s: &Schedule, roster: &Roster) -> Json {
    json!({
        "steps": s.steps.iter().map(|&p| roster.process_name(p)).collect::<Vec<_>>(),
        "crashes": s.crashes.iter()
            .map(|c| json!({"process": roster.process_name(c.process), "position": c.position}))
            .collect::<Vec<_>>(),
    })
}

pub fn schedule_from_json(v: &Json, roster: &Roster) -> Result<Schedule, CodecError> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Raw {
        steps: Vec<String>,
        #[serde(default)]
        crashes: Vec<CrashSpec>,
    }
    let raw: Raw = serde_json::from_value(v.clone()).map_err(|e| CodecError::Json(e.to_string()))?;
    explicit_schedule(&raw.steps, &raw.crashes, roster)
}

fn nat(v: &Json, what: &str) -> Result<u64, CodecError> {
    v.as_u64().ok_or_else(|| CodecError::Schema(format!("{what} must be a non-negative integer, got {v}")))
}

fn name<'a>(v: &'a Json, what: &str) -> Result<&'a str, CodecError> {
    v.as_str().ok_or_else(|| CodecError::Schema(format!("{what} must be a name string, got {v}")))
}

/// Positional arguments per method:
/// `transfer(to, value)` on tokens, `transfer(from, to, value)` on
/// asset-transfer objects, `transferFrom(from, to, value)`,
/// `approve(spender, value)`, `balanceOf(account)`,
/// `allowance(account, spender)`, `totalSupply()`, `read()`,
/// `write(value)`, `propose(value)`, `setOwners(account, [process…])`.
pub fn invocation_from_json(method: &str, args: &[Json], roster: &Roster) -> Result<Invocation, CodecError> {
    let account = |v: &Json| {
        let n = name(v, "account")?;
        roster.account(n).ok_or_else(|| CodecError::Schema(format!("undeclared account `{n}`")))
    };
    let process = |v: &Json| {
        let n = name(v, "process")?;
        roster.process(n).ok_or_else(|| CodecError::Schema(format!("undeclared process `{n}`")))
    };
    let arity = |want: usize| {
        if args.len() == want {
            Ok(())
        } else {
            schema(format!("`{method}` takes {want} arguments, got {}", args.len()))
        }
    };
    Ok(match method {
        "transfer" if args.len() == 3 => {
            Invocation::AssetTransfer { from: account(&args[0])?, to: account(&args[1])?, value: nat(&args[2], "value")? }
        }
        "transfer" => {
            arity(2)?;
            Invocation::Transfer { to: account(&args[0])?, value: nat(&args[1], "value")? }
        }
        "transferFrom" => {
            arity(3)?;
            Invocation::TransferFrom { from: account(&args[0])?, to: account(&args[1])?, value: nat(&args[2], "value")? }
        }
        "approve" => {
            arity(2)?;
            Invocation::Approve { spender: process(&args[0])?, value: nat(&args[1], "value")? }
        }
        "balanceOf" => {
            arity(1)?;
            Invocation::BalanceOf { account: account(&args[0])? }
        }
        "allowance" => {
            arity(2)?;
            Invocation::Allowance { account: account(&args[0])?, spender: process(&args[1])? }
        }
        "totalSupply" => {
            arity(0)?;
            Invocation::TotalSupply
        }
        "read" => {
            arity(0)?;
            Invocation::Read
        }
        "write" => {
            arity(1)?;
            let value = Value::from_json(&args[0])
                .ok_or_else(|| CodecError::Schema(format!("write: unsupported value {}", args[0])))?;
            Invocation::Write { value }
        }
        "propose" => {
            arity(1)?;
            Invocation::Propose { value: nat(&args[0], "value")? }
        }
        "setOwners" => {
            arity(2)?;
            let list = args[1].as_array().ok_or_else(|| CodecError::Schema("setOwners: expected a process list".into()))?;
            let owners = list.iter().map(process).collect::<Result<OwnerSet, _>>()?;
            Invocation::SetOwners { account: account(&args[0])?, owners }
        }
        other => return schema(format!("unknown method `{other}`")),
    })
}

pub fn invocation_args(inv: &Invocation, roster: &Roster) -> Vec<Json> {
    let a = |x: AccountId| Json::from(roster.account_name(x));
    let p = |x: ProcessId| Json::from(roster.process_name(x));
    match *inv {
        Invocation::Transfer { to, value } => vec![a(to), value.into()],
        Invocation::AssetTransfer { from, to, value } | Invocation::TransferFrom { from, to, value } => {
            vec![a(from), a(to), value.into()]
        }
        Invocation::Approve { spender, value } => vec![p(spender), value.into()],
        Invocation::BalanceOf { account } => vec![a(account)],
        Invocation::Allowance { account, spender } => vec![a(account), p(spender)],
        Invocation::TotalSupply | Invocation::Read => vec![],
        Invocation::Write { value } => vec![value.to_json()],
        Invocation::Propose { value } => vec![value.into()],
        Invocation::SetOwners { account, owners } => {
            vec![a(account), Json::Array(owners.iter().map(p).collect())]
        }
    }
}

/// Compact text form, e.g. `approve(B, 1)`.
pub fn invocation_text(inv: &Invocation, roster: &Roster) -> String {
    let args: Vec<String> = invocation_args(inv, roster)
        .into_iter()
        .map(|v| match v {
            Json::String(s) => s,
            other => other.to_string(),
        })
        .collect();
    format!("{}({})", inv.method(), args.join(", "))
}

/// Parses `caller:method(arg, …)`, e.g. `A:approve(B,1)`.
pub fn parse_step(text: &str, roster: &Roster) -> Result<(ProcessId, Invocation), CodecError> {
    let bad = || CodecError::Schema(format!("expected `process:method(args)`, got `{text}`"));
    let (caller, call) = text.split_once(':').ok_or_else(bad)?;
    let caller = caller.trim();
    let p = roster.process(caller).ok_or_else(|| CodecError::Schema(format!("undeclared process `{caller}`")))?;
    let (method, rest) = call.trim().split_once('(').ok_or_else(bad)?;
    let inner = rest.strip_suffix(')').ok_or_else(bad)?;
    let args: Vec<Json> = inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u64>().map(Json::from).unwrap_or_else(|_| Json::from(s)))
        .collect();
    Ok((p, invocation_from_json(method.trim(), &args, roster)?))
}

pub fn history_to_json(h: &History, roster: &Roster) -> Json {
    let events: Vec<Json> = h
        .events
        .iter()
        .enumerate()
        .map(|(pos, e)| {
            let mut obj = serde_json::Map::new();
            obj.insert("pos".into(), pos.into());
            obj.insert("process".into(), roster.process_name(e.process).into());
            obj.insert("object".into(), h.object_name(e.object).into());
            match &e.kind {
                EventKind::Invoke(inv) => {
                    obj.insert("kind".into(), "invoke".into());
                    obj.insert("method".into(), inv.method().into());
                    obj.insert("args".into(), Json::Array(invocation_args(inv, roster)));
                }
                EventKind::Response(v) => {
                    obj.insert("kind".into(), "response".into());
                    obj.insert("value".into(), v.to_json());
                }
            }
            Json::Object(obj)
        })
        .collect();
    Json::Array(events)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    #[serde(default)]
    pos: Option<usize>,
    process: String,
    object: String,
    kind: String,
    #[serde(default)]
    method: Option<String>,
    #[serde(default)]
    args: Vec<Json>,
    #[serde(default)]
    value: Option<Json>,
}

/// Parses a history array. A response event's `method` is optional. Events
/// must be listed in `pos` order when positions are given.
pub fn history_from_json(v: &Json, roster: &Roster) -> Result<History, CodecError> {
    let raw: Vec<RawEvent> = serde_json::from_value(v.clone()).map_err(|e| CodecError::Json(e.to_string()))?;
    let mut names: Vec<String> = Vec::new();
    for e in &raw {
        if !names.contains(&e.object) {
            names.push(e.object.clone());
        }
    }
    let mut h = History::new(Arc::from(names.clone()));
    for (i, e) in raw.into_iter().enumerate() {
        if e.pos.is_some_and(|p| p != i) {
            return schema(format!("event {i}: pos {} out of order", e.pos.unwrap_or_default()));
        }
        let process =
            roster.process(&e.process).ok_or_else(|| CodecError::Schema(format!("event {i}: undeclared process `{}`", e.process)))?;
        let object = ObjectId(names.iter().position(|n| *n == e.object).expect("collected above"));
        let kind = match e.kind.as_str() {
            "invoke" => {
                let method = e.method.ok_or_else(|| CodecError::Schema(format!("event {i}: invoke without method")))?;
                EventKind::Invoke(invocation_from_json(&method, &e.args, roster)?)
            }
            "response" => {
                let raw = e.value.unwrap_or(Json::Null);
                EventKind::Response(
                    Value::from_json(&raw).ok_or_else(|| CodecError::Schema(format!("event {i}: bad value {raw}")))?,
                )
            }
            other => return schema(format!("event {i}: unknown kind `{other}`")),
        };
        h.events.push(Event { process, object, kind });
    }
    Ok(h)
}

/// `{check, pass, clause?, witness_schedule?, witness_history?, stats}`.
pub fn verdict_to_json(v: &Verdict, roster: &Roster) -> serde_json::Map<String, Json> {
    let mut m = serde_json::Map::new();
    m.insert("check".into(), v.check.into());
    m.insert("pass".into(), v.pass.into());
    if let Some(c) = &v.clause {
        m.insert("clause".into(), c.clone().into());
    }
    if let Some(s) = &v.witness_schedule {
        m.insert("witness_schedule".into(), schedule_to_json(s, roster));
    }
    if let Some(h) = &v.witness_history {
        m.insert("witness_history".into(), history_to_json(h, roster));
    }
    m.insert(
        "stats".into(),
        json!({"schedules_explored": v.stats.schedules_explored, "configurations": v.stats.configurations}),
    );
    m
}

pub fn state_to_json(state: &TokenState, roster: &Roster) -> Json {
    let n = state.accounts();
    let balances: serde_json::Map<String, Json> =
        (0..n).map(|a| (roster.accounts[a].clone(), state.balance(AccountId(a)).into())).collect();
    let allowances: serde_json::Map<String, Json> = (0..n)
        .map(|a| {
            let row: serde_json::Map<String, Json> = (0..n)
                .map(|p| (roster.processes[p].clone(), state.allowance(AccountId(a), ProcessId(p)).into()))
                .collect();
            (roster.accounts[a].clone(), Json::Object(row))
        })
        .collect();
    json!({"balances": balances, "allowances": allowances})
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ScenarioFile {
        let mut s = TokenState::with_balances(vec![10, 3, 0]).unwrap();
        s.set_allowance(AccountId(1), ProcessId(2), 5);
        ScenarioFile::from_state(&s)
    }

    #[test]
    fn round_trip_and_validation() {
        let f = sample();
        let back = ScenarioFile::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
        let sc = f.validate().unwrap();
        assert_eq!(sc.state.balances(), &[10, 3, 0]);
        assert_eq!(sc.state.allowance(AccountId(1), ProcessId(2)), 5);
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(ScenarioFile::from_json(r#"{"accounts":["x"],"owners":{"x":"X"},"balances":{"x":-1}}"#), Err(CodecError::Json(_))));
        assert!(matches!(ScenarioFile::from_json(r#"{"accounts":[],"owners":{},"extra":1}"#), Err(CodecError::Json(_))));
        let mut f = sample();
        f.owners.insert("a_C".into(), "A".into());
        assert!(matches!(f.validate(), Err(CodecError::Schema(_))));
        let mut f = sample();
        f.allowances.insert("a_Z".into(), BTreeMap::new());
        assert!(f.validate().is_err());
    }

    #[test]
    fn owners_reorder_processes() {
        let f = ScenarioFile::from_json(
            r#"{"accounts":["x","y"],"owners":{"x":"Q","y":"P"},"balances":{"y":4},"allowances":{"y":{"Q":2}}}"#,
        )
        .unwrap();
        let sc = f.validate().unwrap();
        assert_eq!(sc.roster.processes, vec!["Q", "P"]);
        assert_eq!(sc.state.balance(AccountId(1)), 4);
        assert_eq!(sc.state.allowance(AccountId(1), ProcessId(0)), 2);
    }

    #[test]
    fn steps_parse() {
        let r = Roster::lettered(3);
        assert_eq!(parse_step("A:approve(B,1)", &r).unwrap(), (ProcessId(0), Invocation::Approve { spender: ProcessId(1), value: 1 }));
        assert_eq!(
            parse_step("C: transferFrom(a_B, a_A, 1)", &r).unwrap().1,
            Invocation::TransferFrom { from: AccountId(1), to: AccountId(0), value: 1 }
        );
        assert!(parse_step("approve(B,1)", &r).is_err());
        assert!(parse_step("A:fly()", &r).is_err());
    }

    #[test]
    fn history_round_trip() {
        let r = Roster::lettered(2);
        let mut h = History::new(Arc::from(vec!["T".to_string()]));
        h.push(ProcessId(0), ObjectId(0), EventKind::Invoke(Invocation::Transfer { to: AccountId(1), value: 2 }));
        h.push(ProcessId(1), ObjectId(0), EventKind::Invoke(Invocation::TotalSupply));
        h.push(ProcessId(0), ObjectId(0), EventKind::Response(Value::Bool(true)));
        let j = history_to_json(&h, &r);
        assert_eq!(j[0]["args"], json!(["a_B", 2]));
        assert_eq!(j[2]["value"], json!(true));
        assert_eq!(history_from_json(&j, &r).unwrap(), h);
    }

    #[test]
    fn schedule_round_trip() {
        let r = Roster::lettered(2);
        let s = Schedule { steps: vec![ProcessId(1), ProcessId(0)], crashes: vec![CrashPoint { process: ProcessId(1), position: 1 }] };
        assert_eq!(schedule_from_json(&schedule_to_json(&s, &r), &r).unwrap(), s);
    }
}
