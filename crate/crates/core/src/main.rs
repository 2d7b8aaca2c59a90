use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value as Json;

use tokensync::algorithms::Variant;
use tokensync::cli::{execute, ExitStatus, ObjectKind, Outcome, Request, RunFlags};
use tokensync::codec::ScenarioFile;

#[derive(Parser)]
#[command(name = "tokensync", version, about = "Simulate and verify token-based synchronization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Literal,
    Strict,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectArg {
    Token,
    Restricted,
    Register,
    Consensus,
}

#[derive(Args, Default)]
struct Flags {
    /// Explore every schedule (the default unless the scenario says otherwise).
    #[arg(long, conflicts_with = "samples")]
    exhaustive: bool,
    /// Sample this many random schedules instead.
    #[arg(long, value_name = "N")]
    samples: Option<usize>,
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    crashes: Option<Switch>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, value_name = "M")]
    max_schedules: Option<usize>,
    /// Replay one explicit schedule (`{steps, crashes}` JSON).
    #[arg(long, value_name = "FILE")]
    schedule: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Spender sets, class and synchronization levels of a state.
    Classify { scenario: PathBuf },
    /// Check agreement, validity and termination of the consensus protocol.
    Consensus {
        scenario: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Check a recorded history, or every history a scenario's workload produces.
    Linearize {
        scenario: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        history: Option<PathBuf>,
        #[arg(long, value_enum)]
        object: Option<ObjectArg>,
        #[command(flatten)]
        flags: Flags,
    },
    /// Valency of the consensus protocol's reachable configurations.
    Valency {
        scenario: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Whether two steps commute at the scenario's state, e.g. `A:approve(B,1)`.
    Commute { scenario: PathBuf, op1: String, op2: String },
    /// Replay the worked three-account token example.
    ReplayExample,
    /// Check per-operation step bounds under every schedule.
    Waitfree {
        scenario: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn scenario(path: &Path) -> Result<ScenarioFile, String> {
    ScenarioFile::from_json(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn json_file(path: &Path) -> Result<Json, String> {
    serde_json::from_str(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

impl Flags {
    fn into_run(self) -> Result<RunFlags, String> {
        Ok(RunFlags {
            exhaustive: self.exhaustive,
            samples: self.samples,
            seed: self.seed,
            crashes: self.crashes.map(|s| matches!(s, Switch::On)),
            variant: self.variant.map(|v| match v {
                VariantArg::Literal => Variant::Literal,
                VariantArg::Strict => Variant::Strict,
            }),
            max_schedules: self.max_schedules,
            schedule: self.schedule.as_deref().map(json_file).transpose()?,
        })
    }
}

fn request(command: Command) -> Result<Request, String> {
    Ok(match command {
        Command::Classify { scenario: s } => Request::Classify { scenario: scenario(&s)? },
        Command::Consensus { scenario: s, flags } => Request::Consensus { scenario: scenario(&s)?, flags: flags.into_run()? },
        Command::Linearize { scenario: s, history, object, flags } => Request::Linearize {
            scenario: s.as_deref().map(scenario).transpose()?,
            history: history.as_deref().map(json_file).transpose()?,
            object: object.map(|o| match o {
                ObjectArg::Token => ObjectKind::Token,
                ObjectArg::Restricted => ObjectKind::Restricted,
                ObjectArg::Register => ObjectKind::Register,
                ObjectArg::Consensus => ObjectKind::Consensus,
            }),
            flags: flags.into_run()?,
        },
        Command::Valency { scenario: s, flags } => Request::Valency { scenario: scenario(&s)?, flags: flags.into_run()? },
        Command::Commute { scenario: s, op1, op2 } => Request::Commute { scenario: scenario(&s)?, op1, op2 },
        Command::ReplayExample => Request::ReplayExample,
        Command::Waitfree { scenario: s, flags } => Request::Waitfree { scenario: scenario(&s)?, flags: flags.into_run()? },
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { ExitStatus::InputError.code() } else { 0 });
        }
    };
    let outcome = match request(cli.command) {
        Ok(r) => execute(&r),
        Err(msg) => Outcome {
            exit: ExitStatus::InputError,
            report: serde_json::json!({"pass": false, "error": msg}),
            text: format!("input error: {msg}"),
        },
    };
    let report = serde_json::to_string_pretty(&outcome.report).expect("reports serialize");
    println!("{report}");
    eprintln!("{}", outcome.text.trim_end());
    if let Some(path) = cli.out {
        if let Err(e) = std::fs::write(&path, format!("{report}\n")) {
            eprintln!("{}: {e}", path.display());
            return ExitCode::from(ExitStatus::InputError.code());
        }
    }
    ExitCode::from(outcome.exit.code())
}
