//! Command-line front end for the purification toolkit.
//!
//! Every command emits a [`record::ResultRecord`] as JSON or CSV. Failures are
//! reported as a JSON error object on stdout with a nonzero exit code.

pub mod commands;
pub mod config;
pub mod record;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;
use purify_core::PurifyError;
use serde_json::json;
use thiserror::Error;

use config::{merge, CertifyTarget, CircuitKind, Cli, Command, Flags, Format, RunConfig, SdpMode};
use record::{round_sig, Meta, ResultRecord};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] PurifyError),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Core(e) => match e {
                PurifyError::BudgetExceeded(_) => "budget_exceeded",
                PurifyError::UnreachableGoal { .. } => "unreachable_goal",
                PurifyError::TrainingFailed { .. } => "training_failed",
                PurifyError::ZeroSuccessProbability(_) => "zero_success_probability",
                PurifyError::RankDeficient => "rank_deficient",
                _ => "invalid_parameter",
            },
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl Command {
    fn name_and_flags(&self) -> (&'static str, &Flags) {
        match self {
            Command::Analytic(f) => ("analytic", f),
            Command::Sdp {
                mode: SdpMode::Fidelity(f),
            } => ("sdp fidelity", f),
            Command::Sdp {
                mode: SdpMode::Probability(f),
            } => ("sdp probability", f),
            Command::Sdp {
                mode: SdpMode::Sweep(f),
            } => ("sdp sweep", f),
            Command::Certify {
                what: CertifyTarget::Golden(f),
            } => ("certify golden", f),
            Command::Circuit {
                kind: CircuitKind::Three(f),
            } => ("circuit three", f),
            Command::Circuit {
                kind: CircuitKind::Lcu(f),
            } => ("circuit lcu", f),
            Command::Circuit {
                kind: CircuitKind::Four(f),
            } => ("circuit four", f),
            Command::SampleComplexity(f) => ("sample-complexity", f),
            Command::Recurse(f) => ("recurse", f),
        }
    }
}

fn error_object(command: &str, err: &CliError) -> serde_json::Value {
    let mut body = json!({ "kind": err.kind(), "message": err.to_string() });
    match err {
        CliError::Core(PurifyError::TrainingFailed { best_residual }) => {
            body["best_residual"] = json!(round_sig(*best_residual));
        }
        CliError::Core(PurifyError::UnreachableGoal { best, cap, .. }) => {
            body["best_fidelity"] = json!(round_sig(*best));
            body["cap"] = json!(cap);
        }
        _ => {}
    }
    json!({ "command": command, "error": body, "meta": Meta::now() })
}

fn emit_error(command: &str, err: &CliError) {
    let text =
        serde_json::to_string_pretty(&error_object(command, err)).expect("error objects serialize");
    println!("{text}");
}

fn write_output(cfg: &RunConfig, record: &ResultRecord) -> Result<(), CliError> {
    let text = match cfg.format {
        Format::Json => record.to_json() + "\n",
        Format::Csv => record.to_csv().map_err(|e| CliError::Io(e.to_string()))?,
    };
    match cfg.out_path() {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

/// Caps the global worker pool when `PURIFY_THREADS` is set.
fn configure_threads() {
    if let Some(n) = std::env::var("PURIFY_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => {
                    emit_error(
                        "",
                        &CliError::Usage(e.render().to_string().trim().to_string()),
                    );
                    2
                }
            };
        }
    };
    configure_threads();
    let (name, flags) = cli.command.name_and_flags();
    let result = merge(flags)
        .and_then(|params| RunConfig::from_params(name, params))
        .and_then(|cfg| {
            let outcome = commands::dispatch(&cfg)?;
            if !outcome.record.all_finite() {
                return Err(CliError::Io("non-finite number in result rows".into()));
            }
            write_output(&cfg, &outcome.record)?;
            Ok(outcome.complete)
        });
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            emit_error(name, &e);
            e.exit_code()
        }
    }
}
