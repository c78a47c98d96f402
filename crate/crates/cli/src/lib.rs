//! Batch experiment runner and acceptance suite for `binq4-core`.

pub mod commands;
pub mod config;
pub mod parse;
pub mod suite;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Arg, ArgAction, Command};

use crate::commands::run_command;
use crate::config::{Config, KEYS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_ACCEPTANCE: i32 = 4;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "BINQ4_THREADS";

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Budget(_) => EXIT_BUDGET,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<binq4_core::error::Error> for CliError {
    fn from(e: binq4_core::error::Error) -> Self {
        use binq4_core::error::Error;
        match e {
            Error::Budget(m) => CliError::Budget(m),
            Error::Inconsistent(_) => CliError::Internal(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

const SUBCOMMANDS: &[(&str, &str)] = &[
    ("reps", "count and list representations of q by Q"),
    ("xn", "build X(n) and map it into S(n)"),
    ("sn", "enumerate S(n) as TSV rows (x0, X1..X4, fiber_id) or JSON statistics"),
    ("fibers", "fibers of S(n) modulo p^(2n) with their lattices and invariant checks"),
    ("curve", "integral points on a planar curve in a box"),
    ("genus", "p-neighbor closure of Q with automorphism orders"),
    ("thm13", "r(q,Q) against the spin-genus average, with hypotheses"),
    ("suite", "run the acceptance suite"),
];

pub fn cli() -> Command {
    let mut cmd = Command::new("binq4")
        .about("Representations of binary by quaternary quadratic forms: exact experiments")
        .subcommand_required(true)
        .arg(Arg::new("config").long("config").value_name("FILE").global(true).help("JSON config whose values are decimal strings"));
    for (key, help) in KEYS {
        cmd = cmd.arg(Arg::new(*key).long(*key).value_name("VALUE").global(true).action(ArgAction::Set).help(*help));
    }
    for (name, about) in SUBCOMMANDS {
        cmd = cmd.subcommand(Command::new(*name).about(*about));
    }
    cmd
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize =
        v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got \"{v}\"")))?;
    // A second initialization in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(args: Vec<OsString>) -> Result<(i32, Option<(String, Option<PathBuf>)>), CliError> {
    let matches = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return Ok((code, None));
        }
    };
    configure_threads()?;
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let mut cfg = match sub.get_one::<String>("config") {
        Some(path) => Config::from_file(path.as_ref())?,
        None => Config::default(),
    };
    for (key, _) in KEYS {
        if let Some(v) = sub.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    let outcome = run_command(name, &cfg)?;
    let code = if outcome.failed { EXIT_ACCEPTANCE } else { EXIT_OK };
    Ok((code, Some((outcome.text, cfg.get("out").map(PathBuf::from)))))
}

/// Parse arguments, run the subcommand, write the report and return the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match execute(args.into_iter().map(Into::into).collect()) {
        Ok((code, None)) => code,
        Ok((code, Some((text, out)))) => {
            let written = match out {
                Some(path) => std::fs::write(&path, &text).map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(text.as_bytes()).map_err(|e| format!("cannot write report: {e}"))
                }
            };
            match written {
                Ok(()) => code,
                Err(m) => {
                    eprintln!("error: {m}");
                    EXIT_CONFIG
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
