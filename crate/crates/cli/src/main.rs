//! `kpzmp` command line front end.
//!
//! Every subcommand except `verify` reads a scenario JSON file (see
//! `config::Scenario`), runs the matching solver from the core crate, and
//! writes a small CSV. Exit codes: 0 success, 2 schema/config error,
//! 3 numerical or tolerance failure.

mod config;
mod run;
mod verify;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Kind, Scenario};
use run::{schema, write_csv, CliError};

#[derive(Parser)]
#[command(name = "kpzmp", version, about = "Multipoint TASEP / KPZ fixed point distributions")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Joint TASEP position probability from a particle scenario.
    TasepProb(Common),
    /// Joint KPZ fixed point CDF from a wedge scenario.
    KpzProb(Common),
    /// Evaluate the initial-data transform at sample points.
    ChiEval(Common),
    /// Single-time determinant routes.
    EqualTime(Common),
    /// TASEP-to-KPZ convergence table over a step-size list.
    Convergence(Common),
    /// Run the built-in invariant suite.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file (required for all subcommands except verify).
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; falls back to the scenario's `out`, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Rayon thread count (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Verify depth; `full` adds the slow cross-method checks.
    #[arg(long, value_enum, default_value_t = Budget::Quick)]
    budget: Budget,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Budget {
    Quick,
    Full,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match cli.cmd {
        Cmd::TasepProb(c) => (Kind::TasepProb, c),
        Cmd::KpzProb(c) => (Kind::KpzProb, c),
        Cmd::ChiEval(c) => (Kind::ChiEval, c),
        Cmd::EqualTime(c) => (Kind::EqualTime, c),
        Cmd::Convergence(c) => (Kind::Convergence, c),
        Cmd::Verify(c) => (Kind::Verify, c),
    };
    match dispatch(kind, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kpzmp: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(kind: Kind, common: Common) -> Result<(), CliError> {
    if let Some(n) = common.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| schema(format!("worker pool: {e}")))?;
    }

    if kind == Kind::Verify {
        // The suite needs no scenario; if one is given its kind must match.
        let mut out_path = common.out.clone();
        if let Some(path) = &common.config {
            let s = load_scenario(path)?;
            if s.kind != Kind::Verify {
                return Err(schema(format!("scenario kind {} under the verify subcommand", s.kind)));
            }
            if out_path.is_none() {
                out_path = s.out.as_ref().map(PathBuf::from);
            }
        }
        let start = Instant::now();
        let (rows, all_pass) = verify::verify_all(common.budget == Budget::Full, common.seed.unwrap_or(0));
        emit(&rows, start.elapsed().as_secs_f64(), out_path.as_deref())?;
        return if all_pass {
            Ok(())
        } else {
            Err(CliError::Numeric("verification checks failed".into()))
        };
    }

    let path = common
        .config
        .as_ref()
        .ok_or_else(|| schema("--config is required"))?;
    let scenario = load_scenario(path)?;
    let out_path = common
        .out
        .clone()
        .or_else(|| scenario.out.as_ref().map(PathBuf::from));

    let start = Instant::now();
    let rows = run::execute(&scenario, kind, common.seed)?;
    emit(&rows, start.elapsed().as_secs_f64(), out_path.as_deref())
}

fn load_scenario(path: &std::path::Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| schema(format!("reading {}: {e}", path.display())))?;
    Scenario::parse(&text).map_err(CliError::Schema)
}

fn emit(rows: &[run::Row], wall_s: f64, out: Option<&std::path::Path>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows, wall_s).map_err(|e| CliError::Numeric(format!("csv: {e}")))?;
    match out {
        Some(path) => fs::write(path, &buf)
            .map_err(|e| CliError::Numeric(format!("writing {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(&buf)
            .map_err(|e| CliError::Numeric(format!("stdout: {e}"))),
    }
}
