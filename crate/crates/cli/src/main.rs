use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fabric_cli::error::HarnessError;
use fabric_cli::export::{export_trajectory, Format};
use fabric_cli::scenario::{load_scenario, Scenario};
use fabric_cli::suite::{check_derivatives, run_suite};
use fabric_cli::run::run_scenario;

/// Environment variable that replaces the seed of every loaded scenario.
const SEED_VAR: &str = "FABRIC_SEED";

#[derive(Parser)]
#[command(name = "fabric", version, about = "Run and audit fabric scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out a scenario, print its report and optionally export the trajectory.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Print the invariant report only.
    Audit { scenario: PathBuf },
    /// Audit every scenario in a directory.
    Suite { dir: PathBuf },
    /// Run the finite-difference derivative checks for a scenario's components.
    CheckDerivatives { scenario: PathBuf },
}

fn seed_override() -> Result<Option<u64>, HarnessError> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| HarnessError::validation(SEED_VAR, format!("expected an unsigned integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn load(path: &Path) -> Result<Scenario, HarnessError> {
    let s = load_scenario(path)?;
    Ok(match seed_override()? {
        Some(seed) => s.with_seed(seed),
        None => s,
    })
}

fn run(path: &Path, out: Option<&Path>, format: Format) -> Result<i32, HarnessError> {
    let scenario = load(path)?;
    let outcome = run_scenario(&scenario)?;
    println!("{}", outcome.report);
    if let (Some(dir), Some(traj)) = (out, &outcome.trajectory) {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let file = dir.join(format!("{}.{}", scenario.name, format.extension()));
        export_trajectory(traj, &file, format)?;
        println!("wrote {}", file.display());
    }
    Ok(outcome.report.exit_code())
}

fn audit(path: &Path) -> Result<i32, HarnessError> {
    let outcome = run_scenario(&load(path)?)?;
    println!("{}", outcome.report);
    Ok(outcome.report.exit_code())
}

fn suite(dir: &Path) -> Result<i32, HarnessError> {
    let entries = run_suite(dir, seed_override()?)?;
    if entries.is_empty() {
        return Err(HarnessError::validation("suite", format!("no scenario files in {}", dir.display())));
    }
    let mut failures = 0;
    for e in &entries {
        let name = e.path.file_name().map_or_else(|| e.path.display().to_string(), |n| n.to_string_lossy().into_owned());
        let status = if e.passed() { "pass" } else { "FAIL" };
        match &e.result {
            Ok(r) => println!("[{status}] {name}: {} passed, {} failed", r.passed, r.failed),
            Err(err) => println!("[{status}] {name}: {err}"),
        }
        if !e.passed() {
            failures += 1;
        }
    }
    println!("{} scenarios, {} failed", entries.len(), failures);
    Ok(i32::from(failures > 0))
}

fn derivatives(path: &Path) -> Result<i32, HarnessError> {
    let report = check_derivatives(&load(path)?)?;
    println!("{report}");
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { scenario, out, format } => run(scenario, out.as_deref(), *format),
        Command::Audit { scenario } => audit(scenario),
        Command::Suite { dir } => suite(dir),
        Command::CheckDerivatives { scenario } => derivatives(scenario),
    };
    let code = result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
