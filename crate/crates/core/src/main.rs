use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cyclegap::operators::identity_suite;
use cyclegap::{CheckGroup, Error, Report, Scenario};

/// Identities must hold to this absolute violation.
const IDENTITY_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(
    name = "cyclegap",
    version,
    about = "Cycles, gap displacements and gap vectors of cyclic projections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and run every check.
    Run {
        scenario: PathBuf,
        /// Report path (default: <scenario stem>.report.json in the current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a scenario and run only the selected checks.
    Verify {
        scenario: PathBuf,
        /// cycle, pthm, geometry, saddle, dbound or all; repeatable.
        #[arg(long = "check", value_parser = parse_check, default_value = "all")]
        checks: Vec<Vec<CheckGroup>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the operator identities on random vectors.
    Identities {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_check(s: &str) -> Result<Vec<CheckGroup>, String> {
    CheckGroup::parse_list(&[s]).map_err(|e| match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    })
}

fn default_out(scenario: &Path) -> PathBuf {
    let stem = scenario
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    PathBuf::from(format!("{stem}.report.json"))
}

fn run_scenario(path: &Path, groups: &[CheckGroup], out: Option<PathBuf>) -> ExitCode {
    let scenario = match Scenario::load(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let report: Report = match cyclegap::scenario::run(&scenario, groups) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = out.unwrap_or_else(|| default_out(path));
    if let Err(e) = std::fs::write(&out, report.to_json()) {
        eprintln!("error: cannot write {}: {e}", out.display());
        return ExitCode::from(2);
    }
    for c in &report.checks {
        println!(
            "{:<18} {}  max violation {:.3e}  tolerance {:.1e}",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.max_violation,
            c.tolerance
        );
    }
    if !report.all_converged() {
        println!("solver did not converge on every start");
    }
    println!("report written to {}", out.display());
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn identities(m: usize, n: usize, trials: usize, seed: u64) -> ExitCode {
    let results = match identity_suite(m, n, trials, seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut ok = true;
    for r in &results {
        let pass = r.max_violation <= IDENTITY_TOL;
        ok &= pass;
        println!(
            "{:<28} {:.3e}  {}",
            r.name,
            r.max_violation,
            if pass { "pass" } else { "FAIL" }
        );
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CYCLEGAP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Run { scenario, out } => run_scenario(&scenario, &CheckGroup::ALL, out),
        Command::Verify {
            scenario,
            checks,
            out,
        } => {
            let mut groups: Vec<CheckGroup> = checks.into_iter().flatten().collect();
            groups.sort();
            groups.dedup();
            run_scenario(&scenario, &groups, out)
        }
        Command::Identities { m, n, trials, seed } => identities(m, n, trials, seed),
    }
}
