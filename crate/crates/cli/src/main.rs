use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use varmech_cli::checks::{self, Fixture};
use varmech_cli::{catalog, run_spec, Overrides, ProblemSpec};

#[derive(Parser)]
#[command(
    name = "varmech",
    version,
    about = "Variational integrators and optimal control on algebroids and groupoids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file or a catalog problem and write its trajectory as CSV.
    Run(RunArgs),
    /// Run the invariant suite.
    Check {
        /// Only run checks whose name contains this text.
        #[arg(long)]
        only: Option<String>,
    },
    /// List catalog problems.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Problem file.
    #[arg(required_unless_present = "catalog", conflicts_with = "catalog")]
    spec: Option<PathBuf>,
    /// Catalog problem name (see `varmech list`).
    #[arg(long)]
    catalog: Option<String>,
    /// CSV destination; the summary goes to stdout. Without it the CSV goes
    /// to stdout and the summary to stderr.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t1: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Check { only } => check(only.as_deref()),
        Command::List => {
            for name in catalog::names() {
                println!("{name:<26} {}", catalog::description(name).unwrap_or_default());
            }
            ExitCode::SUCCESS
        }
    }
}

fn run(args: RunArgs) -> ExitCode {
    let (origin, text) = match (&args.spec, &args.catalog) {
        (Some(path), _) => match std::fs::read_to_string(path) {
            Ok(t) => (path.display().to_string(), t),
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        (None, Some(name)) => match catalog::text(name) {
            Some(t) => (format!("catalog:{name}"), t.to_string()),
            None => {
                eprintln!("error: no catalog problem named '{name}' (see `varmech list`)");
                return ExitCode::from(2);
            }
        },
        (None, None) => unreachable!("clap requires one of them"),
    };
    let spec = match ProblemSpec::parse(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {origin}: {e}");
            return ExitCode::from(2);
        }
    };
    let ov = Overrides {
        dt: args.dt,
        t1: args.t1,
        steps: args.steps,
    };
    let output = match run_spec(&spec, &ov) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {origin}: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let written = match &args.out {
        Some(path) => File::create(path)
            .map_err(|e| e.to_string())
            .and_then(|f| output.table.write(BufWriter::new(f)).map_err(|e| e.to_string()))
            .map(|()| println!("{}", output.summary_line())),
        None => {
            let stdout = io::stdout();
            let res = output.table.write(stdout.lock()).map_err(|e| e.to_string());
            eprintln!("{}", output.summary_line());
            res
        }
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: writing output: {e}");
            ExitCode::from(1)
        }
    }
}

fn check(only: Option<&str>) -> ExitCode {
    let report = checks::run_checks(only, &Fixture::default());
    let mut out = io::stdout().lock();
    for r in &report {
        let status = if r.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{status} {:<40} {:>8.3}s  {}", r.name, r.seconds, r.detail);
    }
    let failed = report.iter().filter(|r| !r.passed).count();
    let _ = writeln!(out, "{} checks, {failed} failed", report.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
