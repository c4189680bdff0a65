//! `moreau`: batch driver for the sweeping-process solver.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad configuration, 3 solver
//! failure, 4 iteration budget exhausted, 5 verification failure.

use clap::{Args, Parser, Subcommand};
use moreau_core::bounds::BoundCertificate;
use moreau_core::scenario::{registry, ResolvedScenario, ScenarioConfig};
use moreau_core::stepper::solve_with_halving;
use moreau_core::verify::{verify, verify_all, VerificationOutcome, VerificationReport};
use moreau_core::{filippov, Error};
use serde_json::{json, Value};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const MAX_HALVINGS: usize = 8;

#[derive(Parser)]
#[command(
    name = "moreau",
    version,
    about = "Catching-up solver for perturbed integro-differential sweeping processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve with a fixed selection and write the trajectory as CSV.
    Solve(RunArgs),
    /// Build a selection of F by successive approximations.
    Iterate(RunArgs),
    /// Print the a priori bound certificate.
    Bounds(RunArgs),
    /// Run every invariant check and write a report.
    Verify(RunArgs),
    /// List the built-in scenarios.
    ListScenarios,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Built-in scenario name.
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Time step.
    #[arg(long)]
    h: Option<f64>,
    /// Stopping tolerance of the iteration.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Trajectory CSV (a directory with `verify --all`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print the fully resolved configuration and exit.
    #[arg(long)]
    dump_config: bool,
    /// Verify every built-in scenario.
    #[arg(long, conflicts_with_all = ["scenario", "config"])]
    all: bool,
}

/// Failure with its exit code and one-line diagnostic.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn io(path: &Path, e: io::Error) -> Self {
        Failure {
            code: 1,
            message: format!("{}: {e}", path.display()),
        }
    }

    fn config(message: String) -> Self {
        Failure { code: 2, message }
    }
}

/// Configuration problems exit with 2, everything else with 3.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::InvalidGrid(_)
            | Error::InfeasibleInitialPoint { .. }
            | Error::DimensionMismatch { .. }
            | Error::R0TooSmall { .. } => 2,
            Error::MaxIterationsExceeded(_) => 4,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => run_solve(&args),
        Command::Iterate(args) => run_iterate(&args),
        Command::Bounds(args) => run_bounds(&args),
        Command::Verify(args) => run_verify(&args),
        Command::ListScenarios => list_scenarios(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Reads the configuration and applies the command-line overrides.
fn load(args: &RunArgs) -> Result<(ResolvedScenario, Option<PathBuf>), Failure> {
    let (config, base_dir) = match (&args.scenario, &args.config) {
        (Some(name), None) => (ScenarioConfig::named(name), None),
        (None, Some(path)) => {
            let config = ScenarioConfig::from_file(path)?;
            (config, path.parent().map(Path::to_path_buf))
        }
        _ => return Err(Failure::config("give --scenario NAME or --config PATH".into())),
    };
    let mut resolved = config.resolve()?;
    if let Some(h) = args.h {
        resolved = resolved.with_step(h)?;
    }
    if let Some(tol) = args.tol {
        resolved = resolved.with_tol(tol)?;
    }
    if let Some(n) = args.max_iter {
        resolved = resolved.with_max_iter(n)?;
    }
    Ok((resolved, base_dir))
}

fn dump(resolved: &ResolvedScenario) -> Outcome {
    println!("{}", resolved.to_config().to_json());
    Ok(())
}

fn output_path(flag: &Option<PathBuf>, configured: &Option<String>) -> Option<PathBuf> {
    flag.clone().or_else(|| configured.as_ref().map(PathBuf::from))
}

fn write_file(path: &Path, contents: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Failure::io(path, e))
}

/// Writes to `path`, or to stdout when no path is given.
fn emit(path: Option<PathBuf>, contents: &str) -> Outcome {
    match path {
        Some(p) => write_file(&p, contents),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(contents.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::io(Path::new("<stdout>"), e))
        }
    }
}

fn to_json(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

fn run_solve(args: &RunArgs) -> Outcome {
    let (scenario, base_dir) = load(args)?;
    if args.dump_config {
        return dump(&scenario);
    }
    let problem = scenario.build_problem()?;
    let grid = scenario.build_grid()?;
    let z = scenario.build_selection(&grid, base_dir.as_deref())?;
    let traj = solve_with_halving(&problem, &z, grid.max_step(), MAX_HALVINGS)?;
    emit(output_path(&args.out, &scenario.output.csv), &traj.to_csv_string())
}

fn run_iterate(args: &RunArgs) -> Outcome {
    let (scenario, _) = load(args)?;
    if args.dump_config {
        return dump(&scenario);
    }
    let problem = scenario.build_problem()?;
    let grid = scenario.build_grid()?;
    let cert = BoundCertificate::for_problem(&problem, &grid)?;
    let report_path = output_path(&args.report, &scenario.output.report);
    match filippov::iterate_with_certificate(&problem, &grid, &cert, scenario.tol, scenario.max_iter) {
        Ok(outcome) => {
            for r in &outcome.report.records {
                log::info!(
                    "iteration {}: sup_y_delta={:e} factorial_bound={:e}",
                    r.i,
                    r.sup_y_delta,
                    r.factorial_bound
                );
            }
            let report = json!({
                "scenario": scenario.name,
                "iterations": outcome.report,
                "certificate": cert.summary(101),
            });
            let csv_path = output_path(&args.out, &scenario.output.csv);
            match (&csv_path, &report_path) {
                (None, None) => {
                    emit(None, &outcome.trajectory.to_csv_string())?;
                    eprint!("{}", to_json(&report));
                }
                _ => {
                    if let Some(p) = csv_path {
                        write_file(&p, &outcome.trajectory.to_csv_string())?;
                    }
                    emit(report_path, &to_json(&report))?;
                }
            }
            Ok(())
        }
        Err(Error::MaxIterationsExceeded(rep)) => {
            let report = json!({
                "scenario": scenario.name,
                "iterations": rep,
                "certificate": cert.summary(101),
            });
            match report_path {
                Some(p) => write_file(&p, &to_json(&report))?,
                None => eprint!("{}", to_json(&report)),
            }
            Err(Error::MaxIterationsExceeded(rep).into())
        }
        Err(e) => Err(e.into()),
    }
}

fn run_bounds(args: &RunArgs) -> Outcome {
    let (scenario, _) = load(args)?;
    if args.dump_config {
        return dump(&scenario);
    }
    let problem = scenario.build_problem()?;
    let grid = scenario.build_grid()?;
    let cert = BoundCertificate::for_problem(&problem, &grid)?;
    let fubini: Vec<_> = (1..=3)
        .map(|i| cert.fubini(i, problem.t_end))
        .collect::<Result<_, _>>()?;
    let report = json!({
        "scenario": scenario.name,
        "certificate": cert.summary(101),
        "fubini": fubini,
    });
    emit(output_path(&args.report, &scenario.output.report), &to_json(&report))
}

fn print_failures(report: &VerificationReport) {
    for c in report.failing() {
        eprintln!(
            "{}: check {} failed (max violation {:e}){}",
            report.scenario,
            c.name,
            c.max_violation,
            c.detail.as_ref().map(|d| format!(": {d}")).unwrap_or_default()
        );
    }
}

fn run_verify(args: &RunArgs) -> Outcome {
    if args.all {
        return run_verify_all(args);
    }
    let (scenario, _) = load(args)?;
    if args.dump_config {
        return dump(&scenario);
    }
    let VerificationOutcome { report, trajectory } = verify(&scenario)?;
    if let (Some(p), Some(t)) = (output_path(&args.out, &scenario.output.csv), &trajectory) {
        write_file(&p, &t.to_csv_string())?;
    }
    emit(
        output_path(&args.report, &scenario.output.report),
        &to_json(&json!(report)),
    )?;
    if report.passed() {
        Ok(())
    } else {
        print_failures(&report);
        Err(Failure {
            code: 5,
            message: format!("verification of {} failed", report.scenario),
        })
    }
}

fn run_verify_all(args: &RunArgs) -> Outcome {
    let mut scenarios = Vec::new();
    for s in registry() {
        let sub = RunArgs {
            scenario: Some(s.name.to_string()),
            config: None,
            ..args.clone()
        };
        scenarios.push(load(&sub)?.0);
    }
    if args.dump_config {
        let all: Vec<_> = scenarios.iter().map(|s| s.to_config()).collect();
        return emit(None, &to_json(&json!(all)));
    }
    let mut reports = Vec::new();
    let mut failed = Vec::new();
    for (scenario, result) in scenarios.iter().zip(verify_all(&scenarios)) {
        let VerificationOutcome { report, trajectory } = result?;
        if let (Some(dir), Some(t)) = (&args.out, &trajectory) {
            write_file(&dir.join(format!("{}.csv", scenario.name)), &t.to_csv_string())?;
        }
        if !report.passed() {
            print_failures(&report);
            failed.push(report.scenario.clone());
        }
        reports.push(report);
    }
    let merged = json!({
        "status": if failed.is_empty() { "PASS" } else { "FAIL" },
        "scenarios": reports,
    });
    emit(args.report.clone(), &to_json(&merged))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: 5,
            message: format!("verification failed for {}", failed.join(", ")),
        })
    }
}

fn list_scenarios() -> Outcome {
    let mut text = String::new();
    for s in registry() {
        text.push_str(&format!(
            "{:<26} d={}  [{}]  {}\n",
            s.name,
            s.dim(),
            s.tags().join(", "),
            s.summary
        ));
    }
    emit(None, &text)
}
