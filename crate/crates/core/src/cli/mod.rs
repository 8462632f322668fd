//! Command-line front end: `solve`, `verify`, `oracle` and `sample`.
//!
//! Every command reads a JSON problem configuration and writes JSON (or CSV
//! for `sample`). Failures are written as a structured error object and
//! mapped to exit codes: 2 for degenerate inputs or violated hypotheses, 3
//! for convergence failures, 4 for configuration errors, 1 otherwise.

pub mod config;
pub mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::oracle::{brute_force, monte_carlo_value, policy_value, StoppingPolicy};
use crate::solver::{solve, SolverOptions};
use crate::value::{verify_solution, Solution, VerifyOptions};
pub use config::{HandleRegistry, ProblemConfig};
use report::{
    ErrorOutput, MonteCarloPoint, OracleOutput, OraclePoint, SolutionReport, VerificationOutput, ORACLE_SCHEMA,
    VERIFICATION_SCHEMA,
};

pub const LOG_ENV: &str = "OSTOP_LOG";

#[derive(Debug, Parser)]
#[command(name = "ostop", version, about = "Optimal stopping for one-dimensional diffusions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the problem and write a solution report.
    Solve(RunArgs),
    /// Verify a solution report (or a fresh solve of the configuration).
    Verify(RunArgs),
    /// Compare the solver against brute-force and Monte Carlo policy values.
    Oracle(RunArgs),
    /// Write `x,g,V,region` samples of the value function as CSV.
    Sample(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Problem configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV samples file for `sample` (overrides --out), or extra samples for `solve`.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Seed for the Monte Carlo oracle.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Work window for grid scans.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    pub window: Option<Vec<f64>>,
    /// Solution report to verify instead of solving again.
    #[arg(long)]
    pub solution: Option<PathBuf>,
    /// Suppress the summary on standard error.
    #[arg(long)]
    pub quiet: bool,
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Degenerate(_) | Error::Hypothesis(_) => 2,
        Error::Convergence { .. } => 3,
        Error::Config(_) => 4,
        _ => 1,
    }
}

fn window(args: &RunArgs) -> Result<Option<Interval>> {
    match args.window.as_deref() {
        None => Ok(None),
        Some([lo, hi]) => Interval::new(*lo, *hi)
            .map(Some)
            .map_err(|e| Error::Config(format!("--window: {e}"))),
        Some(_) => Err(Error::Config("--window takes two values".into())),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Config(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut out = open_output(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Config(e.to_string()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| Error::Config(e.to_string()))
}

struct Problem {
    config: ProblemConfig,
    opts: SolverOptions,
    solution: Solution,
    elapsed: f64,
}

fn load_config(args: &RunArgs) -> Result<ProblemConfig> {
    let path = args
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    ProblemConfig::load(path)
}

fn solve_config(config: ProblemConfig, args: &RunArgs, registry: &HandleRegistry) -> Result<Problem> {
    let opts = config.solver_options(window(args)?)?;
    let model = config.model(registry)?;
    let reward = config.reward(&model, registry)?;
    let start = Instant::now();
    let solution = solve(&model, &reward, &opts)?;
    Ok(Problem {
        config,
        opts,
        solution,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

fn summary(args: &RunArgs, solution: &Solution) {
    if args.quiet {
        return;
    }
    if solution.intervals().is_empty() {
        eprintln!("stop everywhere: the negative set is empty");
    }
    for s in solution.intervals() {
        eprintln!("continuation {}  k1 = {:.6e}  k2 = {:.6e}", s.c, s.k1, s.k2);
    }
}

fn cmd_solve(args: &RunArgs, registry: &HandleRegistry) -> Result<()> {
    let p = solve_config(load_config(args)?, args, registry)?;
    let verification = verify_solution(&p.solution, &VerifyOptions::from(&p.opts))?;
    summary(args, &p.solution);
    let report = SolutionReport::new(&p.solution, verification, &p.opts, p.config.clone(), p.elapsed);
    write_json(args.out.as_deref(), &report)?;
    if let Some(path) = &args.samples {
        write_samples_for(&p, Some(path))?;
    }
    Ok(())
}

fn cmd_verify(args: &RunArgs, registry: &HandleRegistry) -> Result<()> {
    let (solution, opts) = match &args.solution {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let report = SolutionReport::from_json(&text)?;
            let config = match &args.config {
                Some(_) => load_config(args)?,
                None => report.problem.clone(),
            };
            let opts = config.solver_options(window(args)?)?;
            let model = config.model(registry)?;
            let reward = config.reward(&model, registry)?;
            let solution = Solution::from_intervals(model, reward, &report.continuation_intervals()?)?;
            (solution, opts)
        }
        None => {
            let p = solve_config(load_config(args)?, args, registry)?;
            (p.solution, p.opts)
        }
    };
    let verification = verify_solution(&solution, &VerifyOptions::from(&opts))?;
    summary(args, &solution);
    let output = VerificationOutput {
        schema: VERIFICATION_SCHEMA.into(),
        continuation: solution
            .intervals()
            .iter()
            .map(|s| report::ReportInterval {
                lo: s.c.lo(),
                hi: s.c.hi(),
                k1: s.k1,
                k2: s.k2,
            })
            .collect(),
        verification,
    };
    write_json(args.out.as_deref(), &output)
}

fn cmd_oracle(args: &RunArgs, registry: &HandleRegistry) -> Result<()> {
    let p = solve_config(load_config(args)?, args, registry)?;
    let oc = &p.config.oracle;
    let model = p.solution.model();
    let g = p.solution.reward().g_fn();
    let evals = oc.eval_points()?;
    let result = brute_force(
        model,
        &*g,
        &oc.templates,
        oc.step,
        oc.window.interval()?,
        &evals,
        u128::from(oc.budget),
    )?;
    let points: Vec<OraclePoint> = result
        .best
        .iter()
        .map(|b| {
            let v = p.solution.evaluate(b.x)?;
            Ok(OraclePoint {
                x: b.x,
                solver_value: v,
                best_value: b.value,
                excess: b.value - v,
                best_gaps: b.gaps.iter().map(|&g| g.into()).collect(),
            })
        })
        .collect::<Result<_>>()?;
    let max_excess = points.iter().map(|q| q.excess).fold(f64::NEG_INFINITY, f64::max);

    let mut monte_carlo = Vec::new();
    if let Some(mc) = &oc.monte_carlo {
        let policy = StoppingPolicy::from_solution(&p.solution);
        let seed = args.seed.unwrap_or(mc.seed);
        for &x in &mc.points {
            let exact = policy_value(model, &*g, &policy, x)?.value;
            let est = monte_carlo_value(model, &*g, &policy, x, mc.paths, mc.dt, seed)?;
            monte_carlo.push(MonteCarloPoint {
                x,
                solver_value: exact,
                estimate: est.value,
                stderr: est.stderr,
                z_score: if est.stderr > 0.0 { (est.value - exact) / est.stderr } else { 0.0 },
            });
        }
    }
    if !args.quiet {
        eprintln!(
            "scanned {} policies; largest excess over the solver {max_excess:.3e}",
            result.policies_scanned
        );
    }
    let output = OracleOutput {
        schema: ORACLE_SCHEMA.into(),
        policies_scanned: u64::try_from(result.policies_scanned).unwrap_or(u64::MAX),
        max_excess,
        dominance_tol: oc.dominance_tol,
        dominated: max_excess <= oc.dominance_tol,
        points,
        monte_carlo,
    };
    write_json(args.out.as_deref(), &output)
}

fn write_samples_for(p: &Problem, path: Option<&Path>) -> Result<()> {
    let range = match p.config.output.sample_range {
        Some(b) => b.interval()?,
        None => p.opts.work_window,
    };
    let range = range
        .intersect(&p.solution.model().domain())
        .ok_or_else(|| Error::Config("sample range does not meet the state space".into()))?;
    let points: Vec<f64> = range
        .linspace(p.config.output.sample_count)
        .into_iter()
        .filter(|&x| p.solution.model().domain().contains(x))
        .collect();
    let mut out = open_output(path)?;
    report::write_samples(&mut out, &p.solution, &points)?;
    out.flush().map_err(|e| Error::Config(e.to_string()))
}

fn cmd_sample(args: &RunArgs, registry: &HandleRegistry) -> Result<()> {
    let p = solve_config(load_config(args)?, args, registry)?;
    summary(args, &p.solution);
    write_samples_for(&p, args.samples.as_deref().or(args.out.as_deref()))
}

/// Runs one command and returns its exit status. Errors are reported as a
/// JSON error object on `--out` (or standard output) and on standard error.
pub fn run(command: &Command, registry: &HandleRegistry) -> i32 {
    let (args, result) = match command {
        Command::Solve(a) => (a, cmd_solve(a, registry)),
        Command::Verify(a) => (a, cmd_verify(a, registry)),
        Command::Oracle(a) => (a, cmd_oracle(a, registry)),
        Command::Sample(a) => (a, cmd_sample(a, registry)),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            log::debug!("{e:?}");
            let body = ErrorOutput::new(&e);
            if let Err(write_err) = write_json(args.out.as_deref(), &body) {
                eprintln!("{write_err}");
            }
            if !args.quiet {
                eprintln!("error ({}): {e}", e.kind());
            }
            exit_code(&e)
        }
    }
}

/// Parses the process arguments, sets up logging from `OSTOP_LOG`, and runs.
pub fn main_with(registry: &HandleRegistry) -> i32 {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).try_init();
    let cli = Cli::parse();
    run(&cli.command, registry)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Degenerate("x".into())), 2);
        assert_eq!(exit_code(&Error::Hypothesis("x".into())), 2);
        assert_eq!(
            exit_code(&Error::Convergence {
                iterations: 1,
                lo: 0.0,
                hi: 1.0
            }),
            3
        );
        assert_eq!(exit_code(&Error::Config("x".into())), 4);
        assert_eq!(exit_code(&Error::Resolution("x".into())), 1);
    }

    #[test]
    fn parses_flags() {
        let cli = Cli::try_parse_from([
            "ostop", "solve", "--config", "p.json", "--window", "-6", "6", "--seed", "3", "--quiet",
        ])
        .unwrap();
        let Command::Solve(a) = cli.command else { panic!("wrong command") };
        assert_eq!(a.window, Some(vec![-6.0, 6.0]));
        assert_eq!(a.seed, Some(3));
        assert!(a.quiet);
        assert!(Cli::try_parse_from(["ostop", "plot"]).is_err());
    }
}
