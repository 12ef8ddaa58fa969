//! `bangbang`: command-line front end for single solves, continuation runs,
//! Monte-Carlo batches and trajectory export.
//!
//! Exit status: 0 on success, 1 when the solver does not converge, 2 on
//! usage, configuration or I/O errors.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bangbang_core::artifacts::{
    evaluate_solution, read_json, write_json, write_trajectory_csv, SolveArtifact, HISTORY_FILE, RECORDS_CSV_FILE,
    RECORDS_FILE, REPORT_FILE, STATS_FILE, TIMINGS_FILE, TRAJECTORY_FILE,
};
use bangbang_core::config::RunConfig;
use bangbang_core::continuation::{continue_solve_with, ContinuationReport};
use bangbang_core::harness::{run_monte_carlo, write_records, write_records_csv, write_timings, Method};
use bangbang_core::problem::solve_problem;
use bangbang_core::smoothing::{FilterKind, SmoothingFilter};
use bangbang_core::Error;

#[derive(Parser)]
#[command(name = "bangbang", version, about = "Smoothed indirect shooting for bang-bang optimal control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One Newton solve at a fixed filter constant.
    Solve(Common),
    /// Decade continuation on the filter constant.
    Continue {
        #[command(flatten)]
        common: Common,
        /// First constant of the schedule.
        #[arg(long)]
        start: Option<f64>,
        /// Smallest constant of the schedule.
        #[arg(long)]
        floor: Option<f64>,
        #[arg(long)]
        max_retries: Option<usize>,
    },
    /// Batch of solves from random guesses.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        /// Number of runs.
        #[arg(short, long)]
        n: Option<usize>,
        #[arg(long, value_parser = ["direct", "continuation"])]
        method: Option<String>,
    },
    /// Writes the trajectory of a shooting vector or of a saved report.
    Export {
        #[command(flatten)]
        common: Common,
        /// `report.json` whose solution and filter are propagated.
        #[arg(long, conflicts_with = "guess")]
        from: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// hard, l2 or tanh.
    #[arg(long)]
    filter: Option<String>,
    /// Constant of the L²-norm filter.
    #[arg(long, conflicts_with = "rho")]
    delta: Option<f64>,
    /// Constant of the tanh filter.
    #[arg(long)]
    rho: Option<f64>,
    /// Comma-separated initial shooting vector.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    guess: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(short, long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Residual-norm tolerance of the Newton solver.
    #[arg(long)]
    solver_tol: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Suppress progress output on stderr.
    #[arg(short, long)]
    quiet: bool,
}

enum Failure {
    NotConverged,
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

impl Common {
    fn resolve(&self) -> std::result::Result<RunConfig, Failure> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.problem {
            c.problem = p.clone();
        }
        if let Some(f) = &self.filter {
            c.filter.kind = f.parse::<FilterKind>()?;
        }
        if let Some(d) = self.delta {
            if self.filter.is_none() {
                c.filter.kind = FilterKind::L2;
            } else if c.filter.kind != FilterKind::L2 {
                return Err(Failure::Usage("--delta applies to the l2 filter".into()));
            }
            c.filter.constant = Some(d);
        }
        if let Some(r) = self.rho {
            if self.filter.is_none() {
                c.filter.kind = FilterKind::Tanh;
            } else if c.filter.kind != FilterKind::Tanh {
                return Err(Failure::Usage("--rho applies to the tanh filter".into()));
            }
            c.filter.constant = Some(r);
        }
        if let Some(g) = &self.guess {
            c.guess = Some(g.clone());
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(t) = self.threads {
            c.threads = Some(t);
        }
        if let Some(o) = &self.out_dir {
            c.out_dir = o.clone();
        }
        if self.abs_tol.is_some() || self.rel_tol.is_some() {
            let mut i = c.integrator();
            i.abs_tol = self.abs_tol.unwrap_or(i.abs_tol);
            i.rel_tol = self.rel_tol.unwrap_or(i.rel_tol);
            c.integrator = Some(i);
        }
        if self.solver_tol.is_some() || self.max_iterations.is_some() {
            let mut s = c.solver();
            s.residual_tol = self.solver_tol.unwrap_or(s.residual_tol);
            s.max_iterations = self.max_iterations.unwrap_or(s.max_iterations);
            c.solver = Some(s);
        }
        Ok(c)
    }
}

fn out_dir(c: &RunConfig) -> std::result::Result<&Path, Failure> {
    std::fs::create_dir_all(&c.out_dir).map_err(|e| Failure::Usage(format!("{}: {e}", c.out_dir.display())))?;
    Ok(&c.out_dir)
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.10}")).collect::<Vec<_>>().join(", ")
}

fn print_summary(art: &SolveArtifact) {
    let r = &art.report;
    println!(
        "{} {} {:e}: converged={} residual={:.3e} iterations={} evaluations={}",
        art.problem, art.filter.kind, art.filter.constant, r.converged, r.residual_norm, r.iterations, r.function_evaluations
    );
    println!("solution = [{}]", fmt_vec(&r.solution));
    if let Some(cost) = art.cost {
        println!("cost = {cost:.10}");
    }
    if let Some(s) = art.switches {
        println!("switches = {s}");
    }
    for (k, v) in &art.metrics {
        println!("{k} = {v}");
    }
}

fn cmd_solve(common: &Common) -> Outcome {
    let c = common.resolve()?;
    let problem = c.validate()?;
    let filter = c.filter()?;
    let (integ, root) = (c.integrator(), c.solver());
    let guess = c.initial_guess()?;
    let sol = solve_problem(problem.as_ref(), &guess, &filter, &integ, &root)?;
    let dir = out_dir(&c)?;
    let evaluated = match &sol.trajectory {
        Some(_) => Some(evaluate_solution(problem.as_ref(), &sol.report.solution, &filter, &integ)?),
        None => None,
    };
    if let Some(ev) = &evaluated {
        write_trajectory_csv(&dir.join(TRAJECTORY_FILE), problem.as_ref(), &ev.trajectory)?;
    }
    let converged = sol.report.converged;
    let art = SolveArtifact::new(problem.as_ref(), filter, guess, sol.report, evaluated.as_ref());
    write_json(&dir.join(REPORT_FILE), &art)?;
    print_summary(&art);
    if converged {
        Ok(())
    } else {
        Err(Failure::NotConverged)
    }
}

fn cmd_continue(common: &Common, start: Option<f64>, floor: Option<f64>, retries: Option<usize>) -> Outcome {
    let mut c = common.resolve()?;
    let mut schedule = c.schedule();
    schedule.start = start.unwrap_or(schedule.start);
    schedule.floor = floor.unwrap_or(schedule.floor);
    schedule.max_retries = retries.unwrap_or(schedule.max_retries);
    c.schedule = Some(schedule);
    let problem = c.validate()?;
    if c.filter.kind == FilterKind::Hard {
        return Err(Failure::Usage("continuation needs the l2 or tanh filter".into()));
    }
    let (integ, root) = (c.integrator(), c.solver());
    let guess = c.initial_guess()?;
    let quiet = common.quiet;
    let report: ContinuationReport =
        continue_solve_with(problem.as_ref(), &guess, c.filter.kind, &schedule, &integ, &root, c.seed, |s| {
            if !quiet {
                eprintln!(
                    "constant {:.0e} attempt {}: converged={} residual={:.3e} iterations={}",
                    s.constant, s.attempt, s.report.converged, s.report.residual_norm, s.report.iterations
                );
            }
        })?;
    let dir = out_dir(&c)?;
    write_json(&dir.join(HISTORY_FILE), &report)?;

    let last = report.steps.iter().rev().find(|s| s.report.converged).or(report.steps.last());
    if let Some(step) = last {
        let filter = SmoothingFilter::new(c.filter.kind, step.constant)?;
        let evaluated = if step.report.converged {
            let ev = evaluate_solution(problem.as_ref(), &step.report.solution, &filter, &integ)?;
            if report.converged {
                write_trajectory_csv(&dir.join(TRAJECTORY_FILE), problem.as_ref(), &ev.trajectory)?;
            }
            Some(ev)
        } else {
            None
        };
        let mut final_report = step.report.clone();
        // The artifact describes the whole run, which fails if any level fails.
        final_report.converged = report.converged;
        let art = SolveArtifact::new(problem.as_ref(), filter, guess, final_report, evaluated.as_ref());
        write_json(&dir.join(REPORT_FILE), &art)?;
        print_summary(&art);
    }
    println!("levels completed = {}, solves = {}", report.levels_completed(), report.steps.len());
    if report.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged)
    }
}

fn cmd_montecarlo(common: &Common, n: Option<usize>, method: Option<&str>) -> Outcome {
    let mut c = common.resolve()?;
    if let Some(n) = n {
        c.montecarlo.n = n;
    }
    if let Some(m) = method {
        c.montecarlo.method = Some(m.parse::<Method>()?);
    }
    let problem = c.validate()?;
    if c.montecarlo.n == 0 {
        return Err(Failure::Usage("number of runs must be at least 1".into()));
    }
    let mc = c.montecarlo()?;
    let domain = c.domain()?;
    let result = run_monte_carlo(problem.as_ref(), &domain, &mc)?;
    let dir = out_dir(&c)?;
    write_json(&dir.join(STATS_FILE), &result.stats)?;
    let files: [(&str, fn(&[_], &mut BufWriter<File>) -> bangbang_core::Result<()>); 3] = [
        (RECORDS_FILE, |r, w| write_records(r, w)),
        (RECORDS_CSV_FILE, |r, w| write_records_csv(r, w)),
        (TIMINGS_FILE, |r, w| write_timings(r, w)),
    ];
    for (name, write) in files {
        let mut w = BufWriter::new(File::create(dir.join(name))?);
        write(&result.records, &mut w)?;
        w.flush()?;
    }
    let s = &result.stats;
    println!("{}: {}/{} converged ({:.2}%)", problem.name(), s.n_converged, s.n_runs, 100.0 * s.convergence_rate);
    if let (Some(mean), Some([lo, hi])) = (s.cost_mean, s.cost_range) {
        println!("cost mean = {mean:.10}, range = [{lo:.10}, {hi:.10}]");
    }
    if let Some(r) = s.residual_mean {
        println!("residual mean = {r:.4e}");
    }
    for (k, m) in &s.extras {
        println!("{k}: [{}, {}] mean {}", m.min, m.max, m.mean);
    }
    Ok(())
}

fn cmd_export(common: &Common, from: Option<&Path>) -> Outcome {
    let mut c = common.resolve()?;
    let filter = match from {
        Some(path) => {
            let art: SolveArtifact = read_json(path)?;
            if common.problem.is_none() {
                c.problem = art.problem.clone();
            }
            c.guess = Some(art.report.solution.clone());
            if common.filter.is_none() && common.delta.is_none() && common.rho.is_none() {
                art.filter
            } else {
                c.filter()?
            }
        }
        None => c.filter()?,
    };
    let problem = c.validate()?;
    let eta = c.initial_guess()?;
    let ev = evaluate_solution(problem.as_ref(), &eta, &filter, &c.integrator())?;
    let dir = out_dir(&c)?;
    let path = dir.join(TRAJECTORY_FILE);
    write_trajectory_csv(&path, problem.as_ref(), &ev.trajectory)?;
    println!("wrote {} ({} samples, {} switches)", path.display(), ev.trajectory.len(), ev.switches);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(common) => cmd_solve(common),
        Command::Continue { common, start, floor, max_retries } => cmd_continue(common, *start, *floor, *max_retries),
        Command::Montecarlo { common, n, method } => cmd_montecarlo(common, *n, method.as_deref()),
        Command::Export { common, from } => cmd_export(common, from.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NotConverged) => {
            eprintln!("bangbang: solver did not converge");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("bangbang: {msg}");
            ExitCode::from(2)
        }
    }
}
