//! Seeded Monte-Carlo studies over random initial guesses.
//!
//! Run `i` draws its guess from a ChaCha8 stream selected by `i`, so a run's
//! outcome does not depend on which worker executes it or in what order.
//! Statistics on cost and residual average over converged runs only.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuation::{continue_solve, ContinuationSchedule};
use crate::error::{Error, Result};
use crate::numerics::{IntegratorConfig, RootSolveConfig, Termination};
use crate::problem::{propagate_trajectory, solve_problem, IndirectProblem};
use crate::smoothing::SmoothingFilter;

/// Axis-aligned box of initial guesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl GuessDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = Self { lower, upper };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    /// `λ₁(0), λ₂(0) ∈ [0, 1]`, `t_f ∈ [1, 3]`.
    pub fn oscillator() -> Self {
        Self { lower: vec![0.0, 0.0, 1.0], upper: vec![1.0, 1.0, 3.0] }
    }

    /// All seven initial costates in `[0, 0.1]`.
    pub fn gto_geo() -> Self {
        Self { lower: vec![0.0; 7], upper: vec![0.1; 7] }
    }

    /// Default domain for a problem name, if one is defined.
    pub fn for_problem(name: &str) -> Option<Self> {
        match name {
            "oscillator" => Some(Self::oscillator()),
            "gto-geo" => Some(Self::gto_geo()),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::Dimension { expected: self.lower.len(), got: self.upper.len() });
        }
        for (i, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidArgument(format!("guess interval {i} is [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// One Newton solve at the configured filter constant.
    Direct,
    /// Decade continuation down to the schedule floor.
    Continuation,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Method::Direct),
            "continuation" => Ok(Method::Continuation),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub n: usize,
    pub seed: u64,
    pub method: Method,
    /// Filter for direct solves; only the kind is used by continuation.
    pub filter: SmoothingFilter,
    pub schedule: ContinuationSchedule,
    pub integrator: IntegratorConfig,
    pub solver: RootSolveConfig,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

/// Outcome of one run. `wall_time` is kept out of the serialized record so
/// record files are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub index: usize,
    pub guess: Vec<f64>,
    pub converged: bool,
    pub cost: Option<f64>,
    #[serde(with = "crate::numerics::infinite_as_null")]
    pub residual_norm: f64,
    pub iterations: usize,
    pub function_evaluations: usize,
    pub termination: Termination,
    /// Newton solves performed by a continuation run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuation_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<Vec<f64>>,
    /// Problem-specific quantities of the converged trajectory.
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip)]
    pub wall_time: f64,
}

/// Range and mean of one metric over converged runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloStats {
    pub n_runs: usize,
    pub n_converged: usize,
    pub convergence_rate: f64,
    pub cost_mean: Option<f64>,
    pub cost_range: Option<[f64; 2]>,
    pub residual_mean: Option<f64>,
    pub wall_time_mean: f64,
    pub extras: BTreeMap<String, MetricSummary>,
    /// Which runs the means are taken over.
    pub averaging: String,
}

/// Sum that does not depend on input order.
fn ordered_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

fn summary(values: Vec<f64>) -> Option<MetricSummary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Some(MetricSummary { min, max, mean: ordered_sum(values) / n })
}

/// Aggregates run records; independent of record order.
pub fn summarize(records: &[RunRecord]) -> Result<MonteCarloStats> {
    if records.is_empty() {
        return Err(Error::Domain("cannot summarize an empty set of runs".into()));
    }
    let conv: Vec<&RunRecord> = records.iter().filter(|r| r.converged).collect();
    let cost = summary(conv.iter().filter_map(|r| r.cost).collect());
    let residual = summary(conv.iter().map(|r| r.residual_norm).collect());
    let mut keys: Vec<&String> = conv.iter().flat_map(|r| r.metrics.keys()).collect();
    keys.sort();
    keys.dedup();
    let extras = keys
        .into_iter()
        .filter_map(|k| summary(conv.iter().filter_map(|r| r.metrics.get(k).copied()).collect()).map(|s| (k.clone(), s)))
        .collect();
    Ok(MonteCarloStats {
        n_runs: records.len(),
        n_converged: conv.len(),
        convergence_rate: conv.len() as f64 / records.len() as f64,
        cost_mean: cost.map(|s| s.mean),
        cost_range: cost.map(|s| [s.min, s.max]),
        residual_mean: residual.map(|s| s.mean),
        wall_time_mean: ordered_sum(records.iter().map(|r| r.wall_time).collect()) / records.len() as f64,
        extras,
        averaging: "converged runs only".into(),
    })
}

/// Random stream of run `index`.
pub fn run_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Executes run `index` of a study.
pub fn run_single(
    problem: &dyn IndirectProblem,
    domain: &GuessDomain,
    config: &MonteCarloConfig,
    index: usize,
) -> Result<RunRecord> {
    let start = Instant::now();
    let mut rng = run_rng(config.seed, index);
    let guess = domain.sample(&mut rng);
    let mut record = match config.method {
        Method::Direct => {
            let sol = solve_problem(problem, &guess, &config.filter, &config.integrator, &config.solver)?;
            let metrics = match &sol.trajectory {
                Some(t) => problem.trajectory_metrics(t, &config.filter).into_iter().collect(),
                None => BTreeMap::new(),
            };
            let r = sol.report;
            RunRecord {
                index,
                guess,
                converged: r.converged,
                cost: sol.cost,
                residual_norm: r.residual_norm,
                iterations: r.iterations,
                function_evaluations: r.function_evaluations,
                termination: r.termination,
                continuation_steps: None,
                solution: r.converged.then_some(r.solution),
                metrics,
                wall_time: 0.0,
            }
        }
        Method::Continuation => {
            let retry_seed = rng.random::<u64>();
            let rep = continue_solve(
                problem,
                &guess,
                config.filter.kind,
                &config.schedule,
                &config.integrator,
                &config.solver,
                retry_seed,
            )?;
            let last = rep.steps.last().expect("continuation performs at least one solve");
            let (mut cost, mut metrics) = (None, BTreeMap::new());
            if rep.converged {
                let filter = SmoothingFilter::new(config.filter.kind, rep.final_constant.unwrap_or(rep.floor))?;
                let traj = propagate_trajectory(problem, &rep.final_solution, &filter, &config.integrator)?;
                cost = Some(problem.cost_of(&traj));
                metrics = problem.trajectory_metrics(&traj, &filter).into_iter().collect();
            }
            RunRecord {
                index,
                guess,
                converged: rep.converged,
                cost,
                residual_norm: last.report.residual_norm,
                iterations: rep.steps.iter().map(|s| s.report.iterations).sum(),
                function_evaluations: rep.steps.iter().map(|s| s.report.function_evaluations).sum(),
                termination: last.report.termination,
                continuation_steps: Some(rep.steps.len()),
                solution: rep.converged.then_some(rep.final_solution),
                metrics,
                wall_time: 0.0,
            }
        }
    };
    record.wall_time = start.elapsed().as_secs_f64();
    Ok(record)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub records: Vec<RunRecord>,
    pub stats: MonteCarloStats,
}

/// Runs `config.n` independent solves, in parallel when more than one
/// thread is available. Records are returned in run-index order.
pub fn run_monte_carlo(
    problem: &dyn IndirectProblem,
    domain: &GuessDomain,
    config: &MonteCarloConfig,
) -> Result<MonteCarloResult> {
    run_monte_carlo_with(problem, domain, config, |_| {})
}

/// [`run_monte_carlo`] with a callback after each finished run (called from
/// worker threads, in completion order).
pub fn run_monte_carlo_with<C>(
    problem: &dyn IndirectProblem,
    domain: &GuessDomain,
    config: &MonteCarloConfig,
    on_run: C,
) -> Result<MonteCarloResult>
where
    C: Fn(&RunRecord) + Sync,
{
    if config.n == 0 {
        return Err(Error::InvalidArgument("number of runs must be at least 1".into()));
    }
    domain.validate()?;
    if domain.dim() != problem.shooting_dim() {
        return Err(Error::Dimension { expected: problem.shooting_dim(), got: domain.dim() });
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = config.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let records: Result<Vec<RunRecord>> = pool.install(|| {
        (0..config.n)
            .into_par_iter()
            .map(|i| {
                let r = run_single(problem, domain, config, i)?;
                on_run(&r);
                Ok(r)
            })
            .collect()
    });
    let records = records?;
    let stats = summarize(&records)?;
    Ok(MonteCarloResult { records, stats })
}

/// One JSON object per line.
pub fn write_records<W: Write>(records: &[RunRecord], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(r: R) -> Result<Vec<RunRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// `{"index": i, "wall_time": s}` per line.
pub fn write_timings<W: Write>(records: &[RunRecord], mut w: W) -> Result<()> {
    for r in records {
        writeln!(w, "{}", serde_json::json!({ "index": r.index, "wall_time": r.wall_time }))?;
    }
    Ok(())
}

/// Spreadsheet mirror of the records: scalar fields, metrics, then guess
/// components.
pub fn write_records_csv<W: Write>(records: &[RunRecord], mut w: W) -> Result<()> {
    let mut keys: Vec<&String> = records.iter().flat_map(|r| r.metrics.keys()).collect();
    keys.sort();
    keys.dedup();
    let dim = records.iter().map(|r| r.guess.len()).max().unwrap_or(0);
    let mut header = vec![
        "index".to_string(),
        "converged".into(),
        "cost".into(),
        "residual_norm".into(),
        "iterations".into(),
        "function_evaluations".into(),
        "termination".into(),
    ];
    header.extend(keys.iter().map(|k| k.to_string()));
    header.extend((0..dim).map(|i| format!("guess_{i}")));
    writeln!(w, "{}", header.join(","))?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    for r in records {
        let term = serde_json::to_value(r.termination)?;
        let mut row = vec![
            r.index.to_string(),
            r.converged.to_string(),
            opt(r.cost),
            format!("{:.16e}", r.residual_norm),
            r.iterations.to_string(),
            r.function_evaluations.to_string(),
            term.as_str().unwrap_or_default().to_string(),
        ];
        row.extend(keys.iter().map(|k| opt(r.metrics.get(*k).copied())));
        row.extend((0..dim).map(|i| opt(r.guess.get(i).copied())));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(index: usize, converged: bool, cost: f64, residual: f64) -> RunRecord {
        RunRecord {
            index,
            guess: vec![index as f64],
            converged,
            cost: converged.then_some(cost),
            residual_norm: residual,
            iterations: 3,
            function_evaluations: 10,
            termination: if converged { Termination::Converged } else { Termination::MaxIterations },
            continuation_steps: None,
            solution: None,
            metrics: [("revolutions".to_string(), cost * 10.0)].into_iter().collect(),
            wall_time: 0.5,
        }
    }

    #[test]
    fn synthetic_statistics() {
        let recs = vec![record(0, true, 1.0, 1e-9), record(1, true, 3.0, 3e-9), record(2, false, 100.0, 1.0)];
        let s = summarize(&recs).unwrap();
        assert_eq!((s.n_runs, s.n_converged), (3, 2));
        assert_eq!(s.cost_mean, Some(2.0));
        assert_eq!(s.cost_range, Some([1.0, 3.0]));
        assert!((s.residual_mean.unwrap() - 2e-9).abs() < 1e-24);
        assert_eq!(s.extras["revolutions"], MetricSummary { min: 10.0, max: 30.0, mean: 20.0 });
        assert_eq!(s.wall_time_mean, 0.5);
    }

    #[test]
    fn single_and_failed_records() {
        let s = summarize(&[record(0, true, 2.5, 1e-10)]).unwrap();
        assert_eq!(s.cost_mean, Some(2.5));
        let s = summarize(&[record(0, true, 2.5, 1e-10), record(1, false, 9.0, 1.0)]).unwrap();
        assert_eq!(s.n_converged, 1);
        assert_eq!(s.cost_mean, Some(2.5));
        let s = summarize(&[record(0, false, 9.0, 1.0)]).unwrap();
        assert_eq!((s.cost_mean, s.cost_range, s.residual_mean), (None, None, None));
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn permutation_invariant() {
        let mut recs: Vec<RunRecord> =
            (0..50).map(|i| record(i, i % 3 != 0, 0.1 + (i as f64).sin(), 1e-9 * i as f64)).collect();
        let a = summarize(&recs).unwrap();
        recs.reverse();
        recs.swap(3, 17);
        assert_eq!(a, summarize(&recs).unwrap());
    }

    #[test]
    fn streams_are_independent_of_order() {
        let d = GuessDomain::oscillator();
        let forward: Vec<Vec<f64>> = (0..5).map(|i| d.sample(&mut run_rng(9, i))).collect();
        let backward: Vec<Vec<f64>> = (0..5).rev().map(|i| d.sample(&mut run_rng(9, i))).collect();
        assert!(forward.iter().eq(backward.iter().rev()));
        assert_ne!(forward[0], forward[1]);
        for g in &forward {
            assert!(g[0] >= 0.0 && g[0] <= 1.0 && g[2] >= 1.0 && g[2] <= 3.0);
        }
    }

    #[test]
    fn domain_validation() {
        assert!(GuessDomain::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(GuessDomain::new(vec![2.0], vec![1.0]).is_err());
        assert_eq!(GuessDomain::for_problem("gto-geo").unwrap().dim(), 7);
        assert!(GuessDomain::for_problem("nope").is_none());
    }

    #[test]
    fn record_files_round_trip() {
        let recs = vec![record(0, true, 1.0, 1e-9), record(1, false, 2.0, 0.5)];
        let mut buf = Vec::new();
        write_records(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(!text.contains("wall_time"));
        let back = read_records(buf.as_slice()).unwrap();
        let stripped: Vec<RunRecord> = recs.iter().cloned().map(|r| RunRecord { wall_time: 0.0, ..r }).collect();
        assert_eq!(back, stripped);

        let mut csv = Vec::new();
        write_records_csv(&recs, &mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.starts_with("index,converged,cost,residual_norm,iterations,function_evaluations,termination,revolutions,guess_0"));
        assert!(csv.lines().nth(2).unwrap().contains("max_iterations"));
    }
}
