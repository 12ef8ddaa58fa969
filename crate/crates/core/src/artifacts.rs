//! Files written by the command-line tool and their readers.
//!
//! | file | content |
//! |---|---|
//! | `report.json` | [`SolveArtifact`] |
//! | `trajectory.csv` | [`TrajectoryTable`] |
//! | `history.json` | [`ContinuationReport`](crate::continuation::ContinuationReport) |
//! | `stats.json` | [`MonteCarloStats`](crate::harness::MonteCarloStats) |
//! | `records.jsonl` | [`RunRecord`](crate::harness::RunRecord) per line |

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::{IntegratorConfig, SolveReport, Trajectory, TrajectoryTable};
use crate::problem::{propagate_trajectory, switch_count, trajectory_table, IndirectProblem};
use crate::smoothing::SmoothingFilter;

pub const REPORT_FILE: &str = "report.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const HISTORY_FILE: &str = "history.json";
pub const STATS_FILE: &str = "stats.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const RECORDS_CSV_FILE: &str = "records.csv";
pub const TIMINGS_FILE: &str = "timings.jsonl";

/// Outcome of a single solve, or of the last level of a continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveArtifact {
    pub problem: String,
    pub filter: SmoothingFilter,
    pub guess: Vec<f64>,
    pub report: SolveReport,
    /// Objective value; present for converged solves.
    pub cost: Option<f64>,
    /// Sign changes of the switching function along the trajectory.
    pub switches: Option<usize>,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

/// Trajectory of `eta` with its cost, switch count and problem metrics.
pub struct Evaluated {
    pub trajectory: Trajectory,
    pub cost: f64,
    pub switches: usize,
    pub metrics: BTreeMap<String, f64>,
}

pub fn evaluate_solution(
    problem: &dyn IndirectProblem,
    eta: &[f64],
    filter: &SmoothingFilter,
    integ: &IntegratorConfig,
) -> Result<Evaluated> {
    let trajectory = propagate_trajectory(problem, eta, filter, integ)?;
    Ok(Evaluated {
        cost: problem.cost_of(&trajectory),
        switches: switch_count(&trajectory),
        metrics: problem.trajectory_metrics(&trajectory, filter).into_iter().collect(),
        trajectory,
    })
}

impl SolveArtifact {
    /// Builds the artifact, filling cost and metrics from `evaluated` only
    /// when the report converged.
    pub fn new(
        problem: &dyn IndirectProblem,
        filter: SmoothingFilter,
        guess: Vec<f64>,
        report: SolveReport,
        evaluated: Option<&Evaluated>,
    ) -> Self {
        let ev = evaluated.filter(|_| report.converged);
        Self {
            problem: problem.name().to_string(),
            filter,
            guess,
            cost: ev.map(|e| e.cost),
            switches: ev.map(|e| e.switches),
            metrics: ev.map(|e| e.metrics.clone()).unwrap_or_default(),
            report,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_trajectory_csv(path: &Path, problem: &dyn IndirectProblem, traj: &Trajectory) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    trajectory_table(problem, traj).write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv(path: &Path) -> Result<TrajectoryTable> {
    TrajectoryTable::read_csv(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{RootSolveConfig, Termination};
    use crate::oscillator::Oscillator;

    #[test]
    fn artifacts_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let p = Oscillator::default();
        let filter = SmoothingFilter::l2(1e-8).unwrap();
        let integ = IntegratorConfig::default();
        let sol = crate::problem::solve_problem(&p, &[0.5, 0.5, 2.0], &filter, &integ, &RootSolveConfig::default())
            .unwrap();
        let ev = evaluate_solution(&p, &sol.report.solution, &filter, &integ).unwrap();
        let art = SolveArtifact::new(&p, filter, vec![0.5, 0.5, 2.0], sol.report, Some(&ev));
        assert_eq!(art.switches, Some(1));

        let path = dir.path().join(REPORT_FILE);
        write_json(&path, &art).unwrap();
        let back: SolveArtifact = read_json(&path).unwrap();
        assert_eq!(back, art);
        write_json(&path, &back).unwrap();
        assert_eq!(read_json::<SolveArtifact>(&path).unwrap(), art);

        let csv = dir.path().join(TRAJECTORY_FILE);
        write_trajectory_csv(&csv, &p, &ev.trajectory).unwrap();
        let table = read_trajectory_csv(&csv).unwrap();
        assert_eq!(table.columns.first().map(String::as_str), Some("t"));
        assert_eq!(table.rows.len(), ev.trajectory.len());
        assert_eq!(table, trajectory_table(&p, &ev.trajectory));
    }

    #[test]
    fn failed_report_with_infinite_residual_round_trips() {
        let report = SolveReport {
            converged: false,
            solution: vec![1.0, 2.0, 3.0],
            residual_norm: f64::INFINITY,
            iterations: 0,
            function_evaluations: 1,
            wall_time: 0.0,
            termination: Termination::InitialEvaluationFailed,
        };
        let art = SolveArtifact::new(&Oscillator::default(), SmoothingFilter::hard(), vec![1.0, 2.0, 3.0], report, None);
        let text = serde_json::to_string(&art).unwrap();
        assert!(text.contains("\"residual_norm\":null"));
        assert_eq!(serde_json::from_str::<SolveArtifact>(&text).unwrap(), art);
    }
}
