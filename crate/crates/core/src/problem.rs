//! The contract shared by every indirect (shooting) formulation.
//!
//! A problem supplies the augmented state–costate dynamics with the smoothed
//! control law substituted, the map from a shooting vector to the initial
//! augmented state, and the terminal residual (terminal constraints,
//! transversality conditions and, when the final time is free, the
//! Hamiltonian at the final time). Lagrange multipliers of the terminal
//! constraints never appear: costates of fixed terminal states are left free
//! and costates of free terminal states are driven to zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    count_sign_changes, propagate_with_event, solve_root, IntegratorConfig, RootSolveConfig, SolveReport, Trajectory,
    TrajectoryTable,
};
use crate::smoothing::SmoothingFilter;

pub trait IndirectProblem: Send + Sync {
    fn name(&self) -> &str;

    fn n_state(&self) -> usize;

    fn n_costate(&self) -> usize;

    fn shooting_dim(&self) -> usize;

    /// When true the last shooting component is the final time and the last
    /// residual component is the Hamiltonian there.
    fn free_final_time(&self) -> bool;

    fn augmented_dim(&self) -> usize {
        self.n_state() + self.n_costate()
    }

    /// Labels of the augmented-state components, in order.
    fn state_names(&self) -> Vec<String>;

    fn initial_time(&self) -> f64 {
        0.0
    }

    fn final_time(&self, eta: &[f64]) -> f64;

    fn initial_augmented(&self, eta: &[f64]) -> Vec<f64>;

    fn aug_dynamics(&self, t: f64, y: &[f64], filter: &SmoothingFilter, dy: &mut [f64]) -> Result<()>;

    /// Control value and switching function at an augmented state.
    fn control_and_switching(&self, t: f64, y: &[f64], filter: &SmoothingFilter) -> Result<(f64, f64)>;

    fn hamiltonian(&self, t: f64, y: &[f64], filter: &SmoothingFilter) -> Result<f64>;

    /// Residual assembled from the augmented state at the final time.
    fn terminal_residual(&self, tf: f64, yf: &[f64], filter: &SmoothingFilter) -> Result<Vec<f64>>;

    /// Objective value of a converged trajectory.
    fn cost_of(&self, traj: &Trajectory) -> f64;

    /// Time and state as written to the trajectory CSV. Identity unless the
    /// problem integrates in scaled units.
    fn output_row(&self, t: f64, y: &[f64]) -> (f64, Vec<f64>) {
        (t, y.to_vec())
    }

    /// Problem-specific summary quantities of a trajectory (e.g. fuel used,
    /// revolutions).
    fn trajectory_metrics(&self, _traj: &Trajectory, _filter: &SmoothingFilter) -> Vec<(String, f64)> {
        Vec::new()
    }

    fn check_shooting(&self, eta: &[f64]) -> Result<()> {
        if eta.len() != self.shooting_dim() {
            return Err(Error::Dimension { expected: self.shooting_dim(), got: eta.len() });
        }
        if eta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite shooting variable".into()));
        }
        let tf = self.final_time(eta);
        if tf < self.initial_time() {
            return Err(Error::Domain(format!("final time {tf} precedes initial time {}", self.initial_time())));
        }
        Ok(())
    }
}

/// Validated shooting vector for a particular problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShootingVariable(Vec<f64>);

impl ShootingVariable {
    pub fn new(problem: &dyn IndirectProblem, values: Vec<f64>) -> Result<Self> {
        problem.check_shooting(&values)?;
        if problem.free_final_time() && problem.final_time(&values) <= problem.initial_time() {
            return Err(Error::InvalidArgument("free final time must exceed the initial time".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for ShootingVariable {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Integrates the augmented system with the switching function as the
/// integrator's event.
fn run<S>(
    problem: &dyn IndirectProblem,
    y0: &[f64],
    span: (f64, f64),
    filter: &SmoothingFilter,
    integ: &IntegratorConfig,
    on_step: S,
) -> Result<()>
where
    S: FnMut(f64, &[f64], &[f64]),
{
    let switching = |t: f64, y: &[f64]| problem.control_and_switching(t, y, filter).map_or(0.0, |(_, s)| s);
    propagate_with_event(|t, y, dy| problem.aug_dynamics(t, y, filter, dy), Some(switching), y0, span, integ, on_step)
}

/// Shooting function: integrates from the initial augmented state to the
/// final time and assembles the terminal residual.
pub fn evaluate_residual(
    problem: &dyn IndirectProblem,
    eta: &[f64],
    filter: &SmoothingFilter,
    integ: &IntegratorConfig,
) -> Result<Vec<f64>> {
    problem.check_shooting(eta)?;
    let y0 = problem.initial_augmented(eta);
    let (t0, tf) = (problem.initial_time(), problem.final_time(eta));
    let yf = if tf == t0 {
        y0
    } else {
        let mut last = y0.clone();
        run(problem, &y0, (t0, tf), filter, integ, |_, y, _| last.copy_from_slice(y))?;
        last
    };
    problem.terminal_residual(tf, &yf, filter)
}

/// Integrates the augmented system for `eta` and fills per-sample control
/// and switching-function values.
pub fn propagate_trajectory(
    problem: &dyn IndirectProblem,
    eta: &[f64],
    filter: &SmoothingFilter,
    integ: &IntegratorConfig,
) -> Result<Trajectory> {
    problem.check_shooting(eta)?;
    let y0 = problem.initial_augmented(eta);
    let (t0, tf) = (problem.initial_time(), problem.final_time(eta));
    let mut traj = if tf == t0 {
        let mut dy = vec![0.0; y0.len()];
        problem.aug_dynamics(t0, &y0, filter, &mut dy)?;
        Trajectory::single(t0, &y0, &dy)
    } else {
        let mut traj = Trajectory::with_capacity(y0.len(), 256);
        run(problem, &y0, (t0, tf), filter, integ, |t, y, dy| traj.push(t, y, dy))?;
        traj
    };
    let mut controls = Vec::with_capacity(traj.len());
    let mut switching = Vec::with_capacity(traj.len());
    for (i, &t) in traj.times().iter().enumerate() {
        let (u, s) = problem.control_and_switching(t, traj.state(i), filter)?;
        controls.push(u);
        switching.push(s);
    }
    traj.controls = controls;
    traj.switching = switching;
    Ok(traj)
}

/// Result of [`solve_problem`].
#[derive(Debug, Clone)]
pub struct Solution {
    pub report: SolveReport,
    /// Converged trajectory, present only when the solve converged.
    pub trajectory: Option<Trajectory>,
    pub cost: Option<f64>,
}

pub fn solve_problem(
    problem: &dyn IndirectProblem,
    eta0: &[f64],
    filter: &SmoothingFilter,
    integ: &IntegratorConfig,
    root: &RootSolveConfig,
) -> Result<Solution> {
    if eta0.len() != problem.shooting_dim() {
        return Err(Error::Dimension { expected: problem.shooting_dim(), got: eta0.len() });
    }
    filter.validate()?;
    integ.validate()?;
    let report = solve_root(|eta| evaluate_residual(problem, eta, filter, integ), eta0, root)?;
    if !report.converged {
        return Ok(Solution { report, trajectory: None, cost: None });
    }
    let traj = propagate_trajectory(problem, &report.solution, filter, integ)?;
    let cost = problem.cost_of(&traj);
    Ok(Solution { report, trajectory: Some(traj), cost: Some(cost) })
}

/// Number of switching-function sign changes along a trajectory whose
/// auxiliary samples have been filled.
pub fn switch_count(traj: &Trajectory) -> usize {
    count_sign_changes(&traj.switching)
}

/// CSV-ready table `t,<state names...>,u,S` for a trajectory produced by
/// [`propagate_trajectory`].
pub fn trajectory_table(problem: &dyn IndirectProblem, traj: &Trajectory) -> TrajectoryTable {
    let mut columns = Vec::with_capacity(problem.augmented_dim() + 3);
    columns.push("t".to_string());
    columns.extend(problem.state_names());
    columns.push("u".to_string());
    columns.push("S".to_string());
    let rows = traj
        .times()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (t_out, y_out) = problem.output_row(t, traj.state(i));
            let mut row = Vec::with_capacity(columns.len());
            row.push(t_out);
            row.extend(y_out);
            row.push(traj.controls.get(i).copied().unwrap_or(f64::NAN));
            row.push(traj.switching.get(i).copied().unwrap_or(f64::NAN));
            row
        })
        .collect();
    TrajectoryTable { columns, rows }
}
