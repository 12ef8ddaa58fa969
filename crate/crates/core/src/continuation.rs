//! Decade continuation on the filter constant.
//!
//! Starting from a wide filter, each level is solved by damped Newton and
//! its solution warm-starts the next, narrower level. A failed level is
//! retried from the same guess shifted by `constant/100` times a uniform
//! `[0, 1]` vector; the shifts accumulate across retries of one level.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{solve_root, IntegratorConfig, RootSolveConfig, SolveReport};
use crate::problem::{evaluate_residual, IndirectProblem};
use crate::smoothing::{FilterKind, SmoothingFilter};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationSchedule {
    pub start: f64,
    pub floor: f64,
    /// Ratio between consecutive constants.
    pub factor: f64,
    /// Perturbed retries allowed per level.
    pub max_retries: usize,
}

impl Default for ContinuationSchedule {
    fn default() -> Self {
        Self::for_filter(FilterKind::L2)
    }
}

impl ContinuationSchedule {
    /// Decades from 1 down to the filter's default floor (1e-8 for the
    /// L²-norm filter, 1e-6 for tanh), ten retries per level.
    pub fn for_filter(kind: FilterKind) -> Self {
        Self { start: 1.0, floor: kind.default_floor(), factor: 0.1, max_retries: 10 }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.start) || !pos(self.floor) || self.floor > self.start {
            return Err(Error::InvalidArgument(format!(
                "schedule needs 0 < floor <= start, got start={} floor={}",
                self.start, self.floor
            )));
        }
        if !(self.factor > 0.0 && self.factor < 1.0) {
            return Err(Error::InvalidArgument(format!("factor must lie in (0, 1), got {}", self.factor)));
        }
        if self.max_retries == 0 {
            return Err(Error::InvalidArgument("max_retries must be at least 1".into()));
        }
        Ok(())
    }

    /// `start·factorⁿ` for n = 0, 1, … up to and including the first value
    /// at or below the floor.
    pub fn constants(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut n = 0;
        loop {
            // Dividing by 10ⁿ keeps decade constants correctly rounded.
            let c = self.start / self.factor.recip().powi(n);
            out.push(c);
            // Relative slack so 1·0.1⁸ counts as reaching 1e-8.
            if c <= self.floor * (1.0 + 1e-9) {
                return out;
            }
            n += 1;
        }
    }
}

/// One Newton solve inside a continuation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationStep {
    pub constant: f64,
    /// 0 for the first attempt at this constant, then the retry number.
    pub attempt: usize,
    pub guess: Vec<f64>,
    pub report: SolveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub converged: bool,
    pub filter: FilterKind,
    pub floor: f64,
    pub steps: Vec<ContinuationStep>,
    /// Solution at the smallest constant reached; the initial guess if no
    /// level converged.
    pub final_solution: Vec<f64>,
    /// Constant of `final_solution`, if any level converged.
    pub final_constant: Option<f64>,
    pub total_wall_time: f64,
}

impl ContinuationReport {
    /// Number of distinct constants that converged.
    pub fn levels_completed(&self) -> usize {
        self.steps.iter().filter(|s| s.report.converged).count()
    }

    pub fn final_residual_norm(&self) -> Option<f64> {
        self.steps.iter().rev().find(|s| s.report.converged).map(|s| s.report.residual_norm)
    }
}

/// Runs the continuation from `eta0`. Exhausted retries produce a report
/// with `converged = false`, not an error.
pub fn continue_solve(
    problem: &dyn IndirectProblem,
    eta0: &[f64],
    kind: FilterKind,
    schedule: &ContinuationSchedule,
    integ: &IntegratorConfig,
    root: &RootSolveConfig,
    seed: u64,
) -> Result<ContinuationReport> {
    continue_solve_with(problem, eta0, kind, schedule, integ, root, seed, |_| {})
}

/// [`continue_solve`] with a callback invoked after every Newton solve.
#[allow(clippy::too_many_arguments)]
pub fn continue_solve_with<C>(
    problem: &dyn IndirectProblem,
    eta0: &[f64],
    kind: FilterKind,
    schedule: &ContinuationSchedule,
    integ: &IntegratorConfig,
    root: &RootSolveConfig,
    seed: u64,
    mut on_step: C,
) -> Result<ContinuationReport>
where
    C: FnMut(&ContinuationStep),
{
    if kind == FilterKind::Hard {
        return Err(Error::InvalidArgument("continuation needs a smooth filter".into()));
    }
    if eta0.len() != problem.shooting_dim() {
        return Err(Error::Dimension { expected: problem.shooting_dim(), got: eta0.len() });
    }
    schedule.validate()?;
    integ.validate()?;
    root.validate()?;

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut steps = Vec::new();
    let mut eta = eta0.to_vec();
    let mut final_constant = None;

    for c in schedule.constants() {
        let filter = SmoothingFilter::new(kind, c)?;
        let mut guess = eta.clone();
        let mut attempt = 0;
        loop {
            let report = solve_root(|x| evaluate_residual(problem, x, &filter, integ), &guess, root)?;
            let converged = report.converged;
            let step = ContinuationStep { constant: c, attempt, guess: guess.clone(), report };
            on_step(&step);
            if converged {
                eta = step.report.solution.clone();
                steps.push(step);
                final_constant = Some(c);
                break;
            }
            steps.push(step);
            if attempt == schedule.max_retries {
                return Ok(ContinuationReport {
                    converged: false,
                    filter: kind,
                    floor: schedule.floor,
                    steps,
                    final_solution: eta,
                    final_constant,
                    total_wall_time: start.elapsed().as_secs_f64(),
                });
            }
            attempt += 1;
            for g in guess.iter_mut() {
                *g += c / 100.0 * rng.random::<f64>();
            }
        }
    }

    Ok(ContinuationReport {
        converged: true,
        filter: kind,
        floor: schedule.floor,
        steps,
        final_solution: eta,
        final_constant,
        total_wall_time: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decade_constants() {
        let l2 = ContinuationSchedule::for_filter(FilterKind::L2).constants();
        assert_eq!(l2.len(), 9);
        assert_eq!(l2[0], 1.0);
        assert_eq!(l2[8], 1e-8);
        assert!(l2.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(ContinuationSchedule::for_filter(FilterKind::Tanh).constants().len(), 7);
    }

    #[test]
    fn floor_not_on_grid() {
        let s = ContinuationSchedule { start: 1.0, floor: 0.05, factor: 0.1, max_retries: 1 };
        assert_eq!(s.constants(), vec![1.0, 0.1, 0.01]);
        let single = ContinuationSchedule { start: 1e-3, floor: 1e-3, factor: 0.5, max_retries: 1 };
        assert_eq!(single.constants(), vec![1e-3]);
    }

    #[test]
    fn invalid_schedules() {
        let base = ContinuationSchedule::default();
        assert!(ContinuationSchedule { floor: 2.0, ..base }.validate().is_err());
        assert!(ContinuationSchedule { factor: 1.0, ..base }.validate().is_err());
        assert!(ContinuationSchedule { max_retries: 0, ..base }.validate().is_err());
        assert!(base.validate().is_ok());
    }
}
