//! Damped Newton iteration for square nonlinear systems.
//!
//! Each iteration forms a central-difference Jacobian, solves for the Newton
//! direction (falling back to a Levenberg–Marquardt step when the Jacobian is
//! singular) and backtracks on the residual 2-norm. Evaluation failures are
//! treated as an infinite residual so the line search backs away from them.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::jacobian::fd_jacobian_with_steps;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RootSolveConfig {
    /// Convergence threshold on `‖F(x)‖₂`.
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Relative finite-difference step; column `j` uses `fd_step·(|x_j| + 1)`.
    pub fd_step: f64,
    /// Backtracking factor applied to the step length on each rejection.
    pub shrink: f64,
    /// Smallest step length tried before switching to regularized steps.
    pub min_step: f64,
    /// Optional cap on `‖Δx‖∞ / (‖x‖∞ + 1)` for a single iteration.
    pub max_relative_step: Option<f64>,
    pub globalization: Globalization,
    /// Stop when `‖F‖` has not fallen below 0.9 times its value this many
    /// iterations earlier.
    pub stall_window: Option<usize>,
}

/// How a Newton direction is safeguarded far from the root.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Globalization {
    /// Backtracking along the Newton direction, then damped least squares.
    #[default]
    LineSearch,
    /// Powell's dogleg inside an adaptive trust region.
    Dogleg,
}

impl Default for RootSolveConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-9,
            max_iterations: 200,
            fd_step: 1e-7,
            shrink: 0.5,
            min_step: 1e-2,
            max_relative_step: Some(3.0),
            globalization: Globalization::LineSearch,
            stall_window: None,
        }
    }
}

impl RootSolveConfig {
    pub fn with_tolerance(residual_tol: f64) -> Self {
        Self { residual_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.residual_tol) {
            return Err(Error::InvalidArgument(format!("residual_tol must be positive, got {}", self.residual_tol)));
        }
        if !pos(self.fd_step) {
            return Err(Error::InvalidArgument(format!("fd_step must be positive, got {}", self.fd_step)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidArgument(format!("shrink must lie in (0, 1), got {}", self.shrink)));
        }
        if !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return Err(Error::InvalidArgument(format!("min_step must lie in (0, 1], got {}", self.min_step)));
        }
        if self.stall_window == Some(0) {
            return Err(Error::InvalidArgument("stall_window must be at least 1".into()));
        }
        if let Some(r) = self.max_relative_step {
            if !pos(r) {
                return Err(Error::InvalidArgument(format!("max_relative_step must be positive, got {r}")));
            }
        }
        Ok(())
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailed,
    /// The residual stopped decreasing (see [`RootSolveConfig::stall_window`]).
    Stalled,
    JacobianFailed,
    InitialEvaluationFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub solution: Vec<f64>,
    /// Infinite when no residual could be evaluated; written as `null`.
    #[serde(with = "infinite_as_null")]
    pub residual_norm: f64,
    pub iterations: usize,
    pub function_evaluations: usize,
    pub wall_time: f64,
    pub termination: Termination,
}

/// Serde adapter that writes non-finite values as `null` and reads `null`
/// back as `+∞`.
pub(crate) mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves `F(x) = 0` from `x0`. Never fails on non-convergence: the report
/// carries the best iterate and the reason the iteration stopped.
pub fn solve_root<F>(mut f: F, x0: &[f64], config: &RootSolveConfig) -> Result<SolveReport>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    config.validate()?;
    let start = Instant::now();
    let n = x0.len();
    let mut evals = 0usize;

    let mut eval = |x: &[f64], evals: &mut usize| -> Result<Vec<f64>> {
        *evals += 1;
        let v = f(x)?;
        if v.len() != n {
            return Err(Error::Dimension { expected: n, got: v.len() });
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::DynamicsBlowup { t: f64::NAN });
        }
        Ok(v)
    };

    let mut x = x0.to_vec();
    let report = |x: Vec<f64>, r: f64, it: usize, evals: usize, term: Termination| SolveReport {
        converged: term == Termination::Converged,
        solution: x,
        residual_norm: r,
        iterations: it,
        function_evaluations: evals,
        wall_time: start.elapsed().as_secs_f64(),
        termination: term,
    };

    let mut fx = match eval(&x, &mut evals) {
        Ok(v) => v,
        Err(e) if e.is_evaluation_failure() => {
            return Ok(report(x, f64::INFINITY, 0, evals, Termination::InitialEvaluationFailed));
        }
        Err(e) => return Err(e),
    };
    let mut r = norm(&fx);
    if config.globalization == Globalization::Dogleg {
        let (term, it) = dogleg(&mut eval, &mut x, &mut fx, &mut r, &mut evals, config)?;
        return Ok(report(x, r, it, evals, term));
    }

    let mut history = vec![r];
    for iter in 0..config.max_iterations {
        if r <= config.residual_tol {
            return Ok(report(x, r, iter, evals, Termination::Converged));
        }
        if stalled(&history, config) {
            return Ok(report(x, r, iter, evals, Termination::Stalled));
        }

        let jac = match fd_jacobian_with_steps(|z| eval(z, &mut evals), &x, &fd_steps(&x, config)) {
            Ok(j) => j,
            Err(e) if e.is_evaluation_failure() => {
                return Ok(report(x, r, iter, evals, Termination::JacobianFailed));
            }
            Err(e) => return Err(e),
        };
        let fvec = DVector::from_column_slice(&fx);

        let newton = jac.clone().lu().solve(&(-&fvec)).filter(|d| d.iter().all(|v| v.is_finite()));
        let direction = match newton {
            Some(d) => d,
            None => levenberg_marquardt_step(&jac, &fvec, 1e-12).unwrap_or_else(|| DVector::zeros(n)),
        };
        let direction = cap_step(direction, &x, config.max_relative_step);

        // Backtracking on ‖F‖ with an Armijo-type sufficient decrease.
        let mut accepted = None;
        let mut alpha = 1.0;
        while alpha >= config.min_step {
            let trial: Vec<f64> = x.iter().zip(direction.iter()).map(|(xi, di)| xi + alpha * di).collect();
            match eval(&trial, &mut evals) {
                Ok(ft) => {
                    let rt = norm(&ft);
                    if rt <= (1.0 - 1e-4 * alpha) * r {
                        accepted = Some((trial, ft, rt));
                        break;
                    }
                }
                Err(e) if e.is_evaluation_failure() => {}
                Err(e) => return Err(e),
            }
            alpha *= config.shrink;
        }

        // Regularized least-squares steps with increasing damping.
        if accepted.is_none() {
            let jtj_scale = (jac.transpose() * &jac).diagonal().iter().cloned().fold(0.0, f64::max).max(1e-300);
            let mut mu = 1e-6 * jtj_scale;
            for _ in 0..8 {
                if let Some(d) = levenberg_marquardt_step(&jac, &fvec, mu) {
                    let d = cap_step(d, &x, config.max_relative_step);
                    let trial: Vec<f64> = x.iter().zip(d.iter()).map(|(xi, di)| xi + di).collect();
                    match eval(&trial, &mut evals) {
                        Ok(ft) => {
                            let rt = norm(&ft);
                            if rt < r {
                                accepted = Some((trial, ft, rt));
                                break;
                            }
                        }
                        Err(e) if e.is_evaluation_failure() => {}
                        Err(e) => return Err(e),
                    }
                }
                mu *= 100.0;
            }
        }

        match accepted {
            Some((xt, ft, rt)) => {
                x = xt;
                fx = ft;
                r = rt;
                history.push(r);
            }
            None => return Ok(report(x, r, iter + 1, evals, Termination::LineSearchFailed)),
        }
    }

    let term = if r <= config.residual_tol { Termination::Converged } else { Termination::MaxIterations };
    Ok(report(x, r, config.max_iterations, evals, term))
}

fn stalled(history: &[f64], config: &RootSolveConfig) -> bool {
    match config.stall_window {
        Some(w) if history.len() > w => history[history.len() - 1] > 0.9 * history[history.len() - 1 - w],
        _ => false,
    }
}

// Power-of-two steps keep x ± h exact for moderate |x|.
fn fd_steps(x: &[f64], config: &RootSolveConfig) -> Vec<f64> {
    x.iter().map(|xi| (config.fd_step * (xi.abs() + 1.0)).log2().round().exp2()).collect()
}

/// Trust-region iteration on `½‖F‖²`. The Jacobian is kept across rejected
/// steps; only accepted steps count as iterations.
fn dogleg<E>(
    eval: &mut E,
    x: &mut Vec<f64>,
    fx: &mut Vec<f64>,
    r: &mut f64,
    evals: &mut usize,
    config: &RootSolveConfig,
) -> Result<(Termination, usize)>
where
    E: FnMut(&[f64], &mut usize) -> Result<Vec<f64>>,
{
    let n = x.len();
    let xnorm = |x: &[f64]| norm(x).max(1.0);
    let mut radius = xnorm(x);
    let mut history = vec![*r];
    for iter in 0..config.max_iterations {
        if *r <= config.residual_tol {
            return Ok((Termination::Converged, iter));
        }
        if stalled(&history, config) {
            return Ok((Termination::Stalled, iter));
        }
        let jac = match fd_jacobian_with_steps(|z| eval(z, evals), x, &fd_steps(x, config)) {
            Ok(j) => j,
            Err(e) if e.is_evaluation_failure() => return Ok((Termination::JacobianFailed, iter)),
            Err(e) => return Err(e),
        };
        let f = DVector::from_column_slice(fx);
        let grad = jac.transpose() * &f;
        let jg = &jac * &grad;
        let cauchy = if jg.norm_squared() > 0.0 {
            -&grad * (grad.norm_squared() / jg.norm_squared())
        } else {
            DVector::zeros(n)
        };
        let gauss_newton = jac
            .clone()
            .lu()
            .solve(&(-&f))
            .filter(|d| d.iter().all(|v| v.is_finite()))
            .or_else(|| levenberg_marquardt_step(&jac, &f, 1e-12 * grad.norm().max(1e-300)))
            .unwrap_or_else(|| cauchy.clone());
        let gauss_newton = cap_step(gauss_newton, x, config.max_relative_step);

        loop {
            let d = dogleg_step(&gauss_newton, &cauchy, radius);
            let predicted = f.norm_squared() - (&f + &jac * &d).norm_squared();
            let trial: Vec<f64> = x.iter().zip(d.iter()).map(|(xi, di)| xi + di).collect();
            let outcome = match eval(&trial, evals) {
                Ok(ft) => Some(ft),
                Err(e) if e.is_evaluation_failure() => None,
                Err(e) => return Err(e),
            };
            let dn = d.norm();
            let ratio = match &outcome {
                Some(ft) if predicted > 0.0 => (r.powi(2) - norm(ft).powi(2)) / predicted,
                _ => f64::NEG_INFINITY,
            };
            if ratio < 0.25 {
                radius = 0.25 * dn;
            } else if ratio > 0.75 && dn >= 0.99 * radius {
                radius = 2.0 * radius;
            }
            if ratio > 1e-4 {
                let ft = outcome.expect("positive ratio implies a successful evaluation");
                *r = norm(&ft);
                *fx = ft;
                *x = trial;
                history.push(*r);
                break;
            }
            if radius <= 1e-13 * xnorm(x) {
                return Ok((Termination::LineSearchFailed, iter + 1));
            }
        }
    }
    let term = if *r <= config.residual_tol { Termination::Converged } else { Termination::MaxIterations };
    Ok((term, config.max_iterations))
}

/// Point on the dogleg path of length at most `radius`.
fn dogleg_step(gn: &DVector<f64>, cauchy: &DVector<f64>, radius: f64) -> DVector<f64> {
    if gn.norm() <= radius {
        return gn.clone();
    }
    let cn = cauchy.norm();
    if cn >= radius {
        return cauchy * (radius / cn);
    }
    // Solve ‖c + τ(g − c)‖ = radius for τ ∈ [0, 1].
    let diff = gn - cauchy;
    let a = diff.norm_squared();
    let b = 2.0 * cauchy.dot(&diff);
    let c = cn * cn - radius * radius;
    let tau = (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a);
    cauchy + diff * tau.clamp(0.0, 1.0)
}

/// Solves `(JᵀJ + μI) d = −Jᵀf`.
fn levenberg_marquardt_step(jac: &DMatrix<f64>, f: &DVector<f64>, mu: f64) -> Option<DVector<f64>> {
    let jt = jac.transpose();
    let mut a = &jt * jac;
    for i in 0..a.nrows() {
        a[(i, i)] += mu;
    }
    let rhs = -(&jt * f);
    let d = a.clone().cholesky().map(|c| c.solve(&rhs)).or_else(|| a.lu().solve(&rhs))?;
    d.iter().all(|v| v.is_finite()).then_some(d)
}

fn cap_step(d: DVector<f64>, x: &[f64], max_relative: Option<f64>) -> DVector<f64> {
    let Some(limit) = max_relative else { return d };
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
    let size = d.amax();
    if size > limit * scale {
        d * (limit * scale / size)
    } else {
        d
    }
}
