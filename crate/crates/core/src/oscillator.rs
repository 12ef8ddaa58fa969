//! Minimal-time control of the undamped harmonic oscillator
//! `ẋ₁ = x₂, ẋ₂ = −x₁ + u`, `|u| ≤ 1`, with free final time.
//!
//! Augmented state `[x₁, x₂, λ₁, λ₂]`, switching function `S = λ₂`,
//! shooting variable `[λ₁(0), λ₂(0), t_f]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{IntegratorConfig, Trajectory};
use crate::problem::{evaluate_residual, IndirectProblem};
use crate::smoothing::{smooth_control, ControlBounds, SmoothingFilter};

/// Boundary values of the transfer; defaults move the state from (1, 1) to
/// the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OscillatorConfig {
    pub x1_0: f64,
    pub x2_0: f64,
    pub x1_f: f64,
    pub x2_f: f64,
}

impl Default for OscillatorConfig {
    fn default() -> Self {
        Self { x1_0: 1.0, x2_0: 1.0, x1_f: 0.0, x2_f: 0.0 }
    }
}

impl OscillatorConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.x1_0, self.x2_0, self.x1_f, self.x2_f].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("oscillator boundary values must be finite".into()))
        }
    }
}

const BOUNDS: ControlBounds = ControlBounds { u_min: -1.0, u_max: 1.0 };

fn control(y: &[f64], filter: &SmoothingFilter) -> Result<f64> {
    smooth_control(y[3], BOUNDS, *filter)
}

/// `(x₂, −x₁ + u, λ₂, −λ₁)` with `u` the filtered control of `S = λ₂`.
pub fn oscillator_aug_dynamics(_t: f64, y: &[f64], filter: &SmoothingFilter) -> Result<[f64; 4]> {
    let u = control(y, filter)?;
    Ok([y[1], -y[0] + u, y[3], -y[2]])
}

/// `H = λ₁x₂ + λ₂(−x₁ + u) + 1`.
pub fn oscillator_hamiltonian(y: &[f64], filter: &SmoothingFilter) -> Result<f64> {
    let u = control(y, filter)?;
    Ok(y[2] * y[1] + y[3] * (-y[0] + u) + 1.0)
}

/// Shooting residual `[x₁(t_f) − x₁f, x₂(t_f) − x₂f, H(t_f)]` for the
/// default boundary values.
pub fn oscillator_residual(eta: &[f64], filter: &SmoothingFilter, integ: &IntegratorConfig) -> Result<Vec<f64>> {
    evaluate_residual(&Oscillator::default(), eta, filter, integ)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Oscillator {
    pub config: OscillatorConfig,
}

impl Oscillator {
    pub fn new(config: OscillatorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl IndirectProblem for Oscillator {
    fn name(&self) -> &str {
        "oscillator"
    }

    fn n_state(&self) -> usize {
        2
    }

    fn n_costate(&self) -> usize {
        2
    }

    fn shooting_dim(&self) -> usize {
        3
    }

    fn free_final_time(&self) -> bool {
        true
    }

    fn state_names(&self) -> Vec<String> {
        ["x1", "x2", "lambda1", "lambda2"].iter().map(|s| s.to_string()).collect()
    }

    fn final_time(&self, eta: &[f64]) -> f64 {
        eta[2]
    }

    fn initial_augmented(&self, eta: &[f64]) -> Vec<f64> {
        vec![self.config.x1_0, self.config.x2_0, eta[0], eta[1]]
    }

    fn aug_dynamics(&self, t: f64, y: &[f64], filter: &SmoothingFilter, dy: &mut [f64]) -> Result<()> {
        dy.copy_from_slice(&oscillator_aug_dynamics(t, y, filter)?);
        Ok(())
    }

    fn control_and_switching(&self, _t: f64, y: &[f64], filter: &SmoothingFilter) -> Result<(f64, f64)> {
        Ok((control(y, filter)?, y[3]))
    }

    fn hamiltonian(&self, _t: f64, y: &[f64], filter: &SmoothingFilter) -> Result<f64> {
        oscillator_hamiltonian(y, filter)
    }

    fn terminal_residual(&self, _tf: f64, yf: &[f64], filter: &SmoothingFilter) -> Result<Vec<f64>> {
        Ok(vec![yf[0] - self.config.x1_f, yf[1] - self.config.x2_f, oscillator_hamiltonian(yf, filter)?])
    }

    fn cost_of(&self, traj: &Trajectory) -> f64 {
        traj.end_time() - traj.start_time()
    }
}
