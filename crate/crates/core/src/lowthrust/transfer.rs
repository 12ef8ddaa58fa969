use std::f64::consts::PI;

use nalgebra::Const;
use num_dual::{DualNum, DualSVec64};
use serde::{Deserialize, Serialize};

use super::mee::{check_domain, count_revolutions, gauss_terms, mee_matrices, MeeState, DEGENERATE_NORM};
use crate::error::{Error, Result};
use crate::numerics::{count_sign_changes, IntegratorConfig, Trajectory};
use crate::problem::{evaluate_residual, IndirectProblem};
use crate::smoothing::{smooth_control, ControlBounds, SmoothingFilter};

/// Spacecraft and central-body constants in SI-style units (kg, N, s,
/// m/s², km³/s²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpacecraftParams {
    pub m0: f64,
    pub t_max: f64,
    pub isp: f64,
    pub g0: f64,
    pub mu: f64,
}

impl Default for SpacecraftParams {
    fn default() -> Self {
        Self { m0: 1500.0, t_max: 1.0, isp: 2000.0, g0: 9.80665, mu: 398_600.4418 }
    }
}

impl SpacecraftParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m0", self.m0), ("t_max", self.t_max), ("isp", self.isp), ("g0", self.g0), ("mu", self.mu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("spacecraft parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `g₀·I_sp` in km/s.
    pub fn exhaust_velocity(&self) -> f64 {
        self.g0 * self.isp / 1000.0
    }

    /// `T_max / (m₀ g₀)`.
    pub fn thrust_to_weight(&self) -> f64 {
        self.t_max / (self.m0 * self.g0)
    }

    /// Full-throttle propellant flow `T_max / (g₀ I_sp)` in kg/s.
    pub fn mass_flow_rate(&self) -> f64 {
        self.t_max / (self.g0 * self.isp)
    }
}

/// Length, time and mass units of the integration variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub length_km: f64,
    pub time_s: f64,
    pub mass_kg: f64,
}

/// Length unit of the canonical system (GEO radius).
pub const CANONICAL_LENGTH_KM: f64 = 42_165.0;

impl Units {
    /// GEO radius, the time unit that makes `μ = 1`, and the initial mass.
    pub fn canonical(params: &SpacecraftParams) -> Self {
        let l = CANONICAL_LENGTH_KM;
        Self { length_km: l, time_s: (l * l * l / params.mu).sqrt(), mass_kg: params.m0 }
    }

    /// km, s, kg.
    pub fn physical() -> Self {
        Self { length_km: 1.0, time_s: 1.0, mass_kg: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.length_km, self.time_s, self.mass_kg].iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("units must be positive: {self:?}")))
        }
    }

    /// Factors converting working-unit costates `[λp..λL, λm]` to kg per
    /// physical state unit.
    fn costate_factors(&self) -> [f64; 7] {
        let m = self.mass_kg;
        [m / self.length_km, m, m, m, m, m, 1.0]
    }
}

/// Rescales initial costates between unit systems.
pub fn convert_costates(eta: &[f64], from: &Units, to: &Units) -> Result<Vec<f64>> {
    if eta.len() != 7 {
        return Err(Error::Dimension { expected: 7, got: eta.len() });
    }
    let (a, b) = (from.costate_factors(), to.costate_factors());
    Ok(eta.iter().enumerate().map(|(i, v)| v * a[i] / b[i]).collect())
}

/// Target elements; the true longitude is free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetOrbit {
    pub p: f64,
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub k: f64,
}

impl TargetOrbit {
    fn to_array(self) -> [f64; 5] {
        [self.p, self.f, self.g, self.h, self.k]
    }
}

/// Departure orbit, target orbit (km) and fixed transfer time (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransferBoundary {
    pub initial: MeeState,
    pub target: TargetOrbit,
    pub tf: f64,
}

impl Default for TransferBoundary {
    fn default() -> Self {
        Self {
            initial: MeeState::new(11_623.0, 0.75, 0.0, 0.0612, 0.0, PI),
            target: TargetOrbit { p: 42_165.0, f: 0.0, g: 0.0, h: 0.0, k: 0.0 },
            tf: 3.6e6,
        }
    }
}

impl TransferBoundary {
    pub fn validate(&self) -> Result<()> {
        self.initial.validate()?;
        if !(self.target.p > 0.0) || self.target.to_array().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid target orbit {:?}", self.target)));
        }
        if !(self.tf > 0.0 && self.tf.is_finite()) {
            return Err(Error::InvalidArgument(format!("transfer time must be positive, got {}", self.tf)));
        }
        Ok(())
    }
}

/// Physical constants expressed in the working units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledConstants {
    pub mu: f64,
    pub t_max: f64,
    /// Exhaust velocity.
    pub c: f64,
    pub m0: f64,
    pub tf: f64,
}

impl ScaledConstants {
    pub fn new(params: &SpacecraftParams, boundary: &TransferBoundary, units: &Units) -> Self {
        let (l, t, m) = (units.length_km, units.time_s, units.mass_kg);
        Self {
            mu: params.mu * t * t / (l * l * l),
            // N = 1e-3 kg·km/s².
            t_max: params.t_max / 1000.0 * t * t / (m * l),
            c: params.exhaust_velocity() * t / l,
            m0: params.m0 / m,
            tf: boundary.tf / t,
        }
    }
}

const THROTTLE: ControlBounds = ControlBounds { u_min: 0.0, u_max: 1.0 };

/// `S = 1 − c‖Mᵀλ‖/m − λ_m`, in the units of `params` (km, s, kg).
pub fn switching_function(x: &MeeState, lambda: &[f64; 6], m: f64, lambda_m: f64, params: &SpacecraftParams) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::Domain(format!("mass must be positive, got {m}")));
    }
    let (mm, _) = mee_matrices(x, params.mu)?;
    let v = mm.transpose() * nalgebra::SVector::<f64, 6>::from_column_slice(lambda);
    Ok(1.0 - params.exhaust_velocity() * v.norm() / m - lambda_m)
}

/// Control quantities at one augmented state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrustControl {
    pub u: f64,
    pub switching: f64,
    /// Zero when `‖Mᵀλ‖` is degenerate.
    pub alpha: [f64; 3],
    pub degenerate: bool,
}

fn check_state(y: &[f64]) -> Result<()> {
    if y.len() != 14 {
        return Err(Error::Dimension { expected: 14, got: y.len() });
    }
    if !(y[6] > 0.0) {
        return Err(Error::Domain(format!("mass must be positive, got {}", y[6])));
    }
    let w = 1.0 + y[1] * y[5].cos() + y[2] * y[5].sin();
    check_domain(y[0], w)
}

fn mt_lambda(m: &[[f64; 3]; 6], lam: &[f64]) -> [f64; 3] {
    let mut v = [0.0; 3];
    for (row, l) in m.iter().zip(lam) {
        for j in 0..3 {
            v[j] += row[j] * l;
        }
    }
    v
}

fn control_from(
    v: [f64; 3],
    m: f64,
    lambda_m: f64,
    k: &ScaledConstants,
    filter: &SmoothingFilter,
    forced: Option<f64>,
) -> Result<ThrustControl> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let switching = 1.0 - k.c * n / m - lambda_m;
    let u = match forced {
        Some(u) => u,
        None => smooth_control(switching, THROTTLE, *filter)?,
    };
    let degenerate = n < DEGENERATE_NORM;
    let alpha = if degenerate { [0.0; 3] } else { [-v[0] / n, -v[1] / n, -v[2] / n] };
    Ok(ThrustControl { u, switching, alpha, degenerate })
}

/// Throttle, switching function and thrust direction at an augmented state
/// `[p, f, g, h, k, L, m, λp, λf, λg, λh, λk, λL, λm]` in working units.
pub fn thrust_control(
    y: &[f64],
    filter: &SmoothingFilter,
    k: &ScaledConstants,
    forced: Option<f64>,
) -> Result<ThrustControl> {
    check_state(y)?;
    let x = [y[0], y[1], y[2], y[3], y[4], y[5]];
    let (m, _) = gauss_terms(&x, k.mu);
    control_from(mt_lambda(&m, &y[7..13]), y[6], y[13], k, filter, forced)
}

/// Hamiltonian with the optimal direction substituted:
/// `H = (T/c)u(1 − λ_m) − (uT/m)‖Mᵀλ‖ + λ_L D_L`.
pub fn lowthrust_hamiltonian(
    y: &[f64],
    filter: &SmoothingFilter,
    k: &ScaledConstants,
    forced: Option<f64>,
) -> Result<f64> {
    check_state(y)?;
    let x = [y[0], y[1], y[2], y[3], y[4], y[5]];
    let (m, d_l) = gauss_terms(&x, k.mu);
    let v = mt_lambda(&m, &y[7..13]);
    let ctl = control_from(v, y[6], y[13], k, filter, forced)?;
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    Ok(k.t_max / k.c * ctl.u * (1.0 - y[13]) - ctl.u * k.t_max / y[6] * n + y[12] * d_l)
}

/// State and costate rates. Costate rates are `−∂H/∂(x, m)` of
/// [`lowthrust_hamiltonian`] with the throttle held at its current value,
/// obtained by forward-mode differentiation. When `‖Mᵀλ‖` is degenerate the
/// thrust term is dropped from both.
pub fn lowthrust_aug_dynamics(
    y: &[f64],
    filter: &SmoothingFilter,
    k: &ScaledConstants,
    forced: Option<f64>,
) -> Result<([f64; 14], ThrustControl)> {
    check_state(y)?;
    type D7 = DualSVec64<7>;
    let z: [D7; 6] = std::array::from_fn(|i| D7::from_re(y[i]).derivative(i));
    let mass = D7::from_re(y[6]).derivative(6);
    let (m, d_l) = gauss_terms(&z, k.mu);
    let lam = &y[7..13];

    let mut v = [D7::from(0.0); 3];
    for (row, l) in m.iter().zip(lam) {
        for j in 0..3 {
            v[j] += row[j] * *l;
        }
    }
    let v_re = [v[0].re, v[1].re, v[2].re];
    let ctl = control_from(v_re, y[6], y[13], k, filter, forced)?;

    let mut h = d_l * y[12];
    if !ctl.degenerate {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        h -= n * (ctl.u * k.t_max) / mass;
    }
    let grad = h.eps.unwrap_generic(Const::<7>, Const::<1>);

    let mut dy = [0.0; 14];
    let accel = ctl.u * k.t_max / y[6];
    for i in 0..6 {
        dy[i] = accel * (m[i][0].re * ctl.alpha[0] + m[i][1].re * ctl.alpha[1] + m[i][2].re * ctl.alpha[2]);
    }
    dy[5] += d_l.re;
    dy[6] = -ctl.u * k.t_max / k.c;
    for i in 0..7 {
        dy[7 + i] = -grad[i];
    }
    Ok((dy, ctl))
}

/// Minimal-fuel fixed-time transfer between two orbits in modified
/// equinoctial elements. Shooting variable: the seven initial costates
/// `[λp, λf, λg, λh, λk, λL, λm]` in working units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtoGeo {
    pub params: SpacecraftParams,
    pub boundary: TransferBoundary,
    pub units: Units,
    /// Replaces the switching law with a constant throttle (diagnostics).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forced_throttle: Option<f64>,
    #[serde(skip)]
    scaled: Option<ScaledConstants>,
}

impl Default for GtoGeo {
    fn default() -> Self {
        Self::new(SpacecraftParams::default(), TransferBoundary::default(), None).expect("paper values are valid")
    }
}

impl GtoGeo {
    /// `units = None` selects canonical units.
    pub fn new(params: SpacecraftParams, boundary: TransferBoundary, units: Option<Units>) -> Result<Self> {
        params.validate()?;
        boundary.validate()?;
        let units = units.unwrap_or_else(|| Units::canonical(&params));
        units.validate()?;
        let scaled = Some(ScaledConstants::new(&params, &boundary, &units));
        Ok(Self { params, boundary, units, forced_throttle: None, scaled })
    }

    pub fn with_forced_throttle(mut self, u: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::InvalidArgument(format!("throttle must lie in [0, 1], got {u}")));
        }
        self.forced_throttle = Some(u);
        Ok(self)
    }

    pub fn constants(&self) -> ScaledConstants {
        self.scaled.unwrap_or_else(|| ScaledConstants::new(&self.params, &self.boundary, &self.units))
    }

    /// Rebuilds the cached constants after deserialization.
    pub fn revalidated(self) -> Result<Self> {
        let forced = self.forced_throttle;
        let mut p = Self::new(self.params, self.boundary, Some(self.units))?;
        if let Some(u) = forced {
            p = p.with_forced_throttle(u)?;
        }
        Ok(p)
    }

    pub fn residual(&self, eta: &[f64], filter: &SmoothingFilter, integ: &IntegratorConfig) -> Result<Vec<f64>> {
        evaluate_residual(self, eta, filter, integ)
    }

    /// `m(t₀) − m(t_f)` in kg.
    pub fn fuel_consumed(&self, traj: &Trajectory) -> f64 {
        (traj.initial_state()[6] - traj.final_state()[6]) * self.units.mass_kg
    }

    /// `T_max/(g₀I_sp)·∫u dt` in kg, by three-point Gauss–Legendre
    /// quadrature on every step of the trajectory's interpolant.
    pub fn fuel_quadrature(&self, traj: &Trajectory, filter: &SmoothingFilter) -> Result<f64> {
        let k = self.constants();
        let nodes = [(-(0.6f64).sqrt(), 5.0 / 9.0), (0.0, 8.0 / 9.0), ((0.6f64).sqrt(), 5.0 / 9.0)];
        let times = traj.times();
        let mut buf = vec![0.0; traj.dim()];
        let mut total = 0.0;
        for w in times.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, wt) in nodes {
                traj.interpolate_into(mid + half * x, &mut buf);
                total += wt * half * thrust_control(&buf, filter, &k, self.forced_throttle)?.u;
            }
        }
        Ok(total * k.t_max / k.c * self.units.mass_kg)
    }

    /// Revolutions completed over the trajectory.
    pub fn revolutions(&self, traj: &Trajectory) -> Result<u64> {
        count_revolutions(traj.initial_state()[5], traj.final_state()[5])
    }
}

impl IndirectProblem for GtoGeo {
    fn name(&self) -> &str {
        "gto-geo"
    }

    fn n_state(&self) -> usize {
        7
    }

    fn n_costate(&self) -> usize {
        7
    }

    fn shooting_dim(&self) -> usize {
        7
    }

    fn free_final_time(&self) -> bool {
        false
    }

    fn state_names(&self) -> Vec<String> {
        ["p", "f", "g", "h", "k", "L", "m", "lambda_p", "lambda_f", "lambda_g", "lambda_h", "lambda_k", "lambda_L", "lambda_m"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn final_time(&self, _eta: &[f64]) -> f64 {
        self.constants().tf
    }

    fn initial_augmented(&self, eta: &[f64]) -> Vec<f64> {
        let x0 = self.boundary.initial;
        let mut y = Vec::with_capacity(14);
        y.extend_from_slice(&[x0.p / self.units.length_km, x0.f, x0.g, x0.h, x0.k, x0.l, self.constants().m0]);
        y.extend_from_slice(eta);
        y
    }

    fn aug_dynamics(&self, _t: f64, y: &[f64], filter: &SmoothingFilter, dy: &mut [f64]) -> Result<()> {
        let (rates, _) = lowthrust_aug_dynamics(y, filter, &self.constants(), self.forced_throttle)?;
        dy.copy_from_slice(&rates);
        Ok(())
    }

    fn control_and_switching(&self, _t: f64, y: &[f64], filter: &SmoothingFilter) -> Result<(f64, f64)> {
        let c = thrust_control(y, filter, &self.constants(), self.forced_throttle)?;
        Ok((c.u, c.switching))
    }

    fn hamiltonian(&self, _t: f64, y: &[f64], filter: &SmoothingFilter) -> Result<f64> {
        lowthrust_hamiltonian(y, filter, &self.constants(), self.forced_throttle)
    }

    fn terminal_residual(&self, _tf: f64, yf: &[f64], _filter: &SmoothingFilter) -> Result<Vec<f64>> {
        let t = self.boundary.target;
        Ok(vec![
            yf[0] - t.p / self.units.length_km,
            yf[1] - t.f,
            yf[2] - t.g,
            yf[3] - t.h,
            yf[4] - t.k,
            yf[12],
            yf[13],
        ])
    }

    fn cost_of(&self, traj: &Trajectory) -> f64 {
        self.fuel_consumed(traj)
    }

    fn output_row(&self, t: f64, y: &[f64]) -> (f64, Vec<f64>) {
        let u = &self.units;
        let cf = u.costate_factors();
        let mut row = Vec::with_capacity(14);
        row.push(y[0] * u.length_km);
        row.extend_from_slice(&y[1..6]);
        row.push(y[6] * u.mass_kg);
        row.extend(y[7..14].iter().zip(cf).map(|(v, f)| v * f));
        (t * u.time_s, row)
    }

    fn trajectory_metrics(&self, traj: &Trajectory, filter: &SmoothingFilter) -> Vec<(String, f64)> {
        let mut out = vec![
            ("fuel_kg".to_string(), self.fuel_consumed(traj)),
            ("final_mass_kg".to_string(), traj.final_state()[6] * self.units.mass_kg),
        ];
        if let Ok(q) = self.fuel_quadrature(traj, filter) {
            out.push(("fuel_quadrature_kg".to_string(), q));
        }
        if let Ok(r) = self.revolutions(traj) {
            out.push(("revolutions".to_string(), r as f64));
        }
        let k = self.constants();
        let s: Vec<f64> = traj
            .states()
            .filter_map(|y| thrust_control(y, filter, &k, self.forced_throttle).ok().map(|c| c.switching))
            .collect();
        out.push(("switches".to_string(), count_sign_changes(&s) as f64));
        out
    }
}
