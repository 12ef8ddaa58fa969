//! Dormand–Prince 5(4) integration with PI step-size control.
//!
//! Every accepted step is recorded together with the derivative at the step
//! end (first-same-as-last), which gives the trajectory a C¹ cubic Hermite
//! interpolant for event refinement.

use serde::{Deserialize, Serialize};

use super::trajectory::Trajectory;
use crate::error::{Error, Result};

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub initial_step: f64,
    /// Upper bound on attempted (accepted plus rejected) steps.
    pub max_steps: usize,
    /// Shorten steps so that they end on sign changes of the event function
    /// passed to [`propagate_with_event`].
    pub locate_events: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-9, rel_tol: 1e-9, initial_step: 1e-3, max_steps: 1_000_000, locate_events: true }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v.is_finite() && v > 0.0 && v < 1.0;
        if !in_unit(self.abs_tol) || !in_unit(self.rel_tol) {
            return Err(Error::InvalidArgument(format!(
                "integrator tolerances must lie in (0, 1): abs_tol={}, rel_tol={}",
                self.abs_tol, self.rel_tol
            )));
        }
        if !(self.initial_step.is_finite() && self.initial_step > 0.0) {
            return Err(Error::InvalidArgument(format!("initial_step must be positive, got {}", self.initial_step)));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

// Butcher tableau of the Dormand–Prince pair.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI controller (Hairer's DOPRI5 defaults).
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Integrates `dy/dt = dynamics(t, y)` over `t_span` and records every
/// accepted step.
pub fn integrate<F>(dynamics: F, y0: &[f64], t_span: (f64, f64), config: &IntegratorConfig) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let mut traj = Trajectory::with_capacity(y0.len(), 256);
    propagate(dynamics, y0, t_span, config, |t, y, dy| traj.push(t, y, dy))?;
    Ok(traj)
}

/// Same stepping as [`integrate`] but only the final state is kept.
pub fn integrate_final<F>(dynamics: F, y0: &[f64], t_span: (f64, f64), config: &IntegratorConfig) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let mut last = y0.to_vec();
    propagate(dynamics, y0, t_span, config, |_, y, _| last.copy_from_slice(y))?;
    Ok(last)
}

/// Core stepping loop. `on_step` sees the initial point and every accepted
/// step end, in order.
pub fn propagate<F, S>(dynamics: F, y0: &[f64], t_span: (f64, f64), config: &IntegratorConfig, on_step: S) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    S: FnMut(f64, &[f64], &[f64]),
{
    propagate_with_event(dynamics, None::<fn(f64, &[f64]) -> f64>, y0, t_span, config, on_step)
}

/// [`propagate`] with an optional scalar event function. When
/// `config.locate_events` is set, an accepted step across which the event
/// changes sign is retaken so that it ends on the crossing (located on the
/// step's Hermite interpolant). Right-hand sides that switch sharply on the
/// event are then never straddled by a step whose error estimate missed the
/// switch.
pub fn propagate_with_event<F, G, S>(
    mut dynamics: F,
    mut event: Option<G>,
    y0: &[f64],
    (t0, tf): (f64, f64),
    config: &IntegratorConfig,
    mut on_step: S,
) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    G: FnMut(f64, &[f64]) -> f64,
    S: FnMut(f64, &[f64], &[f64]),
{
    if !config.locate_events {
        event = None;
    }
    config.validate()?;
    if !(t0.is_finite() && tf.is_finite() && tf > t0) {
        return Err(Error::InvalidArgument(format!("integration span must satisfy t0 < tf, got [{t0}, {tf}]")));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite initial state".into()));
    }

    let n = y0.len();
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];

    let eval = |f: &mut F, t: f64, y: &[f64], out: &mut [f64]| -> bool {
        f(t, y, out).is_ok() && out.iter().all(|v| v.is_finite())
    };

    dynamics(t0, &y, &mut k1)?;
    if k1.iter().any(|v| !v.is_finite()) {
        return Err(Error::DynamicsBlowup { t: t0 });
    }
    on_step(t0, &y, &k1);

    let span = tf - t0;
    let mut t = t0;
    let mut h = config.initial_step.min(span);
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    let mut attempts = 0usize;
    let mut g_old = event.as_mut().map_or(0.0, |g| g(t0, &y));
    let mut landing = false;
    let mut ybuf = vec![0.0; n];

    loop {
        if attempts >= config.max_steps {
            return Err(Error::IntegrationFailure { t, reason: format!("exceeded {} steps", config.max_steps) });
        }
        attempts += 1;

        let mut last = false;
        if t + h >= tf || (tf - (t + h)) < 1e-12 * span {
            h = tf - t;
            last = true;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(span) {
            return Err(Error::IntegrationFailure { t, reason: format!("step size underflow (h = {h:e})") });
        }

        // Stages; a non-finite or failed stage rejects the step.
        let mut ok = true;
        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        ok &= eval(&mut dynamics, t + C2 * h, &ytmp, &mut k2);
        if ok {
            for i in 0..n {
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            ok &= eval(&mut dynamics, t + C3 * h, &ytmp, &mut k3);
        }
        if ok {
            for i in 0..n {
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            ok &= eval(&mut dynamics, t + C4 * h, &ytmp, &mut k4);
        }
        if ok {
            for i in 0..n {
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            ok &= eval(&mut dynamics, t + C5 * h, &ytmp, &mut k5);
        }
        if ok {
            for i in 0..n {
                ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            ok &= eval(&mut dynamics, t + h, &ytmp, &mut k6);
        }
        let t_new = if last { tf } else { t + h };
        if ok {
            for i in 0..n {
                ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            ok &= eval(&mut dynamics, t_new, &ynew, &mut k7);
        }
        if !ok {
            if h <= 1e3 * f64::EPSILON * t.abs().max(span) {
                return Err(Error::DynamicsBlowup { t });
            }
            h *= 0.25;
            last_rejected = true;
            continue;
        }

        let mut acc = 0.0;
        for i in 0..n {
            let err = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = config.abs_tol + config.rel_tol * y[i].abs().max(ynew[i].abs());
            acc += (err / scale).powi(2);
        }
        let err = (acc / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            h *= 0.25;
            last_rejected = true;
            continue;
        }

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 && !landing && !last {
            if let Some(g) = event.as_mut() {
                let g_new = g(t_new, &ynew);
                if g_old != 0.0 && g_new != 0.0 && g_old.signum() != g_new.signum() {
                    let t_star = locate_crossing(g, (t, &y, &k1), (t_new, &ynew, &k7), g_old, &mut ybuf);
                    let min_gap = (1e-9 * h).max(1e3 * f64::EPSILON * t.abs().max(span));
                    if t_star - t > min_gap && t_new - t_star > min_gap {
                        h = t_star - t;
                        landing = true;
                        continue;
                    }
                }
            }
        }
        landing = false;
        if err <= 1.0 {
            let fac = (fac11 / facold.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            facold = err.max(1e-4);
            last_rejected = false;

            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            on_step(t, &y, &k1);
            if let Some(g) = event.as_mut() {
                let gv = g(t, &y);
                if gv != 0.0 {
                    g_old = gv;
                }
            }
            if last {
                return Ok(());
            }
            h = h_new;
        } else {
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
}

/// Sign change of `g` on the cubic Hermite interpolant of one step, by
/// bisection to near machine resolution in time.
fn locate_crossing<G>(
    g: &mut G,
    (ta, ya, fa): (f64, &[f64], &[f64]),
    (tb, yb, fb): (f64, &[f64], &[f64]),
    g_a: f64,
    buf: &mut [f64],
) -> f64
where
    G: FnMut(f64, &[f64]) -> f64,
{
    let h = tb - ta;
    let (mut lo, mut hi) = (ta, tb);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = (mid - ta) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        for i in 0..buf.len() {
            buf[i] = h00 * ya[i] + h10 * h * fa[i] + h01 * yb[i] + h11 * h * fb[i];
        }
        let gm = g(mid, buf);
        if gm == 0.0 {
            return mid;
        }
        if gm.signum() == g_a.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn exp_error(tol: f64) -> f64 {
        let cfg = IntegratorConfig::with_tolerances(tol, tol);
        let y = integrate_final(
            |_, y, dy| {
                dy[0] = y[0];
                Ok(())
            },
            &[1.0],
            (0.0, 1.0),
            &cfg,
        )
        .unwrap();
        (y[0] - E).abs()
    }

    fn harmonic_error(tol: f64) -> f64 {
        let cfg = IntegratorConfig::with_tolerances(tol, tol);
        let y = integrate_final(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            &[1.0, 0.0],
            (0.0, 2.0 * PI),
            &cfg,
        )
        .unwrap();
        ((y[0] - 1.0).powi(2) + y[1].powi(2)).sqrt()
    }

    #[test]
    fn constant_flow() {
        let traj = integrate(|_, _, dy| {
            dy.fill(0.0);
            Ok(())
        }, &[3.5, -2.0], (0.0, 10.0), &IntegratorConfig::default())
        .unwrap();
        for i in 0..traj.len() {
            assert_eq!(traj.state(i), &[3.5, -2.0]);
        }
        assert_eq!(*traj.times().last().unwrap(), 10.0);
    }

    #[test]
    fn exponential_oracle() {
        assert!(exp_error(1e-12) < 1e-9);
    }

    #[test]
    fn harmonic_oracle() {
        assert!(harmonic_error(1e-9) < 1e-6);
    }

    #[test]
    fn tightening_tolerance_never_hurts() {
        let tols: Vec<f64> = (0..10).map(|i| 1e-6 / 2f64.powi(i)).collect();
        for w in tols.windows(2) {
            assert!(exp_error(w[1]) <= exp_error(w[0]) * 1.0001 + 1e-15, "exp at {:e}", w[1]);
            assert!(harmonic_error(w[1]) <= harmonic_error(w[0]) * 1.0001 + 1e-15, "harmonic at {:e}", w[1]);
        }
    }

    #[test]
    fn times_strictly_increasing_and_end_exact() {
        let traj = integrate(|t, _, dy| {
            dy[0] = t.cos();
            Ok(())
        }, &[0.0], (0.0, 7.3), &IntegratorConfig::default())
        .unwrap();
        assert!(traj.times().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*traj.times().last().unwrap(), 7.3);
        assert!((traj.final_state()[0] - 7.3f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn step_limit_is_reported() {
        let cfg = IntegratorConfig { max_steps: 5, ..IntegratorConfig::default() };
        let err = integrate_final(|_, y, dy| {
            dy[0] = y[0];
            Ok(())
        }, &[1.0], (0.0, 100.0), &cfg)
        .unwrap_err();
        assert!(matches!(err, Error::IntegrationFailure { .. }));
        assert!(err.is_evaluation_failure());
    }

    #[test]
    fn blowup_is_reported() {
        // y' = y², y(0) = 1 escapes at t = 1.
        let err = integrate_final(|_, y, dy| {
            dy[0] = y[0] * y[0];
            Ok(())
        }, &[1.0], (0.0, 2.0), &IntegratorConfig::default())
        .unwrap_err();
        assert!(err.is_evaluation_failure(), "{err:?}");

        let err = integrate_final(|_, _, dy| {
            dy[0] = f64::NAN;
            Ok(())
        }, &[1.0], (0.0, 1.0), &IntegratorConfig::default())
        .unwrap_err();
        assert!(matches!(err, Error::DynamicsBlowup { .. }));
    }

    #[test]
    fn rejects_bad_span_and_config() {
        let f = |_: f64, _: &[f64], dy: &mut [f64]| {
            dy[0] = 0.0;
            Ok(())
        };
        assert!(integrate(f, &[0.0], (1.0, 1.0), &IntegratorConfig::default()).is_err());
        assert!(integrate(f, &[0.0], (1.0, 0.0), &IntegratorConfig::default()).is_err());
        let bad = IntegratorConfig { abs_tol: 0.0, ..IntegratorConfig::default() };
        assert!(integrate(f, &[0.0], (0.0, 1.0), &bad).is_err());
    }

    // y' = tanh((t − c)/ρ), y(0) = 0 has y(t) = ρ·ln cosh((t − c)/ρ) − ρ·ln cosh(c/ρ).
    fn sharp_switch(c: f64, locate: bool) -> (Vec<f64>, f64) {
        let rho = 1e-7;
        let cfg = IntegratorConfig { locate_events: locate, ..IntegratorConfig::with_tolerances(1e-9, 1e-9) };
        let mut times = Vec::new();
        let mut last = 0.0;
        propagate_with_event(
            |t, _, dy| {
                dy[0] = ((t - c) / rho).tanh();
                Ok(())
            },
            Some(|t: f64, _: &[f64]| t - c),
            &[0.0],
            (0.0, 1.0),
            &cfg,
            |t, y, _| {
                times.push(t);
                last = y[0];
            },
        )
        .unwrap();
        (times, last)
    }

    #[test]
    fn event_location_lands_on_switch() {
        let c = 0.3137;
        let (times, y1) = sharp_switch(c, true);
        assert!(times.iter().any(|t| (t - c).abs() < 1e-12));
        // ln cosh terms cancel to far below double precision at |x|/ρ ≥ 3e6.
        let exact = (1.0 - c) - c;
        assert!((y1 - exact).abs() < 1e-8, "{}", y1 - exact);
    }

    #[test]
    fn event_location_smooths_parameter_dependence() {
        // Final value is affine in c; second differences expose step-sequence noise.
        let second_diff = |locate: bool| {
            (0..20)
                .map(|i| {
                    let c = 0.3 + 1e-6 * i as f64;
                    let y = |c: f64| sharp_switch(c, locate).1;
                    (y(c + 1e-7) - 2.0 * y(c) + y(c - 1e-7)).abs()
                })
                .fold(0.0, f64::max)
        };
        let (located, plain) = (second_diff(true), second_diff(false));
        assert!(located < 5e-8 && located < 0.1 * plain, "located {located:e}, plain {plain:e}");
    }

    #[test]
    fn event_ignored_without_sign_change() {
        let (times, _) = sharp_switch(2.0, true);
        let (plain, _) = sharp_switch(2.0, false);
        assert_eq!(times, plain);
    }
}
