//! Sign-change detection along a recorded trajectory.

use super::trajectory::Trajectory;
use crate::error::{Error, Result};

/// Times where `scalar(t, y(t))` changes sign, refined by bisection on the
/// trajectory's Hermite interpolant until the bracket is shorter than `tol`.
///
/// Zero samples are skipped when deciding where the sign changes, so a
/// tangential touch (`+ 0 +`) is not reported.
pub fn refine_zero_crossings<F>(traj: &Trajectory, mut scalar: F, tol: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> f64,
{
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!("crossing tolerance must be positive, got {tol}")));
    }
    let mut crossings = Vec::new();
    let mut buf = vec![0.0; traj.dim()];
    let mut prev: Option<(f64, f64)> = None;

    for i in 0..traj.len() {
        let t = traj.times()[i];
        let v = scalar(t, traj.state(i));
        if v == 0.0 || v.is_nan() {
            continue;
        }
        if let Some((t_prev, v_prev)) = prev {
            if v_prev.signum() != v.signum() {
                let (mut lo, mut hi) = (t_prev, t);
                let lo_sign = v_prev.signum();
                while hi - lo >= tol {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    traj.interpolate_into(mid, &mut buf);
                    let vm = scalar(mid, &buf);
                    if vm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if vm.signum() == lo_sign {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                crossings.push(0.5 * (lo + hi));
            }
        }
        prev = Some((t, v));
    }
    Ok(crossings)
}

/// Number of sign changes in a sequence, ignoring exact zeros.
pub fn count_sign_changes(values: &[f64]) -> usize {
    let mut count = 0;
    let mut last = 0.0f64;
    for &v in values {
        if v == 0.0 || v.is_nan() {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            count += 1;
        }
        last = v;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sampled(t0: f64, t1: f64, dt: f64) -> Trajectory {
        let n = ((t1 - t0) / dt).round() as usize;
        let mut traj = Trajectory::with_capacity(1, n + 1);
        for i in 0..=n {
            let t = t0 + (t1 - t0) * i as f64 / n as f64;
            traj.push(t, &[t.sin()], &[t.cos()]);
        }
        traj
    }

    #[test]
    fn sine_roots() {
        let traj = sampled(0.1, 9.0, 0.01);
        let roots = refine_zero_crossings(&traj, |t, _| t.sin(), 1e-12).unwrap();
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - PI).abs() < 1e-9);
        assert!((roots[1] - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn sine_roots_through_interpolant() {
        let traj = sampled(0.1, 9.0, 0.01);
        let roots = refine_zero_crossings(&traj, |_, y| y[0], 1e-12).unwrap();
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - PI).abs() < 1e-9, "{}", roots[0] - PI);
        assert!((roots[1] - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn constant_has_no_crossings() {
        let traj = sampled(0.0, 5.0, 0.1);
        assert!(refine_zero_crossings(&traj, |_, _| 1.0, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn tangential_zero_is_not_reported() {
        // (t - 1)² touches zero at a sample without changing sign.
        let mut traj = Trajectory::with_capacity(1, 3);
        for &t in &[0.0, 1.0, 2.0] {
            traj.push(t, &[(t - 1.0f64).powi(2)], &[2.0 * (t - 1.0)]);
        }
        assert!(refine_zero_crossings(&traj, |_, y| y[0], 1e-9).unwrap().is_empty());
        assert_eq!(count_sign_changes(&[1.0, 0.0, 1.0]), 0);
        assert_eq!(count_sign_changes(&[1.0, 0.0, -1.0, -2.0, 3.0]), 2);
    }

    #[test]
    fn bad_tolerance() {
        let traj = sampled(0.0, 1.0, 0.1);
        assert!(refine_zero_crossings(&traj, |_, y| y[0], 0.0).is_err());
    }

    #[test]
    fn crossings_increase_and_are_bracketed() {
        let traj = sampled(0.0, 40.0, 0.37);
        let f = |t: f64| (1.3 * t).sin() + 0.4 * (3.1 * t).cos();
        let roots = refine_zero_crossings(&traj, |t, _| f(t), 1e-10).unwrap();
        assert!(roots.windows(2).all(|w| w[1] > w[0]));
        let times = traj.times();
        for r in &roots {
            let i = times.partition_point(|&t| t <= *r) - 1;
            assert!(f(times[i]) * f(times[i + 1]) < 0.0);
        }
    }
}
