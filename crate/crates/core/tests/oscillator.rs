use bangbang_core::numerics::{refine_zero_crossings, IntegratorConfig, RootSolveConfig};
use bangbang_core::oscillator::{oscillator_hamiltonian, oscillator_residual, Oscillator};
use bangbang_core::problem::{evaluate_residual, IndirectProblem, propagate_trajectory, solve_problem, switch_count, Solution};
use bangbang_core::smoothing::SmoothingFilter;

const TF: f64 = 2.4980916;

fn paper_integrator() -> IntegratorConfig {
    IntegratorConfig::with_tolerances(1e-9, 1e-9)
}

fn solve(guess: [f64; 3], filter: SmoothingFilter) -> Solution {
    let p = Oscillator::default();
    solve_problem(&p, &guess, &filter, &paper_integrator(), &RootSolveConfig::default()).unwrap()
}

/// Closed-form flow under `u = −sgn(λ₂)`: between switches the state rotates
/// clockwise about `(u, 0)` and `λ₂(t) = λ₂(0)cos t − λ₁(0)sin t`.
fn hard_sign_final_state(eta: [f64; 3]) -> [f64; 2] {
    let (l1, l2, tf) = (eta[0], eta[1], eta[2]);
    let amp = l1.hypot(l2);
    // λ₂(t) = amp·cos(t + φ) with cos φ = λ₂/amp, sin φ = λ₁/amp.
    let phi = l1.atan2(l2);
    let mut switches = Vec::new();
    let mut k = 0.0;
    loop {
        let t = std::f64::consts::FRAC_PI_2 + k * std::f64::consts::PI - phi;
        if t >= tf {
            break;
        }
        if t > 0.0 {
            switches.push(t);
        }
        k += 1.0;
    }
    let lam2 = |t: f64| amp * (t + phi).cos();
    let mut x = [1.0, 1.0];
    let mut t0 = 0.0;
    for t1 in switches.into_iter().chain(std::iter::once(tf)) {
        let u = -lam2(0.5 * (t0 + t1)).signum();
        let (c, s) = ((t1 - t0).cos(), (t1 - t0).sin());
        let (a, b) = (x[0] - u, x[1]);
        x = [u + a * c + b * s, -a * s + b * c];
        t0 = t1;
    }
    x
}

#[test]
fn single_solve_reproduces_minimal_time() {
    let sol = solve([0.5, 0.5, 2.0], SmoothingFilter::l2(1e-8).unwrap());
    assert!(sol.report.converged, "{:?}", sol.report);
    assert!(sol.report.residual_norm <= 1e-9);
    let tf = sol.cost.unwrap();
    assert!((tf - TF).abs() <= 1e-4, "t_f = {tf}");
    // Hard-sign optimum: λ(0) ∝ (0.6, 0.8) after normalizing by H = 0.
    let eta = &sol.report.solution;
    assert!((eta[0] - 0.6).abs() < 1e-4 && (eta[1] - 0.8).abs() < 1e-4, "{eta:?}");
}

#[test]
fn single_switch_near_expected_time() {
    let sol = solve([0.5, 0.5, 2.0], SmoothingFilter::l2(1e-8).unwrap());
    let traj = sol.trajectory.unwrap();
    assert_eq!(switch_count(&traj), 1);
    let roots = refine_zero_crossings(&traj, |_, y| y[3], 1e-12).unwrap();
    assert_eq!(roots.len(), 1);
    // λ₂(t) = 0.8 cos t − 0.6 sin t vanishes at atan(4/3).
    assert!((roots[0] - (4.0f64 / 3.0).atan()).abs() < 5e-3);
    assert!((roots[0] - 0.9273).abs() < 5e-3);
}

#[test]
fn hamiltonian_vanishes_along_solution() {
    for filter in [SmoothingFilter::l2(1e-8).unwrap(), SmoothingFilter::tanh(1e-6).unwrap()] {
        let sol = solve([0.5, 0.5, 2.0], filter);
        let traj = sol.trajectory.unwrap();
        let tf = traj.end_time();
        let worst = (0..100)
            .map(|i| {
                let y = traj.interpolate(tf * i as f64 / 99.0);
                oscillator_hamiltonian(&y, &filter).unwrap().abs()
            })
            .fold(0.0, f64::max);
        assert!(worst <= 1e-5, "{filter:?}: max |H| = {worst:e}");
    }
}

#[test]
fn control_is_bang_bang_away_from_switch() {
    let filter = SmoothingFilter::l2(1e-8).unwrap();
    let sol = solve([0.5, 0.5, 2.0], filter);
    let traj = sol.trajectory.unwrap();
    let switch = refine_zero_crossings(&traj, |_, y| y[3], 1e-12).unwrap()[0];
    let tf = traj.end_time();
    let p = Oscillator::default();
    for i in 0..=1000 {
        let t = tf * i as f64 / 1000.0;
        if (t - switch).abs() <= 0.01 {
            continue;
        }
        let (u, _) = p.control_and_switching(t, &traj.interpolate(t), &filter).unwrap();
        assert!(u.abs() >= 0.999, "u({t}) = {u}");
    }
}

#[test]
fn costate_norm_is_conserved() {
    let sol = solve([0.5, 0.5, 2.0], SmoothingFilter::l2(1e-8).unwrap());
    let traj = sol.trajectory.unwrap();
    let norms: Vec<f64> = traj.states().map(|y| y[2] * y[2] + y[3] * y[3]).collect();
    let drift = norms.iter().map(|n| (n - norms[0]).abs()).fold(0.0, f64::max);
    assert!(drift <= 1e-8, "drift {drift:e}");
}

#[test]
fn residual_matches_closed_form_hard_sign_flow() {
    let eta = [0.5, 0.5, 2.0];
    let tight = IntegratorConfig::with_tolerances(1e-12, 1e-12);
    let r = evaluate_residual(&Oscillator::default(), &eta, &SmoothingFilter::hard(), &tight).unwrap();
    let x = hard_sign_final_state(eta);
    assert!((r[0] - x[0]).abs() < 1e-9 && (r[1] - x[1]).abs() < 1e-9, "{r:?} vs {x:?}");
}

#[test]
fn smoothed_residual_matches_reference_integration() {
    let eta = [0.5, 0.5, 2.0];
    let filter = SmoothingFilter::l2(1e-8).unwrap();
    let reference = oscillator_residual(&eta, &filter, &IntegratorConfig::with_tolerances(1e-12, 1e-12)).unwrap();
    let paper = oscillator_residual(&eta, &filter, &paper_integrator()).unwrap();
    for (a, b) in reference.iter().zip(&paper) {
        assert!((a - b).abs() < 1e-7, "{reference:?} vs {paper:?}");
    }
    // Smoothing moves the endpoint by far less than the switch width √δ.
    let x = hard_sign_final_state(eta);
    assert!((reference[0] - x[0]).abs() < 1e-6 && (reference[1] - x[1]).abs() < 1e-6);
}

#[test]
fn filters_agree_on_minimal_time() {
    let a = solve([0.5, 0.5, 2.0], SmoothingFilter::l2(1e-8).unwrap()).cost.unwrap();
    let b = solve([0.5, 0.5, 2.0], SmoothingFilter::tanh(1e-6).unwrap()).cost.unwrap();
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
}

#[test]
fn trajectory_ends_at_origin() {
    let filter = SmoothingFilter::l2(1e-8).unwrap();
    let sol = solve([0.5, 0.5, 2.0], filter);
    let traj = propagate_trajectory(&Oscillator::default(), &sol.report.solution, &filter, &paper_integrator()).unwrap();
    let yf = traj.final_state();
    assert!(yf[0].abs() < 1e-9 && yf[1].abs() < 1e-9);
    assert_eq!(traj.controls.len(), traj.len());
}
