use bangbang_core::continuation::{continue_solve, ContinuationReport, ContinuationSchedule};
use bangbang_core::harness::{run_rng, GuessDomain};
use bangbang_core::lowthrust::GtoGeo;
use bangbang_core::numerics::{IntegratorConfig, RootSolveConfig};
use bangbang_core::oscillator::Oscillator;
use bangbang_core::problem::evaluate_residual;
use bangbang_core::smoothing::{FilterKind, SmoothingFilter};

const TF: f64 = 2.4980916;

fn integ() -> IntegratorConfig {
    IntegratorConfig::with_tolerances(1e-9, 1e-9)
}

fn run(eta0: &[f64], kind: FilterKind, seed: u64) -> ContinuationReport {
    continue_solve(
        &Oscillator::default(),
        eta0,
        kind,
        &ContinuationSchedule::for_filter(kind),
        &integ(),
        &RootSolveConfig::default(),
        seed,
    )
    .unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn oscillator_reaches_floor_with_known_final_time() {
    for kind in [FilterKind::L2, FilterKind::Tanh] {
        let rep = run(&[0.5, 0.5, 2.0], kind, 1);
        assert!(rep.converged, "{kind}: {rep:?}");
        assert!((rep.final_solution[2] - TF).abs() <= 1e-4, "{kind}: t_f = {}", rep.final_solution[2]);
        let last = rep.steps.last().unwrap();
        assert!(last.report.converged);
        assert!(last.constant <= rep.floor * (1.0 + 1e-9));
        assert_eq!(rep.final_constant, Some(last.constant));
        assert_eq!(rep.floor, kind.default_floor());
    }
}

#[test]
fn solved_constants_strictly_decrease() {
    let rep = run(&[0.3, 0.9, 1.5], FilterKind::L2, 4);
    assert!(rep.converged);
    let solved: Vec<f64> = rep.steps.iter().filter(|s| s.report.converged).map(|s| s.constant).collect();
    assert_eq!(solved.len(), 9);
    assert!(solved.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(rep.levels_completed(), 9);
    // The L²-norm schedule has two more decades than the tanh one.
    let tanh = run(&[0.3, 0.9, 1.5], FilterKind::Tanh, 4);
    assert!(tanh.converged);
    assert_eq!(tanh.levels_completed(), 7);
}

#[test]
fn warm_start_at_fixed_point() {
    let kind = FilterKind::L2;
    let first = run(&[0.5, 0.5, 2.0], kind, 1);
    assert!(first.converged);
    let floor = ContinuationSchedule { start: 1e-8, ..ContinuationSchedule::for_filter(kind) };
    let rep = continue_solve(
        &Oscillator::default(),
        &first.final_solution,
        kind,
        &floor,
        &integ(),
        &RootSolveConfig::default(),
        9,
    )
    .unwrap();
    assert!(rep.converged);
    assert_eq!(rep.steps.len(), 1);
    assert!(rep.steps[0].report.iterations <= 2, "{:?}", rep.steps[0].report);
}

#[test]
fn same_seed_same_history() {
    // A guess that needs perturbed retries exercises the generator.
    let strip = |r: &ContinuationReport| {
        r.steps.iter().map(|s| (s.constant, s.attempt, s.guess.clone(), s.report.solution.clone())).collect::<Vec<_>>()
    };
    for eta in [[0.5, 0.5, 2.0], [0.05, 0.02, 1.0]] {
        let a = run(&eta, FilterKind::Tanh, 17);
        let b = run(&eta, FilterKind::Tanh, 17);
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.final_solution, b.final_solution);
    }
}

#[test]
fn warm_starts_beat_cold_starts() {
    // At each decade the previous level's solution is compared with a fresh
    // draw from the guess domain by the residual at the new constant.
    let p = Oscillator::default();
    let domain = GuessDomain::oscillator();
    let (mut wins, mut trials) = (0, 0);
    for seed in 0..20u64 {
        let eta0 = domain.sample(&mut run_rng(seed, 0));
        let rep = run(&eta0, FilterKind::L2, seed);
        let solved: Vec<(f64, &[f64])> =
            rep.steps.iter().filter(|s| s.report.converged).map(|s| (s.constant, s.report.solution.as_slice())).collect();
        for (k, w) in solved.windows(2).enumerate() {
            let next = SmoothingFilter::l2(w[1].0).unwrap();
            let cold = domain.sample(&mut run_rng(seed + 1000, k));
            let warm_r = evaluate_residual(&p, w[0].1, &next, &integ()).map(|v| norm(&v)).unwrap_or(f64::INFINITY);
            let cold_r = evaluate_residual(&p, &cold, &next, &integ()).map(|v| norm(&v)).unwrap_or(f64::INFINITY);
            trials += 1;
            if warm_r < cold_r {
                wins += 1;
            }
        }
    }
    assert!(trials >= 100, "{trials}");
    let rate = wins as f64 / trials as f64;
    assert!(rate >= 0.9, "warm start better in {wins}/{trials}");
}

#[test]
fn exhausted_retries_give_a_report() {
    let p = GtoGeo::default();
    let schedule = ContinuationSchedule { max_retries: 1, ..ContinuationSchedule::for_filter(FilterKind::L2) };
    let root = RootSolveConfig { max_iterations: 1, ..RootSolveConfig::with_tolerance(1e-6) };
    let integ = IntegratorConfig::with_tolerances(1e-8, 1e-8);
    let rep = continue_solve(&p, &[0.05; 7], FilterKind::L2, &schedule, &integ, &root, 3).unwrap();
    assert!(!rep.converged);
    assert_eq!(rep.steps.len(), 2);
    assert_eq!((rep.steps[0].attempt, rep.steps[1].attempt), (0, 1));
    // The retry guess is shifted by at most constant/100 per component.
    for (a, b) in rep.steps[1].guess.iter().zip(&rep.steps[0].guess) {
        assert!((0.0..=0.01).contains(&(a - b)));
    }
    assert_eq!(rep.final_constant, None);
    assert_eq!(rep.final_solution, vec![0.05; 7]);
    let json = serde_json::to_string(&rep).unwrap();
    let back: ContinuationReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back.steps.len(), 2);
}

#[test]
fn invalid_inputs_are_errors() {
    let p = Oscillator::default();
    let s = ContinuationSchedule::default();
    let r = RootSolveConfig::default();
    assert!(continue_solve(&p, &[0.5, 0.5], FilterKind::L2, &s, &integ(), &r, 0).is_err());
    assert!(continue_solve(&p, &[0.5, 0.5, 2.0], FilterKind::Hard, &s, &integ(), &r, 0).is_err());
    let bad = ContinuationSchedule { factor: 2.0, ..s };
    assert!(continue_solve(&p, &[0.5, 0.5, 2.0], FilterKind::L2, &bad, &integ(), &r, 0).is_err());
}
