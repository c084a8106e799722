use fpme_core::elliptic::{friendly_giant, PROFILE_TOL};
use fpme_core::estimates::*;
use fpme_core::evolution::{critical_time, evolve, initial_datum, DtSchedule, EvolutionConfig, Preset};
use fpme_core::{build_grid, build_operator, compute_green, solve_profile, DiscreteOperator, Error, OperatorKind, Profile, Trajectory};

struct Case {
    op: DiscreteOperator,
    profile: Profile,
}

fn case(kind: OperatorKind, s: f64, m: f64, n: usize) -> Case {
    let op = build_operator(kind, &build_grid(n).unwrap(), s).unwrap();
    let profile = solve_profile(&compute_green(&op).unwrap(), &op, m, PROFILE_TOL).unwrap();
    Case { op, profile }
}

fn synthetic(op: &DiscreteOperator, m: f64, times: &[f64], f: impl Fn(f64) -> Vec<f64>) -> Trajectory {
    let t_end = *times.last().unwrap();
    Trajectory {
        kind: op.kind,
        s: op.s,
        n: op.n(),
        config: EvolutionConfig::new(m, DtSchedule { dt0: 1e-3, growth: 1.05, t_end }),
        times: times.to_vec(),
        snapshots: times.iter().map(|&t| f(t)).collect(),
        newton_iterations: Vec::new(),
        clip_log: Vec::new(),
    }
}

fn geometric(t0: f64, t1: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| t0 * (t1 / t0).powf(i as f64 / (k - 1) as f64)).collect()
}

fn bump_run(op: &DiscreteOperator, m: f64, horizon: f64, scale: f64) -> (Trajectory, f64) {
    let u0: Vec<f64> = initial_datum(&Preset::Bump, &op.grid, op, None).unwrap().iter().map(|v| scale * v).collect();
    let t_star = critical_time(&u0, &op.phi1, m, 1.0, &op.grid).unwrap();
    let cfg = EvolutionConfig::new(m, DtSchedule { dt0: 1e-3, growth: 1.05, t_end: horizon * t_star });
    (evolve(&u0, op, &cfg).unwrap(), t_star)
}

#[test]
fn separate_variables_from_infinity_is_constant_in_scaled_time() {
    let c = case(OperatorKind::Sfl, 0.5, 2.0, 64);
    let traj = synthetic(&c.op, 2.0, &geometric(0.5, 50.0, 20), |t| friendly_giant(&c.profile, 0.0, t).unwrap());
    let r = check_time_monotonicity(&traj, 2.0, &Tolerances::for_grid(&c.op.grid));
    assert!(r.passed());
    assert!(r.get("max_decrease").unwrap() <= 1e-14);
}

#[test]
fn increasing_trajectories_fail_dissipation() {
    let c = case(OperatorKind::Rfl, 0.3, 2.0, 64);
    let green = compute_green(&c.op).unwrap();
    let tol = Tolerances::for_grid(&c.op.grid);
    let traj = synthetic(&c.op, 2.0, &[0.0, 1.0, 2.0], |t| c.op.phi1.iter().map(|p| (1.0 + t) * p).collect());
    assert_eq!(check_green_dissipation(&traj, &green, &tol).verdict, Verdict::Fail);
    let zero = synthetic(&c.op, 2.0, &[0.0, 1.0], |_| vec![0.0; c.op.n()]);
    assert!(check_green_dissipation(&zero, &green, &tol).passed());
    assert_eq!(check_upper_boundary(&zero, &c.op, 2.0, &tol).verdict, Verdict::Skipped);
}

#[test]
fn decay_slope_of_separate_variables() {
    for (kind, s, m) in [(OperatorKind::Sfl, 0.75, 4.0), (OperatorKind::Rfl, 0.3, 2.0)] {
        let c = case(kind, s, m, 64);
        let traj = synthetic(&c.op, m, &geometric(1.0, 1e3, 40), |t| friendly_giant(&c.profile, 0.0, t).unwrap());
        let r = check_absolute_bound(&traj, m, &Tolerances::for_grid(&c.op.grid));
        assert!(r.passed());
        assert!((r.get("decay_slope").unwrap() + 1.0 / (m - 1.0)).abs() < 1e-10);
    }
}

#[test]
fn absolute_constant_is_nearly_independent_of_the_datum() {
    let c = case(OperatorKind::Sfl, 0.5, 2.0, 64);
    let tol = Tolerances::for_grid(&c.op.grid);
    let k = |scale: f64| {
        let u0: Vec<f64> = c.op.phi1.iter().map(|p| scale * p).collect();
        let cfg = EvolutionConfig::new(2.0, DtSchedule { dt0: 1e-4, growth: 1.05, t_end: 1e3 });
        let traj = evolve(&u0, &c.op, &cfg).unwrap();
        check_absolute_bound(&traj, 2.0, &tol).get("K1").unwrap()
    };
    let (small, big) = (k(1.0), k(100.0));
    assert!(big / small < 2.0 && small / big < 2.0, "{small} vs {big}");
}

#[test]
fn kato_slack_on_constants_and_the_eigenfunction() {
    let c = case(OperatorKind::Rfl, 0.3, 2.0, 64);
    let tol = Tolerances::for_grid(&c.op.grid);
    let ones = vec![1.0; c.op.n()];
    let r = check_kato(&c.op, 3.0, &ones, &tol);
    assert!(r.passed());
    let a1 = c.op.apply(&ones);
    let min_expected = a1.iter().map(|v| 2.0 * v).fold(f64::INFINITY, f64::min);
    assert!((r.get("min_slack").unwrap() - min_expected).abs() < 1e-9 * min_expected.abs().max(1.0));
    let sq: Vec<f64> = c.op.phi1.iter().map(|p| p * p).collect();
    let asq = c.op.apply(&sq);
    for (a, q) in asq.iter().zip(&sq) {
        assert!(*a <= 2.0 * c.op.lambda1 * q * (1.0 + 1e-12));
    }
}

#[test]
fn pointwise_estimates_on_separate_variables_and_degenerate_triples() {
    let c = case(OperatorKind::Sfl, 0.5, 2.0, 64);
    let green = compute_green(&c.op).unwrap();
    let traj = synthetic(&c.op, 2.0, &[0.0, 0.5, 1.0, 2.0, 4.0], |t| friendly_giant(&c.profile, 1.0, t).unwrap());
    let r = check_pointwise_estimates(&traj, &green, 2.0, &Tolerances::for_grid(&c.op.grid));
    assert!(r.passed(), "{r:?}");
}

#[test]
fn lower_and_upper_bounds_on_bump_data() {
    for (kind, s) in [(OperatorKind::Rfl, 0.3), (OperatorKind::Sfl, 0.5), (OperatorKind::Cfl, 0.75)] {
        let c = case(kind, s, 2.0, 128);
        let tol = Tolerances::for_grid(&c.op.grid);
        let (traj, t_star) = bump_run(&c.op, 2.0, 60.0, 1.0);
        let low = check_universal_lower(&traj, &c.op, 2.0, t_star, &tol);
        assert!(low.passed() && low.get("kappa0").unwrap() > 0.0, "{kind}: {low:?}");
        let up = check_upper_boundary(&traj, &c.op, 2.0, &tol);
        assert!(up.get("k1").unwrap().is_finite(), "{kind}: {up:?}");
        let ghp = check_ghp(&traj, &c.op, 2.0, t_star, &tol);
        assert!(ghp.passed(), "{kind}: {ghp:?}");
    }
    let c = case(OperatorKind::Rfl, 0.3, 2.0, 128);
    let (traj, t_star) = bump_run(&c.op, 2.0, 10.0, 1.0);
    let r = check_matching_lower(&traj, &c.op, 2.0, t_star, &Tolerances::for_grid(&c.op.grid));
    assert!(r.passed() && r.get("kappa1").unwrap() > 0.0, "{r:?}");
}

#[test]
fn anomalous_regime_skips_matching_and_uses_the_non_matching_pair() {
    let c = case(OperatorKind::Sfl, 0.1, 2.0, 128);
    let tol = Tolerances::for_grid(&c.op.grid);
    let (traj, t_star) = bump_run(&c.op, 2.0, 10.0, 1.0);
    let r = check_matching_lower(&traj, &c.op, 2.0, t_star, &tol);
    assert_eq!(r.verdict, Verdict::Skipped);
    let g = check_ghp(&traj, &c.op, 2.0, t_star, &tol);
    assert!(g.notes.iter().any(|n| n.contains("non-matching")), "{g:?}");
}

#[test]
fn counterexample_bound_needs_small_data() {
    let c = case(OperatorKind::Sfl, 0.1, 2.0, 128);
    let tol = Tolerances::for_grid(&c.op.grid);
    let cfg = EvolutionConfig::new(2.0, DtSchedule { dt0: 1e-3, growth: 1.05, t_end: 10.0 }).with_probes(&[1.0, 10.0]);
    let traj = evolve(&c.op.phi1, &c.op, &cfg).unwrap();
    let r = check_counterexample_upper(&traj, &c.op, 2.0, 1.0, &tol).unwrap();
    assert!(r.get("kappa_hat").unwrap().is_finite());
    assert!(r.get("min_vanishing_slope").unwrap() > 0.0);
    let err = check_counterexample_upper(&traj, &c.op, 2.0, 0.5, &tol).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));

    let s1 = case(OperatorKind::Sfl, 0.5, 2.0, 128);
    let traj = evolve(&s1.op.phi1, &s1.op, &cfg).unwrap();
    let r = check_counterexample_upper(&traj, &s1.op, 2.0, 1.0, &tol).unwrap();
    assert!(r.notes.iter().any(|n| n.contains("adds nothing")));
}

#[test]
fn small_data_supersolution() {
    let c = case(OperatorKind::Sfl, 0.1, 2.0, 256);
    let tol = Tolerances::for_grid(&c.op.grid);
    let u0: Vec<f64> = c.op.phi1.iter().map(|p| p.powf(0.8)).collect();
    let cfg = EvolutionConfig::new(2.0, DtSchedule { dt0: 1e-4, growth: 1.05, t_end: 20.0 });
    let traj = evolve(&u0, &c.op, &cfg).unwrap();
    let r = check_small_data_supersolution(&traj, &c.op, 2.0, 1.0, &tol).unwrap();
    assert!(r.passed(), "{r:?}");
    assert!((r.get("early_exponent").unwrap() - 0.8).abs() < 0.1);
    assert!(r.get("C_tilde").unwrap() > 0.0 && r.get("T_A").unwrap().is_finite());
    // exponent ordering 1 - 2s/gamma > sigma/m
    assert!(1.0 - 2.0 * c.op.s / c.op.gamma > c.op.sigma(2.0).sigma / 2.0);
    assert!(check_small_data_supersolution(&traj, &c.op, 2.0, 0.5, &tol).is_err());

    let r = case(OperatorKind::Rfl, 0.3, 2.0, 64);
    let t2 = evolve(&r.op.phi1, &r.op, &cfg).unwrap();
    assert_eq!(check_small_data_supersolution(&t2, &r.op, 2.0, 10.0, &tol).unwrap().verdict, Verdict::Skipped);
}

#[test]
fn weighted_mass_window_shrinks_with_larger_data() {
    let c = case(OperatorKind::Rfl, 0.3, 2.0, 64);
    let tol = Tolerances::for_grid(&c.op.grid);
    let run = |scale: f64| {
        let u0: Vec<f64> = c.op.phi1.iter().map(|p| scale * p).collect();
        let cfg = EvolutionConfig::new(2.0, DtSchedule { dt0: 1e-4, growth: 1.02, t_end: 100.0 / scale });
        check_backward_weighted_mass(&evolve(&u0, &c.op, &cfg).unwrap(), &c.op, 2.0, &tol)
    };
    let (a, b) = (run(1.0), run(2.0));
    assert!(a.passed() && b.passed(), "{a:?} {b:?}");
    assert!(a.get("Kbar").unwrap() > 0.0);
    let cmp = compare_window_scaling(&a, &b, 2.0);
    assert!(cmp.passed(), "{cmp:?}");
    assert!((cmp.get("observed_ratio").unwrap() - 0.5).abs() < 0.05);
}

#[test]
fn local_harnack_constants() {
    let c = case(OperatorKind::Sfl, 0.5, 2.0, 128);
    let traj = synthetic(&c.op, 2.0, &geometric(0.5, 20.0, 30), |t| friendly_giant(&c.profile, 0.0, t).unwrap());
    let r = check_local_harnack(&traj, &c.op, 1.0, 0.0, 0.25).unwrap();
    let nodes: Vec<usize> = (0..c.op.n()).filter(|&i| c.op.grid.nodes[i].abs() <= 0.25).collect();
    let sup = nodes.iter().map(|&i| c.profile.values[i]).fold(0.0, f64::max);
    let inf = nodes.iter().map(|&i| c.profile.values[i]).fold(f64::INFINITY, f64::min);
    assert!((r.get("H_hat").unwrap() - sup / inf).abs() < 1e-12);
    assert!(r.passed(), "{r:?}");

    let point = check_local_harnack(&traj, &c.op, 1.0, 0.0, 0.0).unwrap();
    assert_eq!(point.get("H_hat").unwrap(), 1.0);
    assert!(check_local_harnack(&traj, &c.op, 1.0, 0.6, 0.25).is_err());

    let (bump, t_star) = bump_run(&c.op, 2.0, 10.0, 1.0);
    let r = check_local_harnack(&bump, &c.op, t_star, 0.0, 0.25).unwrap();
    assert!(r.passed() && r.get("H_hat").unwrap().is_finite(), "{r:?}");
}

#[test]
fn asymptotic_envelope_of_a_shifted_profile_solution() {
    let c = case(OperatorKind::Sfl, 0.5, 2.0, 64);
    let shift = 3.0;
    let traj = synthetic(&c.op, 2.0, &geometric(0.1, 3e3, 200), |t| friendly_giant(&c.profile, shift, t).unwrap());
    let r = check_asymptotics(&traj, &c.profile, true, &Tolerances::for_grid(&c.op.grid));
    assert!(r.passed(), "{r:?}");
    // |t/(T+t) - 1| <= 2 t0/(t0+t) first holds for every later t with t0 -> T/2
    let t0 = r.get("t0").unwrap();
    assert!((t0 - shift / 2.0).abs() < 0.02 * shift, "{t0}");
}

#[test]
fn exponent_series_of_separate_variables_is_flat() {
    let c = case(OperatorKind::Sfl, 0.75, 2.0, 256);
    let traj = synthetic(&c.op, 2.0, &[0.0, 1.0, 2.0, 4.0], |t| friendly_giant(&c.profile, 1.0, t).unwrap());
    let series = exponent_timeseries(&traj, &c.op.grid, fpme_core::FitWindow::standard(&c.op.grid)).unwrap();
    assert_eq!(series.times.len(), 3);
    for b in &series.beta {
        assert!((b - series.beta[0]).abs() < 1e-12);
        assert!((b - 0.5).abs() < 0.05);
    }
}
