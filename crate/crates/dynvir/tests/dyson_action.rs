use dynvir::dyson::*;
use dynvir::kernel::Potential;

fn hermite() -> Potential {
    Potential::hermite(1.0, 2.0).unwrap()
}

fn shifted_semicircle(n: usize) -> Vec<f64> {
    let half = 2.0 * (n as f64).sqrt();
    (0..n).map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64 + 1.0).collect()
}

fn small_ensemble(pot: &Potential) -> Ensemble {
    simulate_dbm(pot, &SimConfig::new(4, 2e-3, 200, 20, 6)).unwrap()
}

#[test]
fn zero_sources_give_zero_weights() {
    let pot = hermite();
    let e = small_ensemble(&pot);
    let tau = TauPath::zero(3, e.steps());
    assert_eq!(girsanov_logweight(&e, 0, &tau).unwrap(), 0.0);
    assert_eq!(action_terms(&e, 0, &tau).unwrap(), (0.0, 0.0));
    assert_eq!(square_completion(&e, 0, &tau).unwrap(), 0.0);
}

#[test]
fn first_mode_has_no_quadratic_action() {
    let pot = hermite();
    let e = small_ensemble(&pot);
    let (lin, quad) = action_terms(&e, 3, &TauPath::constant(1, 0.3, e.steps())).unwrap();
    assert_eq!(quad, 0.0);
    assert!(lin != 0.0);
}

#[test]
fn constant_first_source_telescopes() {
    let pot = Potential::new(2.0, [(1, 1.0), (3, 0.2)]).unwrap();
    let e = small_ensemble(&pot);
    let t1 = 0.2;
    let tau = TauPath::constant(1, t1, e.steps());
    for r in 0..e.replicas() {
        // The pair repulsion sums to zero, leaving -τ₁[π₁(T) - π₁(0) + Σ_j Σ_i V'(λ_i) dt].
        let pi = |s: usize| e.positions(r, s).iter().sum::<f64>();
        let force: f64 = (0..e.steps()).map(|j| e.positions(r, j).iter().map(|&x| pot.force(x)).sum::<f64>()).sum();
        let expected = -t1 * (pi(e.steps()) - pi(0) + force * e.dt());
        let got = girsanov_logweight(&e, r, &tau).unwrap();
        assert!((got - expected).abs() < 1e-10 * expected.abs().max(1.0), "{got} vs {expected}");
    }
}

#[test]
fn action_split_reproduces_girsanov_exponent() {
    let pot = Potential::new(1.5, [(1, 1.0), (2, 0.1), (3, 0.3)]).unwrap();
    let e = simulate_dbm(&pot, &SimConfig::new(3, 1e-3, 300, 8, 2)).unwrap();
    let tau = TauPath::from_fn(4, e.steps(), |k, j| 0.1 * (k as f64) * (1.0 + (j as f64 * 0.01).sin()));
    for r in 0..e.replicas() {
        let (lin, quad) = action_terms(&e, r, &tau).unwrap();
        let lw = girsanov_logweight(&e, r, &tau).unwrap();
        assert!((lin + quad + lw).abs() < 1e-9 * lw.abs().max(1.0), "{lin} + {quad} vs {lw}");
    }
}

#[test]
fn action_has_zero_mean() {
    let pot = hermite();
    let e = simulate_dbm(&pot, &SimConfig::new(5, 1e-3, 400, 3000, 14)).unwrap();
    for k in 0..=4 {
        let m = action_mean(&e, k).unwrap();
        assert!(m.time_average.within(0.0, 3.0), "k = {k}: {:?}", m.time_average);
        assert_eq!(m.per_step.len(), e.steps());
    }
}

#[test]
fn moment_hierarchy_holds_in_mean() {
    let pot = hermite();
    let e = simulate_dbm(&pot, &SimConfig::new(5, 1e-3, 500, 3000, 15)).unwrap();
    let zero = moment_hierarchy_residual(&e, 0).unwrap();
    assert!(zero.series.iter().all(|s| s.mean == 0.0) && zero.time_average.mean == 0.0);
    for k in 1..=4 {
        let h = moment_hierarchy_residual(&e, k).unwrap();
        assert!(h.pass, "k = {k}: {:?} bias {:?}", h.time_average, h.bias);
        assert!(h.bias.is_some());
    }
    // For k = 1 the Euler step is exact in mean, so the bias bound is zero.
    assert_eq!(moment_hierarchy_residual(&e, 1).unwrap().bias.unwrap().mean, 0.0);
}

#[test]
fn stationary_start_keeps_second_moment() {
    let pot = hermite();
    let cfg = SimConfig::new(5, 1e-3, 500, 2000, 16)
        .with_stride(100)
        .with_init(InitialCondition::Equilibrium { sweeps: 50_000, seed: 3 });
    let e = simulate_dbm(&pot, &cfg).unwrap();
    let h = moment_hierarchy_residual(&e, 2).unwrap();
    assert!(h.pass && h.bias.is_none(), "{h:?}");
    for (s, est) in e.pi_mean(2).iter().enumerate() {
        assert!(est.within(25.0, 3.0), "slot {s}: {est:?}");
    }
}

#[test]
fn girsanov_reweighting_matches_perturbed_drift() {
    let pot = hermite();
    let steps = 100;
    let tau = TauPath::constant(2, 0.05, steps);
    let base = simulate_dbm(&pot, &SimConfig::new(4, 5e-3, steps, 6000, 23)).unwrap();
    let pert = simulate_dbm(&pot, &SimConfig::new(4, 5e-3, steps, 6000, 24).with_perturbation(tau.clone())).unwrap();
    let pi2 = base.linear_statistics(2);
    let (w, wp): (Vec<f64>, Vec<f64>) = (0..base.replicas())
        .map(|r| {
            let w = full_logweight(&base, r, &tau).unwrap().exp();
            (w, w * pi2[r * base.slots() + steps])
        })
        .unzip();
    let norm = Estimate::from_samples(&w);
    assert!(norm.within(1.0, 3.0), "{norm:?}");
    let reweighted = Estimate::from_samples(&wp);
    let direct = pert.pi_mean(2)[steps];
    assert!(reweighted.minus(&direct).within(0.0, 3.0), "{reweighted:?} vs {direct:?}");
    // The perturbation is visible against the unweighted ensemble.
    assert!(!base.pi_mean(2)[steps].minus(&direct).within(0.0, 3.0));
}

#[test]
fn weights_need_every_step() {
    let pot = hermite();
    let e = simulate_dbm(&pot, &SimConfig::new(3, 1e-3, 20, 4, 1).with_stride(10)).unwrap();
    let tau = TauPath::constant(2, 0.1, 20);
    assert!(matches!(girsanov_logweight(&e, 0, &tau), Err(DysonError::MissingIncrements(10))));
    let short = small_ensemble(&pot);
    assert!(matches!(girsanov_logweight(&short, 0, &TauPath::constant(2, 0.1, 5)), Err(DysonError::TauLength { .. })));
}

#[test]
fn npoint_zero_test_function() {
    let pot = hermite();
    let e = simulate_dbm(&pot, &SimConfig::new(3, 1e-3, 100, 10, 1).with_stride(10).with_sources(2)).unwrap();
    let np = npoint_vs_kernel(&e, |_| 0.0, 2).unwrap();
    assert_eq!((np.lhs.mean, np.rhs.mean, np.discrepancy.mean), (0.0, 0.0, 0.0));
    assert!(matches!(npoint_vs_kernel(&e, |_| 1.0, 3), Err(DysonError::MissingSources { needed: 3 })));
}

#[test]
fn npoint_first_mode_follows_closed_form() {
    let pot = hermite();
    let init = shifted_semicircle(5);
    let pi1_0: f64 = init.iter().sum();
    let cfg = SimConfig::new(5, 1e-3, 1000, 3000, 19).with_stride(20).with_sources(2).with_init(InitialCondition::Fixed(init));
    let e = simulate_dbm(&pot, &cfg).unwrap();
    let f = |t: f64| 1.0 + t;
    let np = npoint_vs_kernel(&e, f, 1).unwrap();
    // ∫₀¹ (1+t) e^{-t} dt = 2 - 3/e.
    let closed = pi1_0 * (2.0 - 3.0 / std::f64::consts::E);
    assert!(np.lhs.within(closed, 3.0), "{:?} vs {closed}", np.lhs);
    assert!(np.rhs.within(closed, 3.0), "{:?} vs {closed}", np.rhs);
    assert!(np.discrepancy.within(0.0, 3.0));
}

#[test]
fn npoint_stationary_start() {
    let pot = hermite();
    let cfg = SimConfig::new(5, 1e-3, 500, 2000, 20)
        .with_stride(10)
        .with_sources(2)
        .with_init(InitialCondition::Equilibrium { sweeps: 50_000, seed: 8 });
    let e = simulate_dbm(&pot, &cfg).unwrap();
    let bump = |t: f64| (t * (0.5 - t)).max(0.0);
    let mass = 0.5f64.powi(3) / 6.0;
    let np = npoint_vs_kernel(&e, bump, 2).unwrap();
    assert!(np.lhs.within(25.0 * mass, 3.0), "{:?}", np.lhs);
    assert!(np.discrepancy.within(0.0, 3.0), "{np:?}");
}
