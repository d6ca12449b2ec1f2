use dynvir::boson::{FreeBoson, Space, TimeGrid, TimePoly};
use dynvir::dyson::{
    action_mean, full_logweight, gaussian_pi2, loop_equation_residual, moment_hierarchy_residual, npoint_vs_kernel,
    sample_equilibrium, simulate_dbm, Ensemble, Estimate, InitialCondition, SimConfig, TauPath,
};
use dynvir::kernel::Potential;
use dynvir::svconstraints::{constraint_residual_mc, ConstraintBuilder, ConstraintIndex};

use super::{fmt, Checks};
use crate::config::Scenario;
use crate::report::Table;
use crate::CliError;

/// Amplitude of the constant `τ₂` source in the reweighting check.
const TAU2: f64 = 0.05;

/// Equispaced on `[-2√N σ, 2√N σ]`, shifted by `σ` so that `π₁(0) ≠ 0`.
fn shifted_semicircle(n: usize, sigma: f64) -> InitialCondition {
    if n == 1 {
        return InitialCondition::Fixed(vec![sigma]);
    }
    let half = 2.0 * (n as f64).sqrt() * sigma;
    InitialCondition::Fixed((0..n).map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64 + sigma).collect())
}

fn initial_pi1(init: &InitialCondition) -> f64 {
    match init {
        InitialCondition::Fixed(x) => x.iter().sum(),
        _ => unreachable!("fixed starts only"),
    }
}

/// Stride that records every `record_dt` (at least every step).
fn stride_for(dt: f64, record_dt: f64) -> usize {
    ((record_dt / dt).round() as usize).max(1)
}

pub fn equilibrium_loop(s: &Scenario, c: &mut Checks) -> Result<(), CliError> {
    let pot = s.potential.build()?;
    let samples = sample_equilibrium(&pot, s.n, s.replicas, s.seed)?;
    let mut table = Table::new("loop_equations", &["n", "mean", "se"]);
    for idx in 0..=2 {
        let r = loop_equation_residual(&samples, idx);
        c.z(9, format!("loop n={idx}"), "equilibrium loop equation residual", r.residual, 0.0, 3.0);
        table.push(vec![idx.to_string(), fmt(r.residual.mean), fmt(r.residual.se)]);
    }
    if let Some(sigma) = s.hermite_sigma() {
        let want = gaussian_pi2(s.n, pot.beta(), sigma);
        c.z(9, "gaussian pi2", "<pi_2> = sigma^2 (beta N (N-1)/2 + N)", samples.pi_mean(2), want, 3.0);
    }
    c.table(table);
    Ok(())
}

fn moments_table(e: &Ensemble, ks: &[usize]) -> Table {
    let mut t = Table::new("moments", &["t", "k", "mean", "se"]);
    for &k in ks {
        for (slot, est) in e.pi_mean(k).iter().enumerate() {
            t.push(vec![fmt(e.time(slot)), k.to_string(), fmt(est.mean), fmt(est.se)]);
        }
    }
    t
}

pub fn dbm_moments(s: &Scenario, c: &mut Checks) -> Result<(), CliError> {
    let sigma = s.require_hermite()?;
    let pot = s.potential.build()?;
    let init = shifted_semicircle(s.n, sigma);
    let pi1_0 = initial_pi1(&init);
    let cfg = SimConfig::new(s.n, s.dt, s.steps(), s.replicas, s.seed)
        .with_stride(stride_for(s.dt, 0.1))
        .with_init(init);
    let e = simulate_dbm(&pot, &cfg)?;
    let pi1 = e.pi_mean(1);
    for t in [0.5, 1.0] {
        let slot = (t / e.record_dt()).round() as usize;
        if slot < e.slots() {
            let want = pi1_0 * (-e.time(slot) / (sigma * sigma)).exp();
            c.z(8, format!("pi1 t={t}"), "E[pi_1(t)] = pi_1(0) exp(-t / sigma^2)", pi1[slot], want, 3.0);
        }
    }
    let last = e.slots() - 1;
    let want = gaussian_pi2(s.n, pot.beta(), sigma);
    c.z(8, "pi2 long time", "<pi_2> relaxes to its equilibrium value", e.pi_mean(2)[last], want, 3.0);
    c.z(8, "noise variance", "increment variance is 2 dt", e.noise_variance(), 2.0 * s.dt, 4.0);
    c.table(moments_table(&e, &[1, 2]));
    Ok(())
}

pub fn girsanov(s: &Scenario, c: &mut Checks) -> Result<(), CliError> {
    let pot = s.potential.build()?;
    let steps = s.steps();
    let tau = TauPath::constant(2, TAU2, steps);
    let base = simulate_dbm(&pot, &SimConfig::new(s.n, s.dt, steps, s.replicas, s.seed))?;
    let pert_cfg = SimConfig::new(s.n, s.dt, steps, s.replicas, s.seed.wrapping_add(1)).with_perturbation(tau.clone());
    let pert = simulate_dbm(&pot, &pert_cfg)?;

    let pi2 = base.linear_statistics(2);
    let mut w = Vec::with_capacity(base.replicas());
    let mut wp = Vec::with_capacity(base.replicas());
    for r in 0..base.replicas() {
        let x = full_logweight(&base, r, &tau)?.exp();
        w.push(x);
        wp.push(x * pi2[r * base.slots() + steps]);
    }
    let reweighted = Estimate::from_samples(&wp);
    let direct = pert.pi_mean(2)[steps];
    c.z(11, "reweighted pi2", "reweighted <pi_2(T)> matches the perturbed drift", reweighted.minus(&direct), 0.0, 3.0);
    c.z(11, "weight normalization", "mean of the full Girsanov weight is 1", Estimate::from_samples(&w), 1.0, 3.0);

    let mut table = Table::new("hierarchy", &["k", "residual", "se", "bias", "action", "action_se"]);
    for k in 1..=s.k_max {
        let h = moment_hierarchy_residual(&base, k)?;
        let bias = h.bias.map_or(0.0, |b| b.mean.abs());
        let excess = (h.time_average.mean.abs() - bias).max(0.0) / h.time_average.se;
        c.push(10, format!("hierarchy k={k}"), "time-averaged moment hierarchy beyond the Euler bias, in SE", excess, 3.0);
        let a = action_mean(&base, k)?;
        c.z(10, format!("action k={k}"), "E[S_k] = 0", a.time_average, 0.0, 3.0);
        table.push(vec![
            k.to_string(),
            fmt(h.time_average.mean),
            fmt(h.time_average.se),
            fmt(bias),
            fmt(a.time_average.mean),
            fmt(a.time_average.se),
        ]);
    }
    c.table(table);
    Ok(())
}

pub fn npoint(s: &Scenario, c: &mut Checks) -> Result<(), CliError> {
    let sigma = s.require_hermite()?;
    let pot: Potential = s.potential.build()?;
    let record_dt = 0.01_f64.max(s.dt);
    let cfg = SimConfig::new(s.n, s.dt, s.steps(), s.replicas, s.seed)
        .with_stride(stride_for(s.dt, record_dt))
        .with_sources(s.k_max)
        .with_init(shifted_semicircle(s.n, sigma));
    let e = simulate_dbm(&pot, &cfg)?;

    let mut table = Table::new("npoint", &["k", "lhs", "lhs_se", "rhs", "rhs_se"]);
    for k in 1..=2.min(s.k_max) {
        let np = npoint_vs_kernel(&e, |t| 1.0 + t, k)?;
        c.z(12, format!("npoint k={k}"), "one-point function against the kernel convolution", np.discrepancy, 0.0, 3.0);
        table.push(vec![k.to_string(), fmt(np.lhs.mean), fmt(np.lhs.se), fmt(np.rhs.mean), fmt(np.rhs.se)]);
    }
    c.table(table);

    let space = Space::new(s.k_max, TimeGrid::covering(s.horizon, e.record_dt())?)?;
    let fb = FreeBoson::new(space, pot, s.n as f64)?;
    let builder = ConstraintBuilder::new(&fb)?;
    let bump = TimePoly::bump(s.horizon, 4);
    let tilted = TimePoly::new(vec![1.0, 2.0 / s.horizon]).mul(&TimePoly::bump(s.horizon, 5));
    for (label, a) in [("bump", bump), ("tilted", tilted)] {
        for (idx, name) in [(ConstraintIndex::MinusOne, "L-1"), (ConstraintIndex::Zero, "L0")] {
            let cop = builder.build(idx, &a)?;
            let r = constraint_residual_mc(&cop, &e, 0, None)?;
            c.push(13, format!("constraint {name} {label}"), "dynamical constraint at order tau^0, max |z|", r.max_z, 3.0);
        }
    }
    Ok(())
}
