use dynvir::boson::{static_boson, BosonOperator, Field, FreeBoson, Space, TimeGrid};
use dynvir::kernel::{
    expm, generator_matrix, hermite_kernel, kernel_beta2_closed, propagator, retarded_propagator_modes,
    verify_kernel_identities,
};
use dynvir::svconstraints::{hermite_cancellations, standard_test_functions, verify_sv_convergence, SvSetup};

use super::{fmt, Checks};
use crate::config::Scenario;
use crate::report::Table;
use crate::CliError;

/// Probe modes for the SV relations and the Hermite decomposition.
const SV_INTERIOR: usize = 6;
const HERMITE_INTERIOR: usize = 4;

fn scaled(diff: f64, reference: f64) -> f64 {
    diff / reference.max(1.0)
}

pub fn kernel_identities(s: &Scenario, c: &mut Checks) -> Result<(), CliError> {
    let pot = s.potential.build()?;
    let (k_max, t) = (s.k_max, s.horizon);
    let times = [t, 2.0 * t / 3.0, t / 3.0];

    let sign = if s.debug.flip_generator_sign { -1.0 } else { 1.0 };
    let a = generator_matrix(&pot, k_max)? * sign;
    let lhs = expm(&(&a * (times[0] - times[1]))) * expm(&(&a * (times[1] - times[2])));
    let rhs = propagator(&pot, times[0] - times[2], k_max)?;
    let semigroup = scaled((&lhs - rhs.entries()).amax(), rhs.entries().amax());
    c.push(4, "semigroup", "K(t-t')K(t'-t'') = K(t-t'')", semigroup, 1e-10);

    let id = verify_kernel_identities(&pot, times, k_max)?;
    c.push(4, "forward_equation", "forward Kolmogorov equation from the series calculus", id.forward, 1e-10);
    c.push(4, "backward_equation", "backward Kolmogorov equation from the series calculus", id.backward, 1e-10);
    c.push(4, "forward_fd", "finite-difference dK/dt against A K", id.forward_fd, 1e-8);
    c.push(4, "lemma_u1", "contour-derivative identity, u = 1", id.lemma_u1, 1e-7);
    c.push(4, "lemma_uz", "contour-derivative identity, u = z", id.lemma_uz, 1e-7);

    let beta = pot.beta();
    if beta == 2.0 {
        for tc in [s.dt, t] {
            let closed = kernel_beta2_closed(pot.b(), tc, k_max)?;
            let diff = closed.max_abs_diff(&propagator(&pot, tc, k_max)?);
            c.push(1, format!("beta2_closed_t{tc}"), "beta = 2 kernel from powers of the characteristic", diff, 1e-8);
        }
    }
    if let Some(sigma) = s.hermite_sigma() {
        let steps = s.steps().max(1);
        let mut worst: f64 = 0.0;
        for j in 1..=steps {
            let tj = j as f64 * t / steps as f64;
            let k = propagator(&pot, tj, k_max)?;
            if beta == 2.0 {
                for i in 0..=k_max {
                    for l in 0..=k_max {
                        let want = if i == l { (-(i as f64) * tj / (sigma * sigma)).exp() } else { 0.0 };
                        worst = worst.max((k.get(i, l) - want).abs());
                    }
                }
            } else {
                let h = hermite_kernel(sigma, beta, tj, k_max)?;
                worst = worst.max(k.max_abs_diff(&h) / k.entries().amax().max(1.0));
            }
        }
        if beta == 2.0 {
            c.push(2, "hermite_diagonal", "Hermite beta = 2 kernel is diag(exp(-k t / sigma^2))", worst, 1e-12);
        } else {
            c.push(3, "hermite_kernel", "Hermite kernel from the Gaussian-width construction", worst, 1e-10);
        }
    }

    let k = propagator(&pot, t, k_max)?;
    let mut table = Table::new("kernel", &["k", "l", "t", "value"]);
    for i in 0..=k_max {
        for l in 0..=k_max {
            table.push(vec![i.to_string(), l.to_string(), fmt(t), fmt(k.get(i, l))]);
        }
    }
    c.table(table);
    Ok(())
}

pub fn boson_commutators(s: &Scenario, c: &mut Checks) -> Result<(), CliError> {
    let pot = s.potential.build()?;
    let grid = TimeGrid::new(s.dt, s.steps())?;
    let space = Space::new(s.k_max, grid)?;
    let fb = FreeBoson::new(space, pot.clone(), s.n as f64)?;
    let km = s.k_max as i64;
    let slots = grid.slots();

    let (mut retarded, mut advanced): (f64, f64) = (0.0, 0.0);
    for j in 0..slots {
        for jp in 0..slots {
            let lag = (j as f64 - jp as f64) * s.dt;
            let g = (j > jp).then(|| retarded_propagator_modes(&pot, lag, s.k_max)).transpose()?;
            for k in 1..=km {
                let psi = fb.boson(Field::Dynamic, k, j)?;
                for l in 1..=km {
                    for field in [Field::Dynamic, Field::Static] {
                        let comm = psi.commutator(&fb.boson(field, -l, jp)?)?;
                        match &g {
                            Some(g) => {
                                let want = BosonOperator::constant(space, g.get(k as usize, l as usize));
                                retarded = retarded.max(comm.max_abs_diff(&want));
                            }
                            None if j < jp => advanced = advanced.max(comm.max_abs()),
                            None => {}
                        }
                    }
                }
            }
        }
    }
    c.push(5, "retarded", "[psi_k(t_j), psi_-l(t_j')] = l K_kl(t_j - t_j') for j > j'", retarded, 1e-12);
    c.push(5, "advanced", "[psi_k(t_j), psi_-l(t_j')] = 0 for j < j'", advanced, 0.0);

    let beta = pot.beta();
    let mut equal_time: f64 = 0.0;
    for j in 0..slots {
        for k in 1..=km {
            for l in 1..=km {
                let comm = static_boson(space, k, j, beta)?.commutator(&static_boson(space, -l, j, beta)?)?;
                let want = if k == l { l as f64 / s.dt } else { 0.0 };
                equal_time = equal_time.max(comm.max_abs_diff(&BosonOperator::constant(space, want)));
            }
        }
    }
    c.push(5, "equal_time_static", "[phi_k(t_j), phi_-l(t_j)] = l delta_kl / dt", equal_time, 1e-12 / s.dt);

    let mut mismatch = 0.0;
    for j in 0..slots {
        for k in 1..=km {
            if fb.boson(Field::Dynamic, -k, j)? != fb.boson(Field::Static, -k, j)? {
                mismatch += 1.0;
            }
        }
    }
    c.push(5, "negative_modes", "psi_-k and phi_-k are the same multiplier (count of mismatches)", mismatch, 0.0);
    Ok(())
}

pub fn sv_algebra(s: &Scenario, c: &mut Checks) -> Result<(), CliError> {
    let pot = s.potential.build()?;
    let setup = SvSetup::new(pot, s.n as f64, s.k_max, SV_INTERIOR);
    let (f, g) = standard_test_functions(s.horizon);
    let reports = verify_sv_convergence(&setup, s.horizon, s.dt, &f, &g, (1.6, 2.4))?;
    let mut table = Table::new("sv_convergence", &["relation", "dt", "residual_coarse", "residual_fine", "ratio"]);
    for r in &reports {
        c.push(6, format!("ratio {}", r.relation), "residual ratio when dt halves, first order", (r.ratio - 2.0).abs(), 0.4);
        table.push(vec![r.relation.clone(), fmt(r.dt_coarse), fmt(r.residual_coarse), fmt(r.residual_fine), fmt(r.ratio)]);
    }
    c.table(table);
    Ok(())
}

pub fn hermite_example(s: &Scenario, c: &mut Checks) -> Result<(), CliError> {
    let sigma = s.require_hermite()?;
    if s.potential.beta != 2.0 {
        return Err(CliError::Config("hermite-example needs beta = 2".into()));
    }
    let (f, g) = standard_test_functions(s.horizon);
    let run = |dt: f64| -> Result<_, CliError> {
        let grid = TimeGrid::covering(s.horizon, dt)?;
        Ok(hermite_cancellations(sigma, s.n as f64, s.k_max, HERMITE_INTERIOR, grid, &f, &g)?)
    };
    let coarse = run(s.dt)?;
    let fine = run(s.dt / 2.0)?;

    let mut table = Table::new("hermite_pairs", &["pair", "dt", "sum", "term"]);
    for ((label, sum, term), (_, sum_f, term_f)) in coarse.pairs.iter().zip(&fine.pairs) {
        c.push(7, format!("relative {label}"), "pair cancels against the term magnitude", sum / term, 1e-3);
        c.push(7, format!("ratio {label}"), "pair residual halves with dt", (sum / sum_f - 2.0).abs(), 0.4);
        table.push(vec![label.clone(), fmt(coarse.dt), fmt(*sum), fmt(*term)]);
        table.push(vec![label.clone(), fmt(fine.dt), fmt(*sum_f), fmt(*term_f)]);
    }
    let lin = |h: &dynvir::svconstraints::HermiteCancellation| h.linear_constant.abs() / h.linear_scale;
    c.push(7, "relative linear", "linear-quadratic bracket minus its swap, against its scale", lin(&coarse), 1e-3);
    c.push(
        7,
        "ratio linear",
        "linear-quadratic residual halves with dt",
        (coarse.linear_constant / fine.linear_constant - 2.0).abs(),
        0.4,
    );
    c.push(7, "continuum linear", "total-derivative term integrates to zero", coarse.linear_continuum.abs(), 1e-12);
    let scale = coarse.pairs.iter().map(|p| p.2).fold(1.0, f64::max);
    c.push(7, "decomposition", "pieces reassemble the grid bracket", coarse.decomposition_residual / scale, 1e-10);
    c.table(table);
    Ok(())
}
