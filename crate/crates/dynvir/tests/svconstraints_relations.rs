use dynvir::boson::{
    BosonOperator, Field, FreeBoson, PolyFunctional, QuadraticOperator, Space, TimeGrid, TimePoly, Var,
};
use dynvir::fseries::TruncSeries;
use dynvir::kernel::Potential;
use dynvir::svconstraints::*;

fn low_monomials(space: Space, top: usize) -> Vec<PolyFunctional> {
    let var = |k| PolyFunctional::variable(space, Var::new(k, 0)).unwrap();
    let mut out = vec![PolyFunctional::constant(space, 1.0)];
    for a in 1..=top {
        out.push(var(a));
        for b in a..=top {
            out.push(var(a).mul(&var(b)).unwrap());
        }
    }
    out
}

#[test]
fn equilibrium_witt_relations() {
    let space = equilibrium_space(8).unwrap();
    for beta in [1.0, 2.0, 4.0] {
        for m in -1..=1_i64 {
            for n in (-1..=1_i64).filter(|n| m + n >= -1) {
                let lm = virasoro_hat(m, beta, space).unwrap();
                let ln = virasoro_hat(n, beta, space).unwrap();
                let lmn = virasoro_hat(m + n, beta, space).unwrap();
                let bracket = lm.commutator(&ln).unwrap();
                for p in low_monomials(space, 3) {
                    let lhs = bracket.apply(&p).unwrap();
                    let rhs = lmn.apply(&p).unwrap().scale((m - n) as f64);
                    assert!(lhs.max_abs_diff(&rhs) < 1e-12, "m={m} n={n} beta={beta}");
                }
            }
        }
    }
}

#[test]
fn equilibrium_minus_one_terms() {
    let space = equilibrium_space(6).unwrap();
    let pot = Potential::new(2.0, [(1, 1.0), (2, 0.3)]).unwrap();
    let op = equilibrium_virasoro_op(-1, &pot, space).unwrap();
    let one = |k| dynvir::boson::Monomial::var(space.index(Var::new(k, 0)).unwrap());
    let unit = dynvir::boson::Monomial::one();
    assert_eq!(op.coeff(&unit, &one(1)), 1.0);
    assert_eq!(op.coeff(&unit, &one(2)), 0.3);
    assert_eq!(op.coeff(&one(2), &one(1)), 2.0);
    assert_eq!(op.coeff(&one(5), &one(4)), 5.0);
    assert_eq!(op.bidegree(), (1, 1));

    let err = equilibrium_virasoro_op(4, &pot, space).unwrap_err();
    assert!(matches!(err, SvError::Window { mode: 7, k_max: 6 }));
}

fn hermite_boson(sigma: f64, k_max: usize, dt: f64) -> FreeBoson {
    let space = Space::new(k_max, TimeGrid::covering(1.0, dt).unwrap()).unwrap();
    FreeBoson::new(space, Potential::hermite(sigma, 2.0).unwrap(), 3.0).unwrap()
}

#[test]
fn zero_test_function_gives_zero_operator() {
    let fb = hermite_boson(1.0, 4, 0.1);
    for index in [ConstraintIndex::MinusOne, ConstraintIndex::Zero] {
        let op = build_dynamical_constraint(&fb, index, &TimePoly::zero()).unwrap();
        assert_eq!(op.total().unwrap().max_abs(), 0.0);
    }
}

#[test]
fn unsupported_test_function_is_rejected() {
    let fb = hermite_boson(1.0, 4, 0.1);
    let err = build_dynamical_constraint(&fb, ConstraintIndex::Zero, &TimePoly::identity()).unwrap_err();
    assert!(matches!(err, SvError::Support { order: 0, .. }));
}

fn weights(fb: &FreeBoson, p: &TimePoly) -> Vec<f64> {
    fb.integral_weights(p)
}

#[test]
fn hermite_minus_one_display() {
    let sigma: f64 = 1.3;
    let s2 = sigma * sigma;
    let fb = hermite_boson(sigma, 6, 0.05);
    let a = TimePoly::new(vec![1.0, 2.0]).mul(&TimePoly::bump(1.0, 5));
    let da = a.derivative();
    let op = ConstraintBuilder::new(&fb).unwrap().build(ConstraintIndex::MinusOne, &da).unwrap();

    // L^{ȧ}_{-1} = ∫{(ȧ/σ⁴ - a⃛)π₁ - ½(ȧ/σ² + ä)∮:ψ̂²: - ½ȧ∮:φ̂²:}, π₁ = -β^{-1/2}ψ̂₁
    let z = TruncSeries::monomial(1, 1.0);
    let one = TruncSeries::monomial(0, 1.0);
    let pi_coef = da.scale(1.0 / (s2 * s2)).sub(&a.nth_derivative(3));
    let lin = fb.linear_dense(Field::Dynamic, &z, &weights(&fb, &pi_coef)).unwrap().scale(-(0.5_f64).sqrt());
    let psi_coef = da.scale(1.0 / s2).add(&a.nth_derivative(2));
    let quad = fb
        .quadratic_dense(Field::Dynamic, &one, &weights(&fb, &psi_coef))
        .unwrap()
        .add(&fb.quadratic_dense(Field::Static, &one, &weights(&fb, &da)).unwrap())
        .unwrap()
        .scale(-0.5);

    let scale = op.total().unwrap().max_abs();
    assert!(op.linear().max_abs_diff(&lin).unwrap() < 1e-12 * scale);
    assert!(op.quadratic().max_abs_diff(&quad).unwrap() < 1e-12 * scale);
    assert_eq!(op.differential().max_abs(), 0.0);
}

#[test]
fn hermite_zero_display() {
    let sigma: f64 = 0.9;
    let s2 = sigma * sigma;
    let fb = hermite_boson(sigma, 6, 0.05);
    let a = TimePoly::new(vec![0.5, -1.0, 2.0]).mul(&TimePoly::bump(1.0, 4));
    let da = a.derivative();
    let op = ConstraintBuilder::new(&fb).unwrap().build(ConstraintIndex::Zero, &a).unwrap();

    let z = TruncSeries::monomial(1, 1.0);
    let z2 = TruncSeries::monomial(2, 1.0);
    let quad = fb
        .quadratic_dense(Field::Dynamic, &z, &weights(&fb, &da.scale(2.0 / s2).add(&a.nth_derivative(2))))
        .unwrap()
        .add(&fb.quadratic_dense(Field::Static, &z, &weights(&fb, &da)).unwrap())
        .unwrap()
        .scale(-0.5);
    let doubled = |q: &QuadraticOperator| q.scale(L0_DOUBLING);
    let scale = doubled(&op.total().unwrap()).max_abs();
    assert!(doubled(op.quadratic()).max_abs_diff(&quad).unwrap() < 1e-12 * scale);

    let dtime = dynvir::boson::time_derivation(&fb.space(), &a).scale(-2.0);
    assert!(doubled(op.differential()).max_abs_diff(&dtime).unwrap() < 1e-12 * scale);

    // The general form gives the π₂ coefficient 2ȧ/σ⁴ - ½a⃛; the Hermite
    // display carries ȧ/σ⁴ - ½a⃛. The difference is exactly ∫(ȧ/σ⁴)π₂.
    let pi2 = |coef: &TimePoly| fb.linear_dense(Field::Dynamic, &z2, &weights(&fb, coef)).unwrap().scale(-(0.5_f64).sqrt());
    let display = pi2(&da.scale(1.0 / (s2 * s2)).sub(&a.nth_derivative(3).scale(0.5)));
    let gap = doubled(op.linear()).sub(&display).unwrap();
    assert!(gap.max_abs_diff(&pi2(&da.scale(1.0 / (s2 * s2)))).unwrap() < 1e-12 * scale);

    // The display constant (4N/σ²)∫ȧ vanishes up to the grid quadrature error.
    let w = weights(&fb, &da);
    let constant: f64 = w.iter().sum();
    let mass: f64 = w.iter().map(|x| x.abs()).sum();
    assert!(constant.abs() < 1e-3 * mass, "{constant:e}");
}

fn normal_product(a: &BosonOperator, ia: i64, b: &BosonOperator, ib: i64) -> BosonOperator {
    // Negative modes multiply, positive modes differentiate: the lower mode
    // goes on the left.
    if ia <= ib {
        a.compose(b).unwrap()
    } else {
        b.compose(a).unwrap()
    }
}

/// `Σ_j w_j Σ_p u_p Σ_{a+b=p-1} :X_a(t_j) X_b(t_j):` from sparse operators.
fn sparse_quadratic(fb: &FreeBoson, field: Field, u: &TruncSeries, w: &[f64]) -> BosonOperator {
    let km = fb.space().k_max() as i64;
    let mut out = BosonOperator::zero(fb.space());
    for (j, &wj) in w.iter().enumerate() {
        let modes: Vec<BosonOperator> = (-km..=km).map(|k| fb.boson(field, k, j).unwrap()).collect();
        for p in u.lo_deg()..=u.hi_deg() {
            let up = u.coeff(p).unwrap();
            if up == 0.0 {
                continue;
            }
            for ia in -km..=km {
                let ib = p as i64 - 1 - ia;
                if ib.abs() > km {
                    continue;
                }
                let prod = normal_product(&modes[(ia + km) as usize], ia, &modes[(ib + km) as usize], ib);
                out = out.add(&prod.scale(up * wj)).unwrap();
            }
        }
    }
    out
}

#[test]
fn quadratic_part_matches_sparse_assembly() {
    let space = Space::new(4, TimeGrid::new(0.25, 4).unwrap()).unwrap();
    let pot = Potential::new(2.0, [(1, 1.0), (2, 0.3)]).unwrap();
    let fb = FreeBoson::new(space, pot.clone(), 2.0).unwrap();
    let a = TimePoly::new(vec![1.0, 1.0]).mul(&TimePoly::bump(1.0, 4));
    let dense = ConstraintBuilder::new(&fb).unwrap().quadratic(ConstraintIndex::MinusOne, &a).unwrap();

    let one = TruncSeries::monomial(0, 1.0);
    let bp = pot.b_series().differentiate();
    let sparse = sparse_quadratic(&fb, Field::Dynamic, &one, &weights(&fb, &a.derivative()))
        .add(&sparse_quadratic(&fb, Field::Dynamic, &bp, &weights(&fb, &a)))
        .unwrap()
        .add(&sparse_quadratic(&fb, Field::Static, &one, &weights(&fb, &a)))
        .unwrap()
        .scale(-0.5);
    let diff = dense.to_boson().max_abs_diff(&sparse);
    assert!(diff < 1e-12 * sparse.max_abs(), "diff {diff:e}");
}

#[test]
fn antisymmetric_relations_vanish_for_equal_functions() {
    let setup = SvSetup::new(Potential::new(2.0, [(1, 1.0), (2, 0.3)]).unwrap(), 3.0, 5, 3);
    let grid = TimeGrid::covering(1.0, 0.05).unwrap();
    let (f, _) = standard_test_functions(1.0);
    let quad = verify_sv_algebra_quadratic(&setup, grid, &f, &f).unwrap();
    let lin = verify_sv_algebra_linear(&setup, grid, &f, &f).unwrap();
    for r in [&quad[0], &quad[2], &lin[0], &lin[2]] {
        assert!(r.residual <= 1e-12 * r.scale, "{} {:e}", r.relation, r.residual);
    }
}

#[test]
fn relations_converge_at_first_order() {
    let (f, g) = standard_test_functions(1.0);
    for pot in [Potential::hermite(1.0, 2.0).unwrap(), Potential::new(2.0, [(1, 1.0), (2, 0.3)]).unwrap()] {
        let setup = SvSetup::new(pot, 3.0, 6, 4);
        let reports = verify_sv_convergence(&setup, 1.0, 0.04, &f, &g, (1.6, 2.4)).unwrap();
        assert_eq!(reports.len(), 6);
        for r in reports {
            assert!(r.pass, "{} ratio {}", r.relation, r.ratio);
        }
    }
}

#[test]
fn residuals_within_tolerance() {
    let (f, g) = standard_test_functions(1.0);
    let setup = SvSetup::new(Potential::new(2.0, [(1, 0.5), (2, 0.3)]).unwrap(), 2.0, 6, 4);
    let grid = TimeGrid::covering(1.0, 0.02).unwrap();
    for r in verify_sv_algebra_quadratic(&setup, grid, &f, &g).unwrap() {
        assert!(r.pass, "{} {:e} > {:e}", r.relation, r.residual, r.tolerance);
        assert!(r.residual > 0.0);
    }
}

#[test]
fn cutoff_does_not_move_relations() {
    let (f, g) = standard_test_functions(1.0);
    let setup = SvSetup::new(Potential::new(2.0, [(1, 1.0), (2, 0.3)]).unwrap(), 3.0, 6, 4);
    let shift = truncation_shift(&setup, TimeGrid::covering(1.0, 0.05).unwrap(), 2, &f, &g).unwrap();
    assert!(shift < 1e-12, "shift {shift:e}");
}

#[test]
fn report_json_fields() {
    let (f, g) = standard_test_functions(1.0);
    let setup = SvSetup::new(Potential::hermite(1.0, 2.0).unwrap(), 3.0, 4, 2);
    let reports = verify_sv_algebra_quadratic(&setup, TimeGrid::covering(1.0, 0.1).unwrap(), &f, &g).unwrap();
    let value = serde_json::to_value(&reports[0]).unwrap();
    for key in ["relation", "dt", "K_max", "residual", "tolerance", "pass"] {
        assert!(value.get(key).is_some(), "missing {key}");
    }
    assert!(value.get("elements").is_none());
    assert_eq!(value["K_max"], 4);
}

#[test]
fn hermite_pieces_cancel_at_first_order() {
    let (f, g) = standard_test_functions(1.0);
    let coarse = hermite_cancellations(1.0, 3.0, 6, 4, TimeGrid::covering(1.0, 0.02).unwrap(), &f, &g).unwrap();
    let fine = hermite_cancellations(1.0, 3.0, 6, 4, TimeGrid::covering(1.0, 0.01).unwrap(), &f, &g).unwrap();
    for h in [&coarse, &fine] {
        let scale = h.pairs.iter().map(|p| p.2).fold(0.0, f64::max);
        assert!(h.decomposition_residual < 1e-10 * scale);
        assert!(h.linear_continuum.abs() < 1e-12);
    }
    for (c, f) in coarse.pairs.iter().zip(&fine.pairs) {
        let ratio = c.1 / f.1;
        assert!((1.6..=2.4).contains(&ratio), "{} ratio {ratio}", c.0);
    }
    let ratio = coarse.linear_constant / fine.linear_constant;
    assert!((1.6..=2.4).contains(&ratio), "linear ratio {ratio}");
}
