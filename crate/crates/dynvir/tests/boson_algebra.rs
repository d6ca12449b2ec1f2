use std::collections::HashMap;

use approx::assert_abs_diff_eq;
use nalgebra::DVector;
use proptest::prelude::*;

use dynvir::boson::*;
use dynvir::fseries::TruncSeries;
use dynvir::kernel::{generator_matrix, retarded_propagator_modes, Potential};

fn space(k_max: usize, dt: f64, steps: usize) -> Space {
    Space::new(k_max, TimeGrid::new(dt, steps).unwrap()).unwrap()
}

fn one_series() -> TruncSeries {
    TruncSeries::polynomial(0, vec![1.0])
}

/// Polynomials as exponent vectors over `n` variables.
type Naive = HashMap<Vec<u32>, f64>;

fn naive_from(f: &PolyFunctional, n: usize) -> Naive {
    let mut out = Naive::new();
    for (m, c) in f.terms() {
        let mut e = vec![0; n];
        for (i, p) in m.powers() {
            e[i] = p;
        }
        *out.entry(e).or_default() += c;
    }
    out
}

fn naive_apply(op: &BosonOperator, f: &Naive) -> Naive {
    let mut out = Naive::new();
    for (a, b, c) in op.terms() {
        for (e, &cf) in f {
            let mut e = e.clone();
            let mut w = c * cf;
            for (i, p) in b.powers() {
                for _ in 0..p {
                    w *= e[i] as f64;
                    e[i] = e[i].saturating_sub(1);
                }
            }
            if w == 0.0 {
                continue;
            }
            for (i, p) in a.powers() {
                e[i] += p;
            }
            *out.entry(e).or_default() += w;
        }
    }
    out.retain(|_, v| *v != 0.0);
    out
}

fn naive_diff(a: &Naive, b: &Naive) -> f64 {
    a.keys()
        .chain(b.keys())
        .map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn apply_trivial_examples() {
    let sp = space(2, 0.1, 4);
    let x10 = BosonOperator::multiplier(sp, Var::new(1, 0), 1.0).unwrap();
    let one = PolyFunctional::constant(sp, 1.0);
    let out = x10.apply(&one).unwrap();
    assert_eq!(out, PolyFunctional::variable(sp, Var::new(1, 0)).unwrap());

    let d23 = BosonOperator::derivative(sp, Var::new(2, 3), 1.0).unwrap();
    let x23 = PolyFunctional::variable(sp, Var::new(2, 3)).unwrap();
    let out = d23.apply(&x23.mul(&x23).unwrap()).unwrap();
    assert_eq!(out, x23.scale(2.0));

    let absent = BosonOperator::derivative(sp, Var::new(1, 1), 1.0).unwrap();
    assert!(absent.apply(&x23).unwrap().is_empty());
}

#[test]
fn commutator_of_derivative_and_multiplier_is_one() {
    let sp = space(1, 0.1, 2);
    let v = Var::new(1, 1);
    let d = BosonOperator::derivative(sp, v, 1.0).unwrap();
    let x = BosonOperator::multiplier(sp, v, 1.0).unwrap();
    assert_eq!(d.commutator(&x).unwrap(), BosonOperator::constant(sp, 1.0));
}

#[test]
fn mismatched_spaces_are_rejected() {
    let a = BosonOperator::constant(space(2, 0.1, 3), 1.0);
    let b = BosonOperator::constant(space(3, 0.1, 3), 1.0);
    assert!(matches!(a.commutator(&b), Err(BosonError::SpaceMismatch)));
    assert!(matches!(a.apply(&PolyFunctional::zero(space(2, 0.2, 3))), Err(BosonError::SpaceMismatch)));
}

#[test]
fn static_boson_examples() {
    let sp = space(3, 0.05, 4);
    let beta = 1.5;
    assert!(static_boson(sp, 0, 2, beta).unwrap().is_empty());
    let m2 = static_boson(sp, -2, 3, beta).unwrap();
    let expect = BosonOperator::multiplier(sp, Var::new(2, 3), 2.0 / beta.sqrt()).unwrap();
    assert_eq!(m2, expect);
    assert!(matches!(static_boson(sp, 4, 0, beta), Err(BosonError::ModeOutOfRange { .. })));

    let f = PolyFunctional::variable(sp, Var::new(1, 2)).unwrap().mul(&PolyFunctional::variable(sp, Var::new(3, 0)).unwrap()).unwrap();
    let c = static_boson(sp, 1, 2, beta).unwrap().commutator(&static_boson(sp, -1, 2, beta).unwrap()).unwrap();
    assert_abs_diff_eq!(c.apply(&f).unwrap().max_abs_diff(&f.scale(1.0 / 0.05)), 0.0, epsilon = 1e-12);
    for jp in [0, 1, 3, 4] {
        for (k, l) in [(1, -1), (2, -2), (1, -3), (-2, 3)] {
            let c = static_boson(sp, k, 2, beta).unwrap().commutator(&static_boson(sp, l, jp, beta).unwrap()).unwrap();
            assert!(c.is_empty(), "slots 2 and {jp}, modes {k} {l}");
        }
    }
}

#[test]
fn dynamic_zero_and_negative_modes() {
    let sp = space(3, 0.1, 3);
    let pot = Potential::hermite(1.3, 1.0).unwrap();
    let fb = FreeBoson::new(sp, pot.clone(), 4.0).unwrap();
    assert_eq!(fb.boson(Field::Dynamic, 0, 1).unwrap(), BosonOperator::constant(sp, -4.0));
    for k in 1..=3 {
        for j in 0..=3 {
            let psi = fb.boson(Field::Dynamic, -k, j).unwrap();
            assert_eq!(psi, static_boson(sp, -k, j, 1.0).unwrap());
        }
    }
    assert_eq!(dynamic_boson(sp, -2, 1, &pot, 4.0).unwrap(), fb.boson(Field::Dynamic, -2, 1).unwrap());
    assert!(FreeBoson::new(sp, pot, 0.0).is_err());
}

fn retarded_commutators_match_kernel(pot: Potential) {
    let k_max = 4;
    let sp = space(k_max, 0.07, 5);
    let fb = FreeBoson::new(sp, pot.clone(), 3.0).unwrap();
    for (j, jp) in [(3, 1), (5, 0), (2, 2), (4, 3)] {
        let lag = (j - jp) as f64 * 0.07;
        let g = retarded_propagator_modes(&pot, lag, k_max).unwrap();
        for k in 1..=k_max {
            let psi = fb.boson(Field::Dynamic, k as i64, j).unwrap();
            for l in 1..=k_max {
                for field in [Field::Dynamic, Field::Static] {
                    let minus = fb.boson(field, -(l as i64), jp).unwrap();
                    let c = psi.commutator(&minus).unwrap();
                    let want = BosonOperator::constant(sp, g.get(k, l));
                    assert!(c.max_abs_diff(&want) < 1e-12, "k={k} l={l} j={j} j'={jp}");
                }
            }
            // advanced side vanishes
            let later = fb.boson(Field::Dynamic, -1, j + 1).ok();
            if let Some(later) = later {
                assert!(psi.commutator(&later).unwrap().is_empty());
            }
        }
    }
}

#[test]
fn retarded_commutator_beta2_generic() {
    retarded_commutators_match_kernel(Potential::new(2.0, [(1, 1.0), (2, 0.3)]).unwrap());
}

#[test]
fn retarded_commutator_hermite_beta1() {
    retarded_commutators_match_kernel(Potential::hermite(0.9, 1.0).unwrap());
}

#[test]
fn hermite_beta2_dynamic_modes_are_diagonal_exponentials() {
    let sigma: f64 = 1.2;
    let sp = space(3, 0.1, 4);
    let beta = 2.0;
    let fb = FreeBoson::new(sp, Potential::hermite(sigma, beta).unwrap(), 2.0).unwrap();
    for k in 1..=3usize {
        for j in 0..=4usize {
            let mut want = BosonOperator::zero(sp);
            for jp in 0..=j {
                let c = beta.sqrt() * (-(k as f64) * (j - jp) as f64 * 0.1 / (sigma * sigma)).exp();
                want = want.add(&BosonOperator::derivative(sp, Var::new(k, jp), c).unwrap()).unwrap();
            }
            let got = fb.boson(Field::Dynamic, k as i64, j).unwrap();
            assert!(got.max_abs_diff(&want) < 1e-13);
        }
    }
}

#[test]
fn static_quadratic_hermite_display() {
    let k_max = 4;
    let sp = space(k_max, 0.1, 3);
    let fb = FreeBoson::new(sp, Potential::hermite(1.0, 2.5).unwrap(), 3.0).unwrap();
    for j in 0..=3 {
        let half = normal_ordered_quadratic(&fb, Field::Static, &one_series(), j).unwrap().scale(0.5);
        let mut want = BosonOperator::zero(sp);
        for k in 2..=k_max {
            let term = BosonOperator::multiplier(sp, Var::new(k, j), k as f64)
                .unwrap()
                .compose(&BosonOperator::derivative(sp, Var::new(k - 1, j), 1.0 / 0.1).unwrap())
                .unwrap();
            want = want.add(&term).unwrap();
        }
        assert!(half.max_abs_diff(&want) < 1e-12, "slot {j}");
    }
}

#[test]
fn dynamic_quadratic_hermite_display() {
    let (k_max, sigma, n) = (4, 0.8_f64, 3.0);
    let dt = 0.1;
    let sp = space(k_max, dt, 3);
    let fb = FreeBoson::new(sp, Potential::hermite(sigma, 2.0).unwrap(), n).unwrap();
    for j in 0..=3 {
        let half = normal_ordered_quadratic(&fb, Field::Dynamic, &one_series(), j).unwrap().scale(0.5);
        let mut want = BosonOperator::multiplier(sp, Var::new(1, j), -n).unwrap();
        for k in 2..=k_max {
            for jp in 0..=j {
                let decay = (-((k - 1) as f64) * (j - jp) as f64 * dt / (sigma * sigma)).exp();
                let term = BosonOperator::multiplier(sp, Var::new(k, j), k as f64 * decay)
                    .unwrap()
                    .compose(&BosonOperator::derivative(sp, Var::new(k - 1, jp), 1.0).unwrap())
                    .unwrap();
                want = want.add(&term).unwrap();
            }
        }
        assert!(half.max_abs_diff(&want) < 1e-12, "slot {j}");
    }
}

#[test]
fn normal_ordered_quadratic_on_one_keeps_multipliers_only() {
    let sp = space(3, 0.1, 3);
    let fb = FreeBoson::new(sp, Potential::new(2.0, [(1, 0.5), (2, 0.4)]).unwrap(), 2.0).unwrap();
    let weights = [
        one_series(),
        TruncSeries::polynomial(1, vec![1.0]),
        TruncSeries::polynomial(0, vec![0.5, 0.0, 1.2]),
    ];
    for field in [Field::Static, Field::Dynamic] {
        for u in &weights {
            let q = normal_ordered_quadratic(&fb, field, u, 2).unwrap();
            let got = q.apply(&PolyFunctional::constant(sp, 1.0)).unwrap();
            let mut want = PolyFunctional::zero(sp);
            for (a, b, c) in q.terms() {
                if b.is_one() {
                    want.add_term(a.clone(), c);
                }
            }
            assert!(got.max_abs_diff(&want) == 0.0);
        }
    }
}

#[test]
fn quadratic_rejects_truncated_weight() {
    let sp = space(2, 0.1, 2);
    let fb = FreeBoson::new(sp, Potential::hermite(1.0, 2.0).unwrap(), 1.0).unwrap();
    let u = TruncSeries::truncated(0, vec![1.0, 2.0]);
    let err = fb.quadratic_dense(Field::Static, &u, &at_slot(sp, 0)).unwrap_err();
    assert!(matches!(err, BosonError::WeightOutOfWindow(_)));
}

fn linear_functional(sp: Space, mode: usize, g: impl Fn(f64) -> f64) -> PolyFunctional {
    PolyFunctional::time_integral(sp, mode, g).unwrap()
}

#[test]
fn time_derivation_on_linear_functionals() {
    let steps = 12;
    let dt = 0.1;
    let sp = space(2, dt, steps);
    let interior = |f: &PolyFunctional| {
        let mut out = PolyFunctional::zero(sp);
        for (m, c) in f.terms() {
            let (i, _) = m.powers().next().unwrap();
            let slot = sp.var(i).slot;
            if (2..=steps - 2).contains(&slot) {
                out.add_term(m.clone(), c);
            }
        }
        out
    };
    // f ≡ 1 on ∫ s² τ_2 gives -∫ 2s τ_2
    let d1 = time_derivation(&sp, &TimePoly::constant(1.0)).to_boson();
    let got = d1.apply(&linear_functional(sp, 2, |s| s * s)).unwrap();
    let want = linear_functional(sp, 2, |s| -2.0 * s);
    assert!(interior(&got).max_abs_diff(&interior(&want)) < 1e-12);
    // f = t on ∫ τ_1 gives -∫ τ_1
    let dt_op = time_derivation(&sp, &TimePoly::identity()).to_boson();
    let got = dt_op.apply(&linear_functional(sp, 1, |_| 1.0)).unwrap();
    let want = linear_functional(sp, 1, |_| -1.0);
    assert!(interior(&got).max_abs_diff(&interior(&want)) < 1e-12);
}

#[test]
fn time_derivation_on_derivative_generators() {
    let steps = 10;
    let sp = space(2, 0.1, steps);
    let grid = sp.grid();
    let f = TimePoly::new(vec![0.5, 1.0, -0.3]);
    let gamma: Vec<f64> = grid.times().iter().map(|t| (1.0 + t).powi(3)).collect();
    let mut gen = QuadraticOperator::zero(sp);
    for (j, g) in gamma.iter().enumerate() {
        gen.d_mut()[sp.index(Var::new(2, j)).unwrap()] = *g;
    }
    let c = time_derivation(&sp, &f).commutator(&gen).unwrap();
    let dg = grid.difference_matrix() * DVector::from_vec(gamma);
    let fv = f.sample(&grid);
    let mut want = QuadraticOperator::zero(sp);
    for j in 0..=steps {
        want.d_mut()[sp.index(Var::new(2, j)).unwrap()] = -fv[j] * dg[j];
    }
    assert!(c.max_abs_diff(&want).unwrap() < 1e-12);
}

/// `d/dt [ψ̂_k(t), ∫ g τ_l]` against `β^{1/2}(K_kl(0) g(t) + ∫_0^t (AK)_kl(t-s) g(s) ds)`.
#[test]
fn dynamic_mode_time_derivative_matches_kernel_flow() {
    let pot = Potential::new(2.0, [(1, 1.0), (2, 0.3)]).unwrap();
    let k_max = 5;
    let beta: f64 = 2.0;
    let g = |s: f64| (1.0 + s).cos();
    let run = |dt: f64| -> f64 {
        let steps = (1.0 / dt).round() as usize;
        let sp = space(k_max, dt, steps);
        let fb = FreeBoson::new(sp, pot.clone(), 2.0).unwrap();
        let a = generator_matrix(&pot, k_max).unwrap();
        let (k, l) = (1, 2);
        let pairing = |j: usize| -> f64 {
            let f = fb.mode(Field::Dynamic, k, j).unwrap();
            let lin = linear_functional(sp, l, g);
            let op = f.to_boson(sp);
            op.apply(&lin).unwrap().coeff(&Monomial::one())
        };
        let mut err: f64 = 0.0;
        for j in [steps / 2, 3 * steps / 4] {
            let fd = (pairing(j + 1) - pairing(j - 1)) / (2.0 * dt);
            let t = j as f64 * dt;
            let mut integral = 0.0;
            for jp in 0..=j {
                let ak = &a * fb.kernel_lag(j - jp);
                let w = if jp == 0 || jp == j { 0.5 } else { 1.0 };
                integral += w * ak[(k as usize, l)] * g(jp as f64 * dt) * dt;
            }
            let want = beta.sqrt() * (fb.kernel_lag(0)[(k as usize, l)] * g(t) + integral);
            err = err.max((fd - want).abs());
        }
        err
    };
    let (e1, e2) = (run(0.02), run(0.01));
    assert!(e2 < 0.05, "error {e2}");
    assert!(e1 / e2 > 1.7, "errors {e1} {e2} do not shrink at first order");
}

fn random_form(sp: Space, seed: &[f64]) -> ModeForm {
    let n = sp.dim();
    let mut f = ModeForm::default();
    for (i, &c) in seed.iter().enumerate() {
        match i % 3 {
            0 => f.mult.push(((i * 7) % n, c)),
            1 => f.deriv.push(((i * 5 + 1) % n, c)),
            _ => f.constant += c,
        }
    }
    f
}

fn random_quadratic(sp: Space, seed: &[f64]) -> QuadraticOperator {
    let mut q = QuadraticOperator::zero(sp);
    let h = seed.len() / 2;
    let (a, b) = (random_form(sp, &seed[..h]), random_form(sp, &seed[h..]));
    q.add_product(&a, &b, 1.0);
    q.add_product(&b, &b, -0.5);
    q.add_mode(&a, 0.25);
    q
}

fn probe_functional(p: &ProbeSet, probe: Probe) -> PolyFunctional {
    let sp = p.space();
    let lin = |i: usize| {
        PolyFunctional::linear(sp, p.forms()[i].iter().enumerate().map(|(ix, &c)| (sp.var(ix), c))).unwrap()
    };
    match probe {
        Probe::One => PolyFunctional::constant(sp, 1.0),
        Probe::Linear(i) => lin(i),
        Probe::Quadratic(i, j) => lin(i).mul(&lin(j)).unwrap(),
    }
}

fn seeds() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-1.0..1.0f64, 12), prop::collection::vec(-1.0..1.0f64, 12))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn apply_matches_naive_expansion(s1 in prop::collection::vec(-2.0..2.0f64, 6), s2 in prop::collection::vec(-2.0..2.0f64, 6)) {
        let sp = space(2, 0.1, 2);
        let n = sp.dim();
        let op = random_quadratic(sp, &s1).to_boson();
        let mut f = PolyFunctional::constant(sp, s2[0]);
        for (i, &c) in s2.iter().enumerate().skip(1) {
            let a = PolyFunctional::variable(sp, sp.var(i % n)).unwrap();
            let b = PolyFunctional::variable(sp, sp.var((3 * i + 1) % n)).unwrap();
            f = f.add(&a.mul(&b).unwrap().scale(c)).unwrap().add(&a.scale(0.5 * c)).unwrap();
        }
        let got = naive_from(&op.apply(&f).unwrap(), n);
        let want = naive_apply(&op, &naive_from(&f, n));
        prop_assert!(naive_diff(&got, &want) < 1e-12);
    }

    #[test]
    fn apply_is_linear(s1 in prop::collection::vec(-2.0..2.0f64, 6), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let sp = space(2, 0.1, 2);
        let op = random_quadratic(sp, &s1).to_boson();
        let f = PolyFunctional::variable(sp, Var::new(1, 1)).unwrap();
        let g = f.mul(&PolyFunctional::variable(sp, Var::new(2, 0)).unwrap()).unwrap();
        let lhs = op.apply(&f.scale(a).add(&g.scale(b)).unwrap()).unwrap();
        let rhs = op.apply(&f).unwrap().scale(a).add(&op.apply(&g).unwrap().scale(b)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn dense_commutator_matches_symbolic((s1, s2) in seeds()) {
        let sp = space(2, 0.1, 2);
        let (p, q) = (random_quadratic(sp, &s1), random_quadratic(sp, &s2));
        let dense = p.commutator(&q).unwrap().to_boson();
        let symbolic = p.to_boson().commutator(&q.to_boson()).unwrap();
        prop_assert!(dense.max_abs_diff(&symbolic) < 1e-12);
        // cubic terms cancel only up to rounding in the symbolic route
        let mut pruned = BosonOperator::zero(sp);
        for (a, b, c) in symbolic.terms() {
            if c.abs() > 1e-13 {
                pruned.add_term(a.clone(), b.clone(), c);
            }
        }
        prop_assert!(QuadraticOperator::from_boson(&pruned).unwrap().max_abs_diff(&p.commutator(&q).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn commutator_ignores_term_order((s1, s2) in seeds()) {
        let sp = space(2, 0.1, 2);
        let (p, q) = (random_quadratic(sp, &s1), random_quadratic(sp, &s2));
        let mut rev = BosonOperator::zero(sp);
        let terms: Vec<_> = p.to_boson().terms().map(|(a, b, c)| (a.clone(), b.clone(), c)).collect();
        for (a, b, c) in terms.into_iter().rev() {
            rev.add_term(a, b, c);
        }
        let lhs = rev.commutator(&q.to_boson()).unwrap();
        let rhs = p.to_boson().commutator(&q.to_boson()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-13);
    }

    #[test]
    fn contractions_match_symbolic_action((s1, s2) in seeds()) {
        let sp = space(2, 0.1, 3);
        let probes = ProbeSet::smooth(sp, 2).unwrap();
        let (p, q) = (random_quadratic(sp, &s1), random_quadratic(sp, &s2));
        let single = p.contract(&probes);
        let bracket = p.bracket_contraction(&q, &probes).unwrap();
        let exact = p.commutator(&q).unwrap();
        let tau: Vec<f64> = probes.tau().iter().copied().collect();
        for probe in probes.probes() {
            let f = probe_functional(&probes, probe);
            let want_single = p.to_boson().apply(&f).unwrap().eval(&tau);
            let want_bracket = exact.to_boson().apply(&f).unwrap().eval(&tau);
            prop_assert!((single.element(probe) - want_single).abs() < 1e-10);
            prop_assert!((bracket.element(probe) - want_bracket).abs() < 1e-10);
        }
    }
}
