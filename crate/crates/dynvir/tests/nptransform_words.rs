use dynvir::nptransform::*;
use proptest::prelude::*;

fn smooth_path(cells: usize) -> SampledPath {
    SampledPath::from_fn(1.0, cells, |t| 2.0 + t.sin()).unwrap()
}

fn letter(k: u32, c: &[f64]) -> Letter {
    Letter::new(k, TimePoly::new(c.to_vec()))
}

#[test]
fn shuffle_identity_holds_pointwise() {
    let path = smooth_path(2000);
    let w1 = IIWord::new(vec![letter(1, &[1.0, 0.5]), letter(2, &[0.0, 1.0])]);
    let w2 = IIWord::new(vec![letter(0, &[2.0]), letter(3, &[1.0, 0.0, -1.0])]);
    let w3 = IIWord::single(1, TimePoly::constant(-0.7));
    for (a, b) in [(&w1, &w2), (&w1, &w3), (&w3, &w3)] {
        let (x, y) = (evaluate_iterated(a, &path), evaluate_iterated(b, &path));
        let sum = shuffle_product(a, b).evaluate(&path);
        let scale = sum.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for j in 0..path.len() {
            assert!((x[j] * y[j] - sum[j]).abs() < 1e-9 * scale, "slot {j}");
        }
    }
}

#[test]
fn left_sums_miss_the_diagonal() {
    // The left-point rule obeys the shuffle identity only up to O(dt).
    let path = smooth_path(200);
    let w = IIWord::single(1, TimePoly::constant(1.0));
    let q = Quadrature::LeftRiemann;
    let x = evaluate_iterated_with(&w, &path, q);
    let sum = shuffle_product(&w, &w).evaluate_with(&path, q);
    let gap = (x[200] * x[200] - sum[200]).abs();
    assert!(gap > 1e-4 && gap < 10.0 * path.dt(), "{gap}");
}

#[test]
fn two_letter_word_converges_at_second_order() {
    let w = IIWord::new(vec![letter(2, &[1.0, 1.0]), letter(1, &[0.0, 0.0, 1.0])]);
    let end = |cells: usize| *evaluate_iterated(&w, &smooth_path(cells)).last().unwrap();
    let (a, b, c) = (end(100), end(200), end(400));
    let ratio = (a - b) / (b - c);
    assert!((3.6..4.4).contains(&ratio), "{ratio}");
    let left = |cells: usize| *evaluate_iterated_with(&w, &smooth_path(cells), Quadrature::LeftRiemann).last().unwrap();
    let ratio = (left(100) - left(200)) / (left(200) - left(400));
    assert!((1.8..2.2).contains(&ratio), "{ratio}");
    // Both rules agree in the limit; Richardson removes the left rule's O(dt) term.
    let extrapolated = 2.0 * left(3200) - left(1600);
    assert!((c - extrapolated).abs() < 1e-4 * c.abs(), "{c} vs {extrapolated}");
}

fn arb_letter() -> impl Strategy<Value = Letter> {
    (0u32..3, prop::collection::vec(-2.0f64..2.0, 1..3)).prop_map(|(k, c)| Letter::new(k, TimePoly::new(c)))
}

fn arb_word(max: usize) -> impl Strategy<Value = IIWord> {
    prop::collection::vec(arb_letter(), 0..=max).prop_map(IIWord::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shuffle_is_commutative(a in arb_word(3), b in arb_word(3)) {
        prop_assert!(shuffle_product(&a, &b).equivalent(&shuffle_product(&b, &a)));
    }

    #[test]
    fn shuffle_is_associative(a in arb_word(2), b in arb_word(2), c in arb_word(2)) {
        let left = shuffle_product(&a, &b).shuffle(&c);
        let right: WordSum = {
            let bc = shuffle_product(&b, &c);
            WordSum::new(bc.terms().iter().flat_map(|(k, w)| {
                shuffle_product(&a, w).terms().iter().map(|(d, u)| (k * d, u.clone())).collect::<Vec<_>>()
            }).collect())
        };
        prop_assert!(left.equivalent(&right));
    }

    #[test]
    fn shuffle_term_count(a in arb_word(4), b in arb_word(4)) {
        let (p, q) = (a.len() as u64, b.len() as u64);
        let binom = (1..=p).fold(1u64, |acc, i| acc * (q + i) / i);
        prop_assert_eq!(shuffle_product(&a, &b).len() as u64, binom);
    }

    #[test]
    fn evaluation_is_multiplicative(a in arb_word(2), b in arb_word(2)) {
        let path = SampledPath::from_fn(1.0, 64, |t| 1.5 + 0.5 * (3.0 * t).cos()).unwrap();
        let (x, y) = (evaluate_iterated(&a, &path), evaluate_iterated(&b, &path));
        let sum = shuffle_product(&a, &b).evaluate(&path);
        for j in 0..path.len() {
            prop_assert!((x[j] * y[j] - sum[j]).abs() < 1e-11 * (1.0 + sum[j].abs()));
        }
    }
}
