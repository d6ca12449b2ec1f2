use dynvir::nptransform::{
    delayed_force_change, elementary_bracket, evaluate_iterated, noise_condition_residual, numeric_commutator_richardson,
    shuffle_product, sv_bracket, IIWord, Letter, NPGenerator, ParticleHistory, SampledPath, SvGenerator, TimePoly,
};

use super::{fmt, Checks};
use crate::config::Scenario;
use crate::report::Table;
use crate::CliError;

const EPS: f64 = 1e-3;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn rates() -> [TimePoly; 3] {
    [TimePoly::new(vec![0.5, 1.0]), TimePoly::new(vec![0.0, 1.0, -0.5]), TimePoly::new(vec![1.0, 0.0, 0.3, 0.2])]
}

/// `[X_f,X_g] = X_{ḟg-fġ}`, `[Y_f,X_g] = Y_{ḟg-½fġ}`, `[Y_f,Y_g] = 0`.
fn sv_closed_form(a: &SvGenerator, b: &SvGenerator) -> SvGenerator {
    let yx = |f: &TimePoly, g: &TimePoly| f.derivative().mul(g).sub(&f.mul(&g.derivative()).scale(0.5));
    SvGenerator { x: TimePoly::wronskian(&a.x, &b.x), y: yx(&a.y, &b.x).sub(&yx(&b.y, &a.x)) }
}

pub fn np_brackets(s: &Scenario, c: &mut Checks) -> Result<(), CliError> {
    let cells = s.steps();
    let path = SampledPath::from_fn(s.horizon, cells, |t| 2.0 + t.sin())?;
    let rs = rates();

    let mut table = Table::new("np_brackets", &["n1", "n2", "relative_error"]);
    for n1 in -1..=2 {
        for n2 in -1..=2 {
            let g1 = NPGenerator::elementary(n1, rs[0].clone())?;
            let g2 = NPGenerator::elementary(n2, rs[1].clone())?;
            let sym = elementary_bracket(n1, &rs[0], n2, &rs[1])?.variation(&path);
            let num = numeric_commutator_richardson(&g1, &g2, &path, EPS)?;
            let name = format!("bracket ({n1},{n2})");
            let anchor = "symbolic bracket against the Richardson commutator of the flows";
            let diff: Vec<f64> = num.iter().zip(&sym).map(|(a, b)| a - b).collect();
            let value = if max_abs(&sym) == 0.0 {
                // [L_-1, L_-1] vanishes; compare absolutely.
                c.push(14, name, anchor, max_abs(&num), 1e-9);
                max_abs(&num)
            } else {
                let e = max_abs(&diff) / max_abs(&sym);
                c.push(14, name, anchor, e, 1e-4);
                e
            };
            table.push(vec![n1.to_string(), n2.to_string(), fmt(value)]);
        }
    }
    c.table(table);

    for ns in [[-1, 0, 1], [0, 1, 2], [1, 1, 2], [-1, 1, 2]] {
        let g: Vec<NPGenerator> =
            (0..3).map(|i| NPGenerator::elementary(ns[i], rs[i].clone())).collect::<Result<_, _>>()?;
        let mut total = vec![0.0; path.len()];
        let mut scale: f64 = 0.0;
        for (a, b, cc) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            let inner = elementary_bracket(ns[a], &rs[a], ns[b], &rs[b])?;
            let outer = numeric_commutator_richardson(&inner, &g[cc], &path, EPS)?;
            scale = scale.max(max_abs(&outer));
            total.iter_mut().zip(&outer).for_each(|(t, v)| *t += v);
        }
        let r = if scale > 0.0 { max_abs(&total) / scale } else { f64::INFINITY };
        c.push(14, format!("jacobi {ns:?}"), "cyclic sum of nested brackets, relative", r, 1e-3);
    }

    let letter = |k: u32, co: &[f64]| Letter::new(k, TimePoly::new(co.to_vec()));
    let w1 = IIWord::new(vec![letter(1, &[1.0, 0.5]), letter(2, &[0.0, 1.0])]);
    let w2 = IIWord::new(vec![letter(0, &[2.0]), letter(3, &[1.0, 0.0, -1.0])]);
    let w3 = IIWord::single(1, TimePoly::constant(-0.7));
    for (label, a, b) in [("w1w2", &w1, &w2), ("w1w3", &w1, &w3), ("w3w3", &w3, &w3)] {
        let (x, y) = (evaluate_iterated(a, &path), evaluate_iterated(b, &path));
        let sum = shuffle_product(a, b).evaluate(&path);
        let scale = sum.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let worst = x.iter().zip(&y).zip(&sum).map(|((p, q), r)| (p * q - r).abs()).fold(0.0, f64::max);
        c.push(14, format!("shuffle {label}"), "product of iterated integrals equals the shuffle sum", worst / scale, 1e-9);
    }

    let pot = s.potential.build()?;
    let history = ParticleHistory::from_fn(s.n, s.horizon, cells, |i, t| {
        (i as f64 - 0.5 * (s.n as f64 - 1.0)) * (1.0 + 0.3 * t) + 0.2 * (3.0 * t + i as f64).sin()
    })?;
    for n in [-1, 0] {
        let mut worst: f64 = 0.0;
        for a in [TimePoly::new(vec![0.0, 1.0, 2.0]), TimePoly::new(vec![1.0, 0.0, 0.0, -1.0])] {
            for slot in [0, cells / 2, cells] {
                worst = worst.max(max_abs(&delayed_force_change(n, &a, &pot, &history, slot)?));
            }
        }
        c.push(14, format!("delay n={n}"), "no delayed force change for translations and dilations", worst, 0.0);
    }

    let monomials: Vec<TimePoly> =
        (0..=3).map(|l| TimePoly::new((0..=l).map(|i| if i == l { 1.0 } else { 0.0 }).collect())).collect();
    let mut mismatches = 0.0;
    for f in &monomials {
        for g in &monomials {
            let pairs = [
                (SvGenerator::x(f.clone()), SvGenerator::x(g.clone())),
                (SvGenerator::y(f.clone()), SvGenerator::x(g.clone())),
                (SvGenerator::x(f.clone()), SvGenerator::y(g.clone())),
                (SvGenerator::y(f.clone()), SvGenerator::y(g.clone())),
            ];
            mismatches += pairs.iter().filter(|(a, b)| sv_bracket(a, b) != sv_closed_form(a, b)).count() as f64;
        }
    }
    c.push(14, "sv bracket", "symbolic SV bracket equals the closed form on monomials (mismatches)", mismatches, 0.0);

    let mut noise: f64 = 0.0;
    let mut escaped = 0.0;
    for n1 in -1..=2 {
        for n2 in -1..=2 {
            let b = elementary_bracket(n1, &rs[0], n2, &rs[2])?;
            noise = noise.max(noise_condition_residual(&b, &path));
            if (-1..=1).contains(&n1) && (-1..=1).contains(&n2) {
                escaped += b.leading_exponents().iter().filter(|n| !(-1..=1).contains(*n)).count() as f64;
            }
        }
    }
    c.push(14, "noise condition", "brackets preserve the noise strength", noise, 1e-12);
    c.push(14, "sl2 closure", "exponents -1..1 close under the bracket (escapes)", escaped, 0.0);
    Ok(())
}
