use serde::{Deserialize, Serialize};

use super::path::SampledPath;
use super::TimePoly;

/// One integration `∫ ds ȧ(s) λ(s)^k …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Letter {
    pub k: u32,
    pub rate: TimePoly,
}

impl Letter {
    pub fn new(k: u32, rate: TimePoly) -> Self {
        Self { k, rate }
    }
}

/// Word `(k₁,ȧ₁)…(k_p,ȧ_p)` for
/// `Φ(t) = ∫₀ᵗds₁ ȧ₁λ^{k₁}(s₁) ∫₀^{s₁}ds₂ ȧ₂λ^{k₂}(s₂) … `, outermost letter first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IIWord(Vec<Letter>);

impl IIWord {
    pub fn new(letters: Vec<Letter>) -> Self {
        Self(letters)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn single(k: u32, rate: TimePoly) -> Self {
        Self(vec![Letter::new(k, rate)])
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `letter` as the new outermost integration.
    pub fn prepend(&self, letter: Letter) -> Self {
        Self(std::iter::once(letter).chain(self.0.iter().cloned()).collect())
    }

    pub(super) fn letters_mut(&mut self) -> &mut Vec<Letter> {
        &mut self.0
    }
}

/// How nested integrals are discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Quadrature {
    /// `F(t_{j+1}) = F(t_j) + dt·f(t_j)·G(t_j)`.
    LeftRiemann,
    /// Each integrand is interpolated linearly between nodes and the nested
    /// integrals of the interpolants are computed exactly, cell by cell.
    /// Second order, and the shuffle identity holds to rounding.
    #[default]
    PiecewiseLinear,
}

fn integrand(letter: &Letter, path: &SampledPath) -> Vec<f64> {
    path.values()
        .iter()
        .enumerate()
        .map(|(j, &x)| letter.rate.eval(path.time(j)) * x.powi(letter.k as i32))
        .collect()
}

pub fn evaluate_iterated(w: &IIWord, path: &SampledPath) -> Vec<f64> {
    evaluate_iterated_with(w, path, Quadrature::default())
}

/// `Φ_w(t_j)` on every node; the empty word gives 1.
pub fn evaluate_iterated_with(w: &IIWord, path: &SampledPath, q: Quadrature) -> Vec<f64> {
    let fs: Vec<Vec<f64>> = w.letters().iter().map(|l| integrand(l, path)).collect();
    match q {
        Quadrature::LeftRiemann => left_riemann(&fs, path.dt(), path.len()),
        Quadrature::PiecewiseLinear => piecewise_linear(&fs, path.dt(), path.len()),
    }
}

fn left_riemann(fs: &[Vec<f64>], h: f64, slots: usize) -> Vec<f64> {
    let mut cur = vec![1.0; slots];
    for f in fs.iter().rev() {
        let mut next = vec![0.0; slots];
        for j in 0..slots - 1 {
            next[j + 1] = next[j] + h * f[j] * cur[j];
        }
        cur = next;
    }
    cur
}

fn piecewise_linear(fs: &[Vec<f64>], h: f64, slots: usize) -> Vec<f64> {
    // Inner integral on cell j as a polynomial in u = (t - t_j)/h.
    let mut cells: Vec<Vec<f64>> = vec![vec![1.0]; slots - 1];
    let mut nodes = vec![1.0; slots];
    for f in fs.iter().rev() {
        nodes[0] = 0.0;
        for (j, cell) in cells.iter_mut().enumerate() {
            let (a, b) = (f[j], f[j + 1] - f[j]);
            let mut g = vec![0.0; cell.len() + 1];
            for (i, &c) in cell.iter().enumerate() {
                g[i] += a * c;
                g[i + 1] += b * c;
            }
            let mut p = Vec::with_capacity(g.len() + 1);
            p.push(nodes[j]);
            p.extend(g.iter().enumerate().map(|(i, &c)| h * c / (i + 1) as f64));
            nodes[j + 1] = p.iter().sum();
            *cell = p;
        }
    }
    nodes
}

/// Formal combination `Σ cᵢ wᵢ`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WordSum(Vec<(f64, IIWord)>);

impl WordSum {
    pub fn new(terms: Vec<(f64, IIWord)>) -> Self {
        Self(terms)
    }

    pub fn terms(&self) -> &[(f64, IIWord)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn evaluate(&self, path: &SampledPath) -> Vec<f64> {
        self.evaluate_with(path, Quadrature::default())
    }

    pub fn evaluate_with(&self, path: &SampledPath, q: Quadrature) -> Vec<f64> {
        let mut out = vec![0.0; path.len()];
        for (c, w) in &self.0 {
            for (o, v) in out.iter_mut().zip(evaluate_iterated_with(w, path, q)) {
                *o += c * v;
            }
        }
        out
    }

    /// Equal words collected, zero coefficients dropped.
    pub fn merged(&self) -> Self {
        let mut out: Vec<(f64, IIWord)> = Vec::new();
        for (c, w) in &self.0 {
            match out.iter_mut().find(|(_, u)| u == w) {
                Some((d, _)) => *d += c,
                None => out.push((*c, w.clone())),
            }
        }
        out.retain(|(c, _)| *c != 0.0);
        Self(out)
    }

    /// Same combination up to ordering and merging.
    pub fn equivalent(&self, other: &Self) -> bool {
        let (a, b) = (self.merged(), other.merged());
        a.len() == b.len() && a.0.iter().all(|(c, w)| b.0.iter().any(|(d, u)| u == w && c == d))
    }

    pub fn shuffle(&self, w: &IIWord) -> Self {
        Self(
            self.0
                .iter()
                .flat_map(|(c, u)| shuffle_product(u, w).0.into_iter().map(move |(d, s)| (c * d, s)))
                .collect(),
        )
    }
}

/// All `C(p+q, p)` interleavings preserving both letter orders, each with
/// coefficient 1 (repeats are kept).
pub fn shuffle_product(w1: &IIWord, w2: &IIWord) -> WordSum {
    WordSum(shuffles(w1.letters(), w2.letters()).into_iter().map(|l| (1.0, IIWord(l))).collect())
}

fn shuffles(a: &[Letter], b: &[Letter]) -> Vec<Vec<Letter>> {
    if a.is_empty() || b.is_empty() {
        return vec![a.iter().chain(b).cloned().collect()];
    }
    let lead = |first: &Letter, rest: Vec<Vec<Letter>>| -> Vec<Vec<Letter>> {
        rest.into_iter()
            .map(|mut r| {
                r.insert(0, first.clone());
                r
            })
            .collect()
    };
    let mut out = lead(&a[0], shuffles(&a[1..], b));
    out.extend(lead(&b[0], shuffles(a, &b[1..])));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> SampledPath {
        SampledPath::from_fn(1.0, 100, |t| t).unwrap()
    }

    #[test]
    fn empty_word_is_one() {
        assert!(evaluate_iterated(&IIWord::empty(), &line()).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn single_letters() {
        let p = line();
        let one = IIWord::single(0, TimePoly::constant(1.0));
        for (t, v) in p.times().iter().zip(evaluate_iterated(&one, &p)) {
            assert!((v - t).abs() < 1e-14);
        }
        // The interpolant of λ(s) = s is exact, so ∫₀ᵗ s ds is too.
        let lam = IIWord::single(1, TimePoly::constant(1.0));
        for (t, v) in p.times().iter().zip(evaluate_iterated(&lam, &p)) {
            assert!((v - 0.5 * t * t).abs() < 1e-14);
        }
        let left = evaluate_iterated_with(&lam, &p, Quadrature::LeftRiemann);
        assert!((left[100] - 0.5).abs() < 0.6 * p.dt() && (left[100] - 0.5).abs() > 0.4 * p.dt());
    }

    #[test]
    fn two_letters_closed_form() {
        // ∫₀ᵗ ds s ∫₀^s 2r dr = t⁴/4 on λ = t.
        let p = line();
        let w = IIWord::new(vec![Letter::new(1, TimePoly::constant(1.0)), Letter::new(0, TimePoly::new(vec![0.0, 2.0]))]);
        for (t, v) in p.times().iter().zip(evaluate_iterated(&w, &p)) {
            assert!((v - t.powi(4) / 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn shuffle_counts() {
        let a = |k| Letter::new(k, TimePoly::constant(1.0));
        let s = shuffle_product(&IIWord::new(vec![a(1)]), &IIWord::new(vec![a(2)]));
        assert_eq!(s.len(), 2);
        let s = shuffle_product(&IIWord::new(vec![a(1), a(2)]), &IIWord::new(vec![a(3)]));
        assert_eq!(s.len(), 3);
        let ks: Vec<Vec<u32>> = s.terms().iter().map(|(_, w)| w.letters().iter().map(|l| l.k).collect()).collect();
        assert_eq!(ks, vec![vec![1, 2, 3], vec![1, 3, 2], vec![3, 1, 2]]);
        assert_eq!(shuffle_product(&IIWord::empty(), &IIWord::new(vec![a(4)])).len(), 1);
    }

    #[test]
    fn merging() {
        let w = IIWord::single(1, TimePoly::constant(1.0));
        let s = WordSum::new(vec![(1.0, w.clone()), (2.0, w.clone()), (-3.0, IIWord::empty())]);
        let m = s.merged();
        assert_eq!(m.terms(), &[(3.0, w.clone()), (-3.0, IIWord::empty())]);
        let sq = shuffle_product(&w, &w);
        assert_eq!(sq.merged().terms(), &[(2.0, IIWord::new(vec![w.letters()[0].clone(); 2]))]);
    }
}
