use serde::{Deserialize, Serialize};

use super::path::SampledPath;
use super::words::{evaluate_iterated_with, IIWord, Letter, Quadrature};
use super::{NpError, TimePoly};

/// Basis element `L_{n,(n₁…n_p)}^{ȧ,(a₁…a_p)}`: `Φ = ȧ(t)·Φ_tail(t)` and the
/// variation `λ^{n+1}Φ - λ̇Ψ` with `Ψ = 2(n+1)∫₀ᵗ λ^n Φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NPElement {
    n: i32,
    prefactor: TimePoly,
    tail: IIWord,
}

impl NPElement {
    pub fn new(n: i32, prefactor: TimePoly, tail: IIWord) -> Result<Self, NpError> {
        if n < -1 {
            return Err(NpError::Exponent(n));
        }
        Ok(Self { n, prefactor, tail })
    }

    pub fn n(&self) -> i32 {
        self.n
    }

    pub fn prefactor(&self) -> &TimePoly {
        &self.prefactor
    }

    pub fn tail(&self) -> &IIWord {
        &self.tail
    }

    /// Folds trailing `k = 0` letters into the previous rate (or the
    /// prefactor): `∫₀^s ḃ = b(s)` with `b(0) = 0`, so `L_{n,0}^{ȧ,b} = L_n^{ȧb}`.
    pub fn reduced(mut self) -> Self {
        while self.tail.letters().last().is_some_and(|l| l.k == 0) {
            let letters = self.tail.letters_mut();
            let b = letters.pop().expect("nonempty").rate.antiderivative();
            match letters.last_mut() {
                Some(prev) => prev.rate = prev.rate.mul(&b),
                None => self.prefactor = self.prefactor.mul(&b),
            }
        }
        self
    }

    pub fn phi(&self, path: &SampledPath, q: Quadrature) -> Vec<f64> {
        let tail = evaluate_iterated_with(&self.tail, path, q);
        tail.iter().enumerate().map(|(j, v)| self.prefactor.eval(path.time(j)) * v).collect()
    }

    pub fn psi(&self, path: &SampledPath, q: Quadrature) -> Vec<f64> {
        if self.n == -1 {
            return vec![0.0; path.len()];
        }
        let word = self.tail.prepend(Letter::new(self.n as u32, self.prefactor.clone()));
        let c = 2.0 * (self.n + 1) as f64;
        evaluate_iterated_with(&word, path, q).into_iter().map(|v| c * v).collect()
    }

    pub fn variation(&self, path: &SampledPath, q: Quadrature) -> Vec<f64> {
        let (phi, psi) = (self.phi(path, q), self.psi(path, q));
        let dl = path.derivative();
        path.values()
            .iter()
            .enumerate()
            .map(|(j, &x)| x.powi(self.n + 1) * phi[j] - dl[j] * psi[j])
            .collect()
    }
}

/// Formal combination `Σ cᵢ Lᵢ`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NPGenerator {
    terms: Vec<(f64, NPElement)>,
}

impl NPGenerator {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `L_n^{ȧ}`: `δ̄λ = λ^{n+1}ȧ - 2(n+1)λ̇∫₀ᵗȧλ^n`.
    pub fn elementary(n: i32, rate: TimePoly) -> Result<Self, NpError> {
        Ok(Self { terms: vec![(1.0, NPElement::new(n, rate, IIWord::empty())?)] })
    }

    pub fn from_terms(terms: Vec<(f64, NPElement)>) -> Self {
        Self { terms }
    }

    pub fn terms(&self) -> &[(f64, NPElement)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { terms: self.terms.iter().map(|(c, e)| (c * s, e.clone())).collect() }
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self { terms: self.terms.iter().chain(&other.terms).cloned().collect() }.simplified()
    }

    /// Depth-reduced, with zero terms dropped. Elements sharing `n` and the
    /// tail are merged; equal prefactors add coefficients, different ones are
    /// folded into a single prefactor with coefficient 1.
    pub fn simplified(&self) -> Self {
        let mut out: Vec<(f64, NPElement)> = Vec::new();
        for (c, e) in &self.terms {
            let e = e.clone().reduced();
            match out.iter_mut().find(|(_, f)| f.n == e.n && f.tail == e.tail) {
                Some((d, f)) if f.prefactor == e.prefactor => *d += c,
                Some((d, f)) => {
                    f.prefactor = f.prefactor.scale(*d).add(&e.prefactor.scale(*c));
                    *d = 1.0;
                }
                None => out.push((*c, e)),
            }
        }
        out.retain(|(c, e)| *c != 0.0 && !e.prefactor.is_zero() && e.tail.letters().iter().all(|l| !l.rate.is_zero()));
        Self { terms: out }
    }

    pub fn leading_exponents(&self) -> Vec<i32> {
        self.terms.iter().map(|(_, e)| e.n).collect()
    }

    pub fn variation(&self, path: &SampledPath) -> Vec<f64> {
        self.variation_with(path, Quadrature::default())
    }

    pub fn variation_with(&self, path: &SampledPath, q: Quadrature) -> Vec<f64> {
        let mut out = vec![0.0; path.len()];
        for (c, e) in &self.terms {
            for (o, v) in out.iter_mut().zip(e.variation(path, q)) {
                *o += c * v;
            }
        }
        out
    }
}

/// `[L_{n₁}^{ȧ₁}, L_{n₂}^{ȧ₂}] = (n₂-n₁)L_{n₁+n₂}^{ȧ₁ȧ₂}
///   - 2(n₂+1)L_{n₁,n₂}^{ä₁,a₂} + 2(n₁+1)L_{n₂,n₁}^{ä₂,a₁}`,
/// taking the rates `ȧ₁`, `ȧ₂`.
pub fn elementary_bracket(n1: i32, rate1: &TimePoly, n2: i32, rate2: &TimePoly) -> Result<NPGenerator, NpError> {
    for n in [n1, n2] {
        if n < -1 {
            return Err(NpError::Exponent(n));
        }
    }
    let mut terms = Vec::new();
    if n1 != n2 {
        terms.push(((n2 - n1) as f64, NPElement::new(n1 + n2, rate1.mul(rate2), IIWord::empty())?));
    }
    if n2 >= 0 {
        let tail = IIWord::single(n2 as u32, rate2.clone());
        terms.push((-2.0 * (n2 + 1) as f64, NPElement::new(n1, rate1.derivative(), tail)?));
    }
    if n1 >= 0 {
        let tail = IIWord::single(n1 as u32, rate1.clone());
        terms.push((2.0 * (n1 + 1) as f64, NPElement::new(n2, rate2.derivative(), tail)?));
    }
    Ok(NPGenerator::from_terms(terms).simplified())
}

/// `λ + ε δ̄λ`.
pub fn apply_np_transform(g: &NPGenerator, path: &SampledPath, eps: f64) -> Result<SampledPath, NpError> {
    let v = g.variation(path);
    path.with_values(path.values().iter().zip(v).map(|(x, d)| x + eps * d).collect())
}

/// Four-point mixed difference of
/// `G(ε₁,ε₂) = ε₂[δ̄₂(λ+ε₁δ̄₁λ) - δ̄₂λ] - ε₁[δ̄₁(λ+ε₂δ̄₂λ) - δ̄₁λ]`
/// at `ε₁, ε₂ = ±eps`, divided by `4eps²`. The error is `O(eps²)`.
pub fn numeric_commutator(g1: &NPGenerator, g2: &NPGenerator, path: &SampledPath, eps: f64) -> Result<Vec<f64>, NpError> {
    let (v1, v2) = (g1.variation(path), g2.variation(path));
    // δ̄_b(λ + e δ̄_a λ) - δ̄_b λ
    let shifted = |a: &NPGenerator, b: &NPGenerator, vb: &[f64], e: f64| -> Result<Vec<f64>, NpError> {
        let moved = apply_np_transform(a, path, e)?;
        Ok(b.variation(&moved).iter().zip(vb).map(|(x, y)| x - y).collect())
    };
    let a_plus = shifted(g1, g2, &v2, eps)?;
    let a_minus = shifted(g1, g2, &v2, -eps)?;
    let b_plus = shifted(g2, g1, &v1, eps)?;
    let b_minus = shifted(g2, g1, &v1, -eps)?;
    // Σ_{s₁,s₂=±} s₁s₂ G(s₁eps, s₂eps) = 2eps[A(eps) - A(-eps)] - 2eps[B(eps) - B(-eps)].
    Ok((0..path.len())
        .map(|j| (2.0 * eps * (a_plus[j] - a_minus[j]) - 2.0 * eps * (b_plus[j] - b_minus[j])) / (4.0 * eps * eps))
        .collect())
}

/// `(4C(eps/2) - C(eps))/3`, removing the `eps²` term.
pub fn numeric_commutator_richardson(
    g1: &NPGenerator,
    g2: &NPGenerator,
    path: &SampledPath,
    eps: f64,
) -> Result<Vec<f64>, NpError> {
    let coarse = numeric_commutator(g1, g2, path, eps)?;
    let fine = numeric_commutator(g1, g2, path, 0.5 * eps)?;
    Ok(fine.iter().zip(coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect())
}

/// `max_j |½(Ψ_{j+1}-Ψ_j)/dt - (n+1)λ_j^nΦ_j|` over all elements, with
/// left-point sums, relative to `max(1, max|(n+1)λ^nΦ|)`.
pub fn noise_condition_residual(g: &NPGenerator, path: &SampledPath) -> f64 {
    let q = Quadrature::LeftRiemann;
    let mut worst: f64 = 0.0;
    for (_, e) in g.terms() {
        let (phi, psi) = (e.phi(path, q), e.psi(path, q));
        let rhs: Vec<f64> = (0..path.len()).map(|j| (e.n + 1) as f64 * path.values()[j].powi(e.n) * phi[j]).collect();
        let scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for j in 0..path.len() - 1 {
            let lhs = 0.5 * (psi[j + 1] - psi[j]) / path.dt();
            worst = worst.max((lhs - rhs[j]).abs() / scale);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> TimePoly {
        TimePoly::identity()
    }

    #[test]
    fn bracket_coefficients() {
        let one = TimePoly::constant(1.0);
        // Constant rates kill both tail terms.
        let b = elementary_bracket(0, &one, 1, &one).unwrap();
        assert_eq!(b.terms(), &[(1.0, NPElement::new(1, one.clone(), IIWord::empty()).unwrap())]);
        // Equal exponents drop the first term.
        let b = elementary_bracket(1, &t(), 1, &one).unwrap();
        assert!(b.leading_exponents().iter().all(|&n| n == 1));
        assert_eq!(b.terms().len(), 1);
        assert_eq!(b.terms()[0].0, -4.0);
        assert!(elementary_bracket(-2, &one, 0, &one).is_err());
    }

    #[test]
    fn depth_reduction() {
        // L_{-1,(0)}^{ä, a₂} with ȧ₂ = 2t becomes L_{-1}^{ä·t²}.
        let e = NPElement::new(-1, TimePoly::constant(3.0), IIWord::single(0, TimePoly::new(vec![0.0, 2.0]))).unwrap();
        let r = e.reduced();
        assert!(r.tail().is_empty());
        assert_eq!(r.prefactor(), &TimePoly::new(vec![0.0, 0.0, 3.0]));
        let keep = NPElement::new(0, t(), IIWord::single(1, t())).unwrap();
        assert_eq!(keep.clone().reduced(), keep);
    }

    #[test]
    fn space_shift_variation() {
        let path = SampledPath::from_fn(1.0, 50, |s| 2.0 + s.sin()).unwrap();
        let g = NPGenerator::elementary(-1, TimePoly::new(vec![1.0, 3.0])).unwrap();
        for (j, v) in g.variation(&path).iter().enumerate() {
            assert_eq!(*v, 1.0 + 3.0 * path.time(j));
        }
    }

    #[test]
    fn noise_condition() {
        let path = SampledPath::from_fn(1.0, 400, |s| 2.0 + s.sin()).unwrap();
        let g = elementary_bracket(1, &t(), 2, &TimePoly::new(vec![1.0, 0.0, 1.0])).unwrap();
        assert!(noise_condition_residual(&g, &path) < 1e-12);
    }
}
