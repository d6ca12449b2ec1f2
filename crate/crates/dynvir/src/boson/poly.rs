//! Sparse polynomials in the grid variables and normal-ordered differential
//! operators acting on them.

use std::collections::BTreeMap;
use std::fmt;

use super::{BosonError, Space, Var};

/// Product of variables, stored as sorted `(index, power)` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Vec<(u32, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Self(Vec::new())
    }

    pub fn var(index: usize) -> Self {
        Self(vec![(index as u32, 1)])
    }

    pub fn from_powers(mut powers: Vec<(usize, u32)>) -> Self {
        powers.sort_unstable();
        let mut out: Vec<(u32, u32)> = Vec::with_capacity(powers.len());
        for (i, p) in powers {
            if p == 0 {
                continue;
            }
            match out.last_mut() {
                Some((j, q)) if *j == i as u32 => *q += p,
                _ => out.push((i as u32, p)),
            }
        }
        Self(out)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, p)| p).sum()
    }

    pub fn powers(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.0.iter().map(|&(i, p)| (i as usize, p))
    }

    pub fn power_of(&self, index: usize) -> u32 {
        self.0
            .binary_search_by_key(&(index as u32), |&(i, _)| i)
            .map_or(0, |pos| self.0[pos].1)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Self(out)
    }

    /// Lower the power of `index` by `by`; `None` if it is not present often
    /// enough.
    fn lower(&self, index: u32, by: u32) -> Option<Self> {
        if by == 0 {
            return Some(self.clone());
        }
        let pos = self.0.binary_search_by_key(&index, |&(i, _)| i).ok()?;
        let p = self.0[pos].1;
        if p < by {
            return None;
        }
        let mut out = self.0.clone();
        if p == by {
            out.remove(pos);
        } else {
            out[pos].1 = p - by;
        }
        Some(Self(out))
    }

    /// `∂^self` applied to `m`: the falling-factorial weight and remainder.
    pub fn differentiate(&self, m: &Monomial) -> Option<(f64, Monomial)> {
        let mut coeff = 1.0;
        let mut rest = m.clone();
        for &(i, p) in &self.0 {
            let q = m.power_of(i as usize);
            if q < p {
                return None;
            }
            coeff *= falling(q, p);
            rest = rest.lower(i, p)?;
        }
        Some((coeff, rest))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|&(i, p)| x[i as usize].powi(p as i32)).product()
    }
}

fn falling(q: u32, p: u32) -> f64 {
    (0..p).map(|i| (q - i) as f64).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Add `c` at `key`, dropping entries that cancel to zero.
fn accumulate<K: Ord>(map: &mut BTreeMap<K, f64>, key: K, c: f64) {
    if c == 0.0 {
        return;
    }
    use std::collections::btree_map::Entry;
    match map.entry(key) {
        Entry::Vacant(e) => {
            e.insert(c);
        }
        Entry::Occupied(mut e) => {
            let v = *e.get() + c;
            if v == 0.0 {
                e.remove();
            } else {
                *e.get_mut() = v;
            }
        }
    }
}

/// Sparse polynomial in the variables `x_{k,j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFunctional {
    space: Space,
    terms: BTreeMap<Monomial, f64>,
}

impl PolyFunctional {
    pub fn zero(space: Space) -> Self {
        Self { space, terms: BTreeMap::new() }
    }

    pub fn constant(space: Space, c: f64) -> Self {
        let mut p = Self::zero(space);
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn variable(space: Space, v: Var) -> Result<Self, BosonError> {
        let mut p = Self::zero(space);
        p.add_term(Monomial::var(space.index(v)?), 1.0);
        Ok(p)
    }

    /// `Σ c_i x_{v_i}`.
    pub fn linear(space: Space, coeffs: impl IntoIterator<Item = (Var, f64)>) -> Result<Self, BosonError> {
        let mut p = Self::zero(space);
        for (v, c) in coeffs {
            p.add_term(Monomial::var(space.index(v)?), c);
        }
        Ok(p)
    }

    /// Discretized `∫ g(s) τ_k(s) ds = Σ_j g(t_j) x_{k,j} dt`.
    pub fn time_integral(space: Space, mode: usize, g: impl Fn(f64) -> f64) -> Result<Self, BosonError> {
        let grid = space.grid();
        Self::linear(
            space,
            (0..grid.slots()).map(|j| (Var::new(mode, j), g(grid.time(j)) * grid.dt())),
        )
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        accumulate(&mut self.terms, m, c);
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    fn check(&self, other: &Self) -> Result<(), BosonError> {
        if self.space != other.space {
            return Err(BosonError::SpaceMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, BosonError> {
        self.check(other)?;
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, BosonError> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero(self.space);
        for (m, c) in self.terms() {
            out.add_term(m.clone(), s * c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Result<Self, BosonError> {
        self.check(other)?;
        let mut out = Self::zero(self.space);
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                out.add_term(a.mul(b), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms().map(|(m, c)| c * m.eval(x)).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let keys = self.terms.keys().chain(other.terms.keys());
        keys.map(|m| (self.coeff(m) - other.coeff(m)).abs()).fold(0.0, f64::max)
    }
}

/// Normal-ordered differential operator: a sum of
/// `c · (multiplier monomial) · (derivative monomial)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BosonOperator {
    space: Space,
    terms: BTreeMap<(Monomial, Monomial), f64>,
}

impl BosonOperator {
    pub fn zero(space: Space) -> Self {
        Self { space, terms: BTreeMap::new() }
    }

    pub fn constant(space: Space, c: f64) -> Self {
        let mut op = Self::zero(space);
        op.add_term(Monomial::one(), Monomial::one(), c);
        op
    }

    pub fn multiplier(space: Space, v: Var, c: f64) -> Result<Self, BosonError> {
        let mut op = Self::zero(space);
        op.add_term(Monomial::var(space.index(v)?), Monomial::one(), c);
        Ok(op)
    }

    pub fn derivative(space: Space, v: Var, c: f64) -> Result<Self, BosonError> {
        let mut op = Self::zero(space);
        op.add_term(Monomial::one(), Monomial::var(space.index(v)?), c);
        Ok(op)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn add_term(&mut self, mult: Monomial, deriv: Monomial, c: f64) {
        accumulate(&mut self.terms, (mult, deriv), c);
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Monomial, f64)> {
        self.terms.iter().map(|((a, b), &c)| (a, b, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, mult: &Monomial, deriv: &Monomial) -> f64 {
        self.terms.get(&(mult.clone(), deriv.clone())).copied().unwrap_or(0.0)
    }

    fn check(&self, space: Space) -> Result<(), BosonError> {
        if self.space != space {
            return Err(BosonError::SpaceMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, BosonError> {
        self.check(other.space)?;
        let mut out = self.clone();
        for (a, b, c) in other.terms() {
            out.add_term(a.clone(), b.clone(), c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, BosonError> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero(self.space);
        for (a, b, c) in self.terms() {
            out.add_term(a.clone(), b.clone(), s * c);
        }
        out
    }

    /// `self ∘ other`, brought to normal order with the Leibniz rule.
    pub fn compose(&self, other: &Self) -> Result<Self, BosonError> {
        self.check(other.space)?;
        let mut out = Self::zero(self.space);
        for (a, b, c1) in self.terms() {
            for (x, d, c2) in other.terms() {
                // x^a ∂^b x^c ∂^d = Σ_i Π_v C(b_v,i_v) q_v!/(q_v-i_v)! x^{a+c-i} ∂^{b-i+d}
                let mut partial: Vec<(f64, Monomial, Monomial)> = vec![(c1 * c2, x.clone(), Monomial::one())];
                for (v, p) in b.powers() {
                    let q = x.power_of(v);
                    let mut next = Vec::new();
                    for (w, mult, der) in &partial {
                        for i in 0..=p.min(q) {
                            let weight = binomial(p, i) * falling(q, i);
                            let Some(m) = mult.lower(v as u32, i) else { continue };
                            let dm = der.mul(&Monomial::from_powers(vec![(v, p - i)]));
                            next.push((w * weight, m, dm));
                        }
                    }
                    partial = next;
                }
                for (w, mult, der) in partial {
                    out.add_term(a.mul(&mult), der.mul(d), w);
                }
            }
        }
        Ok(out)
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self, BosonError> {
        self.compose(other)?.sub(&other.compose(self)?)
    }

    /// Exact symbolic application.
    pub fn apply(&self, f: &PolyFunctional) -> Result<PolyFunctional, BosonError> {
        self.check(f.space())?;
        let mut out = PolyFunctional::zero(self.space);
        for (a, b, c) in self.terms() {
            for (m, cm) in f.terms() {
                if let Some((w, rest)) = b.differentiate(m) {
                    out.add_term(a.mul(&rest), c * cm * w);
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let keys = self.terms.keys().chain(other.terms.keys());
        keys.map(|(a, b)| (self.coeff(a, b) - other.coeff(a, b)).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Highest multiplier and derivative degrees over all terms.
    pub fn bidegree(&self) -> (u32, u32) {
        self.terms
            .keys()
            .fold((0, 0), |(p, q), (a, b)| (p.max(a.degree()), q.max(b.degree())))
    }
}

impl fmt::Display for BosonOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |m: &Monomial, sym: &str| -> String {
            m.powers()
                .map(|(i, p)| {
                    let v = self.space.var(i);
                    let base = format!("{sym}{},{}", v.mode, v.slot);
                    if p == 1 { base } else { format!("{base}^{p}") }
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (a, b, c)) in self.terms().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            for s in [show(a, "x"), show(b, "d")] {
                if !s.is_empty() {
                    write!(f, " {s}")?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boson::TimeGrid;

    fn sp() -> Space {
        Space::new(2, TimeGrid::new(0.1, 2).unwrap()).unwrap()
    }

    #[test]
    fn monomial_products_merge_powers() {
        let m = Monomial::from_powers(vec![(3, 1), (1, 2), (3, 1)]);
        assert_eq!(m.degree(), 4);
        assert_eq!(m.power_of(3), 2);
        assert_eq!(m.mul(&Monomial::var(1)).power_of(1), 3);
        let (c, rest) = Monomial::from_powers(vec![(3, 2)]).differentiate(&m).unwrap();
        assert_eq!((c, rest), (2.0, Monomial::from_powers(vec![(1, 2)])));
        assert!(Monomial::var(0).differentiate(&Monomial::var(1)).is_none());
    }

    #[test]
    fn composition_normal_orders() {
        let s = sp();
        let x = BosonOperator::multiplier(s, Var::new(1, 0), 1.0).unwrap();
        let d = BosonOperator::derivative(s, Var::new(1, 0), 1.0).unwrap();
        // ∂ x = x ∂ + 1
        let dx = d.compose(&x).unwrap();
        let want = x.compose(&d).unwrap().add(&BosonOperator::constant(s, 1.0)).unwrap();
        assert_eq!(dx, want);
        // ∂² x² = x² ∂² + 4 x ∂ + 2
        let d2 = d.compose(&d).unwrap();
        let x2 = x.compose(&x).unwrap();
        let lhs = d2.compose(&x2).unwrap();
        assert_eq!(lhs.coeff(&Monomial::one(), &Monomial::one()), 2.0);
        assert_eq!(lhs.coeff(&Monomial::var(0), &Monomial::var(0)), 4.0);
        assert_eq!(lhs.bidegree(), (2, 2));
    }

    #[test]
    fn zero_coefficients_are_not_stored() {
        let s = sp();
        let mut f = PolyFunctional::variable(s, Var::new(2, 1)).unwrap();
        f.add_term(Monomial::var(s.index(Var::new(2, 1)).unwrap()), -1.0);
        assert!(f.is_empty());
        assert!(PolyFunctional::variable(s, Var::new(3, 0)).is_err());
    }
}
