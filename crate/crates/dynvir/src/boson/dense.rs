//! Dense form of operators of degree ≤ 2:
//!
//! ```text
//! Q = ½ xᵀA x + xᵀB ∂ + ½ ∂ᵀC ∂ + u·x + w·∂ + c      (normal order)
//! ```
//!
//! Commutators close on this form. Matrix elements of `[P, Q]` on products
//! of at most two linear functionals can be read off in O(n²) from
//! matrix-vector products, without forming the n³ matrix products.

use nalgebra::{DMatrix, DVector};

use super::poly::{BosonOperator, Monomial};
use super::{BosonError, ModeForm, Space};

type Matrix = DMatrix<f64>;
type Vector = DVector<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticOperator {
    space: Space,
    xx: Option<Matrix>,
    xd: Option<Matrix>,
    dd: Option<Matrix>,
    x: Vector,
    d: Vector,
    c: f64,
}

fn block(slot: &mut Option<Matrix>, n: usize) -> &mut Matrix {
    slot.get_or_insert_with(|| Matrix::zeros(n, n))
}

fn add_opt(a: &Option<Matrix>, b: &Option<Matrix>, s: f64) -> Option<Matrix> {
    match (a, b) {
        (None, None) => None,
        (Some(a), None) => Some(a.clone()),
        (None, Some(b)) => Some(b * s),
        (Some(a), Some(b)) => Some(a + b * s),
    }
}

impl QuadraticOperator {
    pub fn zero(space: Space) -> Self {
        let n = space.dim();
        Self { space, xx: None, xd: None, dd: None, x: Vector::zeros(n), d: Vector::zeros(n), c: 0.0 }
    }

    pub fn constant(space: Space, c: f64) -> Self {
        Self { c, ..Self::zero(space) }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    /// Symmetric `A` of `½ xᵀA x`.
    pub fn xx(&self) -> Option<&Matrix> {
        self.xx.as_ref()
    }

    /// `B` of `xᵀB ∂`.
    pub fn xd(&self) -> Option<&Matrix> {
        self.xd.as_ref()
    }

    /// Symmetric `C` of `½ ∂ᵀC ∂`.
    pub fn dd(&self) -> Option<&Matrix> {
        self.dd.as_ref()
    }

    pub fn x(&self) -> &Vector {
        &self.x
    }

    pub fn d(&self) -> &Vector {
        &self.d
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn xd_mut(&mut self) -> &mut Matrix {
        block(&mut self.xd, self.space.dim())
    }

    pub fn xx_mut(&mut self) -> &mut Matrix {
        block(&mut self.xx, self.space.dim())
    }

    pub fn dd_mut(&mut self) -> &mut Matrix {
        block(&mut self.dd, self.space.dim())
    }

    pub fn x_mut(&mut self) -> &mut Vector {
        &mut self.x
    }

    pub fn d_mut(&mut self) -> &mut Vector {
        &mut self.d
    }

    pub fn c_mut(&mut self) -> &mut f64 {
        &mut self.c
    }

    /// Add `coef · f`.
    pub fn add_mode(&mut self, f: &ModeForm, coef: f64) {
        for &(i, a) in &f.mult {
            self.x[i] += coef * a;
        }
        for &(i, a) in &f.deriv {
            self.d[i] += coef * a;
        }
        self.c += coef * f.constant;
    }

    /// Add `coef · :f g:` (multipliers to the left of derivatives).
    pub fn add_product(&mut self, f: &ModeForm, g: &ModeForm, coef: f64) {
        let n = self.space.dim();
        if coef == 0.0 {
            return;
        }
        self.add_mode(f, coef * g.constant);
        self.add_mode(g, coef * f.constant);
        self.c -= coef * f.constant * g.constant;
        if !f.mult.is_empty() && !g.mult.is_empty() {
            let a = block(&mut self.xx, n);
            for &(i, p) in &f.mult {
                for &(j, q) in &g.mult {
                    a[(i, j)] += coef * p * q;
                    a[(j, i)] += coef * p * q;
                }
            }
        }
        if !f.deriv.is_empty() && !g.deriv.is_empty() {
            let cm = block(&mut self.dd, n);
            for &(i, p) in &f.deriv {
                for &(j, q) in &g.deriv {
                    cm[(i, j)] += coef * p * q;
                    cm[(j, i)] += coef * p * q;
                }
            }
        }
        for (m, dv) in [(f, g), (g, f)] {
            if m.mult.is_empty() || dv.deriv.is_empty() {
                continue;
            }
            let b = block(&mut self.xd, n);
            for &(i, p) in &m.mult {
                for &(j, q) in &dv.deriv {
                    b[(i, j)] += coef * p * q;
                }
            }
        }
    }

    fn check(&self, other: &Self) -> Result<(), BosonError> {
        if self.space != other.space {
            return Err(BosonError::SpaceMismatch);
        }
        Ok(())
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self, BosonError> {
        self.check(other)?;
        Ok(Self {
            space: self.space,
            xx: add_opt(&self.xx, &other.xx, s),
            xd: add_opt(&self.xd, &other.xd, s),
            dd: add_opt(&self.dd, &other.dd, s),
            x: &self.x + &other.x * s,
            d: &self.d + &other.d * s,
            c: self.c + s * other.c,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self, BosonError> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, BosonError> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            space: self.space,
            xx: self.xx.as_ref().map(|m| m * s),
            xd: self.xd.as_ref().map(|m| m * s),
            dd: self.dd.as_ref().map(|m| m * s),
            x: &self.x * s,
            d: &self.d * s,
            c: self.c * s,
        }
    }

    /// Exact `[self, other]` in normal order.
    pub fn commutator(&self, other: &Self) -> Result<Self, BosonError> {
        self.check(other)?;
        let n = self.space.dim();
        let z = Matrix::zeros(n, n);
        let get = |m: &Option<Matrix>| m.clone().unwrap_or_else(|| z.clone());
        let (a1, b1, c1) = (get(&self.xx), get(&self.xd), get(&self.dd));
        let (a2, b2, c2) = (get(&other.xx), get(&other.xd), get(&other.dd));
        let (u1, w1, u2, w2) = (&self.x, &self.d, &other.x, &other.d);
        let a = &b1 * &a2 - &a1 * b2.transpose() - &b2 * &a1 + &a2 * b1.transpose();
        let b = &b1 * &b2 - &a1 * &c2 - &b2 * &b1 + &a2 * &c1;
        let c = &c1 * &b2 - b1.transpose() * &c2 - &c2 * &b1 + b2.transpose() * &c1;
        let x = &b1 * u2 - &a1 * w2 - &b2 * u1 + &a2 * w1;
        let d = &c1 * u2 - b1.transpose() * w2 - &c2 * u1 + b2.transpose() * w1;
        let k = w1.dot(u2) - u1.dot(w2) + 0.5 * (a2.dot(&c1) - a1.dot(&c2));
        let nz = |m: Matrix| if m.iter().all(|&v| v == 0.0) { None } else { Some(m) };
        Ok(Self { space: self.space, xx: nz(a), xd: nz(b), dd: nz(c), x, d, c: k })
    }

    pub fn from_boson(op: &BosonOperator) -> Result<Self, BosonError> {
        let mut q = Self::zero(op.space());
        let n = q.space.dim();
        for (a, b, c) in op.terms() {
            let ma: Vec<_> = a.powers().collect();
            let mb: Vec<_> = b.powers().collect();
            match (a.degree(), b.degree()) {
                (0, 0) => q.c += c,
                (1, 0) => q.x[ma[0].0] += c,
                (0, 1) => q.d[mb[0].0] += c,
                (1, 1) => block(&mut q.xd, n)[(ma[0].0, mb[0].0)] += c,
                (2, 0) => {
                    let (i, j) = pair(&ma);
                    let m = block(&mut q.xx, n);
                    // ½ (A_ij + A_ji) x_i x_j for i ≠ j, ½ A_ii x_i²
                    if i == j {
                        m[(i, i)] += 2.0 * c;
                    } else {
                        m[(i, j)] += c;
                        m[(j, i)] += c;
                    }
                }
                (0, 2) => {
                    let (i, j) = pair(&mb);
                    let m = block(&mut q.dd, n);
                    if i == j {
                        m[(i, i)] += 2.0 * c;
                    } else {
                        m[(i, j)] += c;
                        m[(j, i)] += c;
                    }
                }
                _ => return Err(BosonError::NotQuadratic),
            }
        }
        Ok(q)
    }

    pub fn to_boson(&self) -> BosonOperator {
        let mut op = BosonOperator::constant(self.space, self.c);
        let n = self.space.dim();
        let one = Monomial::one;
        for i in 0..n {
            op.add_term(Monomial::var(i), one(), self.x[i]);
            op.add_term(one(), Monomial::var(i), self.d[i]);
        }
        if let Some(b) = &self.xd {
            for i in 0..n {
                for j in 0..n {
                    op.add_term(Monomial::var(i), Monomial::var(j), b[(i, j)]);
                }
            }
        }
        for (m, is_x) in [(&self.xx, true), (&self.dd, false)] {
            let Some(m) = m else { continue };
            for i in 0..n {
                for j in i..n {
                    let c = if i == j { 0.5 * m[(i, i)] } else { m[(i, j)] };
                    let mono = Monomial::from_powers(vec![(i, 1), (j, 1)]);
                    if is_x {
                        op.add_term(mono, one(), c);
                    } else {
                        op.add_term(one(), mono, c);
                    }
                }
            }
        }
        op
    }

    pub fn max_abs(&self) -> f64 {
        let m = |o: &Option<Matrix>| o.as_ref().map_or(0.0, |m| m.amax());
        [m(&self.xx), m(&self.xd), m(&self.dd), self.x.amax(), self.d.amax(), self.c.abs()]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, BosonError> {
        Ok(self.sub(other)?.max_abs())
    }

    /// Matrix elements on the probe set.
    pub fn contract(&self, probes: &ProbeSet) -> Contraction {
        let tau = &probes.tau;
        let m = probes.forms.len();
        let xx = self.xx.as_ref().map_or(0.0, |a| tau.dot(&(a * tau)));
        let bt_tau = self.xd.as_ref().map(|b| b.tr_mul(tau));
        let bh = probes.forms.iter().map(|h| bt_tau.as_ref().map_or(0.0, |v| v.dot(h))).collect();
        let dh = probes.forms.iter().map(|h| self.d.dot(h)).collect();
        let mut hch = Matrix::zeros(m, m);
        if let Some(cm) = &self.dd {
            let ch: Vec<Vector> = probes.forms.iter().map(|h| cm * h).collect();
            for i in 0..m {
                for j in 0..m {
                    hch[(i, j)] = probes.forms[i].dot(&ch[j]);
                }
            }
        }
        Contraction { xx, x: self.x.dot(tau), c: self.c, bh, dh, hch, lv: probes.values() }
    }

    /// Matrix elements of `[self, other]` on the probe set, computed from
    /// matrix-vector products only.
    pub fn bracket_contraction(&self, other: &Self, probes: &ProbeSet) -> Result<Contraction, BosonError> {
        self.check(other)?;
        let p = Cached::new(self, probes);
        let q = Cached::new(other, probes);
        let m = probes.forms.len();
        let n = self.space.dim();
        let zero = Vector::zeros(n);
        let or0 = |v: &Option<Vector>| v.clone().unwrap_or_else(|| zero.clone());
        let (a1t, b1t, a2t, b2t) = (or0(&p.a_tau), or0(&p.bt_tau), or0(&q.a_tau), or0(&q.bt_tau));
        let (u1, w1, u2, w2) = (&self.x, &self.d, &other.x, &other.d);
        let xx = 2.0 * (b1t.dot(&a2t) - b2t.dot(&a1t));
        let x = b1t.dot(u2) - a1t.dot(w2) - b2t.dot(u1) + a2t.dot(w1);
        let tr = |a: &Option<Matrix>, c: &Option<Matrix>| match (a, c) {
            (Some(a), Some(c)) => a.dot(c),
            _ => 0.0,
        };
        let c = w1.dot(u2) - u1.dot(w2) + 0.5 * (tr(&other.xx, &self.dd) - tr(&self.xx, &other.dd));
        let get = |v: &Option<Vec<Vector>>, i: usize| v.as_ref().map(|v| v[i].clone()).unwrap_or_else(|| zero.clone());
        let mut bh = Vec::with_capacity(m);
        let mut dh = Vec::with_capacity(m);
        for i in 0..m {
            let (b1h, b2h, c1h, c2h) = (get(&p.b_h, i), get(&q.b_h, i), get(&p.c_h, i), get(&q.c_h, i));
            bh.push(b1t.dot(&b2h) - a1t.dot(&c2h) - b2t.dot(&b1h) + a2t.dot(&c1h));
            dh.push(c1h.dot(u2) - w2.dot(&b1h) - c2h.dot(u1) + w1.dot(&b2h));
        }
        let mut hch = Matrix::zeros(m, m);
        if p.c_h.is_some() || q.c_h.is_some() {
            for i in 0..m {
                for j in 0..m {
                    let (c1i, c2i, b1i, b2i) = (get(&p.c_h, i), get(&q.c_h, i), get(&p.b_h, i), get(&q.b_h, i));
                    let (c1j, c2j, b1j, b2j) = (get(&p.c_h, j), get(&q.c_h, j), get(&p.b_h, j), get(&q.b_h, j));
                    hch[(i, j)] = c1i.dot(&b2j) - b1i.dot(&c2j) - c2i.dot(&b1j) + b2i.dot(&c1j);
                }
            }
        }
        Ok(Contraction { xx, x, c, bh, dh, hch, lv: probes.values() })
    }
}

fn pair(m: &[(usize, u32)]) -> (usize, usize) {
    match m {
        [(i, 2)] => (*i, *i),
        [(i, 1), (j, 1)] => (*i, *j),
        _ => unreachable!("degree-2 monomial"),
    }
}

/// Matrix-vector products of one operator against the probes.
struct Cached {
    a_tau: Option<Vector>,
    bt_tau: Option<Vector>,
    b_h: Option<Vec<Vector>>,
    c_h: Option<Vec<Vector>>,
}

impl Cached {
    fn new(q: &QuadraticOperator, probes: &ProbeSet) -> Self {
        let tau = &probes.tau;
        let hs = &probes.forms;
        Self {
            a_tau: q.xx.as_ref().map(|a| a * tau),
            bt_tau: q.xd.as_ref().map(|b| b.tr_mul(tau)),
            b_h: q.xd.as_ref().map(|b| hs.iter().map(|h| b * h).collect()),
            c_h: q.dd.as_ref().map(|c| hs.iter().map(|h| c * h).collect()),
        }
    }
}

/// Evaluation point `τ` and linear functionals `ℓ_i(x) = h_i·x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    space: Space,
    tau: Vector,
    forms: Vec<Vector>,
}

/// `1`, `ℓ_i` or `ℓ_i ℓ_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    One,
    Linear(usize),
    Quadratic(usize, usize),
}

impl ProbeSet {
    pub fn new(space: Space, tau: Vector, forms: Vec<Vector>) -> Result<Self, BosonError> {
        let n = space.dim();
        if tau.len() != n || forms.iter().any(|h| h.len() != n) {
            return Err(BosonError::SpaceMismatch);
        }
        Ok(Self { space, tau, forms })
    }

    /// Smooth probes on modes `1..=interior`: `τ_k(t) = 0.3 sin(k + 2t)/k`
    /// and `ℓ = ∫ h(t) τ_k(t) dt` for `h ∈ {cos 2t, 1 + t²}`.
    pub fn smooth(space: Space, interior: usize) -> Result<Self, BosonError> {
        let interior = interior.min(space.k_max());
        let grid = space.grid();
        let s = grid.slots();
        let n = space.dim();
        let mut tau = Vector::zeros(n);
        let mut forms = Vec::new();
        let shapes: [fn(f64) -> f64; 2] = [|t| (2.0 * t).cos(), |t| 1.0 + t * t];
        for k in 1..=interior {
            let off = (k - 1) * s;
            for j in 0..s {
                let t = grid.time(j);
                tau[off + j] = 0.3 * (k as f64 + 2.0 * t).sin() / k as f64;
            }
            for h in shapes {
                let mut v = Vector::zeros(n);
                for j in 0..s {
                    v[off + j] = h(grid.time(j)) * grid.dt();
                }
                forms.push(v);
            }
        }
        Self::new(space, tau, forms)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn tau(&self) -> &Vector {
        &self.tau
    }

    pub fn forms(&self) -> &[Vector] {
        &self.forms
    }

    fn values(&self) -> Vec<f64> {
        self.forms.iter().map(|h| h.dot(&self.tau)).collect()
    }

    pub fn probes(&self) -> Vec<Probe> {
        let m = self.forms.len();
        let mut out = vec![Probe::One];
        out.extend((0..m).map(Probe::Linear));
        for i in 0..m {
            out.extend((i..m).map(|j| Probe::Quadratic(i, j)));
        }
        out
    }
}

/// Matrix elements of one operator on a probe set: the scalars
/// `τᵀAτ, u·τ, c, τᵀB h_i, w·h_i, h_iᵀC h_j` and the values `h_i·τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Contraction {
    xx: f64,
    x: f64,
    c: f64,
    bh: Vec<f64>,
    dh: Vec<f64>,
    hch: Matrix,
    lv: Vec<f64>,
}

impl Contraction {
    /// Elements of `u·x + xᵀB∂` from `u·τ` and `τᵀB h_i` alone.
    pub fn first_order(probes: &ProbeSet, u_tau: f64, bh: Vec<f64>) -> Self {
        let m = probes.forms.len();
        assert_eq!(bh.len(), m, "one value per probe form");
        Self { xx: 0.0, x: u_tau, c: 0.0, bh, dh: vec![0.0; m], hch: Matrix::zeros(m, m), lv: probes.values() }
    }

    /// `(Q F)(τ)`.
    pub fn element(&self, probe: Probe) -> f64 {
        let pre = 0.5 * self.xx + self.x + self.c;
        let first = |i: usize| self.bh[i] + self.dh[i];
        match probe {
            Probe::One => pre,
            Probe::Linear(i) => pre * self.lv[i] + first(i),
            Probe::Quadratic(i, j) => {
                pre * self.lv[i] * self.lv[j] + first(i) * self.lv[j] + first(j) * self.lv[i] + self.hch[(i, j)]
            }
        }
    }

    pub fn elements(&self, probes: &[Probe]) -> Vec<f64> {
        probes.iter().map(|&p| self.element(p)).collect()
    }

    /// Largest `|element|` over `probes`.
    pub fn max_abs(&self, probes: &[Probe]) -> f64 {
        probes.iter().map(|&p| self.element(p).abs()).fold(0.0, f64::max)
    }

    /// `self + s·other` (same probe set assumed).
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + s * y).collect();
        Self {
            xx: self.xx + s * other.xx,
            x: self.x + s * other.x,
            c: self.c + s * other.c,
            bh: zip(&self.bh, &other.bh),
            dh: zip(&self.dh, &other.dh),
            hch: &self.hch + &other.hch * s,
            lv: self.lv.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.axpy(s - 1.0, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boson::TimeGrid;

    fn sp() -> Space {
        Space::new(1, TimeGrid::new(0.1, 2).unwrap()).unwrap()
    }

    #[test]
    fn second_derivative_against_square() {
        // [∂², x²] = 4 x∂ + 2
        let s = sp();
        let e = ModeForm { mult: vec![(0, 1.0)], ..Default::default() };
        let d = ModeForm { deriv: vec![(0, 1.0)], ..Default::default() };
        let mut p = QuadraticOperator::zero(s);
        p.add_product(&d, &d, 1.0);
        let mut q = QuadraticOperator::zero(s);
        q.add_product(&e, &e, 1.0);
        let c = p.commutator(&q).unwrap();
        assert_eq!(c.xd().unwrap()[(0, 0)], 4.0);
        assert_eq!(c.c(), 2.0);
        assert!(c.xx().is_none() && c.dd().is_none());
    }

    #[test]
    fn boson_round_trip() {
        let s = sp();
        let a = ModeForm { mult: vec![(0, 1.0), (2, -0.5)], deriv: vec![(1, 2.0)], constant: 0.3 };
        let mut q = QuadraticOperator::zero(s);
        q.add_product(&a, &a, 0.7);
        let back = QuadraticOperator::from_boson(&q.to_boson()).unwrap();
        assert!(back.max_abs_diff(&q).unwrap() < 1e-15);
    }
}
