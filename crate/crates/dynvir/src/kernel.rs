//! Propagator of the linearized mode dynamics.
//!
//! Modes evolve as `π̇ = A π` with
//!
//! ```text
//! A[k][k-2]   = -(β/2 - 1) k (k-1)
//! A[k][k+l-1] = -k b_l
//! ```
//!
//! and `K(t) = exp(tA)`. Three routes are provided: the matrix exponential,
//! the β = 2 characteristics `K_t(z⁻¹, w) = 1/(1 - w(t)/z)`, and the Hermite
//! closed form obtained from the Gaussian-times-rescaling solution of the
//! exponential generating function `ρ(ζ) = Σ π_k ζ^k / k!`.
//!
//! Truncating `A` at a mode cutoff is exact when `β = 2` (upper triangular)
//! or when `b` has degree ≤ 1 (lower triangular). Otherwise the top-left
//! block of the exponential moves with the cutoff; see
//! [`propagator_converged`].

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fseries::{End, SeriesError, TruncSeries};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("beta must be finite and non-negative (positive for closed-form kernels), got {0}")]
    InvalidBeta(f64),
    #[error("force coefficient index must be >= 1")]
    ZeroForceIndex,
    #[error("force coefficient b_{0} is not finite")]
    NonFiniteForce(usize),
    #[error("mode cutoff {k_max} is below the force degree {l_max}")]
    CutoffTooSmall { k_max: usize, l_max: usize },
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("times must satisfy t > t' > t'', got {0:?}")]
    UnorderedTimes([f64; 3]),
    #[error("series input must lie in degrees <= -1")]
    NotInMinusHalf,
    #[error("padded propagator did not settle below cutoff {0}")]
    NotConverged(usize),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Matrix = DMatrix<f64>;

/// Inverse temperature and force coefficients `V₀'(λ) = Σ_l b_l λ^l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialRepr", into = "PotentialRepr")]
pub struct Potential {
    beta: f64,
    b: BTreeMap<usize, f64>,
}

#[derive(Serialize, Deserialize)]
struct PotentialRepr {
    beta: f64,
    b: BTreeMap<usize, f64>,
}

impl TryFrom<PotentialRepr> for Potential {
    type Error = KernelError;
    fn try_from(r: PotentialRepr) -> Result<Self, Self::Error> {
        Potential::new(r.beta, r.b)
    }
}

impl From<Potential> for PotentialRepr {
    fn from(p: Potential) -> Self {
        PotentialRepr { beta: p.beta, b: p.b }
    }
}

impl Potential {
    pub fn new(beta: f64, b: impl IntoIterator<Item = (usize, f64)>) -> Result<Self, KernelError> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(KernelError::InvalidBeta(beta));
        }
        let mut map = BTreeMap::new();
        for (l, c) in b {
            if l == 0 {
                return Err(KernelError::ZeroForceIndex);
            }
            if !c.is_finite() {
                return Err(KernelError::NonFiniteForce(l));
            }
            if c != 0.0 {
                *map.entry(l).or_insert(0.0) += c;
            }
        }
        Ok(Self { beta, b: map })
    }

    /// `b = {1: 1/σ²}`.
    pub fn hermite(sigma: f64, beta: f64) -> Result<Self, KernelError> {
        Self::new(beta, [(1, 1.0 / (sigma * sigma))])
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn b(&self) -> &BTreeMap<usize, f64> {
        &self.b
    }

    pub fn b_coeff(&self, l: usize) -> f64 {
        self.b.get(&l).copied().unwrap_or(0.0)
    }

    /// Highest index with nonzero `b_l` (0 for the free case).
    pub fn l_max(&self) -> usize {
        self.b.keys().next_back().copied().unwrap_or(0)
    }

    /// `σ²` when the force is exactly linear.
    pub fn hermite_sigma_sq(&self) -> Option<f64> {
        match (self.b.len(), self.b.get(&1)) {
            (1, Some(&b1)) => Some(1.0 / b1),
            _ => None,
        }
    }

    /// `V₀'(λ)`.
    pub fn force(&self, lambda: f64) -> f64 {
        self.b.iter().map(|(&l, &c)| c * lambda.powi(l as i32)).sum()
    }

    /// `V₀''(λ)`.
    pub fn force_deriv(&self, lambda: f64) -> f64 {
        self.b
            .iter()
            .map(|(&l, &c)| c * l as f64 * lambda.powi(l as i32 - 1))
            .sum()
    }

    /// `b(z) = Σ b_l z^l` as an exact polynomial.
    pub fn b_series(&self) -> TruncSeries {
        let hi = self.l_max().max(1);
        TruncSeries::from_fn(0, hi as i32, End::Exact, End::Exact, |l| self.b_coeff(l as usize))
    }

    /// `(β/2 - 1)`, the weight of the `∂_z²` part of the generator.
    pub fn diffusion_weight(&self) -> f64 {
        self.beta / 2.0 - 1.0
    }

    /// True when every mode cutoff gives the exact top-left block.
    pub fn closes_under_truncation(&self) -> bool {
        self.beta == 2.0 || self.l_max() <= 1
    }
}

/// `K_{kl}(t)` for `0 ≤ k, l ≤ K_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    t: f64,
    entries: Matrix,
}

impl KernelMatrix {
    pub fn new(t: f64, entries: Matrix) -> Self {
        Self { t, entries }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn k_max(&self) -> usize {
        self.entries.nrows() - 1
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.entries[(k, l)]
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.entries - &other.entries).amax()
    }

    /// Row-major CSV with header `k,l,t,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), KernelError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "l", "t", "value"])?;
        for k in 0..=self.k_max() {
            for l in 0..=self.k_max() {
                out.serialize((k, l, self.t, self.entries[(k, l)]))?;
            }
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Mode form `A` of the linearized generator.
pub fn generator_matrix(pot: &Potential, k_max: usize) -> Result<Matrix, KernelError> {
    if k_max < pot.l_max() {
        return Err(KernelError::CutoffTooSmall { k_max, l_max: pot.l_max() });
    }
    Ok(generator_unchecked(pot, k_max))
}

fn generator_unchecked(pot: &Potential, n: usize) -> Matrix {
    let mut a = Matrix::zeros(n + 1, n + 1);
    let w = pot.diffusion_weight();
    for k in 2..=n {
        a[(k, k - 2)] = -w * (k * (k - 1)) as f64;
    }
    for k in 1..=n {
        for (&l, &bl) in pot.b() {
            if l + k - 1 <= n {
                a[(k, l + k - 1)] += -(k as f64) * bl;
            }
        }
    }
    a
}

/// Matrix exponential by scaling and squaring around a Taylor series.
pub fn expm(a: &Matrix) -> Matrix {
    const TOL: f64 = 1e-13;
    let n = a.nrows();
    let norm = a.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a / 2f64.powi(squarings as i32);
    let mut sum = Matrix::identity(n, n);
    let mut term = Matrix::identity(n, n);
    for j in 1..64 {
        term = &term * &scaled / j as f64;
        sum += &term;
        if term.amax() < TOL * 1e-3 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `K(t) = exp(tA)` at cutoff `k_max`.
pub fn propagator(pot: &Potential, t: f64, k_max: usize) -> Result<KernelMatrix, KernelError> {
    if t < 0.0 {
        return Err(KernelError::NegativeTime(t));
    }
    let a = generator_matrix(pot, k_max)?;
    Ok(KernelMatrix::new(t, expm(&(a * t))))
}

/// Top-left `(k_max+1)²` block of `exp(tA_N)` for growing padded cutoffs
/// `N`, returned once two successive blocks agree to `1e-12` relative.
///
/// For potentials that close under truncation this is [`propagator`].
pub fn propagator_converged(pot: &Potential, t: f64, k_max: usize) -> Result<KernelMatrix, KernelError> {
    let (full, _) = padded_exponential(pot, t, k_max)?;
    let block = full.view((0, 0), (k_max + 1, k_max + 1)).into_owned();
    Ok(KernelMatrix::new(t, block))
}

/// Padded exponential and the padded cutoff used.
fn padded_exponential(pot: &Potential, t: f64, k_max: usize) -> Result<(Matrix, usize), KernelError> {
    if t < 0.0 {
        return Err(KernelError::NegativeTime(t));
    }
    if k_max < pot.l_max() {
        return Err(KernelError::CutoffTooSmall { k_max, l_max: pot.l_max() });
    }
    if pot.closes_under_truncation() {
        return Ok((expm(&(generator_unchecked(pot, k_max) * t)), k_max));
    }
    const STEP: usize = 8;
    const LIMIT: usize = 160;
    let block = |m: &Matrix| m.view((0, 0), (k_max + 1, k_max + 1)).into_owned();
    let mut n = k_max + STEP;
    let mut prev = expm(&(generator_unchecked(pot, n) * t));
    while n < k_max + LIMIT {
        let next_n = n + STEP;
        let next = expm(&(generator_unchecked(pot, next_n) * t));
        let diff = (block(&next) - block(&prev)).amax();
        let scale = block(&next).amax().max(1.0);
        if diff <= 1e-12 * scale {
            return Ok((next, next_n));
        }
        n = next_n;
        prev = next;
    }
    Err(KernelError::NotConverged(k_max + LIMIT))
}

/// Solve `ẇ = -b(w)`, `w(0) = w`, as a power series in `w` truncated at
/// `w^order`, by RK4 on the coefficient system.
pub fn characteristics_flow(
    b: &BTreeMap<usize, f64>,
    w_order: usize,
    t: f64,
) -> Result<TruncSeries, KernelError> {
    if t < 0.0 {
        return Err(KernelError::NegativeTime(t));
    }
    let order = w_order.max(1);
    let series = |c: &[f64]| TruncSeries::with_ends(0, c.to_vec(), End::Exact, End::Truncated);
    let rhs = |c: &[f64]| -> Result<Vec<f64>, KernelError> {
        let w = series(c);
        let mut out = vec![0.0; order + 1];
        let mut power = w.clone();
        let lmax = b.keys().next_back().copied().unwrap_or(0);
        for l in 1..=lmax {
            if l > 1 {
                power = power.mul(&w, 0..=order as i32)?;
            }
            if let Some(&bl) = b.get(&l) {
                for (n, o) in out.iter_mut().enumerate() {
                    *o -= bl * power.coeff(n as i32)?;
                }
            }
        }
        Ok(out)
    };
    let mut c = vec![0.0; order + 1];
    c[1] = 1.0;
    let steps = (t / 1e-3).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let axpy = |x: &[f64], k: &[f64], s: f64| x.iter().zip(k).map(|(a, b)| a + s * b).collect::<Vec<_>>();
    for _ in 0..steps {
        let k1 = rhs(&c)?;
        let k2 = rhs(&axpy(&c, &k1, h / 2.0))?;
        let k3 = rhs(&axpy(&c, &k2, h / 2.0))?;
        let k4 = rhs(&axpy(&c, &k3, h))?;
        for i in 0..=order {
            c[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(series(&c))
}

/// β = 2 kernel read off from powers of the characteristic `w(t)`:
/// `K_{kl}(t) = [w^l] w(t)^k`.
pub fn kernel_beta2_closed(
    b: &BTreeMap<usize, f64>,
    t: f64,
    k_max: usize,
) -> Result<KernelMatrix, KernelError> {
    let w = characteristics_flow(b, k_max, t)?;
    let n = k_max + 1;
    let mut m = Matrix::zeros(n, n);
    m[(0, 0)] = 1.0;
    let mut power = TruncSeries::with_ends(0, vec![1.0], End::Exact, End::Exact);
    for k in 1..=k_max {
        power = power.mul(&w, 0..=k_max as i32)?;
        for l in 0..=k_max {
            m[(k, l)] = power.coeff(l as i32)?;
        }
    }
    Ok(KernelMatrix::new(t, m))
}

/// Width `g(t)` of the Gaussian factor in the Hermite solution
/// `ρ(ζ, t) = exp(g(t) ζ²) ρ(e^{-t/σ²} ζ, 0)`.
///
/// `g` solves `ġ + 2g/σ² = -(β/2 - 1)` with `g(0) = 0`.
pub fn hermite_width(sigma: f64, beta: f64, t: f64) -> f64 {
    let s2 = sigma * sigma;
    -(beta / 2.0 - 1.0) * s2 / 2.0 * (1.0 - (-2.0 * t / s2).exp())
}

/// `C(k, m) = k! / (m! (k-2m)!) · g^m`, the weight of `π_{k-2m}(0)` (before
/// the exponential decay factor) in `π_k(t)`.
pub fn hermite_coefficient(k: usize, m: usize, g: f64) -> f64 {
    if 2 * m > k {
        return 0.0;
    }
    // k!/(m!(k-2m)!) built as a running product to stay exact for small k.
    let mut c = 1.0;
    for i in 0..2 * m {
        c *= (k - i) as f64;
    }
    for i in 1..=m {
        c /= i as f64;
    }
    c * g.powi(m as i32)
}

/// Hermite-case kernel
/// `K_{k,k-2m}(t) = C(k,m) e^{-(k-2m)t/σ²}`.
pub fn hermite_kernel(sigma: f64, beta: f64, t: f64, k_max: usize) -> Result<KernelMatrix, KernelError> {
    if t < 0.0 {
        return Err(KernelError::NegativeTime(t));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(KernelError::InvalidBeta(beta));
    }
    let s2 = sigma * sigma;
    let g = hermite_width(sigma, beta, t);
    let n = k_max + 1;
    let mut m = Matrix::zeros(n, n);
    for k in 0..=k_max {
        for j in 0..=k / 2 {
            let l = k - 2 * j;
            m[(k, l)] = hermite_coefficient(k, j, g) * (-(l as f64) * t / s2).exp();
        }
    }
    Ok(KernelMatrix::new(t, m))
}

/// `exp(t ∂_z²) π₀` on the degree window `lowest..=-1`.
pub fn heat_action(pi0: &TruncSeries, t: f64, lowest: i32) -> Result<TruncSeries, KernelError> {
    let (_, above) = pi0.ends();
    if above == End::Truncated || (0..=pi0.hi_deg()).any(|n| pi0.coeff(n) != Ok(0.0)) {
        return Err(KernelError::NotInMinusHalf);
    }
    let window = lowest..=-1;
    let mut term = pi0.clone();
    let mut acc = term.restrict(window.clone())?;
    for m in 1.. {
        term = term.differentiate().differentiate().scale(t / m as f64);
        if term.hi_deg() < lowest {
            break;
        }
        let inc = term.restrict(window.clone())?;
        if inc.max_abs() < 1e-15 {
            break;
        }
        acc = acc.add(&inc)?;
    }
    Ok(acc)
}

/// `l · K_{kl}(t)`: mode form of `G⁺_t(z⁻¹, w) = (1/z) ∂_w K_t(z⁻¹, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorModes {
    t: f64,
    retarded: bool,
    entries: Matrix,
}

impl PropagatorModes {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn is_retarded(&self) -> bool {
        self.retarded
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.entries[(k, l)]
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    /// `G⁻` under the transpose convention.
    pub fn advanced(&self) -> Self {
        Self { t: self.t, retarded: false, entries: self.entries.transpose() }
    }
}

pub fn retarded_propagator_modes(pot: &Potential, t: f64, k_max: usize) -> Result<PropagatorModes, KernelError> {
    let k = propagator(pot, t, k_max)?;
    Ok(retarded_from_kernel(&k))
}

pub fn retarded_from_kernel(k: &KernelMatrix) -> PropagatorModes {
    let mut e = k.entries().clone();
    for (l, mut col) in e.column_iter_mut().enumerate() {
        col *= l as f64;
    }
    PropagatorModes { t: k.t(), retarded: true, entries: e }
}

/// Residuals of the kernel identities, each scaled by `max(1, |reference|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelIdentityReport {
    /// `K(t-t')K(t'-t'') - K(t-t'')`.
    pub semigroup: f64,
    /// `A·K` against the forward equation assembled from `b(z)` by series calculus.
    pub forward: f64,
    /// `A·K` against the backward equation assembled the same way.
    pub backward: f64,
    /// Central-difference `dK/dt` (one Richardson step) against `A·K`.
    pub forward_fd: f64,
    /// Finite-difference check of the contour identity with `u = 1`.
    pub lemma_u1: f64,
    /// Same with `u = z`.
    pub lemma_uz: f64,
}

impl KernelIdentityReport {
    pub fn max_generator(&self) -> f64 {
        self.semigroup.max(self.forward).max(self.backward)
    }

    pub fn max_lemma(&self) -> f64 {
        self.lemma_u1.max(self.lemma_uz)
    }
}

fn scaled(diff: f64, reference: f64) -> f64 {
    diff / reference.max(1.0)
}

/// Forward equation `d/dt C = 𝒫₋((b C)') - (β/2-1) C''` applied column by
/// column to `C_m(z) = Σ_k K_{km} z^{-k-1}`. Rows whose value depends on
/// modes past the cutoff come back as `None`.
fn forward_by_series(pot: &Potential, k: &Matrix) -> Result<Vec<Vec<Option<f64>>>, KernelError> {
    let n = k.nrows() - 1;
    let b = pot.b_series();
    let w = pot.diffusion_weight();
    let mut out = vec![vec![None; n + 1]; n + 1];
    for m in 0..=n {
        let col = TruncSeries::from_fn(-(n as i32) - 1, -1, End::Truncated, End::Exact, |d| k[((-d - 1) as usize, m)]);
        let bc = col.mul_reliable(&b)?.differentiate().minus();
        let dd = col.differentiate().differentiate();
        for row in 0..=n {
            let d = -(row as i32) - 1;
            if let (Ok(x), Ok(y)) = (bc.coeff(d), dd.coeff(d)) {
                out[row][m] = Some(x - w * y);
            }
        }
    }
    Ok(out)
}

/// Backward equation `d/dt r = -b(w) r' - (β/2-1) r''` on each row
/// `r_k(w) = Σ_l K_{kl} w^l`.
fn backward_by_series(pot: &Potential, k: &Matrix) -> Result<Vec<Vec<Option<f64>>>, KernelError> {
    let n = k.nrows() - 1;
    let b = pot.b_series();
    let w = pot.diffusion_weight();
    let mut out = vec![vec![None; n + 1]; n + 1];
    for row in 0..=n {
        let r = TruncSeries::from_fn(0, n as i32, End::Exact, End::Truncated, |d| k[(row, d as usize)]);
        let dr = r.differentiate();
        let brp = dr.mul_reliable(&b)?;
        let dd = dr.differentiate();
        for m in 0..=n {
            if let (Ok(x), Ok(y)) = (brp.coeff(m as i32), dd.coeff(m as i32)) {
                out[row][m] = Some(-x - w * y);
            }
        }
    }
    Ok(out)
}

/// Intermediate mode matrix of `∮ (dw/w) c(w) ∂_w^r K₁(z⁻¹,w) K₂(w⁻¹,ζ)`:
/// entry `(l, m)` with `m = l - r + q` carries `c_q · l(l-1)…(l-r+1)`.
fn contour_insert(n: usize, c: &[(i32, f64)], r: usize) -> Matrix {
    let mut d = Matrix::zeros(n + 1, n + 1);
    for l in 0..=n {
        let falling: f64 = (0..r).map(|i| l as f64 - i as f64).product();
        if falling == 0.0 {
            continue;
        }
        for &(q, cq) in c {
            let m = l as i32 - r as i32 + q;
            if (0..=n as i32).contains(&m) {
                d[(l, m as usize)] += cq * falling;
            }
        }
    }
    d
}

/// Polynomial product of sparse `(degree, coeff)` lists.
fn poly_mul(a: &[(i32, f64)], b: &[(i32, f64)]) -> Vec<(i32, f64)> {
    let mut map: BTreeMap<i32, f64> = BTreeMap::new();
    for &(i, x) in a {
        for &(j, y) in b {
            *map.entry(i + j).or_insert(0.0) += x * y;
        }
    }
    map.into_iter().filter(|&(_, c)| c != 0.0).collect()
}

fn poly_deriv(a: &[(i32, f64)]) -> Vec<(i32, f64)> {
    a.iter().filter(|&&(i, _)| i != 0).map(|&(i, c)| (i - 1, c * i as f64)).collect()
}

/// `∂_{t'} ∮ (dw/w) u ∂_w K_{t-t'} K_{t'-s}` by finite differences against
/// `∮ (dw/w) [(u b' - u' b) ∂_w K - (β/2-1)(u'' ∂_w K + 2u' ∂_w² K)] K`.
fn lemma_residual(pot: &Potential, times: [f64; 3], k_max: usize, u: &[(i32, f64)]) -> Result<f64, KernelError> {
    let [t, tp, s] = times;
    // The insertion lowers the mode index, so rows past the cutoff feed the
    // block even when the exponential itself closes.
    let (_, n) = padded_exponential(pot, t - s, k_max)?;
    let n = n.max(k_max + pot.l_max() + 2);
    let a = generator_unchecked(pot, n);
    let d_u = contour_insert(n, u, 1);
    let lhs_at = |x: f64| expm(&(&a * (t - x))) * &d_u * expm(&(&a * (x - s)));
    let h = 1e-5;
    let central = |h: f64| (lhs_at(tp + h) - lhs_at(tp - h)) / (2.0 * h);
    let lhs = (central(h / 2.0) * 4.0 - central(h)) / 3.0;

    let b: Vec<(i32, f64)> = pot.b().iter().map(|(&l, &c)| (l as i32, c)).collect();
    let du = poly_deriv(u);
    let ddu = poly_deriv(&du);
    let mut first: Vec<(i32, f64)> = poly_mul(u, &poly_deriv(&b));
    first.extend(poly_mul(&du, &b).into_iter().map(|(i, c)| (i, -c)));
    let w = pot.diffusion_weight();
    let mut mid = contour_insert(n, &first, 1);
    mid -= contour_insert(n, &ddu, 1) * w;
    mid -= contour_insert(n, &du, 2) * (2.0 * w);
    let rhs = expm(&(&a * (t - tp))) * mid * expm(&(&a * (tp - s)));

    let block = |m: &Matrix| m.view((0, 0), (k_max + 1, k_max + 1)).into_owned();
    let (l, r) = (block(&lhs), block(&rhs));
    Ok(scaled((&l - &r).amax(), r.amax()))
}

/// Residuals of the semigroup, Kolmogorov and contour-derivative identities
/// at ordered times `t > t' > t''`.
pub fn verify_kernel_identities(
    pot: &Potential,
    times: [f64; 3],
    k_max: usize,
) -> Result<KernelIdentityReport, KernelError> {
    let [t, tp, tpp] = times;
    if !(t > tp && tp > tpp && tpp >= 0.0) {
        return Err(KernelError::UnorderedTimes(times));
    }
    let a = generator_matrix(pot, k_max)?;
    let k = |x: f64| expm(&(&a * x));

    let lhs = k(t - tp) * k(tp - tpp);
    let rhs = k(t - tpp);
    let semigroup = scaled((&lhs - &rhs).amax(), rhs.amax());

    let kt = k(t);
    let ak = &a * &kt;
    let compare = |table: Vec<Vec<Option<f64>>>| {
        let mut worst = 0.0f64;
        for (i, row) in table.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    worst = worst.max((v - ak[(i, j)]).abs());
                }
            }
        }
        scaled(worst, ak.amax())
    };
    let forward = compare(forward_by_series(pot, &kt)?);
    let backward = compare(backward_by_series(pot, &kt)?);

    let h = 1e-4;
    let central = |h: f64| (k(t + h) - k(t - h)) / (2.0 * h);
    let fd = (central(h / 2.0) * 4.0 - central(h)) / 3.0;
    let forward_fd = scaled((&fd - &ak).amax(), ak.amax());

    let lemma_u1 = lemma_residual(pot, times, k_max, &[(0, 1.0)])?;
    let lemma_uz = lemma_residual(pot, times, k_max, &[(1, 1.0)])?;

    Ok(KernelIdentityReport { semigroup, forward, backward, forward_fd, lemma_u1, lemma_uz })
}
