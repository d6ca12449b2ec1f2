//! Uniform time grid, polynomial test functions and the time derivation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::dense::QuadraticOperator;
use super::{BosonError, Space};

/// `t_j = j·dt`, `j = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, steps: usize) -> Result<Self, BosonError> {
        if !(dt > 0.0 && dt.is_finite()) || steps < 2 {
            return Err(BosonError::InvalidGrid { dt, steps });
        }
        Ok(Self { dt, steps })
    }

    /// Grid covering `[0, horizon]` with step `dt` (rounded to a whole count).
    pub fn covering(horizon: f64, dt: f64) -> Result<Self, BosonError> {
        let steps = (horizon / dt).round();
        if !(steps.is_finite() && steps >= 0.0) {
            return Err(BosonError::InvalidGrid { dt, steps: 0 });
        }
        Self::new(dt, steps as usize)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn slots(&self) -> usize {
        self.steps + 1
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.slots()).map(|j| self.time(j)).collect()
    }

    /// Centered first difference, one-sided in the first and last rows.
    pub fn difference_matrix(&self) -> DMatrix<f64> {
        let s = self.slots();
        let h = self.dt;
        let mut d = DMatrix::zeros(s, s);
        d[(0, 0)] = -1.0 / h;
        d[(0, 1)] = 1.0 / h;
        d[(s - 1, s - 2)] = -1.0 / h;
        d[(s - 1, s - 1)] = 1.0 / h;
        for j in 1..s - 1 {
            d[(j, j - 1)] = -0.5 / h;
            d[(j, j + 1)] = 0.5 / h;
        }
        d
    }
}

/// Real polynomial in `t`, coefficients in ascending order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimePoly(Vec<f64>);

impl TimePoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Self(coeffs);
        p.trim();
        p
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn zero() -> Self {
        Self(Vec::new())
    }

    /// `t`.
    pub fn identity() -> Self {
        Self::new(vec![0.0, 1.0])
    }

    /// `(4 t (h - t) / h²)^order`: equal to 1 at the midpoint, vanishing to
    /// order `order - 1` at `0` and `h`.
    pub fn bump(horizon: f64, order: u32) -> Self {
        let s = 4.0 / (horizon * horizon);
        let base = Self::new(vec![0.0, s * horizon, -s]);
        (0..order).fold(Self::constant(1.0), |acc, _| acc.mul(&base))
    }

    fn trim(&mut self) {
        while self.0.last() == Some(&0.0) {
            self.0.pop();
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// `∫_lo^hi p(t) dt`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        let anti = |t: f64| self.0.iter().enumerate().rev().fold(0.0, |acc, (i, c)| acc * t + c / (i + 1) as f64) * t;
        anti(hi) - anti(lo)
    }

    pub fn derivative(&self) -> Self {
        Self::new(self.0.iter().enumerate().skip(1).map(|(i, &c)| i as f64 * c).collect())
    }

    /// Antiderivative vanishing at `t = 0`.
    pub fn antiderivative(&self) -> Self {
        Self::new(std::iter::once(0.0).chain(self.0.iter().enumerate().map(|(i, &c)| c / (i + 1) as f64)).collect())
    }

    pub fn nth_derivative(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |p, _| p.derivative())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.0.len().max(other.0.len());
        let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        Self::new((0..n).map(|i| get(&self.0, i) + get(&other.0, i)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.0.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// Values on every grid slot.
    pub fn sample(&self, grid: &TimeGrid) -> Vec<f64> {
        grid.times().into_iter().map(|t| self.eval(t)).collect()
    }

    /// `ḟg - fġ`.
    pub fn wronskian(f: &Self, g: &Self) -> Self {
        f.derivative().mul(g).sub(&f.mul(&g.derivative()))
    }
}

/// `f(t)∂_t` as the derivation `Σ_{k,j} f(t_j) (D x_k)_j ∂/∂x_{k,j}` with `D`
/// the grid difference matrix.
///
/// On `∫g τ_k` it gives `Σ_j (Dᵀ(fg))_j x_{k,j} dt`, which is `-∫(fg)' τ_k`
/// away from the end slots; on `Σ_j γ_j ∂/∂x_{k,j}` the commutator
/// `[f∂_t, ·]` gives `-Σ_j f_j (Dγ)_j ∂/∂x_{k,j}`.
pub fn time_derivation(space: &Space, f: &TimePoly) -> QuadraticOperator {
    let grid = space.grid();
    let fv = f.sample(&grid);
    let d = grid.difference_matrix();
    let s = grid.slots();
    let mut q = QuadraticOperator::zero(*space);
    let b = q.xd_mut();
    for k in 0..space.k_max() {
        let off = k * s;
        for j in 0..s {
            if fv[j] == 0.0 {
                continue;
            }
            for jp in 0..s {
                let dj = d[(j, jp)];
                if dj != 0.0 {
                    b[(off + jp, off + j)] += fv[j] * dj;
                }
            }
        }
    }
    q
}
