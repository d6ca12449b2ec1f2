use serde::{Deserialize, Serialize};

use super::NpError;

/// Single trajectory `λ(t_j)`, `t_j = j·dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPath {
    dt: f64,
    values: Vec<f64>,
}

impl SampledPath {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self, NpError> {
        if !(dt > 0.0 && dt.is_finite()) || values.len() < 3 || values.iter().any(|v| !v.is_finite()) {
            return Err(NpError::InvalidPath);
        }
        Ok(Self { dt, values })
    }

    /// `f` sampled on `cells + 1` equally spaced points of `[0, horizon]`.
    pub fn from_fn(horizon: f64, cells: usize, f: impl Fn(f64) -> f64) -> Result<Self, NpError> {
        let dt = horizon / cells as f64;
        Self::new(dt, (0..=cells).map(|j| f(j as f64 * dt)).collect())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.time(j)).collect()
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.len() - 1)
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, NpError> {
        if values.len() != self.len() {
            return Err(NpError::InvalidPath);
        }
        Self::new(self.dt, values)
    }

    /// `λ̇` by centered differences, second-order one-sided at both ends.
    pub fn derivative(&self) -> Vec<f64> {
        derivative(&self.values, self.dt)
    }

    /// Linear interpolation, clamped to the grid.
    pub fn interpolate(&self, t: f64) -> f64 {
        let pos = (t / self.dt).clamp(0.0, (self.len() - 1) as f64);
        let j = (pos.floor() as usize).min(self.len() - 2);
        let u = pos - j as f64;
        self.values[j] * (1.0 - u) + self.values[j + 1] * u
    }
}

pub(super) fn derivative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut d = vec![0.0; n];
    for j in 1..n - 1 {
        d[j] = (v[j + 1] - v[j - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    d
}

/// `N` trajectories on a common grid, stored slot-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleHistory {
    dt: f64,
    n: usize,
    positions: Vec<f64>,
}

impl ParticleHistory {
    pub fn new(dt: f64, n: usize, positions: Vec<f64>) -> Result<Self, NpError> {
        if n == 0 || positions.is_empty() || !positions.len().is_multiple_of(n) {
            return Err(NpError::HistoryShape { len: positions.len(), n });
        }
        if !(dt > 0.0) || positions.iter().any(|v| !v.is_finite()) {
            return Err(NpError::InvalidPath);
        }
        Ok(Self { dt, n, positions })
    }

    /// Particle `i` follows `f(i, t)` on `cells + 1` points of `[0, horizon]`.
    pub fn from_fn(n: usize, horizon: f64, cells: usize, f: impl Fn(usize, f64) -> f64) -> Result<Self, NpError> {
        let dt = horizon / cells as f64;
        let positions = (0..=cells).flat_map(|j| (0..n).map(move |i| (i, j as f64 * dt))).map(|(i, t)| f(i, t)).collect();
        Self::new(dt, n, positions)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn slots(&self) -> usize {
        self.positions.len() / self.n
    }

    pub fn positions(&self, slot: usize) -> &[f64] {
        &self.positions[slot * self.n..(slot + 1) * self.n]
    }

    pub fn particle(&self, i: usize) -> Vec<f64> {
        self.positions.iter().skip(i).step_by(self.n).copied().collect()
    }
}
