//! Free bosons on a discretized time window.
//!
//! The configuration variables are `x_{k,j} ≈ τ_k(t_j)` for modes
//! `1 ≤ k ≤ K_max` and slots `0 ≤ j ≤ T`. Operators act on polynomials in
//! these variables. The static boson is local in time; the dynamical boson's
//! positive modes are retarded sums of derivatives through the kernel
//! `K(t_j - t_j')`.

pub mod dense;
pub mod poly;
pub mod time;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::fseries::TruncSeries;
use crate::kernel::{propagator_converged, KernelError, Potential};

pub use dense::{Contraction, Probe, ProbeSet, QuadraticOperator};
pub use poly::{BosonOperator, Monomial, PolyFunctional};
pub use time::{time_derivation, TimeGrid, TimePoly};

#[derive(Debug, Error)]
pub enum BosonError {
    #[error("operands live on different grids")]
    SpaceMismatch,
    #[error("invalid time grid: dt = {dt}, steps = {steps}")]
    InvalidGrid { dt: f64, steps: usize },
    #[error("mode {mode} outside 1..={k_max}")]
    ModeOutOfRange { mode: i64, k_max: usize },
    #[error("slot {slot} outside 0..={steps}")]
    SlotOutOfRange { slot: usize, steps: usize },
    #[error("weight coefficient of degree {0} is not determined")]
    WeightOutOfWindow(i32),
    #[error("operator has degree above 2")]
    NotQuadratic,
    #[error("time weights have length {got}, grid has {slots} slots")]
    TimeWeights { got: usize, slots: usize },
    #[error("particle number must be positive and finite, got {0}")]
    InvalidParticles(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Mode cutoff together with the time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Space {
    k_max: usize,
    grid: TimeGrid,
}

/// Grid variable `x_{mode, slot}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    pub mode: usize,
    pub slot: usize,
}

impl Var {
    pub fn new(mode: usize, slot: usize) -> Self {
        Self { mode, slot }
    }
}

impl Space {
    pub fn new(k_max: usize, grid: TimeGrid) -> Result<Self, BosonError> {
        if k_max == 0 {
            return Err(BosonError::ModeOutOfRange { mode: 0, k_max });
        }
        Ok(Self { k_max, grid })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.k_max * self.grid.slots()
    }

    pub fn index(&self, v: Var) -> Result<usize, BosonError> {
        if v.mode == 0 || v.mode > self.k_max {
            return Err(BosonError::ModeOutOfRange { mode: v.mode as i64, k_max: self.k_max });
        }
        if v.slot > self.grid.steps() {
            return Err(BosonError::SlotOutOfRange { slot: v.slot, steps: self.grid.steps() });
        }
        Ok((v.mode - 1) * self.grid.slots() + v.slot)
    }

    pub fn var(&self, index: usize) -> Var {
        let s = self.grid.slots();
        Var::new(index / s + 1, index % s)
    }

    fn check_slot(&self, slot: usize) -> Result<(), BosonError> {
        if slot > self.grid.steps() {
            return Err(BosonError::SlotOutOfRange { slot, steps: self.grid.steps() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    /// `φ̂`, local in time.
    Static,
    /// `ψ̂`, retarded through the kernel.
    Dynamic,
}

/// `Σ mult_i x_i + Σ deriv_i ∂_i + constant` with sparse coefficient lists.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModeForm {
    pub mult: Vec<(usize, f64)>,
    pub deriv: Vec<(usize, f64)>,
    pub constant: f64,
}

impl ModeForm {
    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.mult.iter().chain(&self.deriv).all(|&(_, c)| c == 0.0)
    }

    pub fn to_boson(&self, space: Space) -> BosonOperator {
        let mut op = BosonOperator::constant(space, self.constant);
        for &(i, c) in &self.mult {
            op.add_term(Monomial::var(i), Monomial::one(), c);
        }
        for &(i, c) in &self.deriv {
            op.add_term(Monomial::one(), Monomial::var(i), c);
        }
        op
    }
}

/// Static and dynamical free bosons for one potential and particle number.
#[derive(Debug, Clone)]
pub struct FreeBoson {
    space: Space,
    pot: Potential,
    n_particles: f64,
    /// `K(m·dt)` for `m = 0..=steps`, indices `0..=K_max`.
    lags: Vec<DMatrix<f64>>,
}

impl FreeBoson {
    pub fn new(space: Space, pot: Potential, n_particles: f64) -> Result<Self, BosonError> {
        if !(n_particles > 0.0 && n_particles.is_finite()) {
            return Err(BosonError::InvalidParticles(n_particles));
        }
        let grid = space.grid();
        let lags = (0..grid.slots())
            .map(|m| propagator_converged(&pot, m as f64 * grid.dt(), space.k_max()).map(|k| k.entries().clone()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { space, pot, n_particles, lags })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn potential(&self) -> &Potential {
        &self.pot
    }

    pub fn n_particles(&self) -> f64 {
        self.n_particles
    }

    /// `K(m·dt)`.
    pub fn kernel_lag(&self, m: usize) -> &DMatrix<f64> {
        &self.lags[m]
    }

    fn check_mode(&self, k: i64) -> Result<(), BosonError> {
        if k.unsigned_abs() as usize > self.space.k_max {
            return Err(BosonError::ModeOutOfRange { mode: k, k_max: self.space.k_max });
        }
        Ok(())
    }

    /// Mode `k` of the field at slot `j`.
    ///
    /// Negative modes are `β^{-1/2}|k| x_{|k|,j}` for both fields. The static
    /// positive modes are `β^{1/2} dt⁻¹ ∂_{k,j}` and the static zero mode
    /// vanishes. The dynamical zero mode is `-β^{1/2}N` and the dynamical
    /// positive modes are `β^{1/2} Σ_{j'≤j} Σ_l K_{kl}(t_j - t_j') ∂_{l,j'}`.
    pub fn mode(&self, field: Field, k: i64, j: usize) -> Result<ModeForm, BosonError> {
        self.check_mode(k)?;
        self.space.check_slot(j)?;
        let beta = self.pot.beta();
        if field == Field::Static || k < 0 {
            return static_mode(self.space, k, j, beta);
        }
        let mut f = ModeForm::default();
        if k == 0 {
            f.constant = -beta.sqrt() * self.n_particles;
            return Ok(f);
        }
        let s = self.space.grid().slots();
        let k = k as usize;
        for l in 1..=self.space.k_max {
            for jp in 0..=j {
                let c = self.lags[j - jp][(k, l)];
                if c != 0.0 {
                    f.deriv.push(((l - 1) * s + jp, beta.sqrt() * c));
                }
            }
        }
        Ok(f)
    }

    /// Sparse operator for one mode.
    pub fn boson(&self, field: Field, k: i64, j: usize) -> Result<BosonOperator, BosonError> {
        Ok(self.mode(field, k, j)?.to_boson(self.space))
    }

    fn check_time_weights(&self, w: &[f64]) -> Result<(), BosonError> {
        let slots = self.space.grid().slots();
        if w.len() != slots {
            return Err(BosonError::TimeWeights { got: w.len(), slots });
        }
        Ok(())
    }

    /// `Σ_j w_j ∮ P X(t_j) = Σ_j w_j Σ_p P_p X_p(t_j)`.
    pub fn linear_dense(&self, field: Field, weight: &TruncSeries, time_weights: &[f64]) -> Result<QuadraticOperator, BosonError> {
        self.check_time_weights(time_weights)?;
        let k = self.space.k_max as i64;
        let mut q = QuadraticOperator::zero(self.space);
        for p in -k..=k {
            let c = weight.coeff(p as i32).map_err(|_| BosonError::WeightOutOfWindow(p as i32))?;
            if c == 0.0 {
                continue;
            }
            for (j, &w) in time_weights.iter().enumerate() {
                if w != 0.0 {
                    q.add_mode(&self.mode(field, p, j)?, c * w);
                }
            }
        }
        Ok(q)
    }

    /// `Σ_j w_j ∮ u :X²:(t_j) = Σ_j w_j Σ_p u_p Σ_{a+b=p-1} :X_a X_b:(t_j)`,
    /// ordered pairs with `|a|, |b| ≤ K_max`.
    pub fn quadratic_dense(&self, field: Field, weight: &TruncSeries, time_weights: &[f64]) -> Result<QuadraticOperator, BosonError> {
        self.quadratic_dense_terms(field, &[(weight, time_weights)])
    }

    /// Sum of several [`quadratic_dense`](Self::quadratic_dense) terms on
    /// one field, built in a single pass.
    pub fn quadratic_dense_terms(&self, field: Field, terms: &[(&TruncSeries, &[f64])]) -> Result<QuadraticOperator, BosonError> {
        let km = self.space.k_max;
        let k = km as i64;
        // u_p for p = 1-2K ..= 2K+1, per term
        let mut coeffs = Vec::with_capacity(terms.len());
        for (weight, w) in terms {
            self.check_time_weights(w)?;
            let u = ((1 - 2 * k)..=(2 * k + 1))
                .map(|p| weight.coeff(p as i32).map_err(|_| BosonError::WeightOutOfWindow(p as i32)))
                .collect::<Result<Vec<_>, _>>()?;
            coeffs.push(u);
        }
        let mut q = QuadraticOperator::zero(self.space);
        let mut pp: Vec<DMatrix<f64>> = Vec::new();
        for j in 0..self.space.grid().slots() {
            let mut m = DMatrix::zeros(km + 1, km + 1);
            let pair = |a: i64, b: i64| -> f64 {
                terms.iter().zip(&coeffs).map(|((_, w), u)| u[(a + b + 2 * k) as usize] * w[j]).sum()
            };
            if terms.iter().any(|(_, w)| w[j] != 0.0) {
                let modes: Vec<ModeForm> = (-k..=k).map(|a| self.mode(field, a, j)).collect::<Result<_, _>>()?;
                for a in -k..=k {
                    for b in -k..=k {
                        let c = pair(a, b);
                        if c == 0.0 {
                            continue;
                        }
                        if field == Field::Dynamic && a > 0 && b > 0 {
                            m[(a as usize, b as usize)] += c;
                        } else {
                            q.add_product(&modes[(a + k) as usize], &modes[(b + k) as usize], c);
                        }
                    }
                }
            }
            pp.push(m);
        }
        if field == Field::Dynamic {
            self.add_retarded_pairs(&mut q, &pp);
        }
        Ok(q)
    }

    /// Adds `Σ_j Σ_{a,b>0} M_j[a][b] ψ̂_a(t_j) ψ̂_b(t_j)` slot block by slot
    /// block, using that `ψ̂_a(t_j)` only involves lags `K(t_j - t_j')`.
    fn add_retarded_pairs(&self, q: &mut QuadraticOperator, pp: &[DMatrix<f64>]) {
        let km = self.space.k_max;
        let s = self.space.grid().slots();
        let beta = self.pot.beta();
        let lag = |m: usize| self.lags[m].view((1, 1), (km, km));
        let mut block = DMatrix::zeros(km, km);
        for (j, m) in pp.iter().enumerate() {
            let mj = m.view((1, 1), (km, km));
            if mj.iter().all(|&v| v == 0.0) {
                continue;
            }
            // ½∂ᵀC∂ with C = 2β Σ K(j-j')ᵀ M_j K(j-j'')
            let mut left = Vec::with_capacity(j + 1);
            for jp in 0..=j {
                left.push(lag(j - jp).transpose() * mj * (2.0 * beta));
            }
            let c = q.dd_mut();
            for (jp, x) in left.iter().enumerate() {
                for jpp in 0..=j {
                    x.mul_to(&lag(j - jpp), &mut block);
                    for l in 0..km {
                        for n in 0..km {
                            c[(l * s + jp, n * s + jpp)] += block[(l, n)];
                        }
                    }
                }
            }
        }
    }

    /// Slot weights `dt·f(t_j)` for a time integral.
    pub fn integral_weights(&self, f: &TimePoly) -> Vec<f64> {
        let grid = self.space.grid();
        f.sample(&grid).into_iter().map(|v| v * grid.dt()).collect()
    }
}

fn static_mode(space: Space, k: i64, j: usize, beta: f64) -> Result<ModeForm, BosonError> {
    if k.unsigned_abs() as usize > space.k_max {
        return Err(BosonError::ModeOutOfRange { mode: k, k_max: space.k_max });
    }
    space.check_slot(j)?;
    let s = space.grid().slots();
    let mut f = ModeForm::default();
    if k < 0 {
        let a = k.unsigned_abs() as usize;
        f.mult.push(((a - 1) * s + j, a as f64 / beta.sqrt()));
    } else if k > 0 {
        f.deriv.push(((k as usize - 1) * s + j, beta.sqrt() / space.grid().dt()));
    }
    Ok(f)
}

/// `φ̂_k(t_j)`.
pub fn static_boson(space: Space, k: i64, j: usize, beta: f64) -> Result<BosonOperator, BosonError> {
    Ok(static_mode(space, k, j, beta)?.to_boson(space))
}

/// `ψ̂_k(t_j)`; builds the kernel lags afresh, so prefer [`FreeBoson::boson`]
/// when many modes are needed.
pub fn dynamic_boson(space: Space, k: i64, j: usize, pot: &Potential, n_particles: f64) -> Result<BosonOperator, BosonError> {
    FreeBoson::new(space, pot.clone(), n_particles)?.boson(Field::Dynamic, k, j)
}

/// `∮ u :X²:(t_j)` as a sparse operator.
pub fn normal_ordered_quadratic(boson: &FreeBoson, field: Field, weight: &TruncSeries, j: usize) -> Result<BosonOperator, BosonError> {
    boson.space.check_slot(j)?;
    Ok(boson.quadratic_dense(field, weight, &at_slot(boson.space, j))?.to_boson())
}

/// Weights selecting a single slot.
pub fn at_slot(space: Space, j: usize) -> Vec<f64> {
    let mut w = vec![0.0; space.grid().slots()];
    if j < w.len() {
        w[j] = 1.0;
    }
    w
}
