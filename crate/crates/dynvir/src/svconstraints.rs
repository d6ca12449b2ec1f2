//! Equilibrium Virasoro operators and the dynamical constraints `L^a_{-1}`,
//! `L^a_0` on the time grid, with checks of their bracket relations.
//!
//! Constraint parts are kept as [`QuadraticOperator`]s. Every operator here
//! has degree at most two, so brackets are exact in that form and matrix
//! elements on degree ≤ 2 probe functionals determine them.
//!
//! Normalization follows the test function `a` of the `L^a_n` family:
//!
//! ```text
//! L^a_{-1,lin}   = β^{-1/2} ∫ { ä ∮zψ̂ - a ∮((β/2-1)b'' + b'b)ψ̂ }
//! L^a_{-1,quadr} = -½ ∫ { ȧ ∮:ψ̂²: + a ∮b':ψ̂²: + a ∮:φ̂²: }
//! L^a_{0,lin}    = ½ (β/2-1) N ∫ä + ½ β^{-1/2} ∫ { ½ a⃛ ∮z²ψ̂ - ȧ ∮((β/2-1)(zb)'' + (zb)'b)ψ̂ }
//! L^a_{0,quadr}  = -a∂_t - ¼ ∫ { ä ∮z:ψ̂²: + ȧ ∮(zb)':ψ̂²: + ȧ ∮z:φ̂²: }
//! ```
//!
//! With the functional time derivation these close with reversed sign:
//! `[L^f_0, L^g_0] = -L^{ḟg-fġ}_0`, `[L^f_{-1}, L^g_0] = -L^{ḟg-½fġ}_{-1}` and
//! `[L^f_{-1}, L^g_{-1}] = 0`, split into quadratic and linear parts.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boson::{
    time_derivation, BosonError, BosonOperator, Contraction, Field, FreeBoson, Probe, ProbeSet,
    QuadraticOperator, Space, TimeGrid, TimePoly, Var,
};
use crate::dyson::{bootstrap_se, bootstrap_se_columns, pairwise_sum, DysonError, Ensemble, Estimate};
use crate::fseries::{SeriesError, TruncSeries};
use crate::kernel::Potential;

#[derive(Debug, Error)]
pub enum SvError {
    #[error(transparent)]
    Boson(#[from] BosonError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("test function derivative of order {order} is {value:e} at t = {t}, expected compact support")]
    Support { order: usize, t: f64, value: f64 },
    #[error("mode shift {mode} leaves the window 1..={k_max}")]
    Window { mode: i64, k_max: usize },
    #[error("time grid must span a positive horizon")]
    Horizon,
    #[error(transparent)]
    Dyson(#[from] DysonError),
}

/// `L^{2a}_0 = L0_DOUBLING · L^a_0`: the normalization of the pre-theorem
/// derivation, whose differential part is `-2a∂_t`.
pub const L0_DOUBLING: f64 = 2.0;

/// Single-slot space for equilibrium variables `τ_k = x_{k,0}`.
pub fn equilibrium_space(k_max: usize) -> Result<Space, SvError> {
    Ok(Space::new(k_max, TimeGrid::new(1.0, 2)?)?)
}

fn tau(space: Space, k: usize) -> Result<BosonOperator, SvError> {
    Ok(BosonOperator::multiplier(space, Var::new(k, 0), 1.0)?)
}

fn d_tau(space: Space, k: usize, c: f64) -> Result<BosonOperator, SvError> {
    Ok(BosonOperator::derivative(space, Var::new(k, 0), c)?)
}

/// `L̂_n = Σ_k kτ_k ∂_{k+n} + (β/2) Σ_{k=1}^{n-1} ∂_k ∂_{n-k}`, `n ≥ -1`, with
/// modes past the cutoff dropped.
pub fn virasoro_hat(n: i64, beta: f64, space: Space) -> Result<BosonOperator, SvError> {
    if n < -1 {
        return Err(SvError::Window { mode: n, k_max: space.k_max() });
    }
    let km = space.k_max() as i64;
    let mut op = BosonOperator::zero(space);
    for k in 1..=km {
        let target = k + n;
        if (1..=km).contains(&target) {
            op = op.add(&tau(space, k as usize)?.compose(&d_tau(space, target as usize, k as f64)?)?)?;
        }
    }
    for k in 1..n {
        if n - k <= km && k <= km {
            let dd = d_tau(space, k as usize, beta / 2.0)?.compose(&d_tau(space, (n - k) as usize, 1.0)?)?;
            op = op.add(&dd)?;
        }
    }
    Ok(op)
}

/// `L̂_n + β^{-1/2}[Σ_k b_k â_{n+k+1} + (β/2-1)(n+1)â_n]` with
/// `â_m = β^{1/2}∂_m` for `m ≥ 1` and `â_0 = 0`.
pub fn equilibrium_virasoro_op(n: i64, pot: &Potential, space: Space) -> Result<BosonOperator, SvError> {
    let km = space.k_max() as i64;
    let top = n + pot.l_max() as i64 + 1;
    if top > km {
        return Err(SvError::Window { mode: top, k_max: space.k_max() });
    }
    let mut op = virasoro_hat(n, pot.beta(), space)?;
    for (&k, &b) in pot.b() {
        let m = n + k as i64 + 1;
        if m >= 1 {
            op = op.add(&d_tau(space, m as usize, b)?)?;
        }
    }
    if n >= 1 {
        op = op.add(&d_tau(space, n as usize, pot.diffusion_weight() * (n + 1) as f64)?)?;
    }
    Ok(op)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintIndex {
    MinusOne,
    Zero,
}

/// Grid realization of `L^a_n`.
#[derive(Debug, Clone)]
pub struct ConstraintOp {
    index: ConstraintIndex,
    a: TimePoly,
    linear: QuadraticOperator,
    quadratic: QuadraticOperator,
    differential: QuadraticOperator,
}

impl ConstraintOp {
    pub fn index(&self) -> ConstraintIndex {
        self.index
    }

    pub fn test_function(&self) -> &TimePoly {
        &self.a
    }

    /// Pure derivative part plus constant.
    pub fn linear(&self) -> &QuadraticOperator {
        &self.linear
    }

    /// Normal-ordered quadratic part, without `-a∂_t`.
    pub fn quadratic(&self) -> &QuadraticOperator {
        &self.quadratic
    }

    /// `-a∂_t` for `n = 0`, zero for `n = -1`.
    pub fn differential(&self) -> &QuadraticOperator {
        &self.differential
    }

    pub fn total(&self) -> Result<QuadraticOperator, SvError> {
        Ok(self.linear.add(&self.quadratic)?.add(&self.differential)?)
    }
}

/// Series weights derived from the force, shared by all constraints of one
/// potential.
#[derive(Debug, Clone)]
struct Weights {
    one: TruncSeries,
    z: TruncSeries,
    z2: TruncSeries,
    b_prime: TruncSeries,
    zb_prime: TruncSeries,
    lin_minus_one: TruncSeries,
    lin_zero: TruncSeries,
}

impl Weights {
    fn new(pot: &Potential) -> Result<Self, SvError> {
        let b = pot.b_series();
        let z = TruncSeries::monomial(1, 1.0);
        let bp = b.differentiate();
        let bpp = bp.differentiate();
        let zb = z.mul_reliable(&b)?;
        let zbp = zb.differentiate();
        let zbpp = zbp.differentiate();
        let w = pot.diffusion_weight();
        Ok(Self {
            one: TruncSeries::monomial(0, 1.0),
            z2: TruncSeries::monomial(2, 1.0),
            lin_minus_one: bpp.scale(w).add(&bp.mul_reliable(&b)?)?,
            lin_zero: zbpp.scale(w).add(&zbp.mul_reliable(&b)?)?,
            b_prime: bp,
            zb_prime: zbp,
            z,
        })
    }
}

/// Builds constraint parts on one [`FreeBoson`].
#[derive(Debug, Clone)]
pub struct ConstraintBuilder<'a> {
    boson: &'a FreeBoson,
    weights: Weights,
}

impl<'a> ConstraintBuilder<'a> {
    pub fn new(boson: &'a FreeBoson) -> Result<Self, SvError> {
        Ok(Self { boson, weights: Weights::new(boson.potential())? })
    }

    pub fn boson(&self) -> &FreeBoson {
        self.boson
    }

    fn dt_weights(&self, a: &TimePoly, order: usize) -> Vec<f64> {
        self.boson.integral_weights(&a.nth_derivative(order))
    }

    pub fn linear(&self, index: ConstraintIndex, a: &TimePoly) -> Result<QuadraticOperator, SvError> {
        let fb = self.boson;
        let beta = fb.potential().beta();
        let w = &self.weights;
        let lin = |u: &TruncSeries, order: usize| fb.linear_dense(Field::Dynamic, u, &self.dt_weights(a, order));
        Ok(match index {
            ConstraintIndex::MinusOne => lin(&w.z, 2)?.sub(&lin(&w.lin_minus_one, 0)?)?.scale(beta.powf(-0.5)),
            ConstraintIndex::Zero => {
                let body = lin(&w.z2, 3)?.scale(0.5).sub(&lin(&w.lin_zero, 1)?)?.scale(0.5 * beta.powf(-0.5));
                let shift: f64 = self.dt_weights(a, 2).iter().sum::<f64>() * fb.potential().diffusion_weight() * fb.n_particles();
                body.add(&QuadraticOperator::constant(fb.space(), 0.5 * shift))?
            }
        })
    }

    /// Quadratic part without the time derivation.
    pub fn quadratic(&self, index: ConstraintIndex, a: &TimePoly) -> Result<QuadraticOperator, SvError> {
        let fb = self.boson;
        let w = &self.weights;
        let (psi, phi) = match index {
            ConstraintIndex::MinusOne => {
                let (da, a0) = (self.dt_weights(a, 1), self.dt_weights(a, 0));
                let psi = fb.quadratic_dense_terms(Field::Dynamic, &[(&w.one, &da), (&w.b_prime, &a0)])?;
                let phi = fb.quadratic_dense(Field::Static, &w.one, &a0)?;
                (psi.scale(-0.5), phi.scale(-0.5))
            }
            ConstraintIndex::Zero => {
                let (dda, da) = (self.dt_weights(a, 2), self.dt_weights(a, 1));
                let psi = fb.quadratic_dense_terms(Field::Dynamic, &[(&w.z, &dda), (&w.zb_prime, &da)])?;
                let phi = fb.quadratic_dense(Field::Static, &w.z, &da)?;
                (psi.scale(-0.25), phi.scale(-0.25))
            }
        };
        Ok(psi.add(&phi)?)
    }

    pub fn differential(&self, index: ConstraintIndex, a: &TimePoly) -> QuadraticOperator {
        match index {
            ConstraintIndex::MinusOne => QuadraticOperator::zero(self.boson.space()),
            ConstraintIndex::Zero => time_derivation(&self.boson.space(), a).scale(-1.0),
        }
    }

    /// Quadratic part including `-a∂_t`.
    pub fn quadratic_full(&self, index: ConstraintIndex, a: &TimePoly) -> Result<QuadraticOperator, SvError> {
        Ok(self.quadratic(index, a)?.add(&self.differential(index, a))?)
    }

    pub fn build(&self, index: ConstraintIndex, a: &TimePoly) -> Result<ConstraintOp, SvError> {
        check_support(a, &self.boson.space().grid())?;
        Ok(ConstraintOp {
            index,
            a: a.clone(),
            linear: self.linear(index, a)?,
            quadratic: self.quadratic(index, a)?,
            differential: self.differential(index, a),
        })
    }
}

/// `a` and its first three derivatives must vanish at both grid ends.
pub fn check_support(a: &TimePoly, grid: &TimeGrid) -> Result<(), SvError> {
    let scale = a.coeffs().iter().fold(1.0_f64, |m, c| m.max(c.abs()));
    for order in 0..=3 {
        let d = a.nth_derivative(order);
        for t in [0.0, grid.horizon()] {
            let value = d.eval(t);
            if value.abs() > 1e-9 * scale * (1.0 + grid.horizon()).powi(a.degree().unwrap_or(0) as i32) {
                return Err(SvError::Support { order, t, value });
            }
        }
    }
    Ok(())
}

pub fn build_dynamical_constraint(boson: &FreeBoson, index: ConstraintIndex, a: &TimePoly) -> Result<ConstraintOp, SvError> {
    ConstraintBuilder::new(boson)?.build(index, a)
}

/// The six bracket relations, each written as `lhs + rhs = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SvRelation {
    /// `[L^f_{0,q}, L^g_{0,q}] + L^{ḟg-fġ}_{0,q}`
    ZeroZeroQuadratic,
    /// `[L^f_{-1,q}, L^g_{0,q}] + L^{ḟg-½fġ}_{-1,q}`
    MinusZeroQuadratic,
    /// `[L^f_{-1,q}, L^g_{-1,q}]`
    MinusMinusQuadratic,
    /// `[L^f_{0,l}, L^g_{0,q}] - [L^g_{0,l}, L^f_{0,q}] + L^{ḟg-fġ}_{0,l}`
    ZeroZeroLinear,
    /// `[L^f_{-1,l}, L^g_{0,q}] - [L^g_{0,l}, L^f_{-1,q}] + L^{ḟg-½fġ}_{-1,l}`
    MinusZeroLinear,
    /// `[L^f_{-1,l}, L^g_{-1,q}] - [L^g_{-1,l}, L^f_{-1,q}]`
    MinusMinusLinear,
}

impl SvRelation {
    pub const QUADRATIC: [SvRelation; 3] = [Self::ZeroZeroQuadratic, Self::MinusZeroQuadratic, Self::MinusMinusQuadratic];
    pub const LINEAR: [SvRelation; 3] = [Self::ZeroZeroLinear, Self::MinusZeroLinear, Self::MinusMinusLinear];

    pub fn label(self) -> &'static str {
        match self {
            Self::ZeroZeroQuadratic => "[L0q(f),L0q(g)] = -L0q(f'g-fg')",
            Self::MinusZeroQuadratic => "[L-1q(f),L0q(g)] = -L-1q(f'g-fg'/2)",
            Self::MinusMinusQuadratic => "[L-1q(f),L-1q(g)] = 0",
            Self::ZeroZeroLinear => "[L0l(f),L0q(g)]-(f<->g) = -L0l(f'g-fg')",
            Self::MinusZeroLinear => "[L-1l(f),L0q(g)]-[L0l(g),L-1q(f)] = -L-1l(f'g-fg'/2)",
            Self::MinusMinusLinear => "[L-1l(f),L-1q(g)]-(f<->g) = 0",
        }
    }
}

/// Residual of one relation at one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub relation: String,
    pub dt: f64,
    #[serde(rename = "K_max")]
    pub k_max: usize,
    /// Max over probes of `|lhs + rhs|`.
    pub residual: f64,
    /// Max over probes and over the individual terms of `|term|`.
    pub scale: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip)]
    pub elements: Vec<f64>,
}

/// Residuals at two step sizes and their ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub relation: String,
    pub dt_coarse: f64,
    pub dt_fine: f64,
    pub residual_coarse: f64,
    pub residual_fine: f64,
    pub ratio: f64,
    pub ratio_range: (f64, f64),
    pub pass: bool,
}

/// Potential, particle number, cutoff and probe window for bracket checks.
#[derive(Debug, Clone)]
pub struct SvSetup {
    pub pot: Potential,
    pub n_particles: f64,
    pub k_max: usize,
    /// Probes live on modes `1..=interior`.
    pub interior: usize,
    /// Relative tolerance: a report passes when `residual ≤ rel_tol·dt·scale`.
    pub rel_tol: f64,
}

impl SvSetup {
    pub fn new(pot: Potential, n_particles: f64, k_max: usize, interior: usize) -> Self {
        Self { pot, n_particles, k_max, interior, rel_tol: 50.0 }
    }
}

/// Test function pair `f = (1+t)·B`, `g = (2-t+t²)·B` with `B` the order-4
/// bump on `[0, horizon]`.
pub fn standard_test_functions(horizon: f64) -> (TimePoly, TimePoly) {
    let bump = TimePoly::bump(horizon, 4);
    (TimePoly::new(vec![1.0, 1.0]).mul(&bump), TimePoly::new(vec![2.0, -1.0, 1.0]).mul(&bump))
}

/// Everything needed to evaluate the relations on one grid.
struct RelationContext<'a> {
    builder: ConstraintBuilder<'a>,
    probes: ProbeSet,
    list: Vec<Probe>,
}

impl<'a> RelationContext<'a> {
    fn bracket(&self, p: &QuadraticOperator, q: &QuadraticOperator) -> Result<Contraction, SvError> {
        Ok(p.bracket_contraction(q, &self.probes)?)
    }

    fn single(&self, p: &QuadraticOperator) -> Contraction {
        p.contract(&self.probes)
    }

    /// Residual elements and the size scale: the largest element over the
    /// individual bracket terms, the right-hand side and the operands.
    fn evaluate(&self, relation: SvRelation, f: &TimePoly, g: &TimePoly) -> Result<(Vec<f64>, f64), SvError> {
        use ConstraintIndex::{MinusOne as M, Zero as Z};
        let b = &self.builder;
        let w_full = TimePoly::wronskian(f, g);
        let w_half = f.derivative().mul(g).sub(&f.mul(&g.derivative()).scale(0.5));
        // (bracket pairs with sign, right-hand side)
        let (pairs, rhs): (Vec<(QuadraticOperator, QuadraticOperator, f64)>, Option<QuadraticOperator>) = match relation {
            SvRelation::ZeroZeroQuadratic => {
                (vec![(b.quadratic_full(Z, f)?, b.quadratic_full(Z, g)?, 1.0)], Some(b.quadratic_full(Z, &w_full)?))
            }
            SvRelation::MinusZeroQuadratic => {
                (vec![(b.quadratic(M, f)?, b.quadratic_full(Z, g)?, 1.0)], Some(b.quadratic(M, &w_half)?))
            }
            SvRelation::MinusMinusQuadratic => (vec![(b.quadratic(M, f)?, b.quadratic(M, g)?, 1.0)], None),
            SvRelation::ZeroZeroLinear => (
                vec![(b.linear(Z, f)?, b.quadratic_full(Z, g)?, 1.0), (b.linear(Z, g)?, b.quadratic_full(Z, f)?, -1.0)],
                Some(b.linear(Z, &w_full)?),
            ),
            SvRelation::MinusZeroLinear => (
                vec![(b.linear(M, f)?, b.quadratic_full(Z, g)?, 1.0), (b.linear(Z, g)?, b.quadratic(M, f)?, -1.0)],
                Some(b.linear(M, &w_half)?),
            ),
            SvRelation::MinusMinusLinear => (
                vec![(b.linear(M, f)?, b.quadratic(M, g)?, 1.0), (b.linear(M, g)?, b.quadratic(M, f)?, -1.0)],
                None,
            ),
        };
        let mut terms = Vec::new();
        let mut scale: f64 = 0.0;
        for (p, q, sign) in &pairs {
            scale = scale.max(self.single(p).max_abs(&self.list)).max(self.single(q).max_abs(&self.list));
            terms.push(self.bracket(p, q)?.scale(*sign));
        }
        terms.extend(rhs.as_ref().map(|r| self.single(r)));
        let scale = terms.iter().map(|t| t.max_abs(&self.list)).fold(scale, f64::max);
        let sum = terms[1..].iter().fold(terms[0].clone(), |acc, t| acc.add(t));
        Ok((sum.elements(&self.list), scale))
    }
}

fn relation_reports(
    setup: &SvSetup,
    grid: TimeGrid,
    f: &TimePoly,
    g: &TimePoly,
    relations: &[SvRelation],
) -> Result<Vec<RelationReport>, SvError> {
    let space = Space::new(setup.k_max, grid)?;
    let fb = FreeBoson::new(space, setup.pot.clone(), setup.n_particles)?;
    check_support(f, &grid)?;
    check_support(g, &grid)?;
    let probes = ProbeSet::smooth(space, setup.interior)?;
    let ctx = RelationContext { builder: ConstraintBuilder::new(&fb)?, list: probes.probes(), probes };
    relations
        .iter()
        .map(|&r| {
            let (elements, scale) = ctx.evaluate(r, f, g)?;
            let residual = elements.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
            let tolerance = setup.rel_tol * grid.dt() * scale;
            Ok(RelationReport {
                relation: r.label().to_string(),
                dt: grid.dt(),
                k_max: setup.k_max,
                residual,
                scale,
                tolerance,
                pass: residual <= tolerance,
                elements,
            })
        })
        .collect()
}

/// Quadratic relations (`[0,0]`, `[-1,0]`, `[-1,-1]`) on one grid.
pub fn verify_sv_algebra_quadratic(setup: &SvSetup, grid: TimeGrid, f: &TimePoly, g: &TimePoly) -> Result<Vec<RelationReport>, SvError> {
    relation_reports(setup, grid, f, g, &SvRelation::QUADRATIC)
}

/// Linear-quadratic cross relations on one grid.
pub fn verify_sv_algebra_linear(setup: &SvSetup, grid: TimeGrid, f: &TimePoly, g: &TimePoly) -> Result<Vec<RelationReport>, SvError> {
    relation_reports(setup, grid, f, g, &SvRelation::LINEAR)
}

/// All six relations at `dt` and `dt/2` on `[0, horizon]`; passes when the
/// residual ratio lies in `ratio_range`.
pub fn verify_sv_convergence(
    setup: &SvSetup,
    horizon: f64,
    dt: f64,
    f: &TimePoly,
    g: &TimePoly,
    ratio_range: (f64, f64),
) -> Result<Vec<ConvergenceReport>, SvError> {
    if !(horizon > 0.0) {
        return Err(SvError::Horizon);
    }
    let all: Vec<SvRelation> = SvRelation::QUADRATIC.into_iter().chain(SvRelation::LINEAR).collect();
    let coarse = relation_reports(setup, TimeGrid::covering(horizon, dt)?, f, g, &all)?;
    let fine = relation_reports(setup, TimeGrid::covering(horizon, dt / 2.0)?, f, g, &all)?;
    Ok(coarse
        .into_iter()
        .zip(fine)
        .map(|(c, f)| {
            let ratio = c.residual / f.residual;
            ConvergenceReport {
                relation: c.relation,
                dt_coarse: c.dt,
                dt_fine: f.dt,
                residual_coarse: c.residual,
                residual_fine: f.residual,
                ratio,
                ratio_range,
                pass: ratio >= ratio_range.0 && ratio <= ratio_range.1,
            }
        })
        .collect())
}

/// Relation residual elements at cutoffs `k_max` and `k_max + extra`; the
/// largest elementwise difference.
pub fn truncation_shift(setup: &SvSetup, grid: TimeGrid, extra: usize, f: &TimePoly, g: &TimePoly) -> Result<f64, SvError> {
    let all: Vec<SvRelation> = SvRelation::QUADRATIC.into_iter().chain(SvRelation::LINEAR).collect();
    let base = relation_reports(setup, grid, f, g, &all)?;
    let raised = SvSetup { k_max: setup.k_max + extra, ..setup.clone() };
    let more = relation_reports(&raised, grid, f, g, &all)?;
    Ok(base
        .iter()
        .zip(&more)
        .flat_map(|(a, b)| a.elements.iter().zip(&b.elements).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// Hermite cancellations

/// Grid and analytic pieces of `[L(f), L(g)]` for the Hermite potential at
/// `β = 2`, where `L(f) = L^{ḟ}_{-1,quadr}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteCancellation {
    pub dt: f64,
    /// `(pair label, max |sum|, max |term|)` over probes.
    pub pairs: Vec<(String, f64, f64)>,
    /// Max over probes of `|Σ_i (C_i(f,g) - C_i(g,f)) - [L(f), L(g)]|`,
    /// which checks the decomposition against the grid bracket.
    pub decomposition_residual: f64,
    /// `[L_lin(f), L(g)] - (f↔g)` (a constant) and its size scale.
    pub linear_constant: f64,
    pub linear_scale: f64,
    /// `(N/2)∫(f⃛ġ - ḟg⃛)`, which vanishes as a total derivative.
    pub linear_continuum: f64,
}

/// Hermite `β = 2` decomposition of the quadratic bracket into the grid
/// contributions `C_2..C_6` and the integrated-by-parts pieces
/// `C_{1,1}, C_{1,2}, C_{1,3}` and `C_5` evaluated by fine quadrature.
pub fn hermite_cancellations(
    sigma: f64,
    n_particles: f64,
    k_max: usize,
    interior: usize,
    grid: TimeGrid,
    f: &TimePoly,
    g: &TimePoly,
) -> Result<HermiteCancellation, SvError> {
    let pot = Potential::hermite(sigma, 2.0).map_err(BosonError::from)?;
    let space = Space::new(k_max, grid)?;
    let fb = FreeBoson::new(space, pot, n_particles)?;
    let probes = ProbeSet::smooth(space, interior)?;
    let list = probes.probes();
    let pieces = hermite::GridPieces::new(&fb, sigma, f, g)?;
    let swapped = hermite::GridPieces::new(&fb, sigma, g, f)?;
    let ev = |q: &QuadraticOperator| q.contract(&probes);

    // decomposition against the actual bracket
    let b = ConstraintBuilder::new(&fb)?;
    let lf = b.quadratic(ConstraintIndex::MinusOne, &f.derivative())?;
    let lg = b.quadratic(ConstraintIndex::MinusOne, &g.derivative())?;
    let bracket = lf.bracket_contraction(&lg, &probes)?;
    let decomposed = ev(&pieces.total()?).sub(&ev(&swapped.total()?));
    let decomposition_residual = decomposed.sub(&bracket).max_abs(&list);

    let analytic = hermite::AnalyticPieces::new(sigma, f, g, &probes, grid.horizon());
    let mut pairs = Vec::new();
    let mut push = |label: &str, grid_part: Contraction, exact: Contraction| {
        let sum = grid_part.add(&exact);
        let scale = grid_part.max_abs(&list).max(exact.max_abs(&list));
        pairs.push((label.to_string(), sum.max_abs(&list), scale));
    };
    push("C11+C4", ev(&pieces.c4), analytic.c11.clone());
    push("C12+C3", ev(&pieces.c3), analytic.c12.clone());
    push("C13+C2", ev(&pieces.c2), analytic.c13.clone());
    push("C5+C6", ev(&pieces.c5), ev(&pieces.c6));
    push("C1-(C11+C12+C13)", ev(&pieces.c1), analytic.c11.add(&analytic.c12).add(&analytic.c13).scale(-1.0));

    let linf = b.linear(ConstraintIndex::MinusOne, &f.derivative())?;
    let ling = b.linear(ConstraintIndex::MinusOne, &g.derivative())?;
    let t1 = linf.bracket_contraction(&lg, &probes)?;
    let t2 = ling.bracket_contraction(&lf, &probes)?;
    let linear_constant = t1.sub(&t2).element(Probe::One);
    let linear_scale = t1.element(Probe::One).abs().max(t2.element(Probe::One).abs());
    Ok(HermiteCancellation {
        dt: grid.dt(),
        pairs,
        decomposition_residual,
        linear_constant,
        linear_scale,
        linear_continuum: 0.5 * n_particles * f.nth_derivative(3).mul(&g.derivative()).sub(&f.derivative().mul(&g.nth_derivative(3))).integral(0.0, grid.horizon()),
    })
}

mod hermite {
    //! Pieces of the Hermite `β = 2` bracket. With `F(f) = ḟ/σ² + f̈` and
    //! `D_m(s) = Σ_{s'≤s} K_mm(t_s - t_s') ∂_{m,s'}`:
    //!
    //! ```text
    //! C1 = Σ_{j>j'} F(f)_j g̈_j' Σ_k k(k-1) x_{k,j} K_{k-1}(j-j') D_{k-2}(j') dt²
    //! C2 = same with ġ/σ² in place of g̈
    //! C3 = Σ_{j'≤j} F(f)_j ġ_j' Σ_k k(k-1) x_{k,j} K_{k-1}(j-j') ∂_{k-2,j'} dt
    //! C4 = -Σ_j F(f)_j ġ_j Σ_k k(k-1) x_{k,j} D_{k-2}(j) dt
    //! C5 = -2N Σ_{j>j'} F(f)_j F(g)_j' K_1(j-j') x_{2,j} dt²
    //! C6 = 2N Σ_j F(f)_j ġ_j x_{2,j} dt
    //! ```

    use super::*;

    pub(super) struct GridPieces {
        pub c1: QuadraticOperator,
        pub c2: QuadraticOperator,
        pub c3: QuadraticOperator,
        pub c4: QuadraticOperator,
        pub c5: QuadraticOperator,
        pub c6: QuadraticOperator,
    }

    impl GridPieces {
        pub fn new(fb: &FreeBoson, sigma: f64, f: &TimePoly, g: &TimePoly) -> Result<Self, SvError> {
            let space = fb.space();
            let grid = space.grid();
            let (dt, s, km) = (grid.dt(), grid.slots(), space.k_max());
            let s2 = sigma * sigma;
            let big_f = |h: &TimePoly| h.derivative().scale(1.0 / s2).add(&h.nth_derivative(2)).sample(&grid);
            let ff = big_f(f);
            let fg = big_f(g);
            let gd = g.derivative().sample(&grid);
            let gdd = g.nth_derivative(2).sample(&grid);
            let n = fb.n_particles();
            let lag = |m: usize, j: usize| fb.kernel_lag(j)[(m, m)];
            let idx = |k: usize, j: usize| (k - 1) * s + j;
            let mut c1 = QuadraticOperator::zero(space);
            let mut c2 = QuadraticOperator::zero(space);
            let mut c3 = QuadraticOperator::zero(space);
            let mut c4 = QuadraticOperator::zero(space);
            let mut c5 = QuadraticOperator::zero(space);
            let mut c6 = QuadraticOperator::zero(space);
            for k in 3..=km {
                let kk = (k * (k - 1)) as f64;
                // inner[j'] = Σ_{j''<j'... } weights for D_{k-2}(j') expanded later
                for j in 0..s {
                    if ff[j] == 0.0 {
                        continue;
                    }
                    // Σ_{j'<j} w_j' K_{k-1}(j-j') D_{k-2}(j') = Σ_{s'≤j-1} ∂_{k-2,s'} Σ_{j'=s'}^{j-1} w_j' K_{k-1}(j-j') K_{k-2}(j'-s')
                    for sp in 0..j {
                        let (mut a1, mut a2) = (0.0, 0.0);
                        for jp in sp..j {
                            let kern = lag(k - 1, j - jp) * lag(k - 2, jp - sp);
                            a1 += gdd[jp] * kern;
                            a2 += gd[jp] / s2 * kern;
                        }
                        let base = ff[j] * kk * dt * dt;
                        c1.xd_mut()[(idx(k, j), idx(k - 2, sp))] += base * a1;
                        c2.xd_mut()[(idx(k, j), idx(k - 2, sp))] += base * a2;
                    }
                    for sp in 0..=j {
                        c3.xd_mut()[(idx(k, j), idx(k - 2, sp))] += ff[j] * gd[sp] * kk * lag(k - 1, j - sp) * dt;
                        c4.xd_mut()[(idx(k, j), idx(k - 2, sp))] -= ff[j] * gd[j] * kk * lag(k - 2, j - sp) * dt;
                    }
                }
            }
            if km >= 2 {
                for j in 0..s {
                    let ret: f64 = (0..j).map(|jp| fg[jp] * lag(1, j - jp)).sum();
                    c5.x_mut()[idx(2, j)] -= 2.0 * n * ff[j] * ret * dt * dt;
                    c6.x_mut()[idx(2, j)] += 2.0 * n * ff[j] * gd[j] * dt;
                }
            }
            Ok(Self { c1, c2, c3, c4, c5, c6 })
        }

        pub fn total(&self) -> Result<QuadraticOperator, SvError> {
            let mut t = self.c1.clone();
            for c in [&self.c2, &self.c3, &self.c4, &self.c5, &self.c6] {
                t = t.add(c)?;
            }
            Ok(t)
        }
    }

    /// Continuum values of `C_{1,1}, C_{1,2}, C_{1,3}` on the probe set. The
    /// probes' `τ` and forms are read back as smooth functions of time, and
    /// every time integral is done on a fine uniform mesh with RK4 for the
    /// nested convolutions and Simpson's rule outside.
    pub(super) struct AnalyticPieces {
        pub c11: Contraction,
        pub c12: Contraction,
        pub c13: Contraction,
    }

    const FINE: usize = 4000;

    fn simpson(v: &[f64], h: f64) -> f64 {
        let n = v.len() - 1;
        let mut s = v[0] + v[n];
        for (i, x) in v.iter().enumerate().take(n).skip(1) {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * x;
        }
        s * h / 3.0
    }

    /// `y(t) = ∫_0^t e^{-r(t-s)} q(s) ds` on the mesh, via RK4 on `y' = q - r y`.
    fn convolve(q: impl Fn(f64) -> f64, r: f64, h: f64) -> Vec<f64> {
        let mut y = vec![0.0; FINE + 1];
        for i in 0..FINE {
            let t = i as f64 * h;
            let rhs = |t: f64, y: f64| q(t) - r * y;
            let k1 = rhs(t, y[i]);
            let k2 = rhs(t + h / 2.0, y[i] + h / 2.0 * k1);
            let k3 = rhs(t + h / 2.0, y[i] + h / 2.0 * k2);
            let k4 = rhs(t + h, y[i] + h * k3);
            y[i + 1] = y[i] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        y
    }

    /// Same, with `q` given on the mesh and at midpoints (`2·FINE + 1` values).
    fn convolve_sampled(q: &[f64], r: f64, h: f64) -> Vec<f64> {
        let mut y = vec![0.0; FINE + 1];
        for i in 0..FINE {
            let (q0, qm, q1) = (q[2 * i], q[2 * i + 1], q[2 * i + 2]);
            let k1 = q0 - r * y[i];
            let k2 = qm - r * (y[i] + h / 2.0 * k1);
            let k3 = qm - r * (y[i] + h / 2.0 * k2);
            let k4 = q1 - r * (y[i] + h * k3);
            y[i + 1] = y[i] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        y
    }

    impl AnalyticPieces {
        pub fn new(sigma: f64, f: &TimePoly, g: &TimePoly, probes: &ProbeSet, horizon: f64) -> Self {
            let s2 = sigma * sigma;
            let h = horizon / FINE as f64;
            let half = horizon / (2 * FINE) as f64;
            let space = probes.space();
            let interior = probes.forms().len() / 2;
            let shapes: [fn(f64) -> f64; 2] = [|t| (2.0 * t).cos(), |t| 1.0 + t * t];
            let tau_fn = |k: usize, t: f64| if k >= 1 && k <= interior { 0.3 * (k as f64 + 2.0 * t).sin() / k as f64 } else { 0.0 };
            let mesh: Vec<f64> = (0..=FINE).map(|i| i as f64 * h).collect();
            let big_f = f.derivative().scale(1.0 / s2).add(&f.nth_derivative(2));
            let gd = g.derivative();
            let m = probes.forms().len();
            let (mut b11, mut b12, mut b13) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
            for (i, bh) in [&mut b11, &mut b12, &mut b13].into_iter().enumerate() {
                for form in 0..m {
                    let mode = form / 2 + 1;
                    let shape = shapes[form % 2];
                    let k = mode + 2;
                    if k > space.k_max() {
                        continue;
                    }
                    let kk = (k * (k - 1)) as f64;
                    let r_in = (k - 2) as f64 / s2;
                    let r_out = (k - 1) as f64 / s2;
                    let outer: Vec<f64> = match i {
                        0 => {
                            // C11 = ∫ F ġ k(k-1) τ_k ∫_0^t e^{-r_in(t-s)} h(s) ds
                            let inner = convolve(shape, r_in, h);
                            mesh.iter().zip(&inner).map(|(&t, y)| big_f.eval(t) * gd.eval(t) * kk * tau_fn(k, t) * y).collect()
                        }
                        1 => {
                            // C12 = -∫ F k(k-1) τ_k ∫_0^t e^{-r_out(t-t')} ġ(t') h(t') dt'
                            let inner = convolve(|t| gd.eval(t) * shape(t), r_out, h);
                            mesh.iter().zip(&inner).map(|(&t, y)| -big_f.eval(t) * kk * tau_fn(k, t) * y).collect()
                        }
                        _ => {
                            // C13 = -∫ F k(k-1) τ_k ∫_0^t e^{-r_out(t-t')} ġ(t')/σ² I(t') dt'
                            let inner = convolve_half_mesh(shape, r_in, horizon);
                            let q: Vec<f64> = (0..=2 * FINE).map(|i| gd.eval(i as f64 * half) / s2 * inner[i]).collect();
                            let outer_inner = convolve_sampled(&q, r_out, h);
                            mesh.iter().zip(&outer_inner).map(|(&t, y)| -big_f.eval(t) * kk * tau_fn(k, t) * y).collect()
                        }
                    };
                    bh[form] = simpson(&outer, h);
                }
            }
            Self {
                c11: Contraction::first_order(probes, 0.0, b11),
                c12: Contraction::first_order(probes, 0.0, b12),
                c13: Contraction::first_order(probes, 0.0, b13),
            }
        }
    }

    /// Convolution on the half-step mesh (`2·FINE + 1` points over `[0, horizon]`).
    fn convolve_half_mesh(q: fn(f64) -> f64, r: f64, horizon: f64) -> Vec<f64> {
        let n = 2 * FINE;
        let h = horizon / n as f64;
        let mut y = vec![0.0; n + 1];
        for i in 0..n {
            let t = i as f64 * h;
            let rhs = |t: f64, y: f64| q(t) - r * y;
            let k1 = rhs(t, y[i]);
            let k2 = rhs(t + h / 2.0, y[i] + h / 2.0 * k1);
            let k3 = rhs(t + h / 2.0, y[i] + h / 2.0 * k2);
            let k4 = rhs(t + h, y[i] + h * k3);
            y[i + 1] = y[i] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        y
    }
}

const BOOTSTRAP_RESAMPLES: usize = 200;
const BOOTSTRAP_SEED: u64 = 0x5eed;

/// Monte Carlo residual of `L^a_n 𝒵^lin` at one order in `τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResidual {
    pub index: ConstraintIndex,
    pub order: usize,
    /// One entry at order 0; one per grid variable `τ_{k,j}` at order 1.
    pub residual: Vec<Estimate>,
    /// Largest `|mean|/se` over the entries.
    pub max_z: f64,
}

impl McResidual {
    pub fn within(&self, n_se: f64) -> bool {
        self.residual.iter().all(|e| e.mean.abs() <= n_se * e.se)
    }
}

/// Applies `cop` to the Taylor expansion of `𝒵^lin[τ] = Ê[exp(-Σ τ_{k,j} s_{k,j})]`
/// and returns the coefficient at `τ^order` (order 0 or 1), where `s_{k,j}` are the
/// recorded linearized-action sources of the ensemble (slot 0 carries `π_k(0)`).
///
/// The operator grid must be the ensemble's recorded grid (or a prefix of it).
pub fn constraint_residual_mc(
    cop: &ConstraintOp,
    ensemble: &Ensemble,
    order: usize,
    se_bound: Option<f64>,
) -> Result<McResidual, SvError> {
    let op = cop.total()?;
    let space = op.space();
    let grid = space.grid();
    if (grid.dt() - ensemble.record_dt()).abs() > 1e-9 * grid.dt() {
        return Err(DysonError::GridMismatch(format!("operator dt {} vs recorded dt {}", grid.dt(), ensemble.record_dt())).into());
    }
    if grid.slots() > ensemble.slots() {
        return Err(DysonError::GridMismatch(format!("operator has {} slots, ensemble {}", grid.slots(), ensemble.slots())).into());
    }
    let sources = ensemble.sources().filter(|s| s.k_max() >= space.k_max()).ok_or(DysonError::MissingSources { needed: space.k_max() })?;
    if order > 1 {
        return Err(DysonError::GridMismatch(format!("expansion order {order} not supported")).into());
    }

    let n = space.dim();
    let rows: Vec<Vec<f64>> = (0..ensemble.replicas())
        .map(|r| {
            let s = DVector::from_iterator(n, (0..n).map(|i| {
                let v = space.var(i);
                sources.get(r, v.mode, v.slot)
            }));
            let cs = op.dd().map(|c| c * &s);
            let scs = cs.as_ref().map_or(0.0, |cs| s.dot(cs));
            let ws = op.d().dot(&s);
            if order == 0 {
                vec![op.c() - ws + 0.5 * scs]
            } else {
                let bs = op.xd().map_or_else(|| DVector::zeros(n), |b| b * &s);
                let scale = ws - 0.5 * scs - op.c();
                (0..n).map(|i| op.x()[i] - bs[i] + s[i] * scale).collect()
            }
        })
        .collect();

    let width = rows[0].len();
    let residual: Vec<Estimate> = if width == 1 {
        let col: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        vec![Estimate::new(pairwise_sum(&col) / col.len() as f64, bootstrap_se(&col, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED))]
    } else {
        let se = bootstrap_se_columns(&rows, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED);
        (0..width)
            .map(|i| {
                let col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
                Estimate::new(pairwise_sum(&col) / col.len() as f64, se[i])
            })
            .collect()
    };
    if let Some(bound) = se_bound {
        let worst = residual.iter().map(|e| e.se).fold(0.0, f64::max);
        if worst > bound {
            return Err(DysonError::InsufficientEnsemble { se: worst, bound }.into());
        }
    }
    let max_z = residual
        .iter()
        .map(|e| if e.se > 0.0 { e.mean.abs() / e.se } else if e.mean == 0.0 { 0.0 } else { f64::INFINITY })
        .fold(0.0, f64::max);
    Ok(McResidual { index: cop.index(), order, residual, max_z })
}
