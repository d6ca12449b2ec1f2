//! Dyson Brownian motion: Euler–Maruyama ensembles, Gibbs sampling, linear
//! statistics, Girsanov weights and the moment identities they satisfy.
//!
//! Noise has `d⟨B_i, B_i⟩ = 2dt`, so one step is
//! `λ_i ← λ_i + ΔB_i + [Σ_{j≠i} β/(λ_i-λ_j) - V'(λ_i)]dt` with
//! `ΔB_i ~ N(0, 2dt)`.

mod action;
mod equilibrium;
mod io;
mod stats;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{KernelError, Potential};

pub use action::{
    action_mean, action_terms, full_logweight, girsanov_logweight, moment_hierarchy_residual, npoint_vs_kernel,
    square_completion, ActionMean, HierarchyResidual, NPoint,
};
pub use equilibrium::{
    acceptance_probability, gaussian_pi2, log_density, loop_equation_residual, sample_equilibrium,
    sample_equilibrium_with, EqSamples, LoopResidual, SamplerConfig,
};
pub use io::{read_path_dump, PathDump};
pub use stats::{batch_means, bootstrap_se, bootstrap_se_columns, integrated_autocorr, pairwise_sum, Estimate};

/// The perturbed drift `-∂_λ(W + c·Σ_k τ_k π_k)` whose exact path density
/// relative to `W` is `exp(girsanov_logweight - square_completion)` under the
/// `2dt` noise convention.
pub const GIRSANOV_DRIFT_SCALE: f64 = 2.0;

/// Steps closer than this are rejected and redrawn.
pub const GAP_MIN: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum DysonError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("need at least one particle and one replica")]
    Empty,
    #[error("invalid time grid: dt = {dt}, steps = {steps}")]
    InvalidGrid { dt: f64, steps: usize },
    #[error("storage stride {stride} must divide {steps} steps")]
    Stride { stride: usize, steps: usize },
    #[error("initial condition has {got} particles, expected {expected}")]
    InitialSize { got: usize, expected: usize },
    #[error("initial positions must be finite and separated by at least {GAP_MIN:e}")]
    InitialCollision,
    #[error("step rejection rate {rate:.4} exceeds {limit}")]
    RejectionRate { rate: f64, limit: f64 },
    #[error("replica {replica}: no admissible step after {attempts} draws at step {step}")]
    StuckStep { replica: usize, step: usize, attempts: usize },
    #[error("replica {replica}: non-finite position at step {step}")]
    NonFinite { replica: usize, step: usize },
    #[error("potential is not confining: {0}")]
    NonConfining(String),
    #[error("sampler diverged: |lambda| = {0:e}")]
    Divergence(f64),
    #[error("path increments are not stored (storage stride {0})")]
    MissingIncrements(usize),
    #[error("linearized action sources were not recorded up to mode {needed}")]
    MissingSources { needed: usize },
    #[error("tau path covers {got} slots, need {needed}")]
    TauLength { got: usize, needed: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("standard error {se:e} exceeds the requested bound {bound:e}")]
    InsufficientEnsemble { se: f64, bound: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed path dump: {0}")]
    Dump(String),
}

/// `τ_k(t_j)` for modes `1..=k_max` on `slots` grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauPath {
    k_max: usize,
    slots: usize,
    values: Vec<f64>,
}

impl TauPath {
    pub fn zero(k_max: usize, slots: usize) -> Self {
        Self { k_max, slots, values: vec![0.0; k_max * slots] }
    }

    /// `τ_k ≡ amplitude`, all other modes zero.
    pub fn constant(k: usize, amplitude: f64, slots: usize) -> Self {
        Self::from_fn(k, slots, |m, _| if m == k { amplitude } else { 0.0 })
    }

    /// `f(k, j)` for `k = 1..=k_max`.
    pub fn from_fn(k_max: usize, slots: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let values = (1..=k_max).flat_map(|k| (0..slots).map(move |j| (k, j))).map(|(k, j)| f(k, j)).collect();
        Self { k_max, slots, values }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        if k == 0 || k > self.k_max {
            return 0.0;
        }
        self.values[(k - 1) * self.slots + j]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `∂_λ Σ_k τ_k(t_j) λ^k`.
    pub fn force(&self, j: usize, lambda: f64) -> f64 {
        (1..=self.k_max).rev().fold(0.0, |acc, k| acc * lambda + k as f64 * self.get(k, j))
    }
}

/// Law of `λ(0)`, shared by every replica unless drawn from equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    Equispaced { lo: f64, hi: f64 },
    Fixed(Vec<f64>),
    /// Replica `r` starts from a spread-out draw of one Metropolis chain.
    Equilibrium { sweeps: usize, seed: u64 },
}

impl InitialCondition {
    /// Equispaced on `[-2√N σ, 2√N σ]`.
    pub fn semicircle(n: usize, sigma: f64) -> Self {
        let half = 2.0 * (n as f64).sqrt() * sigma;
        Self::Equispaced { lo: -half, hi: half }
    }

    fn realize(&self, pot: &Potential, n: usize, replicas: usize) -> Result<Vec<Vec<f64>>, DysonError> {
        let one = |x: Vec<f64>| vec![x; replicas];
        let configs = match self {
            Self::Equispaced { lo, hi } => one(if n == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            }),
            Self::Fixed(x) => {
                if x.len() != n {
                    return Err(DysonError::InitialSize { got: x.len(), expected: n });
                }
                one(x.clone())
            }
            Self::Equilibrium { sweeps, seed } => {
                let samples = sample_equilibrium(pot, n, *sweeps, *seed)?;
                let len = samples.len();
                (0..replicas).map(|r| samples.config(r * len / replicas.max(1)).to_vec()).collect()
            }
        };
        Ok(configs)
    }
}

/// Simulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub dt: f64,
    pub steps: usize,
    pub replicas: usize,
    pub init: InitialCondition,
    pub seed: u64,
    /// Positions are kept every `stride` steps.
    pub stride: usize,
    /// Accumulate the linearized action sources for modes `0..=k`.
    pub source_modes: Option<usize>,
    /// Adds `-GIRSANOV_DRIFT_SCALE · ∂_λ Σ τ_k(t_j) λ^k` to the drift.
    pub perturbation: Option<TauPath>,
    pub max_rejection_rate: f64,
}

impl SimConfig {
    pub fn new(n: usize, dt: f64, steps: usize, replicas: usize, seed: u64) -> Self {
        Self {
            n,
            dt,
            steps,
            replicas,
            init: InitialCondition::semicircle(n, 1.0),
            seed,
            stride: 1,
            source_modes: None,
            perturbation: None,
            max_rejection_rate: 0.01,
        }
    }

    pub fn with_init(mut self, init: InitialCondition) -> Self {
        self.init = init;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_sources(mut self, k_max: usize) -> Self {
        self.source_modes = Some(k_max);
        self
    }

    pub fn with_perturbation(mut self, tau: TauPath) -> Self {
        self.perturbation = Some(tau);
        self
    }

    fn validate(&self) -> Result<(), DysonError> {
        if self.n == 0 || self.replicas == 0 {
            return Err(DysonError::Empty);
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || self.steps == 0 {
            return Err(DysonError::InvalidGrid { dt: self.dt, steps: self.steps });
        }
        if self.stride == 0 || !self.steps.is_multiple_of(self.stride) {
            return Err(DysonError::Stride { stride: self.stride, steps: self.steps });
        }
        if let Some(tau) = &self.perturbation {
            if tau.slots() < self.steps {
                return Err(DysonError::TauLength { got: tau.slots(), needed: self.steps });
            }
        }
        Ok(())
    }
}

/// Linearized action per recorded slot: slot 0 holds `π_k(0)`, slot `J`
/// holds `∫ S^lin_k dt` over `(t_{J-1}, t_J]` with `π̇_k dt` taken as
/// `Σ_i kλ_i^{k-1}Δλ_i + k(k-1)π_{k-2}dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sources {
    k_max: usize,
    slots: usize,
    data: Vec<f64>,
}

impl Sources {
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn get(&self, r: usize, k: usize, slot: usize) -> f64 {
        self.data[(r * (self.k_max + 1) + k) * self.slots + slot]
    }

    /// Slots of mode `k` for replica `r`.
    pub fn series(&self, r: usize, k: usize) -> &[f64] {
        let start = (r * (self.k_max + 1) + k) * self.slots;
        &self.data[start..start + self.slots]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
struct NoiseAcc {
    count: u64,
    sum_sq: f64,
    sum_quad: f64,
}

/// Simulated replicas of one Dyson Brownian motion.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pot: Potential,
    config: SimConfig,
    paths: Vec<f64>,
    sources: Option<Sources>,
    noise: NoiseAcc,
    rejections: u64,
    subdivided: u64,
}

/// `π_k = Σ_i λ_i^k`.
pub fn power_sum(lambda: &[f64], k: usize) -> f64 {
    lambda.iter().map(|x| x.powi(k as i32)).sum()
}

/// `Σ_{j≠i} β/(λ_i-λ_j) - V'(λ_i)`.
pub fn drift(pot: &Potential, lambda: &[f64], out: &mut [f64]) {
    let beta = pot.beta();
    for (i, o) in out.iter_mut().enumerate() {
        *o = -pot.force(lambda[i]);
    }
    if beta != 0.0 {
        for i in 0..lambda.len() {
            for j in i + 1..lambda.len() {
                let f = beta / (lambda[i] - lambda[j]);
                out[i] += f;
                out[j] -= f;
            }
        }
    }
}

fn admissible(beta: f64, x: &[f64]) -> bool {
    beta == 0.0 || x.windows(2).all(|w| w[1] - w[0] >= GAP_MIN)
}

struct ReplicaRun {
    path: Vec<f64>,
    sources: Vec<f64>,
    noise: NoiseAcc,
    rejections: u64,
    subdivided: u64,
}

/// Adds `∫ S^lin_k dt` over one step to `acc[k]`.
fn accumulate_sources(pot: &Potential, lambda: &[f64], step: &[f64], dt: f64, acc: &mut [f64], pi: &mut [f64]) {
    let k_max = acc.len() - 1;
    let top = k_max + pot.l_max();
    for (m, p) in pi.iter_mut().enumerate().take(top + 1) {
        *p = power_sum(lambda, m);
    }
    let half_beta = 0.5 * pot.beta();
    for (k, a) in acc.iter_mut().enumerate().skip(1) {
        let kf = k as f64;
        let ito: f64 = lambda.iter().zip(step).map(|(x, d)| kf * x.powi(k as i32 - 1) * d).sum();
        let lower = if k >= 2 { half_beta * kf * (kf - 1.0) * pi[k - 2] } else { 0.0 };
        let force: f64 = pot.b().iter().map(|(&l, &b)| b * pi[l + k - 1]).sum();
        *a += ito + (lower + kf * force) * dt;
    }
}

const MAX_ATTEMPTS: usize = 100;
const MAX_DEPTH: u32 = 30;

/// Per-replica integrator state.
struct Stepper<'a> {
    pot: &'a Potential,
    cfg: &'a SimConfig,
    replica: usize,
    rngs: Vec<ChaCha8Rng>,
    d: Vec<f64>,
    xi: Vec<f64>,
    next: Vec<f64>,
    delta: Vec<f64>,
    acc: Vec<f64>,
    pi: Vec<f64>,
    noise: NoiseAcc,
    rejections: u64,
    subdivided: u64,
}

impl Stepper<'_> {
    /// Draws noise for a step of length `h` until the result is admissible;
    /// leaves it in `next` and returns whether one was found.
    fn draw(&mut self, lambda: &[f64], step: usize, h: f64) -> Result<bool, DysonError> {
        drift(self.pot, lambda, &mut self.d);
        if let Some(tau) = &self.cfg.perturbation {
            for (di, &x) in self.d.iter_mut().zip(lambda) {
                *di -= GIRSANOV_DRIFT_SCALE * tau.force(step, x);
            }
        }
        let sd = (2.0 * h).sqrt();
        for _ in 0..MAX_ATTEMPTS {
            for i in 0..lambda.len() {
                let z: f64 = StandardNormal.sample(&mut self.rngs[i]);
                self.xi[i] = sd * z;
                self.next[i] = lambda[i] + self.xi[i] + self.d[i] * h;
            }
            if self.next.iter().any(|x| !x.is_finite()) {
                return Err(DysonError::NonFinite { replica: self.replica, step });
            }
            if admissible(self.pot.beta(), &self.next) {
                return Ok(true);
            }
            self.rejections += 1;
        }
        Ok(false)
    }

    fn accept(&mut self, lambda: &mut Vec<f64>, h: f64) {
        if self.cfg.source_modes.is_some() {
            for ((s, &a), &b) in self.delta.iter_mut().zip(&self.next).zip(lambda.iter()) {
                *s = a - b;
            }
            accumulate_sources(self.pot, lambda, &self.delta, h, &mut self.acc, &mut self.pi);
        }
        std::mem::swap(lambda, &mut self.next);
    }

    /// One grid step. When no noise draw is admissible (the drift alone
    /// overshoots a neighbour after a near collision) the step is split into
    /// halves, recursively.
    fn advance(&mut self, lambda: &mut Vec<f64>, step: usize) -> Result<(), DysonError> {
        let dt = self.cfg.dt;
        if self.draw(lambda, step, dt)? {
            for &x in &self.xi {
                let x2 = x * x;
                self.noise.count += 1;
                self.noise.sum_sq += x2;
                self.noise.sum_quad += x2 * x2;
            }
            self.accept(lambda, dt);
            return Ok(());
        }
        self.subdivided += 1;
        self.split(lambda, step, 0.5 * dt, 1)
    }

    fn split(&mut self, lambda: &mut Vec<f64>, step: usize, h: f64, depth: u32) -> Result<(), DysonError> {
        if depth > MAX_DEPTH {
            return Err(DysonError::StuckStep { replica: self.replica, step, attempts: MAX_ATTEMPTS });
        }
        for _ in 0..2 {
            if self.draw(lambda, step, h)? {
                self.accept(lambda, h);
            } else {
                self.split(lambda, step, 0.5 * h, depth + 1)?;
            }
        }
        Ok(())
    }
}

fn run_replica(pot: &Potential, cfg: &SimConfig, r: usize, init: &[f64]) -> Result<ReplicaRun, DysonError> {
    let n = cfg.n;
    let beta = pot.beta();
    let slots = cfg.steps / cfg.stride + 1;
    let rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| {
            let mut g = ChaCha8Rng::seed_from_u64(cfg.seed);
            g.set_stream((r * n + i) as u64);
            g
        })
        .collect();

    let mut lambda = init.to_vec();
    if beta > 0.0 {
        lambda.sort_by(f64::total_cmp);
    }
    if lambda.iter().any(|x| !x.is_finite()) || !admissible(beta, &lambda) {
        return Err(DysonError::InitialCollision);
    }

    let k_src = cfg.source_modes;
    let mut path = Vec::with_capacity(slots * n);
    path.extend_from_slice(&lambda);
    let mut sources = vec![0.0; k_src.map_or(0, |k| (k + 1) * slots)];
    if let Some(k) = k_src {
        for m in 0..=k {
            sources[m * slots] = power_sum(&lambda, m);
        }
    }
    let mut st = Stepper {
        pot,
        cfg,
        replica: r,
        rngs,
        d: vec![0.0; n],
        xi: vec![0.0; n],
        next: vec![0.0; n],
        delta: vec![0.0; n],
        acc: vec![0.0; k_src.map_or(0, |k| k + 1)],
        pi: vec![0.0; k_src.map_or(0, |k| k + pot.l_max() + 1)],
        noise: NoiseAcc::default(),
        rejections: 0,
        subdivided: 0,
    };

    for step in 0..cfg.steps {
        st.advance(&mut lambda, step)?;
        if (step + 1) % cfg.stride == 0 {
            path.extend_from_slice(&lambda);
            let slot = (step + 1) / cfg.stride;
            for (m, a) in st.acc.iter_mut().enumerate() {
                sources[m * slots + slot] = *a;
                *a = 0.0;
            }
        }
    }
    Ok(ReplicaRun { path, sources, noise: st.noise, rejections: st.rejections, subdivided: st.subdivided })
}

/// Euler–Maruyama ensemble of `cfg.replicas` independent paths.
///
/// Each replica `r` and particle slot `i` draws from its own ChaCha8 stream
/// `(seed, r·N + i)`, so results do not depend on the thread count.
pub fn simulate_dbm(pot: &Potential, cfg: &SimConfig) -> Result<Ensemble, DysonError> {
    cfg.validate()?;
    let inits = cfg.init.realize(pot, cfg.n, cfg.replicas)?;
    let runs: Vec<ReplicaRun> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| run_replica(pot, cfg, r, &inits[r]))
        .collect::<Result<_, _>>()?;

    let rejections: u64 = runs.iter().map(|x| x.rejections).sum();
    let rate = rejections as f64 / (cfg.replicas * cfg.steps) as f64;
    if rate > cfg.max_rejection_rate {
        return Err(DysonError::RejectionRate { rate, limit: cfg.max_rejection_rate });
    }
    let sum_of = |f: fn(&ReplicaRun) -> f64| pairwise_sum(&runs.iter().map(f).collect::<Vec<_>>());
    let noise = NoiseAcc {
        count: runs.iter().map(|x| x.noise.count).sum(),
        sum_sq: sum_of(|x| x.noise.sum_sq),
        sum_quad: sum_of(|x| x.noise.sum_quad),
    };
    let slots = cfg.steps / cfg.stride + 1;
    let sources = cfg.source_modes.map(|k_max| Sources {
        k_max,
        slots,
        data: runs.iter().flat_map(|x| x.sources.iter().copied()).collect(),
    });
    let subdivided = runs.iter().map(|x| x.subdivided).sum();
    let paths = runs.into_iter().flat_map(|x| x.path).collect();
    Ok(Ensemble { pot: pot.clone(), config: cfg.clone(), paths, sources, noise, rejections, subdivided })
}

impl Ensemble {
    pub fn potential(&self) -> &Potential {
        &self.pot
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn replicas(&self) -> usize {
        self.config.replicas
    }

    /// Integration step.
    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    pub fn steps(&self) -> usize {
        self.config.steps
    }

    pub fn stride(&self) -> usize {
        self.config.stride
    }

    /// Recorded slots `0..=steps/stride`.
    pub fn slots(&self) -> usize {
        self.config.steps / self.config.stride + 1
    }

    /// Spacing of recorded slots.
    pub fn record_dt(&self) -> f64 {
        self.config.dt * self.config.stride as f64
    }

    pub fn time(&self, slot: usize) -> f64 {
        slot as f64 * self.record_dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.slots()).map(|s| self.time(s)).collect()
    }

    /// Positions of replica `r` at a recorded slot.
    pub fn positions(&self, r: usize, slot: usize) -> &[f64] {
        let n = self.n();
        let start = (r * self.slots() + slot) * n;
        &self.paths[start..start + n]
    }

    pub fn sources(&self) -> Option<&Sources> {
        self.sources.as_ref()
    }

    fn require_sources(&self, k: usize) -> Result<&Sources, DysonError> {
        self.sources.as_ref().filter(|s| s.k_max >= k).ok_or(DysonError::MissingSources { needed: k })
    }

    fn require_increments(&self) -> Result<(), DysonError> {
        if self.stride() == 1 {
            Ok(())
        } else {
            Err(DysonError::MissingIncrements(self.stride()))
        }
    }

    /// Drift used by the simulation at step `j` (including any perturbation).
    fn sim_drift(&self, lambda: &[f64], step: usize) -> Vec<f64> {
        let mut d = vec![0.0; lambda.len()];
        drift(&self.pot, lambda, &mut d);
        if let Some(tau) = &self.config.perturbation {
            for (di, &x) in d.iter_mut().zip(lambda) {
                *di -= GIRSANOV_DRIFT_SCALE * tau.force(step, x);
            }
        }
        d
    }

    /// Brownian increments `ΔB_i` of step `j`, recovered from the stored path.
    /// On a subdivided step this is the sum of the substep increments up to
    /// the drift evaluated at the substep points.
    pub fn increments(&self, r: usize, step: usize) -> Result<Vec<f64>, DysonError> {
        self.require_increments()?;
        let (a, b) = (self.positions(r, step), self.positions(r, step + 1));
        let d = self.sim_drift(a, step);
        Ok(a.iter().zip(b).zip(&d).map(|((x, y), di)| y - x - di * self.dt()).collect())
    }

    /// Mean of `ΔB²` over all accepted full-step draws.
    pub fn noise_variance(&self) -> Estimate {
        let n = self.noise.count as f64;
        let mean = self.noise.sum_sq / n;
        let var = (self.noise.sum_quad / n - mean * mean).max(0.0);
        Estimate::new(mean, (var / n).sqrt())
    }

    pub fn rejections(&self) -> u64 {
        self.rejections
    }

    /// Grid steps that had to be split into substeps.
    pub fn subdivided_steps(&self) -> u64 {
        self.subdivided
    }

    pub fn rejection_rate(&self) -> f64 {
        self.rejections as f64 / (self.replicas() * self.steps()) as f64
    }

    /// `π_k(t_J)` laid out as `[replica][slot]`.
    pub fn linear_statistics(&self, k: usize) -> Vec<f64> {
        (0..self.replicas())
            .flat_map(|r| (0..self.slots()).map(move |s| (r, s)))
            .map(|(r, s)| power_sum(self.positions(r, s), k))
            .collect()
    }

    /// `Ê[π_k(t_J)]` per slot.
    pub fn pi_mean(&self, k: usize) -> Vec<Estimate> {
        let pi = self.linear_statistics(k);
        let slots = self.slots();
        (0..slots)
            .map(|s| Estimate::from_samples(&pi.iter().skip(s).step_by(slots).copied().collect::<Vec<_>>()))
            .collect()
    }

    /// CSV with columns `t, k, mean, se`.
    pub fn write_moments_csv<W: std::io::Write>(&self, ks: &[usize], w: W) -> Result<(), DysonError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "k", "mean", "se"])?;
        for &k in ks {
            for (s, e) in self.pi_mean(k).iter().enumerate() {
                out.serialize((self.time(s), k, e.mean, e.se))?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Flat little-endian dump: header `N, T, M, dt` as f64, then positions
    /// `[replica][slot][particle]` with `T = slots - 1`, `dt` the slot spacing.
    pub fn write_path_dump<W: std::io::Write>(&self, w: W) -> Result<(), DysonError> {
        io::write_dump(w, self.n(), self.slots(), self.replicas(), self.record_dt(), &self.paths)
    }
}
