//! Metropolis sampling of the Gibbs measure and the equilibrium loop
//! equations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::stats::{batch_means, integrated_autocorr, Estimate};
use super::{power_sum, DysonError};
use crate::kernel::Potential;

const BATCHES: usize = 50;
const TUNE_EVERY: usize = 20;
const DIVERGENCE: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n: usize,
    pub sweeps: usize,
    pub seed: u64,
    /// Fraction of sweeps discarded, during which the step is tuned.
    pub burn_in: f64,
    pub target_acceptance: f64,
    /// Constant sources: the target uses `V + Σ_k τ_k λ^k`.
    pub tau: Vec<(usize, f64)>,
}

impl SamplerConfig {
    pub fn new(n: usize, sweeps: usize, seed: u64) -> Self {
        Self { n, sweeps, seed, burn_in: 0.2, target_acceptance: 0.3, tau: Vec::new() }
    }

    pub fn with_tau(mut self, tau: Vec<(usize, f64)>) -> Self {
        self.tau = tau;
        self
    }
}

/// Post-burn-in configurations, one per sweep.
#[derive(Debug, Clone)]
pub struct EqSamples {
    pot: Potential,
    tau: Vec<(usize, f64)>,
    n: usize,
    configs: Vec<f64>,
    acceptance: f64,
    step: f64,
    autocorr: f64,
}

impl EqSamples {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.configs.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn config(&self, s: usize) -> &[f64] {
        &self.configs[s * self.n..(s + 1) * self.n]
    }

    pub fn potential(&self) -> &Potential {
        &self.pot
    }

    pub fn tau(&self) -> &[(usize, f64)] {
        &self.tau
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.acceptance
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }

    /// Integrated autocorrelation time of `π₂`, in sweeps.
    pub fn autocorr_time(&self) -> f64 {
        self.autocorr
    }

    /// `π_k` per sample.
    pub fn pi(&self, k: usize) -> Vec<f64> {
        self.configs.chunks_exact(self.n).map(|c| power_sum(c, k)).collect()
    }

    /// `⟨π_k⟩` with a batch-means standard error.
    pub fn pi_mean(&self, k: usize) -> Estimate {
        batch_means(&self.pi(k), BATCHES)
    }

    /// Batch-means estimate of `⟨f(λ)⟩`.
    pub fn mean_of(&self, f: impl Fn(&[f64]) -> f64) -> Estimate {
        let values: Vec<f64> = self.configs.chunks_exact(self.n).map(f).collect();
        batch_means(&values, BATCHES)
    }
}

/// `V(λ) + Σ τ_k λ^k` with `V' = Σ b_l λ^l`.
fn confining_value(pot: &Potential, tau: &[(usize, f64)], x: f64) -> f64 {
    let v: f64 = pot.b().iter().map(|(&l, &b)| b * x.powi(l as i32 + 1) / (l + 1) as f64).sum();
    v + tau.iter().map(|&(k, t)| t * x.powi(k as i32)).sum::<f64>()
}

/// `log` of the unnormalized Gibbs density `Π e^{-V(λ_i)} Π_{i<j} |λ_j-λ_i|^β`.
pub fn log_density(pot: &Potential, tau: &[(usize, f64)], lambda: &[f64]) -> f64 {
    let mut s: f64 = -lambda.iter().map(|&x| confining_value(pot, tau, x)).sum::<f64>();
    if pot.beta() != 0.0 {
        for i in 0..lambda.len() {
            for j in i + 1..lambda.len() {
                s += pot.beta() * (lambda[j] - lambda[i]).abs().ln();
            }
        }
    }
    s
}

/// Metropolis acceptance `min(1, e^{Δ log p})`.
pub fn acceptance_probability(log_ratio: f64) -> f64 {
    if log_ratio >= 0.0 {
        1.0
    } else {
        log_ratio.exp()
    }
}

fn check_confining(pot: &Potential, tau: &[(usize, f64)]) -> Result<(), DysonError> {
    let mut coeffs = std::collections::BTreeMap::new();
    for (&l, &b) in pot.b() {
        *coeffs.entry(l + 1).or_insert(0.0) += b / (l + 1) as f64;
    }
    for &(k, t) in tau {
        *coeffs.entry(k).or_insert(0.0) += t;
    }
    match coeffs.iter().rev().find(|(_, &c)| c != 0.0) {
        Some((&deg, &c)) if deg % 2 == 0 && c > 0.0 => Ok(()),
        Some((&deg, &c)) => Err(DysonError::NonConfining(format!("leading term {c}·λ^{deg}"))),
        None => Err(DysonError::NonConfining("V is constant".into())),
    }
}

/// Change of `log p` when particle `i` moves from `old` to `new`.
fn local_log_ratio(pot: &Potential, tau: &[(usize, f64)], lambda: &[f64], i: usize, new: f64) -> f64 {
    let old = lambda[i];
    let mut d = confining_value(pot, tau, old) - confining_value(pot, tau, new);
    if pot.beta() != 0.0 {
        for (j, &x) in lambda.iter().enumerate() {
            if j != i {
                d += pot.beta() * ((new - x).abs().ln() - (old - x).abs().ln());
            }
        }
    }
    d
}

pub fn sample_equilibrium(pot: &Potential, n: usize, sweeps: usize, seed: u64) -> Result<EqSamples, DysonError> {
    sample_equilibrium_with(pot, &SamplerConfig::new(n, sweeps, seed))
}

/// Single-particle Gaussian-proposal Metropolis chain targeting the Gibbs
/// density; the proposal width is tuned toward the target acceptance during
/// burn-in and then frozen.
pub fn sample_equilibrium_with(pot: &Potential, cfg: &SamplerConfig) -> Result<EqSamples, DysonError> {
    if cfg.n == 0 || cfg.sweeps == 0 {
        return Err(DysonError::Empty);
    }
    check_confining(pot, &cfg.tau)?;
    let n = cfg.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = (n as f64).sqrt();
    let mut lambda: Vec<f64> =
        (0..n).map(|i| if n == 1 { 0.0 } else { -half + 2.0 * half * i as f64 / (n - 1) as f64 }).collect();
    let mut step: f64 = 0.5;
    let burn = (cfg.burn_in * cfg.sweeps as f64).round() as usize;
    let mut configs = Vec::with_capacity((cfg.sweeps - burn) * n);
    let (mut tried, mut accepted) = (0usize, 0usize);
    let (mut batch_tried, mut batch_acc) = (0usize, 0usize);

    for sweep in 0..cfg.sweeps {
        for i in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let new = lambda[i] + step * z;
            let a = acceptance_probability(local_log_ratio(pot, &cfg.tau, &lambda, i, new));
            let u: f64 = rng.random();
            let ok = u < a;
            if ok {
                lambda[i] = new;
                if new.abs() > DIVERGENCE {
                    return Err(DysonError::Divergence(new.abs()));
                }
            }
            if sweep < burn {
                batch_tried += 1;
                batch_acc += ok as usize;
            } else {
                tried += 1;
                accepted += ok as usize;
            }
        }
        if sweep < burn && (sweep + 1) % TUNE_EVERY == 0 {
            let rate = batch_acc as f64 / batch_tried as f64;
            step *= (2.0 * (rate - cfg.target_acceptance)).exp();
            (batch_tried, batch_acc) = (0, 0);
        }
        if sweep >= burn {
            configs.extend_from_slice(&lambda);
        }
    }
    let pi2: Vec<f64> = configs.chunks_exact(n).map(|c| power_sum(c, 2)).collect();
    Ok(EqSamples {
        pot: pot.clone(),
        tau: cfg.tau.clone(),
        n,
        autocorr: integrated_autocorr(&pi2, BATCHES),
        configs,
        acceptance: accepted as f64 / tried.max(1) as f64,
        step,
    })
}

/// `⟨π₂⟩ = σ²(βN(N-1)/2 + N)` for `V = λ²/(2σ²)`.
pub fn gaussian_pi2(n: usize, beta: f64, sigma: f64) -> f64 {
    let n = n as f64;
    sigma * sigma * (beta * n * (n - 1.0) / 2.0 + n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopResidual {
    pub n: usize,
    pub residual: Estimate,
}

/// Loop equation of index `n` on samples drawn with constant sources `τ`:
/// `(n+1)π_n - Σ_k b_k π_{k+n+1} - Σ_k kτ_k π_{k+n} + (β/2)Σ_{k=0}^n (π_kπ_{n-k} - π_n)`.
pub fn loop_equation_residual(s: &EqSamples, n: usize) -> LoopResidual {
    let pot = s.potential();
    let half_beta = 0.5 * pot.beta();
    let tau = s.tau().to_vec();
    let top = n + 1 + pot.l_max().max(tau.iter().map(|t| t.0).max().unwrap_or(0));
    let residual = s.mean_of(|c| {
        let pi: Vec<f64> = (0..=top).map(|m| power_sum(c, m)).collect();
        let mut r = (n + 1) as f64 * pi[n];
        r -= pot.b().iter().map(|(&k, &b)| b * pi[k + n + 1]).sum::<f64>();
        r -= tau.iter().map(|&(k, t)| k as f64 * t * pi[k + n]).sum::<f64>();
        r += half_beta * (0..=n).map(|k| pi[k] * pi[n - k] - pi[n]).sum::<f64>();
        r
    });
    LoopResidual { n, residual }
}
