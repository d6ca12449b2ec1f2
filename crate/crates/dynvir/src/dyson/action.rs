//! Girsanov weights, the linear/quadratic action split and the moment
//! identities checked on simulated ensembles.

use serde::{Deserialize, Serialize};

use super::stats::Estimate;
use super::{drift, power_sum, DysonError, Ensemble, TauPath};
use crate::kernel::{propagator_converged, Potential};

fn check_tau(e: &Ensemble, tau: &TauPath) -> Result<(), DysonError> {
    e.require_increments()?;
    if tau.slots() < e.steps() {
        return Err(DysonError::TauLength { got: tau.slots(), needed: e.steps() });
    }
    Ok(())
}

/// `ΔB` of every particle over step `j`, relative to the unperturbed drift.
fn free_increments(e: &Ensemble, r: usize, j: usize, d: &mut [f64], out: &mut [f64]) {
    let (a, b) = (e.positions(r, j), e.positions(r, j + 1));
    drift(e.potential(), a, d);
    for i in 0..a.len() {
        out[i] = b[i] - a[i] - d[i] * e.dt();
    }
}

/// `-Σ_j Σ_i g_j(λ_i) ΔB_i` with `g_j = ∂_λ Σ_k τ_k(t_j) λ^k` and `ΔB` measured
/// against the unperturbed drift, left-point in time.
pub fn girsanov_logweight(e: &Ensemble, r: usize, tau: &TauPath) -> Result<f64, DysonError> {
    check_tau(e, tau)?;
    let n = e.n();
    let (mut d, mut db) = (vec![0.0; n], vec![0.0; n]);
    let mut total = 0.0;
    for j in 0..e.steps() {
        free_increments(e, r, j, &mut d, &mut db);
        total -= e.positions(r, j).iter().zip(&db).map(|(&x, &b)| tau.force(j, x) * b).sum::<f64>();
    }
    Ok(total)
}

/// `Σ_j Σ_i g_j(λ_i)² dt`, the term that normalizes the Girsanov weight.
pub fn square_completion(e: &Ensemble, r: usize, tau: &TauPath) -> Result<f64, DysonError> {
    check_tau(e, tau)?;
    let dt = e.dt();
    Ok((0..e.steps())
        .map(|j| e.positions(r, j).iter().map(|&x| tau.force(j, x).powi(2) * dt).sum::<f64>())
        .sum())
}

/// Exact log density ratio of the perturbed Euler chain against the simulated one.
pub fn full_logweight(e: &Ensemble, r: usize, tau: &TauPath) -> Result<f64, DysonError> {
    Ok(girsanov_logweight(e, r, tau)? - square_completion(e, r, tau)?)
}

/// `(S^lin_k dt, S^quadr_k dt)` over one step for `k = 0..=k_max`.
fn step_action(pot: &Potential, a: &[f64], b: &[f64], dt: f64, k_max: usize) -> Vec<(f64, f64)> {
    let pi: Vec<f64> = (0..=k_max + pot.l_max()).map(|m| power_sum(a, m)).collect();
    let half_beta = 0.5 * pot.beta();
    let mut out = vec![(0.0, 0.0); k_max + 1];
    for (k, o) in out.iter_mut().enumerate().skip(1) {
        let kf = k as f64;
        let ito: f64 = a.iter().zip(b).map(|(x, y)| kf * x.powi(k as i32 - 1) * (y - x)).sum();
        let lower = if k >= 2 { half_beta * kf * (kf - 1.0) * pi[k - 2] } else { 0.0 };
        let force: f64 = pot.b().iter().map(|(&l, &bl)| bl * pi[l + k - 1]).sum();
        let quad: f64 = if k >= 2 { (0..=k - 2).map(|q| pi[q] * pi[k - 2 - q]).sum() } else { 0.0 };
        *o = (ito + (lower + kf * force) * dt, -half_beta * kf * quad * dt);
    }
    out
}

/// `(S^lin[τ], S^quadr[τ])` of replica `r`, with `S[τ] = Σ_k Σ_j τ_k(t_j) S_k(t_j) dt`.
pub fn action_terms(e: &Ensemble, r: usize, tau: &TauPath) -> Result<(f64, f64), DysonError> {
    check_tau(e, tau)?;
    let (mut lin, mut quad) = (0.0, 0.0);
    for j in 0..e.steps() {
        let s = step_action(e.potential(), e.positions(r, j), e.positions(r, j + 1), e.dt(), tau.k_max());
        for (k, &(l, q)) in s.iter().enumerate().skip(1) {
            let t = tau.get(k, j);
            lin += t * l;
            quad += t * q;
        }
    }
    Ok((lin, quad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionMean {
    pub k: usize,
    /// `Ê[S_k(t_j)]` for each step.
    pub per_step: Vec<Estimate>,
    /// Per-replica time average of `S_k`, averaged over replicas.
    pub time_average: Estimate,
}

/// Monte Carlo mean of `S_k = S^lin_k + S^quadr_k` along the ensemble.
pub fn action_mean(e: &Ensemble, k: usize) -> Result<ActionMean, DysonError> {
    e.require_increments()?;
    let (m, steps) = (e.replicas(), e.steps());
    let mut values = vec![0.0; m * steps];
    for r in 0..m {
        for j in 0..steps {
            let s = step_action(e.potential(), e.positions(r, j), e.positions(r, j + 1), e.dt(), k);
            values[j * m + r] = (s[k].0 + s[k].1) / e.dt();
        }
    }
    let per_step = values.chunks_exact(m).map(Estimate::from_samples).collect();
    let averages: Vec<f64> =
        (0..m).map(|r| (0..steps).map(|j| values[j * m + r]).sum::<f64>() / steps as f64).collect();
    Ok(ActionMean { k, per_step, time_average: Estimate::from_samples(&averages) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyResidual {
    pub k: usize,
    /// Interior recorded times.
    pub times: Vec<f64>,
    /// Residual with a centered time derivative at each interior time.
    pub series: Vec<Estimate>,
    /// `(π_k(T) - π_k(0))/T` minus the left-point average of the generator terms.
    pub time_average: Estimate,
    /// Exact conditional Euler bias of the time average (stride 1 only).
    pub bias: Option<Estimate>,
    /// `|time_average| ≤ 3 SE + |bias|`.
    pub pass: bool,
}

/// `(β/2)kΣ_q π_qπ_{k-2-q} - (β/2-1)k(k-1)π_{k-2} - kΣ_l b_l π_{l+k-1}`.
fn generator_terms(pot: &Potential, lambda: &[f64], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let pi: Vec<f64> = (0..=k + pot.l_max()).map(|m| power_sum(lambda, m)).collect();
    let (kf, half_beta) = (k as f64, 0.5 * pot.beta());
    let mut g = -kf * pot.b().iter().map(|(&l, &b)| b * pi[l + k - 1]).sum::<f64>();
    if k >= 2 {
        g += half_beta * kf * (0..=k - 2).map(|q| pi[q] * pi[k - 2 - q]).sum::<f64>();
        g -= (half_beta - 1.0) * kf * (kf - 1.0) * pi[k - 2];
    }
    g
}

fn binomial(n: usize, m: usize) -> f64 {
    (0..m).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `E[π_k(t+dt) - π_k(t) | λ]/dt` of one Euler step minus the generator.
fn euler_bias(pot: &Potential, lambda: &[f64], dt: f64, k: usize) -> f64 {
    if k < 2 {
        // The Euler step is exact in mean for k ≤ 1.
        return 0.0;
    }
    let mut d = vec![0.0; lambda.len()];
    drift(pot, lambda, &mut d);
    let var = 2.0 * dt;
    // E[X^p] for X ~ N(0, 2dt), p even.
    let gauss = |p: usize| (1..p).step_by(2).map(|q| q as f64).product::<f64>() * var.powi(p as i32 / 2);
    let mut bias = 0.0;
    for (&x, &di) in lambda.iter().zip(&d) {
        let mu = di * dt;
        for m in 2..=k {
            let moment: f64 = (0..=m).step_by(2).map(|p| binomial(m, p) * mu.powi((m - p) as i32) * gauss(p)).sum();
            bias += binomial(k, m) * x.powi((k - m) as i32) * moment / dt;
        }
        bias -= (k * (k - 1)) as f64 * x.powi(k as i32 - 2);
    }
    bias
}

/// Moment hierarchy at `τ = 0`:
/// `d/dt Ê[π_k] + (β/2-1)k(k-1)Ê[π_{k-2}] + kΣ_l b_l Ê[π_{l+k-1}] - (β/2)kΣ_q Ê[π_qπ_{k-2-q}]`.
pub fn moment_hierarchy_residual(e: &Ensemble, k: usize) -> Result<HierarchyResidual, DysonError> {
    let (m, slots, h) = (e.replicas(), e.slots(), e.record_dt());
    if slots < 3 {
        return Err(DysonError::InvalidGrid { dt: e.dt(), steps: e.steps() });
    }
    let pot = e.potential();
    let pi = e.linear_statistics(k);
    let gen: Vec<f64> =
        (0..m).flat_map(|r| (0..slots).map(move |s| (r, s))).map(|(r, s)| generator_terms(pot, e.positions(r, s), k)).collect();
    let at = |v: &[f64], r: usize, s: usize| v[r * slots + s];

    let series = (1..slots - 1)
        .map(|s| {
            let xs: Vec<f64> =
                (0..m).map(|r| (at(&pi, r, s + 1) - at(&pi, r, s - 1)) / (2.0 * h) - at(&gen, r, s)).collect();
            Estimate::from_samples(&xs)
        })
        .collect();
    let horizon = h * (slots - 1) as f64;
    let averages: Vec<f64> = (0..m)
        .map(|r| {
            let left: f64 = (0..slots - 1).map(|s| at(&gen, r, s)).sum::<f64>() / (slots - 1) as f64;
            (at(&pi, r, slots - 1) - at(&pi, r, 0)) / horizon - left
        })
        .collect();
    let time_average = Estimate::from_samples(&averages);

    let bias = (e.stride() == 1).then(|| {
        let per: Vec<f64> = (0..m)
            .map(|r| (0..slots - 1).map(|s| euler_bias(pot, e.positions(r, s), e.dt(), k)).sum::<f64>() / (slots - 1) as f64)
            .collect();
        Estimate::from_samples(&per)
    });
    let allowance = bias.map_or(0.0, |b| b.mean.abs());
    let pass = time_average.mean.abs() <= 3.0 * time_average.se + allowance;
    Ok(HierarchyResidual {
        k,
        times: (1..slots - 1).map(|s| e.time(s)).collect(),
        series,
        time_average,
        bias,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NPoint {
    pub k: usize,
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// `lhs - rhs` with the standard error of two independent estimates.
    pub discrepancy: Estimate,
    /// Standard error of the replica-wise difference.
    pub paired_se: f64,
}

/// One-point function `Ê[∫f π_k]` against the kernel convolution of the
/// recorded linearized-action sources, `∫f (K ∗ Ê[S^lin])_k`.
///
/// The initial value `π(0)` enters through `K(t)`; source block `J` is
/// placed at its midpoint. Modes are summed up to the recorded source cutoff.
pub fn npoint_vs_kernel(e: &Ensemble, f: impl Fn(f64) -> f64, k: usize) -> Result<NPoint, DysonError> {
    let src = e.require_sources(k)?;
    let pot = e.potential();
    let k_src = src.k_max();
    let cutoff = k_src.max(pot.l_max());
    let (m, slots, h) = (e.replicas(), e.slots(), e.record_dt());
    let weights: Vec<f64> = (0..slots)
        .map(|s| {
            let w = if s == 0 || s == slots - 1 { 0.5 * h } else { h };
            w * f(e.time(s))
        })
        .collect();
    let row = |t: f64| -> Result<Vec<f64>, DysonError> {
        let kern = propagator_converged(pot, t, cutoff)?;
        Ok((0..=k_src).map(|l| kern.get(k, l)).collect())
    };

    // c[s'][l]: weight of source (l, s') in the right-hand side.
    let mut c = vec![vec![0.0; k_src + 1]; slots];
    for (s, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (l, v) in row(e.time(s))?.into_iter().enumerate() {
            c[0][l] += w * v;
        }
    }
    let lagged: Vec<Vec<f64>> = (0..slots.saturating_sub(1)).map(|d| row((d as f64 + 0.5) * h)).collect::<Result<_, _>>()?;
    for (s0, cs) in c.iter_mut().enumerate().skip(1) {
        for (s, &w) in weights.iter().enumerate().skip(s0) {
            for (l, v) in lagged[s - s0].iter().enumerate() {
                cs[l] += w * v;
            }
        }
    }

    let pi = e.linear_statistics(k);
    let lhs: Vec<f64> = (0..m).map(|r| weights.iter().enumerate().map(|(s, w)| w * pi[r * slots + s]).sum()).collect();
    let rhs: Vec<f64> = (0..m)
        .map(|r| (0..=k_src).map(|l| src.series(r, l).iter().zip(&c).map(|(x, cs)| x * cs[l]).sum::<f64>()).sum())
        .collect();
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let (lhs, rhs) = (Estimate::from_samples(&lhs), Estimate::from_samples(&rhs));
    Ok(NPoint { k, lhs, rhs, discrepancy: lhs.minus(&rhs), paired_se: Estimate::from_samples(&diff).se })
}
