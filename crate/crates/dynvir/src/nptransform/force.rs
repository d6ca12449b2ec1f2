use serde::{Deserialize, Serialize};

use super::path::ParticleHistory;
use super::{NpError, TimePoly};
use crate::dyson::{power_sum, GAP_MIN};
use crate::kernel::Potential;

/// Drift changes induced by `L_n^{ȧ}` at one time slot, per particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceChange {
    pub simultaneous: Vec<f64>,
    pub delayed: Vec<f64>,
    /// The one-particle formula applied to each particle separately.
    pub single: Vec<f64>,
}

fn check_exponent(n: i32) -> Result<(), NpError> {
    if n < -1 {
        Err(NpError::Exponent(n))
    } else {
        Ok(())
    }
}

fn check_gaps(lambda: &[f64]) -> Result<(), NpError> {
    for i in 0..lambda.len() {
        for j in i + 1..lambda.len() {
            if (lambda[i] - lambda[j]).abs() < GAP_MIN {
                return Err(NpError::Coincident { i, j });
            }
        }
    }
    Ok(())
}

/// `Σ_l b_l(n+l+1)λ^{n+l}`, skipping the vanishing `λ^{-1}` term of `n = -1, l = 0`.
fn confining_part(pot: &Potential, n: i32, x: f64) -> f64 {
    pot.b()
        .iter()
        .filter(|(&l, _)| n + l as i32 + 1 != 0)
        .map(|(&l, &b)| b * (n + l as i32 + 1) as f64 * x.powi(n + l as i32))
        .sum()
}

/// `δV' = λ^{n+1}ä + {Σ_k b_k(n+1+k)λ^{n+k} + (n+1)nλ^{n-1}}ȧ` for one
/// particle, with `a` the time function of `L_n^{ȧ}`.
pub fn single_particle_force_change(n: i32, a: &TimePoly, pot: &Potential, t: f64, x: f64) -> f64 {
    let (ad, add) = (a.derivative().eval(t), a.nth_derivative(2).eval(t));
    let ito = if n * (n + 1) != 0 { (n * (n + 1)) as f64 * x.powi(n - 1) } else { 0.0 };
    x.powi(n + 1) * add + (confining_part(pot, n, x) + ito) * ad
}

/// `δ_simul V'_i = λ_i^{n+1}ä + {Σ_l b_l(n+l+1)λ_i^{n+l}
///   + βΣ_{q=0}^{n-1}(q+1)λ_i^qπ_{n-1-q} - (β/2-1)(n+1)nλ_i^{n-1}}ȧ`.
pub fn simultaneous_force_change(n: i32, a: &TimePoly, pot: &Potential, t: f64, lambda: &[f64]) -> Result<Vec<f64>, NpError> {
    check_exponent(n)?;
    check_gaps(lambda)?;
    let (ad, add) = (a.derivative().eval(t), a.nth_derivative(2).eval(t));
    let beta = pot.beta();
    let pi: Vec<f64> = (0..n.max(0) as usize).map(|m| power_sum(lambda, m)).collect();
    Ok(lambda
        .iter()
        .map(|&x| {
            let mut brace = confining_part(pot, n, x);
            brace += beta * (0..n.max(0)).map(|q| (q + 1) as f64 * x.powi(q) * pi[(n - 1 - q) as usize]).sum::<f64>();
            if n * (n + 1) != 0 {
                brace -= (0.5 * beta - 1.0) * (n * (n + 1)) as f64 * x.powi(n - 1);
            }
            x.powi(n + 1) * add + brace * ad
        })
        .collect())
}

/// `δ_delay V'_i = -βΣ_{j≠i} ∂W/∂λ_j (δt_j - δt_i)/(λ_i-λ_j)²` at `slot`, with
/// `δt_i = 2(n+1)∫₀ᵗȧλ_i^n` (trapezoid over the history) and
/// `∂W/∂λ_j = V'(λ_j) - Σ_{k≠j} β/(λ_j-λ_k)`.
pub fn delayed_force_change(
    n: i32,
    a: &TimePoly,
    pot: &Potential,
    history: &ParticleHistory,
    slot: usize,
) -> Result<Vec<f64>, NpError> {
    check_exponent(n)?;
    if slot >= history.slots() {
        return Err(NpError::SlotOutOfRange { slot, slots: history.slots() });
    }
    let lambda = history.positions(slot);
    check_gaps(lambda)?;
    let beta = pot.beta();
    let rate = a.derivative();
    let h = history.dt();
    let dt_shift: Vec<f64> = (0..history.n())
        .map(|i| {
            if n == -1 {
                return 0.0;
            }
            let f = |s: usize| rate.eval(s as f64 * h) * history.positions(s)[i].powi(n);
            2.0 * (n + 1) as f64 * (0..slot).map(|s| 0.5 * h * (f(s) + f(s + 1))).sum::<f64>()
        })
        .collect();
    let dw: Vec<f64> = (0..lambda.len())
        .map(|j| {
            let rep: f64 = (0..lambda.len()).filter(|&k| k != j).map(|k| 1.0 / (lambda[j] - lambda[k])).sum();
            pot.force(lambda[j]) - beta * rep
        })
        .collect();
    Ok((0..lambda.len())
        .map(|i| {
            -beta
                * (0..lambda.len())
                    .filter(|&j| j != i)
                    .map(|j| dw[j] * (dt_shift[j] - dt_shift[i]) / (lambda[i] - lambda[j]).powi(2))
                    .sum::<f64>()
        })
        .collect())
}

/// All three force changes at `slot`, with `a` the time function of `L_n^{ȧ}`.
pub fn force_change(
    n: i32,
    a: &TimePoly,
    pot: &Potential,
    history: &ParticleHistory,
    slot: usize,
) -> Result<ForceChange, NpError> {
    let delayed = delayed_force_change(n, a, pot, history, slot)?;
    let t = slot as f64 * history.dt();
    let lambda = history.positions(slot);
    Ok(ForceChange {
        simultaneous: simultaneous_force_change(n, a, pot, t, lambda)?,
        delayed,
        single: lambda.iter().map(|&x| single_particle_force_change(n, a, pot, t, x)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_translation() {
        // n = -1, a = t on V' = λ: δV' = b₁·1·ȧ = 1.
        let pot = Potential::hermite(1.0, 2.0).unwrap();
        let a = TimePoly::identity();
        let s = simultaneous_force_change(-1, &a, &pot, 0.3, &[-1.0, 0.5, 2.0]).unwrap();
        assert_eq!(s, vec![1.0; 3]);
    }

    #[test]
    fn dilation_has_no_pair_term() {
        // n = 0: δV'_i = λ_i ä + Σ_l b_l(l+1)λ_i^l ȧ.
        let pot = Potential::new(2.0, [(1, 1.0), (3, 0.5)]).unwrap();
        let a = TimePoly::new(vec![0.0, 1.0, 2.0]);
        let x = [-0.7, 0.1, 1.2];
        let s = simultaneous_force_change(0, &a, &pot, 0.5, &x).unwrap();
        for (v, xi) in s.iter().zip(x) {
            let expected = 4.0 * xi + (2.0 * xi + 4.0 * 0.5 * xi.powi(3)) * 3.0;
            assert!((v - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn coincident_particles() {
        let pot = Potential::hermite(1.0, 2.0).unwrap();
        let err = simultaneous_force_change(1, &TimePoly::identity(), &pot, 0.0, &[0.0, 1.0, 1.0]);
        assert!(matches!(err, Err(NpError::Coincident { i: 1, j: 2 })));
    }
}
