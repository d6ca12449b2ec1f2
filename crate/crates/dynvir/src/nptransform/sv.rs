use serde::{Deserialize, Serialize};

use super::generator::{NPElement, NPGenerator};
use super::path::SampledPath;
use super::words::IIWord;
use super::{NpError, TimePoly};

const SPAN_TOL: f64 = 1e-12;

/// `X_x + Y_y` with `X_f = -f∂_t - ½ḟλ∂_λ` and `Y_g = -g∂_λ`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SvGenerator {
    pub x: TimePoly,
    pub y: TimePoly,
}

impl SvGenerator {
    pub fn x(f: TimePoly) -> Self {
        Self { x: f, y: TimePoly::zero() }
    }

    pub fn y(g: TimePoly) -> Self {
        Self { x: TimePoly::zero(), y: g }
    }

    pub fn vector_field(&self) -> AffineField {
        AffineField {
            t: self.x.scale(-1.0),
            slope: self.x.derivative().scale(-0.5),
            shift: self.y.scale(-1.0),
        }
    }

    /// The matching trajectory generator, `X_f ↦ -½L₀^{ḟ}` and `Y_g ↦ L_{-1}^g`.
    /// Those factors make the map a Lie algebra homomorphism for the
    /// commutator of trajectory variations.
    pub fn to_np(&self) -> NPGenerator {
        let x = NPElement::new(0, self.x.derivative(), IIWord::empty()).expect("n = 0");
        let y = NPElement::new(-1, self.y.clone(), IIWord::empty()).expect("n = -1");
        NPGenerator::from_terms(vec![(-0.5, x), (1.0, y)]).simplified()
    }
}

/// `c(t)∂_t + (A(t)λ + B(t))∂_λ`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AffineField {
    pub t: TimePoly,
    pub slope: TimePoly,
    pub shift: TimePoly,
}

impl AffineField {
    /// `[U, V] = (U(v^t) - V(u^t))∂_t + (U(v^λ) - V(u^λ))∂_λ`.
    pub fn commutator(&self, other: &Self) -> Self {
        let (u, v) = (self, other);
        Self {
            t: u.t.mul(&v.t.derivative()).sub(&v.t.mul(&u.t.derivative())),
            slope: u.t.mul(&v.slope.derivative()).sub(&v.t.mul(&u.slope.derivative())),
            shift: u
                .t
                .mul(&v.shift.derivative())
                .sub(&v.t.mul(&u.shift.derivative()))
                .add(&u.shift.mul(&v.slope))
                .sub(&v.shift.mul(&u.slope)),
        }
    }

    /// Coordinates in the `X/Y` basis, if the slope is `-½` times the
    /// derivative of `-c`.
    pub fn to_sv(&self) -> Result<SvGenerator, NpError> {
        let f = self.t.scale(-1.0);
        let gap = self.slope.add(&f.derivative().scale(0.5));
        let scale = self.slope.coeffs().iter().chain(f.coeffs()).fold(1.0f64, |m, c| m.max(c.abs()));
        if gap.coeffs().iter().any(|c| c.abs() > SPAN_TOL * scale) {
            return Err(NpError::OutsideSpan);
        }
        Ok(SvGenerator { x: f, y: self.shift.scale(-1.0) })
    }
}

/// Bracket of the vector fields, read back in the `X/Y` basis.
pub fn sv_bracket(a: &SvGenerator, b: &SvGenerator) -> SvGenerator {
    a.vector_field()
        .commutator(&b.vector_field())
        .to_sv()
        .expect("brackets of X and Y fields stay in their span")
}

/// Finite Schrödinger-Virasoro maps on a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FiniteSv {
    /// `(t, λ) ↦ (φ(t), √φ̇(t)·λ)`, `φ(0) = 0`, `φ̇ > 0`.
    TimeChange(TimePoly),
    /// `λ ↦ λ + ∫₀ᵗ b`.
    SpaceShift(TimePoly),
}

/// Transformed path on the original spacing. A time change covers
/// `[0, φ(T)]`; `λ` is linearly interpolated at `φ^{-1}(s_m)`.
pub fn finite_sv_transform(kind: &FiniteSv, path: &SampledPath) -> Result<SampledPath, NpError> {
    match kind {
        FiniteSv::SpaceShift(b) => {
            let v = path.values().iter().enumerate().map(|(j, x)| x + b.integral(0.0, path.time(j))).collect();
            path.with_values(v)
        }
        FiniteSv::TimeChange(phi) => {
            let at0 = phi.eval(0.0);
            if at0.abs() > 1e-12 {
                return Err(NpError::NotAnchored(at0));
            }
            let rate = phi.derivative();
            let nodes: Vec<f64> = path.times().iter().map(|&t| phi.eval(t)).collect();
            for (j, t) in path.times().into_iter().enumerate() {
                if rate.eval(t) <= 0.0 || (j > 0 && nodes[j] <= nodes[j - 1]) {
                    return Err(NpError::NonMonotone(t));
                }
            }
            let end = nodes[nodes.len() - 1];
            let count = (end / path.dt() + 1e-9).floor() as usize + 1;
            let values = (0..count)
                .map(|m| {
                    let s = m as f64 * path.dt();
                    let t = invert(phi, &nodes, path.dt(), s);
                    rate.eval(t).sqrt() * path.interpolate(t)
                })
                .collect();
            SampledPath::new(path.dt(), values)
        }
    }
}

/// `t` with `φ(t) = s`: locate the cell from the node values, then bisect.
fn invert(phi: &TimePoly, nodes: &[f64], dt: f64, s: f64) -> f64 {
    let j = nodes.partition_point(|&v| v <= s).clamp(1, nodes.len() - 1) - 1;
    let (mut lo, mut hi) = (j as f64 * dt, (j + 1) as f64 * dt);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if phi.eval(mid) < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `T(t) = ∫₀ᵗ |J(s)|^α ds` by composite 5-point Gauss-Legendre on 64 panels.
pub fn proper_time(jacobian: impl Fn(f64) -> f64, t: f64, alpha: f64) -> f64 {
    const NODES: [f64; 5] = [0.0, 0.538_469_310_105_683_1, -0.538_469_310_105_683_1, 0.906_179_845_938_664, -0.906_179_845_938_664];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let panels = 64;
    let h = t / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = (p as f64 + 0.5) * h;
            NODES.iter().zip(WEIGHTS).map(|(x, w)| w * jacobian(mid + 0.5 * h * x).abs().powf(alpha)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x_with_constant_and_t() {
        // [X_t, X_1] = X_{1·1 - t·0} = X_1.
        let b = sv_bracket(&SvGenerator::x(TimePoly::identity()), &SvGenerator::x(TimePoly::constant(1.0)));
        assert_eq!(b, SvGenerator::x(TimePoly::constant(1.0)));
    }

    #[test]
    fn y_fields_commute() {
        let b = sv_bracket(&SvGenerator::y(TimePoly::new(vec![1.0, 2.0])), &SvGenerator::y(TimePoly::new(vec![0.0, 0.0, 3.0])));
        assert!(b.x.is_zero() && b.y.is_zero());
    }

    #[test]
    fn outside_span() {
        let f = AffineField { t: TimePoly::zero(), slope: TimePoly::constant(1.0), shift: TimePoly::zero() };
        assert!(matches!(f.to_sv(), Err(NpError::OutsideSpan)));
    }

    #[test]
    fn proper_time_of_polynomial() {
        let v = proper_time(|s| 1.0 + s, 2.0, 2.0);
        assert!((v - (27.0 - 1.0) / 3.0).abs() < 1e-12);
    }
}
