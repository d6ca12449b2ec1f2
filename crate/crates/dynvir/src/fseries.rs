//! Truncated formal Laurent series in one variable `z`.
//!
//! A [`TruncSeries`] stores the coefficients of `z^lo ..= z^hi` densely. Each
//! end of the window is either *exact* (every coefficient beyond it is zero)
//! or *truncated* (coefficients beyond it exist but were dropped). Products
//! track which degrees are still determined by the retained data and refuse
//! to produce the others.
//!
//! Contour integrals are coefficient extraction: `∮ z^n dz = δ_{n,-1}`.

use std::fmt;
use std::ops::RangeInclusive;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("degree {degree} is not determined by the retained coefficients")]
    WindowOverflow { degree: i32 },
    #[error("empty degree window {lo}..={hi}")]
    EmptyWindow { lo: i32, hi: i32 },
}

/// Whether the coefficients past one end of the window are known zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Exact,
    Truncated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncSeries {
    lo: i32,
    hi: i32,
    coeffs: Vec<f64>,
    below: End,
    above: End,
}

impl TruncSeries {
    /// Exact Laurent polynomial `Σ coeffs[i] z^(lo+i)`.
    pub fn polynomial(lo: i32, coeffs: Vec<f64>) -> Self {
        Self::with_ends(lo, coeffs, End::Exact, End::Exact)
    }

    /// Series known only on the window; both tails were dropped.
    pub fn truncated(lo: i32, coeffs: Vec<f64>) -> Self {
        Self::with_ends(lo, coeffs, End::Truncated, End::Truncated)
    }

    pub fn with_ends(lo: i32, coeffs: Vec<f64>, below: End, above: End) -> Self {
        let coeffs = if coeffs.is_empty() { vec![0.0] } else { coeffs };
        let hi = lo + coeffs.len() as i32 - 1;
        Self { lo, hi, coeffs, below, above }
    }

    /// All-zero exact series on the given window.
    pub fn zero(lo: i32, hi: i32) -> Self {
        Self::polynomial(lo, vec![0.0; (hi - lo + 1).max(1) as usize])
    }

    /// The monomial `c z^n`.
    pub fn monomial(n: i32, c: f64) -> Self {
        Self::polynomial(n, vec![c])
    }

    /// Build on `lo..=hi` from a coefficient function.
    pub fn from_fn(lo: i32, hi: i32, below: End, above: End, f: impl Fn(i32) -> f64) -> Self {
        Self::with_ends(lo, (lo..=hi).map(f).collect(), below, above)
    }

    pub fn lo_deg(&self) -> i32 {
        self.lo
    }

    pub fn hi_deg(&self) -> i32 {
        self.hi
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn ends(&self) -> (End, End) {
        (self.below, self.above)
    }

    /// Same coefficients, with the given end declared truncated.
    pub fn truncate_below(mut self) -> Self {
        self.below = End::Truncated;
        self
    }

    pub fn truncate_above(mut self) -> Self {
        self.above = End::Truncated;
        self
    }

    /// Coefficient of `z^n`; zero beyond an exact end, an error beyond a
    /// truncated one.
    pub fn coeff(&self, n: i32) -> Result<f64, SeriesError> {
        if n < self.lo {
            match self.below {
                End::Exact => Ok(0.0),
                End::Truncated => Err(SeriesError::WindowOverflow { degree: n }),
            }
        } else if n > self.hi {
            match self.above {
                End::Exact => Ok(0.0),
                End::Truncated => Err(SeriesError::WindowOverflow { degree: n }),
            }
        } else {
            Ok(self.coeffs[(n - self.lo) as usize])
        }
    }

    fn nonzero_span(&self) -> Option<(i32, i32)> {
        let first = self.coeffs.iter().position(|&c| c != 0.0)?;
        let last = self.coeffs.iter().rposition(|&c| c != 0.0)?;
        Some((self.lo + first as i32, self.lo + last as i32))
    }

    /// Range of degrees where the product `self·other` is determined.
    ///
    /// Bounds are `i32::MIN`/`i32::MAX` on sides where every degree is
    /// determined. Returns `None` when no degree is determined (a tail of one
    /// factor meets an unbounded tail of the other).
    pub fn reliable_product_window(&self, other: &Self) -> Option<(i32, i32)> {
        let (mut lo, mut hi) = (i32::MIN, i32::MAX);
        for (a, b) in [(self, other), (other, self)] {
            let span = b.nonzero_span();
            if a.above == End::Truncated {
                if b.below == End::Truncated {
                    return None;
                }
                // Unknown a_i, i > a.hi, pairs with the lowest nonzero b_j.
                let jmin = match span {
                    Some((jmin, _)) => jmin,
                    None if b.above == End::Truncated => b.hi + 1,
                    None => continue,
                };
                hi = hi.min(a.hi.saturating_add(jmin));
            }
            if a.below == End::Truncated {
                if b.above == End::Truncated {
                    return None;
                }
                let jmax = match span {
                    Some((_, jmax)) => jmax,
                    None if b.below == End::Truncated => b.lo - 1,
                    None => continue,
                };
                lo = lo.max(a.lo.saturating_add(jmax));
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Cauchy product restricted to `window`.
    pub fn mul(&self, other: &Self, window: RangeInclusive<i32>) -> Result<Self, SeriesError> {
        let (wlo, whi) = (*window.start(), *window.end());
        if wlo > whi {
            return Err(SeriesError::EmptyWindow { lo: wlo, hi: whi });
        }
        let (rlo, rhi) = self
            .reliable_product_window(other)
            .ok_or(SeriesError::WindowOverflow { degree: wlo })?;
        if wlo < rlo {
            return Err(SeriesError::WindowOverflow { degree: wlo });
        }
        if whi > rhi {
            return Err(SeriesError::WindowOverflow { degree: whi });
        }
        let mut out = vec![0.0; (whi - wlo + 1) as usize];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let da = self.lo + i as i32;
            for (j, &b) in other.coeffs.iter().enumerate() {
                let d = da + other.lo + j as i32;
                if (wlo..=whi).contains(&d) {
                    out[(d - wlo) as usize] += a * b;
                }
            }
        }
        let exact_below = self.below == End::Exact
            && other.below == End::Exact
            && wlo <= self.lo + other.lo;
        let exact_above = self.above == End::Exact
            && other.above == End::Exact
            && whi >= self.hi + other.hi;
        Ok(Self::with_ends(
            wlo,
            out,
            if exact_below { End::Exact } else { End::Truncated },
            if exact_above { End::Exact } else { End::Truncated },
        ))
    }

    /// Product on the largest determined window.
    pub fn mul_reliable(&self, other: &Self) -> Result<Self, SeriesError> {
        let (lo, hi) = self
            .reliable_product_window(other)
            .ok_or(SeriesError::WindowOverflow { degree: self.lo + other.lo })?;
        let lo = lo.max(self.lo + other.lo);
        let hi = hi.min(self.hi + other.hi);
        if lo > hi {
            return Err(SeriesError::EmptyWindow { lo, hi });
        }
        self.mul(other, lo..=hi)
    }

    /// `d/dz`; the window moves down by one degree.
    pub fn differentiate(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| (self.lo + i as i32) as f64 * c)
            .collect();
        Self::with_ends(self.lo - 1, coeffs, self.below, self.above)
    }

    /// `(𝒫₊a, 𝒫₋a)`: degrees `≥ 0` and degrees `≤ -1`.
    ///
    /// A half that lies entirely outside the window comes back as a single
    /// zero coefficient at its boundary degree (0 or -1), carrying the
    /// input's end flag on the far side.
    pub fn split(&self) -> (Self, Self) {
        let plus = if self.hi >= 0 {
            let lo = self.lo.max(0);
            let below = if self.lo >= 0 { self.below } else { End::Exact };
            Self::from_fn(lo, self.hi, below, self.above, |n| self.coeffs[(n - self.lo) as usize])
        } else {
            Self::with_ends(0, vec![0.0], End::Exact, self.above)
        };
        let minus = if self.lo <= -1 {
            let hi = self.hi.min(-1);
            let above = if self.hi <= -1 { self.above } else { End::Exact };
            Self::from_fn(self.lo, hi, self.below, above, |n| self.coeffs[(n - self.lo) as usize])
        } else {
            Self::with_ends(-1, vec![0.0], self.below, End::Exact)
        };
        (plus, minus)
    }

    pub fn plus(&self) -> Self {
        self.split().0
    }

    pub fn minus(&self) -> Self {
        self.split().1
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// Sum on the intersection of what both operands determine.
    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        let lo = match (self.below, other.below) {
            (End::Exact, End::Exact) => self.lo.min(other.lo),
            (End::Exact, End::Truncated) => other.lo,
            (End::Truncated, End::Exact) => self.lo,
            (End::Truncated, End::Truncated) => self.lo.max(other.lo),
        };
        let hi = match (self.above, other.above) {
            (End::Exact, End::Exact) => self.hi.max(other.hi),
            (End::Exact, End::Truncated) => other.hi,
            (End::Truncated, End::Exact) => self.hi,
            (End::Truncated, End::Truncated) => self.hi.min(other.hi),
        };
        if lo > hi {
            return Err(SeriesError::EmptyWindow { lo, hi });
        }
        let coeffs = (lo..=hi)
            .map(|n| Ok(self.coeff(n)? + other.coeff(n)?))
            .collect::<Result<Vec<_>, SeriesError>>()?;
        let below = if self.below == End::Exact && other.below == End::Exact {
            End::Exact
        } else {
            End::Truncated
        };
        let above = if self.above == End::Exact && other.above == End::Exact {
            End::Exact
        } else {
            End::Truncated
        };
        Ok(Self::with_ends(lo, coeffs, below, above))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.add(&other.scale(-1.0))
    }

    /// Restrict to a sub-window, marking cut ends as truncated.
    pub fn restrict(&self, window: RangeInclusive<i32>) -> Result<Self, SeriesError> {
        let (lo, hi) = (*window.start(), *window.end());
        let coeffs = (lo..=hi).map(|n| self.coeff(n)).collect::<Result<Vec<_>, _>>()?;
        let below = if self.below == End::Exact && lo <= self.lo {
            End::Exact
        } else {
            End::Truncated
        };
        let above = if self.above == End::Exact && hi >= self.hi {
            End::Exact
        } else {
            End::Truncated
        };
        Ok(Self::with_ends(lo, coeffs, below, above))
    }

    /// Contour integral `∮ a(z) dz`: the coefficient of `z^{-1}`.
    pub fn residue(&self) -> Result<f64, SeriesError> {
        self.coeff(-1)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Default identity-suite window for mode cutoff `k_max`.
pub fn default_window(k_max: usize) -> RangeInclusive<i32> {
    let w = k_max as i32 + 2;
    -w..=w
}

/// Residue pairing `(u, v) = ∮ u(z) v(z) dz`.
pub fn residue_pair(u: &TruncSeries, v: &TruncSeries) -> Result<f64, SeriesError> {
    u.mul(v, -1..=-1)?.coeff(-1)
}

impl fmt::Display for TruncSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        if self.below == End::Truncated {
            write!(f, "… ")?;
        }
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}·z^{}", self.lo + i as i32)?;
        }
        if first {
            write!(f, "0")?;
        }
        if self.above == End::Truncated {
            write!(f, " + …")?;
        }
        Ok(())
    }
}
