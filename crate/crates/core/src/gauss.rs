//! Standard-normal special functions and moments of the standard normal
//! restricted to an interval.
//!
//! Everything in the state equations reduces, conditional on the signal
//! variable, to probabilities and first/second moments of `Z ~ N(0, 1)` over
//! an interval `[a, b]`. Those are available in closed form:
//!
//! ```text
//! p0 = Phi(b) - Phi(a)
//! m1 = phi(a) - phi(b)
//! m2 = p0 + a phi(a) - b phi(b)
//! ```
//!
//! with the usual limits at infinite endpoints.

use crate::error::{Error, Result};

/// `1 / sqrt(2 pi)`
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn phi(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF without input validation.
///
/// Evaluated through `erfc` on whichever side keeps the argument
/// non-positive, so both tails keep full relative precision.
#[inline]
pub fn cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
    } else {
        1.0 - 0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
    }
}

/// Upper tail `1 - Phi(x)`, accurate for large positive `x`.
#[inline]
pub fn sf(x: f64) -> f64 {
    cdf(-x)
}

/// Standard normal CDF. Rejects non-finite input.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite("std_normal_cdf argument"));
    }
    Ok(cdf(x))
}

/// Inverse standard normal CDF on `(0, 1)`.
///
/// Acklam's rational approximation (relative error ~1e-9) followed by one
/// Halley step against [`cdf`], which brings it to full double precision.
pub fn inv_cdf(u: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const LOW: f64 = 0.024_25;
    if !(u > 0.0 && u < 1.0) {
        return match u {
            0.0 => f64::NEG_INFINITY,
            1.0 => f64::INFINITY,
            _ => f64::NAN,
        };
    }
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if u < LOW {
        tail((-2.0 * u.ln()).sqrt())
    } else if u <= 1.0 - LOW {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - u).ln()).sqrt())
    };
    // Halley refinement; work with the smaller tail to keep precision.
    let e = if x <= 0.0 { cdf(x) - u } else { (1.0 - u) - sf(x) };
    let g = e / phi(x);
    if !g.is_finite() {
        return x;
    }
    x - g / (1.0 + 0.5 * x * g)
}

/// A point of the extended real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    NegInf,
    Finite(f64),
    PosInf,
}

impl Bound {
    fn cdf(self) -> f64 {
        match self {
            Bound::NegInf => 0.0,
            Bound::Finite(x) => cdf(x),
            Bound::PosInf => 1.0,
        }
    }

    fn pdf(self) -> f64 {
        match self {
            Bound::Finite(x) => phi(x),
            _ => 0.0,
        }
    }

    /// `x phi(x)`, which vanishes at both infinities.
    fn x_pdf(self) -> f64 {
        match self {
            Bound::Finite(x) => x * phi(x),
            _ => 0.0,
        }
    }

    fn key(self) -> f64 {
        match self {
            Bound::NegInf => f64::NEG_INFINITY,
            Bound::Finite(x) => x,
            Bound::PosInf => f64::INFINITY,
        }
    }
}

impl From<f64> for Bound {
    /// Infinite floats map onto the explicit infinite tags.
    fn from(x: f64) -> Self {
        if x == f64::INFINITY {
            Bound::PosInf
        } else if x == f64::NEG_INFINITY {
            Bound::NegInf
        } else {
            Bound::Finite(x)
        }
    }
}

/// Mass, first and second moment of `Z ~ N(0, 1)` over an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMoments {
    /// `P(a <= Z <= b)`
    pub p0: f64,
    /// `E[Z 1{a <= Z <= b}]`
    pub m1: f64,
    /// `E[Z^2 1{a <= Z <= b}]`
    pub m2: f64,
}

impl TruncatedMoments {
    pub const EMPTY: TruncatedMoments = TruncatedMoments {
        p0: 0.0,
        m1: 0.0,
        m2: 0.0,
    };
}

/// Closed-form truncated moments over `[a, b]`. An empty or reversed
/// interval gives all zeros.
pub fn truncated_moments(a: Bound, b: Bound) -> Result<TruncatedMoments> {
    for e in [a, b] {
        if let Bound::Finite(x) = e {
            if x.is_nan() {
                return Err(Error::NonFinite("truncated_moments endpoint"));
            }
        }
    }
    Ok(moments_unchecked(a, b))
}

/// Same as [`truncated_moments`] for finite endpoints, without validation.
/// Used on the hot path of the residual evaluation.
#[inline]
pub fn finite_moments(a: f64, b: f64) -> TruncatedMoments {
    if a >= b {
        return TruncatedMoments::EMPTY;
    }
    let p0 = interval_prob(a, b);
    let (pa, pb) = (phi(a), phi(b));
    let m2 = (p0 + a * pa - b * pb).max(0.0);
    TruncatedMoments {
        p0,
        m1: pa - pb,
        m2,
    }
}

fn moments_unchecked(a: Bound, b: Bound) -> TruncatedMoments {
    if a.key() >= b.key() {
        return TruncatedMoments::EMPTY;
    }
    let p0 = match (a, b) {
        (Bound::Finite(x), Bound::Finite(y)) => interval_prob(x, y),
        _ => (b.cdf() - a.cdf()).max(0.0),
    };
    let m1 = a.pdf() - b.pdf();
    let m2 = (p0 + a.x_pdf() - b.x_pdf()).max(0.0);
    TruncatedMoments { p0, m1, m2 }
}

/// `P(a <= Z <= b)` computed in whichever tail avoids cancellation.
#[inline]
pub fn interval_prob(a: f64, b: f64) -> f64 {
    if a >= b {
        0.0
    } else if a > 0.0 {
        (sf(a) - sf(b)).max(0.0)
    } else {
        (cdf(b) - cdf(a)).max(0.0)
    }
}
