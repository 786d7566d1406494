//! Scalar Gaussian special functions: density, tail, log-tail and Mills ratio.
//!
//! Everything downstream (the free-energy functional, its quadrature, the
//! capacity bound) consumes `ln H(x)` where `H(x) = P(Z >= x)`. Evaluating it
//! as `ln(H(x))` loses everything past `x ~ 38` where `H` underflows, and
//! `ln(1 - Phi(x))` loses everything past `x ~ 8`. The routines here avoid
//! both failure modes:
//!
//! * `x < 0`: `ln H(x) = ln1p(-H(-x))`, accurate even when `H(x)` rounds to 1.
//! * `0 <= x < 6`: `ln` of the complementary error function directly.
//! * `x >= 6`: `ln H(x) = ln phi(x) + ln R(x)` with the Mills ratio
//!   `R = H / phi` taken from its continued fraction.
//!
//! `erfc` itself comes from `libm`, a port of the FreeBSD/Sun fdlibm
//! routine (piecewise rational minimax approximations, error below 1 ulp).

use std::f64::consts::FRAC_1_SQRT_2;

/// `ln(sqrt(2 pi))`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `1 / sqrt(2 pi)`.
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Argument at which `log_gauss_tail` switches from the direct erfc branch to
/// the continued-fraction branch.
pub const LOG_TAIL_SWITCH: f64 = 6.0;

const CF_MAX_TERMS: usize = 5_000;
const CF_TINY: f64 = 1e-300;

/// Standard normal density. Underflows to zero for `|x| > ~38.6`.
#[inline]
pub fn gauss_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `ln phi(x)`, finite everywhere.
#[inline]
pub fn log_gauss_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Upper tail `H(x) = P(Z >= x)`, computed as `erfc(x / sqrt 2) / 2`.
///
/// Never formed as `1 - Phi(x)`. Underflows to zero for `x > ~38.5`; use
/// [`log_gauss_tail`] when the logarithm is what you need.
#[inline]
pub fn gauss_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal CDF, `Phi(x) = H(-x)`.
#[inline]
pub fn gauss_cdf(x: f64) -> f64 {
    gauss_tail(-x)
}

/// `ln H(x)`, finite for every finite `x`.
///
/// Relative accuracy is at the level of a few ulps of `erfc` on `|x| <= 8`.
/// For `x < -38.5` the exact value `-H(-x)` is below the smallest subnormal
/// and the result is `-0.0`.
pub fn log_gauss_tail(x: f64) -> f64 {
    if x < 0.0 {
        (-gauss_tail(-x)).ln_1p()
    } else if x < LOG_TAIL_SWITCH {
        log_tail_direct(x)
    } else {
        log_tail_asymptotic(x)
    }
}

/// `ln H(x)` evaluated as the logarithm of `erfc`. Valid while `H(x)` is a
/// normal float, i.e. `0 <= x < ~37`.
#[inline]
pub(crate) fn log_tail_direct(x: f64) -> f64 {
    gauss_tail(x).ln()
}

/// `ln H(x) = -x^2/2 - ln sqrt(2 pi) + ln R(x)` with `R` from the continued
/// fraction. Valid for `x > 0`; accurate to rounding for `x >= 5`.
#[inline]
pub(crate) fn log_tail_asymptotic(x: f64) -> f64 {
    log_gauss_pdf(x) + mills_continued_fraction(x).ln()
}

/// Mills ratio `R(x) = H(x) / phi(x)`.
///
/// Positive and strictly decreasing, with `x < 1/R(x) < x + 1/x` for `x > 0`.
/// Overflows to `+inf` for `x < ~-37.5` where `1/phi(x)` is not representable.
pub fn mills_ratio(x: f64) -> f64 {
    if x >= LOG_TAIL_SWITCH {
        mills_continued_fraction(x)
    } else if x >= 0.0 {
        gauss_tail(x) / gauss_pdf(x)
    } else {
        // H(x) = 1 - H(|x|); dividing by phi directly overflows gracefully.
        (log_gauss_tail(x) - log_gauss_pdf(x)).exp()
    }
}

/// Laplace continued fraction `R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...))))`,
/// evaluated with the modified Lentz algorithm. Requires `x > 0`.
fn mills_continued_fraction(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    // f = b0 + a1/(b1 + a2/(b2 + ...)) with b_k = x, a_k = k (a_1 = 1).
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..CF_MAX_TERMS {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = x + a / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}
