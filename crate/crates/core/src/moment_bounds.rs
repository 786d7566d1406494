//! First-moment bounds on `P(|Z_{alpha N}| >= 1)` as exponential rates.
//!
//! Two chains are assembled:
//!
//! * annealed: `E|Z_t| = 2^(N - t)`, so `P(|Z_{alpha N}| >= 1) <= e^{N (1 - alpha) ln 2}`;
//! * conditional: rotate each sign vector by a Haar-random `O`; `O sigma` is
//!   uniform on the sphere of radius `sqrt N`, so
//!   `P(A (O sigma) > 0 | A) <= e^{N F(A)}`. On the event that `F(A)` is within
//!   `epsilon` of `GD(alpha)`, summing over the `2^N` vectors gives the rate
//!   `ln 2 + GD(alpha) + epsilon`; the complement of that event has vanishing
//!   probability because `F` concentrates.
//!
//! All rates are nats per dimension.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::gardner_derrida::{bisect_decreasing, gd_min, GdError, DEFAULT_OPT_TOL};
use crate::quadrature::QuadratureSpec;

/// Slack used when the caller does not choose one.
pub const DEFAULT_SLACK: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    Annealed,
    ConditionalSpherical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conclusion {
    BoundHolds,
    Inconclusive,
}

/// Exponential rate of the bound on `P(|Z_{alpha N}| >= 1)`, decomposed as
/// `rate = log2_term + free_energy_term + slack_epsilon`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub alpha: f64,
    pub method: BoundMethod,
    pub rate: f64,
    pub log2_term: f64,
    /// `GD(alpha)` for the conditional chain, `-alpha ln 2` for the annealed one.
    pub free_energy_term: f64,
    pub slack_epsilon: f64,
    /// Overlap attaining `GD(alpha)`; absent for the annealed chain.
    pub q_star: Option<f64>,
    pub conclusion: Conclusion,
}

impl BoundCertificate {
    fn new(alpha: f64, method: BoundMethod, free_energy_term: f64, slack: f64, q_star: Option<f64>) -> Self {
        let rate = LN_2 + free_energy_term + slack;
        Self {
            alpha,
            method,
            rate,
            log2_term: LN_2,
            free_energy_term,
            slack_epsilon: slack,
            q_star,
            conclusion: if rate < 0.0 {
                Conclusion::BoundHolds
            } else {
                Conclusion::Inconclusive
            },
        }
    }
}

/// `(1 - alpha) ln 2`, the growth rate of `E|Z_{alpha N}|`.
pub fn annealed_rate(alpha: f64) -> Result<f64, GdError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(GdError::Domain(format!("alpha must be positive, got {alpha}")));
    }
    Ok((1.0 - alpha) * LN_2)
}

pub fn annealed_certificate(alpha: f64) -> Result<BoundCertificate, GdError> {
    annealed_rate(alpha)?;
    Ok(BoundCertificate::new(alpha, BoundMethod::Annealed, -alpha * LN_2, 0.0, None))
}

/// Conditional first-moment certificate with rate `ln 2 + GD(alpha) + slack`.
pub fn conditional_rate(alpha: f64, slack_epsilon: f64, spec: &QuadratureSpec) -> Result<BoundCertificate, GdError> {
    check_slack(slack_epsilon)?;
    let eval = gd_min(alpha, spec, DEFAULT_OPT_TOL)?;
    Ok(BoundCertificate::new(
        alpha,
        BoundMethod::ConditionalSpherical,
        eval.value,
        slack_epsilon,
        Some(eval.q_star),
    ))
}

fn check_slack(slack: f64) -> Result<(), GdError> {
    if slack >= 0.0 && slack.is_finite() {
        Ok(())
    } else {
        Err(GdError::Domain(format!("slack epsilon must be >= 0, got {slack}")))
    }
}

/// Smallest `alpha` (to `root_tol`) at which the conditional rate is negative.
///
/// Bisects on `[0.8, 0.9]`, widening the upper end toward the spherical
/// capacity when a large slack pushes the root past it. The returned value
/// is the upper end of the final bracket, so it always certifies.
pub fn capacity_upper_bound(slack_epsilon: f64, spec: &QuadratureSpec, root_tol: f64) -> Result<f64, GdError> {
    check_slack(slack_epsilon)?;
    let rate = |alpha: f64| conditional_rate(alpha, slack_epsilon, spec).map(|c| c.rate);
    let lo = 0.8;
    let mut hi = 0.9;
    while rate(hi)? >= 0.0 {
        if hi >= 1.99 {
            let (f_lo, f_hi) = (rate(lo)?, rate(hi)?);
            return Err(GdError::Bracket { lo, hi, f_lo, f_hi });
        }
        hi = (hi + 0.1).min(1.99);
    }
    let (_, hi) = bisect_decreasing(rate, lo, hi, root_tol)?;
    Ok(hi)
}
