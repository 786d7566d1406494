//! Expectations `E[f(u)]` under the standard normal law.
//!
//! Two rules are available:
//!
//! * Gauss-Hermite with weight `phi(u)`. Spectrally accurate for integrands
//!   that are smooth on the unit scale. The error is estimated by comparing
//!   against the rule with half as many nodes; when that estimate exceeds the
//!   tolerance the node count is doubled (up to [`MAX_HERMITE_NODES`]), and
//!   past that cap the adaptive rule takes over.
//! * Adaptive Gauss-Kronrod (7/15) on `[-w, w]`, with the Gaussian mass
//!   outside the window folded into the error estimate.
//!
//! `E[ln H(u sqrt(q/(1-q)))]` sharpens on a `sqrt((1-q)/q)` scale around
//! `u = 0`, so Gauss-Hermite needs on the order of `16 q/(1-q)` nodes to stay
//! at `1e-10`. That is the reason for doubling and for the fallback.

use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::specfun::{gauss_pdf, gauss_tail, log_gauss_tail};

/// Largest Gauss-Hermite rule the doubling loop will build.
pub const MAX_HERMITE_NODES: usize = 3200;

/// Above this overlap `expected_log_tail` uses its large-signal expansion.
pub const ASYMPTOTIC_Q: f64 = 1.0 - 1e-6;

const MIN_HERMITE_NODES: usize = 16;
const MIN_HALF_WIDTH: f64 = 8.0;
const FALLBACK_HALF_WIDTH: f64 = 12.0;
const MAX_SUBINTERVALS: usize = 4000;
/// Roundoff floor multiplier on `eps * integral of |phi f|`.
const ROUNDOFF_FACTOR: f64 = 50.0;

/// Which integration rule to run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    GaussHermite { node_count: usize },
    AdaptiveInterval { interval_half_width: f64 },
}

/// Tag for the rule that actually produced a result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    GaussHermite,
    AdaptiveInterval,
    Asymptotic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    #[serde(flatten)]
    pub rule: Rule,
    pub abs_tol: f64,
}

impl Default for QuadratureSpec {
    /// Gauss-Hermite, 400 nodes, absolute tolerance `1e-10`.
    fn default() -> Self {
        Self {
            rule: Rule::GaussHermite { node_count: 400 },
            abs_tol: 1e-10,
        }
    }
}

impl QuadratureSpec {
    pub fn gauss_hermite(node_count: usize, abs_tol: f64) -> Result<Self, QuadratureError> {
        let spec = Self {
            rule: Rule::GaussHermite { node_count },
            abs_tol,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn adaptive(interval_half_width: f64, abs_tol: f64) -> Result<Self, QuadratureError> {
        let spec = Self {
            rule: Rule::AdaptiveInterval {
                interval_half_width,
            },
            abs_tol,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), QuadratureError> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(QuadratureError::InvalidSpec(format!(
                "abs_tol must be positive, got {}",
                self.abs_tol
            )));
        }
        match self.rule {
            Rule::GaussHermite { node_count } if node_count < MIN_HERMITE_NODES => {
                Err(QuadratureError::InvalidSpec(format!(
                    "gauss_hermite needs at least {MIN_HERMITE_NODES} nodes, got {node_count}"
                )))
            }
            Rule::GaussHermite { node_count } if node_count > MAX_HERMITE_NODES => {
                Err(QuadratureError::InvalidSpec(format!(
                    "gauss_hermite supports at most {MAX_HERMITE_NODES} nodes, got {node_count}"
                )))
            }
            Rule::AdaptiveInterval {
                interval_half_width: w,
            } if !(w >= MIN_HALF_WIDTH && w.is_finite()) => Err(QuadratureError::InvalidSpec(
                format!("interval_half_width must be at least {MIN_HALF_WIDTH}, got {w}"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationResult {
    pub value: f64,
    pub error_estimate: f64,
    pub nodes_used: usize,
    pub rule_used: RuleKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error(
        "quadrature did not converge: best value {value}, error estimate {error_estimate:e} \
         after {nodes_used} evaluations"
    )]
    NonConvergence {
        value: f64,
        error_estimate: f64,
        nodes_used: usize,
    },
}

/// Computes `E[f(u)] = integral of phi(u) f(u) du`.
pub fn gaussian_expectation<F>(f: F, spec: &QuadratureSpec) -> Result<ExpectationResult, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    match spec.rule {
        Rule::GaussHermite { node_count } => hermite_expectation(&f, node_count, spec.abs_tol, &[]),
        Rule::AdaptiveInterval {
            interval_half_width,
        } => adaptive_expectation(&f, interval_half_width, spec.abs_tol, 0, &[]),
    }
}

/// [`gaussian_expectation`] with extra breakpoints seeding the adaptive
/// partition (also used when Gauss-Hermite falls back). Breakpoints matter
/// when the integrand has structure narrower than the initial segments: an
/// embedded Gauss/Kronrod pair that sees none of it agrees on a wrong answer.
pub fn gaussian_expectation_with_breakpoints<F>(
    f: F,
    spec: &QuadratureSpec,
    breakpoints: &[f64],
) -> Result<ExpectationResult, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    match spec.rule {
        Rule::GaussHermite { node_count } => {
            hermite_expectation(&f, node_count, spec.abs_tol, breakpoints)
        }
        Rule::AdaptiveInterval {
            interval_half_width,
        } => adaptive_expectation(&f, interval_half_width, spec.abs_tol, 0, breakpoints),
    }
}

/// `E[ln H(u sqrt(q / (1 - q)))]` for `u ~ N(0, 1)` and `q` in `[0, 1)`.
///
/// The log-tail is always taken through [`log_gauss_tail`]. For
/// `q > ASYMPTOTIC_Q` the large-signal expansion
/// [`expected_log_tail_asymptotic`] is used instead of quadrature.
pub fn expected_log_tail(q: f64, spec: &QuadratureSpec) -> Result<ExpectationResult, QuadratureError> {
    if !(0.0..1.0).contains(&q) {
        return Err(QuadratureError::Domain(format!("overlap q must lie in [0, 1), got {q}")));
    }
    spec.validate()?;
    if q > ASYMPTOTIC_Q {
        let c = signal(q);
        return Ok(ExpectationResult {
            value: expected_log_tail_asymptotic(q),
            // first omitted term of the expansion is ~ 1/(2 c^2)
            error_estimate: 1.0 / (c * c),
            nodes_used: 0,
            rule_used: RuleKind::Asymptotic,
        });
    }
    let c = signal(q);
    // ln H(c u) bends on the 1/c scale around the origin.
    let breaks: Vec<f64> = if c > 1.0 {
        [-16.0, -4.0, -1.0, 0.0, 1.0, 4.0, 16.0].iter().map(|k| k / c).collect()
    } else {
        vec![0.0]
    };
    gaussian_expectation_with_breakpoints(|u| log_gauss_tail(c * u), spec, &breaks)
}

/// `sqrt(q / (1 - q))`.
#[inline]
pub fn signal(q: f64) -> f64 {
    (q / (1.0 - q)).sqrt()
}

/// `integral over v of [ln H(v) + (v^2/2 + ln(v sqrt(2 pi))) 1{v > 0}] dv`,
/// computed once offline at 40 digits.
const LOG_TAIL_REMAINDER_INTEGRAL: f64 = -2.301_415_913_279_983_5;

/// Euler-Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Large-signal expansion of `E[ln H(c u)]` with `c = sqrt(q/(1-q))`:
///
/// ```text
/// -c^2/4 - ln(c)/2 - ln(2 pi)/4 + (gamma + ln 2)/4 + D / (c sqrt(2 pi)) + O(c^-2)
/// ```
///
/// The `-c^2/4` term is exact (`ln H(x) ~ -x^2/2` on `x > 0` and
/// `E[u^2 1{u > 0}] = 1/2`). The log term comes from
/// `E[ln|u|] = -(gamma + ln 2)/2`, and `D` is the integral of the remainder
/// left after subtracting both. The residual is close to `1/(2 c^2)`.
pub fn expected_log_tail_asymptotic(q: f64) -> f64 {
    let c = signal(q);
    -0.25 * c * c - 0.5 * c.ln() - 0.25 * (2.0 * std::f64::consts::PI).ln()
        + 0.25 * (EULER_GAMMA + LN_2)
        + LOG_TAIL_REMAINDER_INTEGRAL * crate::specfun::FRAC_1_SQRT_2PI / c
}

// ---------------------------------------------------------------------------
// Gauss-Hermite

/// Nodes and weights for `integral phi(u) f(u) du`, weights summing to one.
#[derive(Debug)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HermiteRule {
    pub fn apply<F: Fn(f64) -> f64>(&self, f: &F) -> (f64, f64) {
        let mut sum = 0.0;
        let mut abs = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            let t = w * f(x);
            sum += t;
            abs += t.abs();
        }
        (sum, abs)
    }
}

/// Shared, lazily built node table for an `n`-point rule.
pub fn hermite_rule(n: usize) -> Arc<HermiteRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<HermiteRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return Arc::clone(rule);
    }
    // Built outside the lock; a racing builder produces the identical table.
    let rule = Arc::new(build_hermite_rule(n));
    Arc::clone(cache.lock().unwrap().entry(n).or_insert(rule))
}

/// Orthonormal (w.r.t. `phi`) Hermite recurrence at `x`:
/// `p_{k+1} = (x p_k - sqrt(k) p_{k-1}) / sqrt(k + 1)`.
///
/// Returns `(p_n, p_{n-1}, ln sum_{k<n} p_k^2)`, rescaling on the way so that
/// nothing overflows for nodes out to `|x| ~ 2 sqrt(n)`.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64, f64) {
    const BIG: f64 = 1e150;
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sumsq = 0.0;
    let mut log_scale = 0.0;
    for k in 0..n {
        sumsq += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            cur /= BIG;
            prev /= BIG;
            sumsq /= BIG * BIG;
            log_scale += BIG.ln();
        }
    }
    (cur, prev, sumsq.ln() + 2.0 * log_scale)
}

/// Number of eigenvalues of the `n x n` Jacobi matrix (zero diagonal,
/// off-diagonal `sqrt(k)`) below `x`, by Sturm sequence.
fn eigen_count_below(n: usize, x: f64) -> usize {
    let mut count = 0;
    let mut d = -x;
    if d < 0.0 {
        count += 1;
    }
    for k in 1..n {
        let denom = if d == 0.0 { f64::EPSILON } else { d };
        d = -x - (k as f64) / denom;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

fn build_hermite_rule(n: usize) -> HermiteRule {
    let bound = 2.0 * (n as f64).sqrt() + 1.0;
    let half = n / 2;
    let mut positive = Vec::with_capacity(half);
    // The k-th largest node is the eigenvalue with index n - 1 - k.
    let mut upper = bound;
    for k in 0..half {
        let index = n - 1 - k;
        let (mut lo, mut hi) = (0.0, upper);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if eigen_count_below(n, mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-9 * hi.max(1.0) {
                break;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..4 {
            let (pn, pn1, _) = orthonormal_hermite(n, x);
            let step = pn / ((n as f64).sqrt() * pn1);
            if !step.is_finite() {
                break;
            }
            let next = x - step;
            if !(lo - 1e-6..=hi + 1e-6).contains(&next) {
                break;
            }
            x = next;
            if step.abs() <= 1e-16 * x.abs() {
                break;
            }
        }
        positive.push(x);
        upper = x;
    }
    let weight = |x: f64| {
        let (_, _, log_sum) = orthonormal_hermite(n, x);
        (-log_sum).exp()
    };
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &x in &positive {
        nodes.push(-x);
        weights.push(weight(x));
    }
    if n % 2 == 1 {
        nodes.push(0.0);
        weights.push(weight(0.0));
    }
    for &x in positive.iter().rev() {
        nodes.push(x);
        weights.push(weight(x));
    }
    HermiteRule { nodes, weights }
}

fn hermite_expectation<F: Fn(f64) -> f64>(
    f: &F,
    node_count: usize,
    abs_tol: f64,
    breakpoints: &[f64],
) -> Result<ExpectationResult, QuadratureError> {
    let mut n = node_count;
    let (mut coarse, _) = hermite_rule((n / 2).max(2)).apply(f);
    let mut spent = n / 2;
    loop {
        let (fine, abs) = hermite_rule(n).apply(f);
        spent += n;
        let err = (fine - coarse).abs();
        if err <= abs_tol.max(ROUNDOFF_FACTOR * f64::EPSILON * abs) {
            return Ok(ExpectationResult {
                value: fine,
                error_estimate: err,
                nodes_used: spent,
                rule_used: RuleKind::GaussHermite,
            });
        }
        if 2 * n > MAX_HERMITE_NODES {
            break;
        }
        coarse = fine;
        n *= 2;
    }
    adaptive_expectation(f, FALLBACK_HALF_WIDTH, abs_tol, spent, breakpoints)
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
}

fn kronrod15<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = g(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs = (fc * WGK[7]).abs();
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = g(center - dx);
        let f2 = g(center + dx);
        kronrod += WGK[j] * (f1 + f2);
        abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
        abs: abs * half.abs(),
    }
}

fn adaptive_expectation<F: Fn(f64) -> f64>(
    f: &F,
    half_width: f64,
    abs_tol: f64,
    already_spent: usize,
    breakpoints: &[f64],
) -> Result<ExpectationResult, QuadratureError> {
    let g = |u: f64| gauss_pdf(u) * f(u);
    // Mass beyond the window, weighted by the integrand's size at the edge;
    // covers integrands growing up to quadratically.
    let w = half_width;
    let edge = f(w).abs().max(f(-w).abs()).max(1.0);
    let tail = 2.0 * (w * gauss_pdf(w) + gauss_tail(w)) * edge;

    let initial = 8;
    let mut cuts: Vec<f64> = (0..=initial)
        .map(|i| -w + 2.0 * w * i as f64 / initial as f64)
        .chain(breakpoints.iter().copied().filter(|b| b.abs() < w))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut segments: Vec<Segment> = cuts.windows(2).map(|ab| kronrod15(&g, ab[0], ab[1])).collect();
    let mut evals = already_spent + 15 * segments.len();
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum::<f64>() + tail;
        let abs: f64 = segments.iter().map(|s| s.abs).sum();
        if error <= abs_tol.max(ROUNDOFF_FACTOR * f64::EPSILON * abs) {
            return Ok(ExpectationResult {
                value,
                error_estimate: error,
                nodes_used: evals,
                rule_used: RuleKind::AdaptiveInterval,
            });
        }
        if segments.len() >= MAX_SUBINTERVALS {
            return Err(QuadratureError::NonConvergence {
                value,
                error_estimate: error,
                nodes_used: evals,
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one segment");
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        segments.push(kronrod15(&g, s.a, mid));
        segments.push(kronrod15(&g, mid, s.b));
        evals += 30;
    }
}
