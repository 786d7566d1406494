//! Monte Carlo estimates of the spherical free energy
//!
//! ```text
//! F(A) = (1/N) max{ ln( Vol(B_N ∩ {A sigma > 0}) / Vol(B_N) ), -N^2 }
//! ```
//!
//! and empirical probes of its concentration and of the spherical capacity.
//!
//! # Ball fraction equals direction probability
//!
//! `C = {x : A x > 0}` is a cone with apex at the origin, so in polar
//! coordinates `Vol(B ∩ C) = |S ∩ C| * integral_0^R r^(N-1) dr` and the ball
//! fraction equals the surface fraction `|S ∩ C| / |S|`. A standard Gaussian
//! vector has a uniformly distributed direction, hence the fraction is
//! `P(A g > 0)` for `g ~ N(0, I_N)`. Both estimators rest on this.
//!
//! * [`estimate_f_direct`] counts hits of iid directions. It only sees
//!   `A g`, which is `N(0, A A^T)`; when `M <= N` it samples that law through a
//!   Cholesky factor, drawing coordinates lazily and stopping at the first
//!   violated row.
//! * [`estimate_f_sequential`] factors the fraction over the nested cones,
//!   `P(C_M) = prod_i P(A_i g > 0 | g in C_(i-1))`, estimating each factor from
//!   a population of Gaussian vectors moved by hit-and-run inside `C_(i-1)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binary_experiment::{constraints_for, ExperimentError, PerceptronInstance};
use crate::gardner_derrida::{gd_min, GdError, DEFAULT_OPT_TOL};
use crate::quadrature::QuadratureSpec;
use crate::seeds;

/// Samples per independently seeded chunk of the direct estimator.
const DIRECT_CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SphericalError {
    #[error("sample count must be positive")]
    Samples,
    #[error("no feasible direction found for constraint {step}")]
    ConeEmpty { step: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Instance(#[from] ExperimentError),
    #[error(transparent)]
    FreeEnergy(#[from] GdError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMethod {
    DirectGaussian,
    SequentialConditioning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalFreeEnergyEstimate {
    pub f_hat: f64,
    pub stderr: f64,
    pub method: EstimatorMethod,
    pub samples: u64,
    /// Zero hits: `f_hat` is the floor `-N^2 / N = -N`.
    pub truncated: bool,
}

impl SphericalFreeEnergyEstimate {
    fn floor(n_dim: usize, method: EstimatorMethod, samples: u64) -> Self {
        Self {
            f_hat: -(n_dim as f64),
            stderr: 0.0,
            method,
            samples,
            truncated: true,
        }
    }
}

/// `A x > 0` row by row. Invariant under positive rescaling of `x`.
pub fn in_cone(instance: &PerceptronInstance, x: &[f64]) -> bool {
    instance.rows().all(|row| dot(row, x) > 0.0)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) {
    let norm = dot(x, x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
}

/// Lower Cholesky factor of `A A^T`, row-major; `None` if not positive definite.
fn gram_cholesky(instance: &PerceptronInstance) -> Option<Vec<f64>> {
    let m = instance.n_constraints();
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = dot(instance.row(i), instance.row(j));
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if !(s > 1e-12 * dot(instance.row(i), instance.row(i))) {
                    return None;
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    Some(l)
}

fn count_hits_cholesky(l: &[f64], m: usize, samples: u64, rng: &mut ChaCha8Rng) -> u64 {
    let mut z = vec![0.0; m];
    let mut hits = 0;
    'sample: for _ in 0..samples {
        for i in 0..m {
            z[i] = StandardNormal.sample(rng);
            if dot(&l[i * m..i * m + i + 1], &z[..=i]) <= 0.0 {
                continue 'sample;
            }
        }
        hits += 1;
    }
    hits
}

fn count_hits_plain(instance: &PerceptronInstance, samples: u64, rng: &mut ChaCha8Rng) -> u64 {
    let mut g = vec![0.0; instance.n_dim()];
    let mut hits = 0;
    for _ in 0..samples {
        g.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
        if in_cone(instance, &g) {
            hits += 1;
        }
    }
    hits
}

/// `ln(p_hat) / N` from `samples` iid uniform directions, with the
/// delta-method standard error `sqrt((1 - p_hat) / hits) / N`.
///
/// Sampling is split into chunks of `2^16` with one ChaCha8 stream each, so
/// the result does not depend on the number of workers.
pub fn estimate_f_direct(
    instance: &PerceptronInstance,
    samples: u64,
    seed: u64,
) -> Result<SphericalFreeEnergyEstimate, SphericalError> {
    if samples == 0 {
        return Err(SphericalError::Samples);
    }
    let n = instance.n_dim() as f64;
    let m = instance.n_constraints();
    if m == 0 {
        return Ok(SphericalFreeEnergyEstimate {
            f_hat: 0.0,
            stderr: 0.0,
            method: EstimatorMethod::DirectGaussian,
            samples,
            truncated: false,
        });
    }
    let cholesky = if m <= instance.n_dim() {
        gram_cholesky(instance)
    } else {
        None
    };
    let chunks = samples.div_ceil(DIRECT_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = DIRECT_CHUNK.min(samples - c * DIRECT_CHUNK);
            let mut rng = seeds::rng_stream(seed, c);
            match &cholesky {
                Some(l) => count_hits_cholesky(l, m, len, &mut rng),
                None => count_hits_plain(instance, len, &mut rng),
            }
        })
        .sum();
    if hits == 0 {
        return Ok(SphericalFreeEnergyEstimate::floor(
            instance.n_dim(),
            EstimatorMethod::DirectGaussian,
            samples,
        ));
    }
    let p = hits as f64 / samples as f64;
    Ok(SphericalFreeEnergyEstimate {
        f_hat: (p.ln() / n).max(-n),
        stderr: ((1.0 - p) / hits as f64).sqrt() / n,
        method: EstimatorMethod::DirectGaussian,
        samples,
        truncated: false,
    })
}

/// Tuning for the sequential estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequentialConfig {
    /// Population size.
    pub samples_per_step: u64,
    /// Sweeps after a resampling that kept fewer than a tenth of the population.
    pub burn_in: u64,
    /// Sweeps after any other resampling.
    pub thinning: u64,
    /// Fraction of the population kept at each intermediate level.
    pub level_fraction: f64,
    /// Levels allowed per constraint.
    pub level_budget: u64,
}

impl SequentialConfig {
    pub fn new(samples_per_step: u64) -> Self {
        Self {
            samples_per_step,
            burn_in: 50,
            thinning: 5,
            level_fraction: 0.5,
            level_budget: 400,
        }
    }
}

/// Standard normal restricted to `[lo, hi]` by rejection from a normal,
/// uniform or translated exponential proposal.
fn truncated_standard_normal(lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> f64 {
    debug_assert!(lo < hi);
    if lo > 0.0 {
        return tail_interval(lo, hi, rng);
    }
    if hi < 0.0 {
        return -tail_interval(-hi, -lo, rng);
    }
    if hi - lo >= (2.0 * std::f64::consts::PI).sqrt() {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z >= lo && z <= hi {
                return z;
            }
        }
    }
    loop {
        let z = rng.random_range(lo..hi);
        if rng.random::<f64>() <= (-0.5 * z * z).exp() {
            return z;
        }
    }
}

/// `[lo, hi]` with `0 <= lo`.
fn tail_interval(lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> f64 {
    let rate = 0.5 * (lo + (lo * lo + 4.0).sqrt());
    let exp_width = (0.5 + 0.25 * (lo * lo - lo * (lo * lo + 4.0).sqrt())).exp() * 2.0 / (lo + (lo * lo + 4.0).sqrt());
    if hi - lo >= exp_width {
        loop {
            let z = lo - rng.random::<f64>().ln() / rate;
            if z <= hi && rng.random::<f64>() <= (-0.5 * (z - rate).powi(2)).exp() {
                return z;
            }
        }
    }
    loop {
        let z = rng.random_range(lo..hi);
        if rng.random::<f64>() <= (0.5 * (lo * lo - z * z)).exp() {
            return z;
        }
    }
}

/// Hit-and-run for `N(0, I)` restricted to
/// `{g : A_j g > 0 for j < active, A_active g > level}`.
///
/// Each move draws a direction `d = L z` with `z ~ N(0, I)` and a fixed lower
/// triangular `L`, then resamples the position along the line `g + t d` from
/// the target restricted to it, a one-dimensional normal truncated to the
/// feasible interval.
struct ConeWalk<'a> {
    instance: &'a PerceptronInstance,
    active: usize,
    level: f64,
    /// Row-major.
    factor: Vec<f64>,
    g: Vec<f64>,
    ag: Vec<f64>,
    z: Vec<f64>,
    d: Vec<f64>,
}

impl<'a> ConeWalk<'a> {
    /// `level = -inf` leaves row `active` unconstrained.
    fn new(instance: &'a PerceptronInstance, active: usize, level: f64, factor: Vec<f64>) -> Self {
        let n = instance.n_dim();
        let rows = if level > f64::NEG_INFINITY { active + 1 } else { active };
        Self {
            instance,
            active,
            level,
            factor,
            g: vec![0.0; n],
            ag: vec![0.0; rows],
            z: vec![0.0; n],
            d: vec![0.0; n],
        }
    }

    fn threshold(&self, j: usize) -> f64 {
        if j < self.active {
            0.0
        } else {
            self.level
        }
    }

    fn load(&mut self, g: &[f64]) {
        self.g.copy_from_slice(g);
        for j in 0..self.ag.len() {
            self.ag[j] = dot(self.instance.row(j), &self.g);
        }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) {
        let n = self.g.len();
        self.z.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
        for i in 0..n {
            self.d[i] = dot(&self.factor[i * n..i * n + i + 1], &self.z[..=i]);
        }
        let dd = dot(&self.d, &self.d);
        if !(dd > 0.0) {
            return;
        }
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for j in 0..self.ag.len() {
            let ad = dot(self.instance.row(j), &self.d);
            let bound = (self.threshold(j) - self.ag[j]) / ad;
            if ad > 0.0 {
                lo = lo.max(bound);
            } else if ad < 0.0 {
                hi = hi.min(bound);
            }
        }
        let sd = dd.sqrt().recip();
        let mean = -dot(&self.g, &self.d) / dd;
        let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
        if !(a < b) {
            return;
        }
        let t = mean + sd * truncated_standard_normal(a, b, rng);
        let mut moved = self.g.clone();
        for (g, d) in moved.iter_mut().zip(&self.d) {
            *g += t * d;
        }
        let ag: Vec<f64> = (0..self.ag.len()).map(|j| dot(self.instance.row(j), &moved)).collect();
        if ag.iter().enumerate().all(|(j, &v)| v > self.threshold(j)) {
            self.g = moved;
            self.ag = ag;
        }
    }

    #[cfg(test)]
    fn is_feasible(&self) -> bool {
        self.ag.iter().enumerate().all(|(j, &v)| v > self.threshold(j))
    }
}

/// Lower Cholesky factor of the covariance of `points` (stride `n`), with a
/// ridge keeping it positive definite; the identity when there is a single
/// point.
fn population_factor(points: &[f64], n: usize) -> Vec<f64> {
    let k = points.len() / n;
    let mut identity = vec![0.0; n * n];
    (0..n).for_each(|i| identity[i * n + i] = 1.0);
    if k < 2 {
        return identity;
    }
    let mut mean = vec![0.0; n];
    for p in points.chunks_exact(n) {
        mean.iter_mut().zip(p).for_each(|(m, x)| *m += x / k as f64);
    }
    let mut cov = vec![0.0; n * n];
    for p in points.chunks_exact(n) {
        for i in 0..n {
            let di = p[i] - mean[i];
            for j in 0..=i {
                cov[i * n + j] += di * (p[j] - mean[j]) / (k - 1) as f64;
            }
        }
    }
    let trace: f64 = (0..n).map(|i| cov[i * n + i]).sum();
    let ridge = 0.05 * trace / n as f64 + 1e-12;
    (0..n).for_each(|i| cov[i * n + i] += ridge);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = cov[i * n + j];
            for q in 0..j {
                s -= l[i * n + q] * l[j * n + q];
            }
            if i == j {
                if !(s > 0.0) {
                    return identity;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    l
}

/// Chain-rule estimate `(1/N) sum_i ln p_hat_i`.
///
/// A population of `samples_per_step` standard Gaussian vectors is carried
/// through the constraints. To pass row `i` the population climbs a ladder of
/// levels `A_i g > l_1 > ... > l_k = 0`, each level placed at the population
/// quantile that keeps `level_fraction` of it, until the last level is `0`.
/// After each level the survivors are replicated back to full size and moved
/// by [`ConeWalk`] with the covariance of the population as direction law.
/// `p_hat_i` is the product of the kept fractions. The standard error
/// propagates the binomial variances of the kept fractions as if they were
/// independent, which they are not: replicas share ancestors. Treat it as
/// indicative.
pub fn estimate_f_sequential(
    instance: &PerceptronInstance,
    samples_per_step: u64,
    seed: u64,
) -> Result<SphericalFreeEnergyEstimate, SphericalError> {
    estimate_f_sequential_with(instance, &SequentialConfig::new(samples_per_step), seed)
}

pub fn estimate_f_sequential_with(
    instance: &PerceptronInstance,
    config: &SequentialConfig,
    seed: u64,
) -> Result<SphericalFreeEnergyEstimate, SphericalError> {
    if config.samples_per_step < 100 {
        return Err(SphericalError::Invalid(format!(
            "samples_per_step must be at least 100, got {}",
            config.samples_per_step
        )));
    }
    if config.thinning == 0 || config.burn_in == 0 {
        return Err(SphericalError::Invalid("burn_in and thinning must be at least 1".into()));
    }
    if !(config.level_fraction > 0.0 && config.level_fraction < 1.0) || config.level_budget == 0 {
        return Err(SphericalError::Invalid(
            "level_fraction must lie in (0, 1) and level_budget must be at least 1".into(),
        ));
    }
    let method = EstimatorMethod::SequentialConditioning;
    let mut spent = 0;
    match sequential_log_probability(instance, config, seed, &mut spent) {
        Ok((log_p, var)) if log_p / instance.n_dim() as f64 >= -(instance.n_dim() as f64) => {
            let n = instance.n_dim() as f64;
            Ok(SphericalFreeEnergyEstimate {
                f_hat: log_p / n,
                stderr: var.sqrt() / n,
                method,
                samples: spent,
                truncated: false,
            })
        }
        Ok(_) | Err(SphericalError::ConeEmpty { .. }) => {
            Ok(SphericalFreeEnergyEstimate::floor(instance.n_dim(), method, spent))
        }
        Err(e) => Err(e),
    }
}

/// Returns `(sum ln p_hat_i, sum var(ln p_hat_i))`.
fn sequential_log_probability(
    instance: &PerceptronInstance,
    config: &SequentialConfig,
    seed: u64,
    spent: &mut u64,
) -> Result<(f64, f64), SphericalError> {
    let n = instance.n_dim();
    let m = instance.n_constraints();
    let population = config.samples_per_step as usize;
    let mut rng = seeds::rng_stream(seed, 0);
    let mut particles: Vec<f64> = (0..population * n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut log_p = 0.0;
    let mut var = 0.0;

    for step in 0..m {
        let mut rng = seeds::rng_stream(seed, step as u64 + 1);
        let target = instance.row(step);
        let mut level = f64::NEG_INFINITY;
        for round in 0.. {
            if round as u64 >= config.level_budget {
                return Err(SphericalError::ConeEmpty { step });
            }
            let values: Vec<f64> = particles.chunks_exact(n).map(|p| dot(target, p)).collect();
            let passing = values.iter().filter(|&&v| v > 0.0).count();
            let next_level = if passing as f64 >= config.level_fraction * population as f64 {
                0.0
            } else {
                let cut = ((1.0 - config.level_fraction) * population as f64) as usize;
                let mut sorted = values.clone();
                let (_, &mut q, _) = sorted.select_nth_unstable_by(cut.min(population - 1), f64::total_cmp);
                q.min(0.0)
            };
            let kept: Vec<usize> = (0..population).filter(|&k| values[k] > next_level).collect();
            *spent += population as u64;
            if kept.is_empty() || !(next_level > level) {
                return Err(SphericalError::ConeEmpty { step });
            }
            let p = kept.len() as f64 / population as f64;
            log_p += p.ln();
            var += (1.0 - p) / (p * population as f64);
            let mut next = Vec::with_capacity(population * n);
            for k in 0..population {
                let src = kept[k % kept.len()];
                next.extend_from_slice(&particles[src * n..(src + 1) * n]);
            }
            particles = next;
            level = next_level;
            let sweeps = if kept.len() * 10 < population { config.burn_in } else { config.thinning };
            let (active, row_level) = if level >= 0.0 { (step + 1, f64::NEG_INFINITY) } else { (step, level) };
            if step + 1 == m && level >= 0.0 {
                break;
            }
            for _ in 0..sweeps {
                let mut chain = ConeWalk::new(instance, active, row_level, population_factor(&particles, n));
                for p in particles.chunks_exact_mut(n) {
                    chain.load(p);
                    chain.step(&mut rng);
                    p.copy_from_slice(&chain.g);
                }
            }
            if level >= 0.0 {
                break;
            }
        }
    }
    Ok((log_p, var))
}

/// Outcome of the perceptron feasibility search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Feasibility {
    /// Unit vector with `min_i A_i sigma > 0`, checked by direct products.
    Witness { sigma: Vec<f64>, min_margin: f64, iterations: u64 },
    /// Inconclusive: the cone may still be nonempty.
    NotFound { iterations: u64 },
}

impl Feasibility {
    pub fn is_witness(&self) -> bool {
        matches!(self, Feasibility::Witness { .. })
    }
}

/// Classical perceptron on the normalized rows: while some row has
/// `A_i w <= 0`, add the most violated normalized row to `w`.
pub fn spherical_feasibility(instance: &PerceptronInstance, max_iters: u64) -> Result<Feasibility, SphericalError> {
    if max_iters == 0 {
        return Err(SphericalError::Invalid("max_iters must be at least 1".into()));
    }
    let n = instance.n_dim();
    let m = instance.n_constraints();
    let unit_rows: Vec<Vec<f64>> = instance
        .rows()
        .map(|r| {
            let mut v = r.to_vec();
            normalize(&mut v);
            v
        })
        .collect();
    // margins[i] = unit_row_i . w, kept current through the Gram matrix
    let gram: Vec<f64> = (0..m * m).map(|k| dot(&unit_rows[k / m], &unit_rows[k % m])).collect();
    let mut w = vec![0.0; n];
    let mut margins: Vec<f64> = vec![0.0; m];
    for it in 0..max_iters {
        let (worst, &min) = margins
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap_or((0, &1.0f64));
        if min > 0.0 || m == 0 {
            let mut sigma = w.clone();
            if m == 0 {
                sigma[0] = 1.0;
            }
            normalize(&mut sigma);
            let min_margin = instance.rows().map(|r| dot(r, &sigma)).fold(f64::INFINITY, f64::min);
            if min_margin > 0.0 {
                return Ok(Feasibility::Witness {
                    sigma,
                    min_margin,
                    iterations: it,
                });
            }
        }
        w.iter_mut().zip(&unit_rows[worst]).for_each(|(w, r)| *w += r);
        for (i, mg) in margins.iter_mut().enumerate() {
            *mg += gram[i * m + worst];
        }
    }
    Ok(Feasibility::NotFound { iterations: max_iters })
}

/// Mean and sample variance of `f_hat` at one size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n_dim: usize,
    pub n_constraints: usize,
    pub trials: usize,
    pub mean: f64,
    /// `None` when fewer than two trials ran.
    pub variance: Option<f64>,
    pub truncated: usize,
}

impl SizeSummary {
    pub fn from_estimates(n_dim: usize, n_constraints: usize, estimates: &[SphericalFreeEnergyEstimate]) -> Self {
        let k = estimates.len();
        let mean = estimates.iter().map(|e| e.f_hat).sum::<f64>() / k as f64;
        let variance = (k >= 2)
            .then(|| estimates.iter().map(|e| (e.f_hat - mean).powi(2)).sum::<f64>() / (k - 1) as f64);
        Self {
            n_dim,
            n_constraints,
            trials: k,
            mean,
            variance,
            truncated: estimates.iter().filter(|e| e.truncated).count(),
        }
    }
}

/// Concentration probe at sizes `N` and `2N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceProbe {
    pub alpha: f64,
    pub small: SizeSummary,
    pub large: SizeSummary,
    pub gd_reference: f64,
    /// `variance(N) / variance(2N)`.
    pub variance_ratio: Option<f64>,
    /// `variance(2N) * 1.5 <= variance(N)`.
    pub variance_decreases: Option<bool>,
}

/// Required ratio `variance(N) / variance(2N)` for the trend gate.
pub const VARIANCE_RATIO_GATE: f64 = 1.5;

/// Direct estimates of `F` on `trials` instances at `n_dim` and `2 n_dim`
/// (`M = ceil(alpha N)` each), compared against `GD(alpha)`.
pub fn variance_probe(
    alpha: f64,
    n_dim: usize,
    trials: usize,
    samples: u64,
    seed: u64,
) -> Result<VarianceProbe, SphericalError> {
    if trials == 0 {
        return Err(SphericalError::Invalid("trials must be at least 1".into()));
    }
    let gd_reference = gd_min(alpha, &QuadratureSpec::default(), DEFAULT_OPT_TOL)?.value;
    let summarize = |n: usize| -> Result<SizeSummary, SphericalError> {
        let m = constraints_for(alpha, n);
        let (estimates, _) = run_direct_trials(n, m, trials as u64, samples, seeds::derive_seed(seed, n as u64))?;
        Ok(SizeSummary::from_estimates(n, m, &estimates))
    };
    let small = summarize(n_dim)?;
    let large = summarize(2 * n_dim)?;
    let variance_ratio = match (small.variance, large.variance) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };
    let variance_decreases = match (small.variance, large.variance) {
        (Some(a), Some(b)) => Some(b * VARIANCE_RATIO_GATE <= a),
        _ => None,
    };
    Ok(VarianceProbe {
        alpha,
        small,
        large,
        gd_reference,
        variance_ratio,
        variance_decreases,
    })
}

/// Per-trial seeds: the instance uses `derive_seed(master, i)`, its sampler
/// `derive_seed(instance_seed, 1)`.
pub fn trial_seeds(master_seed: u64, trial: u64) -> (u64, u64) {
    let instance_seed = seeds::derive_seed(master_seed, trial);
    (instance_seed, seeds::derive_seed(instance_seed, 1))
}

/// Direct estimates on `trials` fresh instances, in trial order, together
/// with the instance seeds.
pub fn run_direct_trials(
    n_dim: usize,
    n_constraints: usize,
    trials: u64,
    samples: u64,
    master_seed: u64,
) -> Result<(Vec<SphericalFreeEnergyEstimate>, Vec<u64>), SphericalError> {
    run_trials(n_dim, n_constraints, trials, master_seed, |inst, s| {
        estimate_f_direct(inst, samples, s)
    })
}

pub fn run_sequential_trials(
    n_dim: usize,
    n_constraints: usize,
    trials: u64,
    samples_per_step: u64,
    master_seed: u64,
) -> Result<(Vec<SphericalFreeEnergyEstimate>, Vec<u64>), SphericalError> {
    run_trials(n_dim, n_constraints, trials, master_seed, |inst, s| {
        estimate_f_sequential(inst, samples_per_step, s)
    })
}

fn run_trials<F>(
    n_dim: usize,
    n_constraints: usize,
    trials: u64,
    master_seed: u64,
    estimate: F,
) -> Result<(Vec<SphericalFreeEnergyEstimate>, Vec<u64>), SphericalError>
where
    F: Fn(&PerceptronInstance, u64) -> Result<SphericalFreeEnergyEstimate, SphericalError> + Sync,
{
    let rows = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (inst_seed, mc_seed) = trial_seeds(master_seed, t);
            let inst = PerceptronInstance::sample(n_dim, n_constraints, inst_seed)?;
            Ok((estimate(&inst, mc_seed)?, inst_seed))
        })
        .collect::<Result<Vec<_>, SphericalError>>()?;
    Ok(rows.into_iter().unzip())
}
