//! Exact solution counting for the binary perceptron at small `N`.
//!
//! For a Gaussian `M x N` matrix `A`, let `Z_t` be the set of sign vectors
//! satisfying the first `t` constraints strictly, `A_i sigma > 0` for
//! `i < t`. The sets are nested, `E|Z_t| = 2^(N - t)`, and the empirical
//! capacity of an instance is the largest `t` with `Z_t` nonempty, over `N`.
//!
//! All `2^N` vectors are visited in Gray-code order so that consecutive
//! vectors differ in one coordinate and `A sigma` is updated by
//! `+- 2 A[:, j]` in `O(M)`. Each vector contributes to the counts up to its
//! first violated constraint. A zero dot product counts as a violation.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeds;

/// Largest dimension the enumeration accepts.
pub const MAX_ENUMERATION_DIM: usize = 30;

/// Gray steps between exact recomputations of `A sigma`.
const RESYNC_INTERVAL: u64 = 1 << 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExperimentError {
    #[error("dimension {n_dim} outside 1..={max}")]
    Dimension { n_dim: usize, max: usize },
    #[error("instance needs at least one constraint")]
    NoConstraints,
    #[error("matrix has {got} entries, expected {rows} x {cols}")]
    Shape { rows: usize, cols: usize, got: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// An `n_constraints x n_dim` disorder matrix, row-major, with the seed that
/// regenerates it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerceptronInstance {
    n_dim: usize,
    n_constraints: usize,
    matrix: Vec<f64>,
    seed: u64,
}

/// `ceil(alpha N)`, tolerant of `alpha N` landing a rounding error above an
/// integer (`0.4 * 15 = 6.000000000000001`).
pub fn constraints_for(alpha: f64, n_dim: usize) -> usize {
    let m = alpha * n_dim as f64;
    (m - 1e-9 * m.abs().max(1.0)).ceil().max(0.0) as usize
}

impl PerceptronInstance {
    /// iid standard normal entries drawn row by row from ChaCha8 keyed by
    /// `seed`, using the ziggurat sampler of `rand_distr`. No dimension cap.
    pub fn sample(n_dim: usize, n_constraints: usize, seed: u64) -> Result<Self, ExperimentError> {
        if n_dim == 0 {
            return Err(ExperimentError::Dimension {
                n_dim,
                max: usize::MAX,
            });
        }
        let mut rng = seeds::rng(seed);
        let matrix = (0..n_dim * n_constraints)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Ok(Self {
            n_dim,
            n_constraints,
            matrix,
            seed,
        })
    }

    /// Wraps an explicit row-major matrix; `rows` may be zero.
    pub fn from_matrix(n_dim: usize, rows: usize, matrix: Vec<f64>, seed: u64) -> Result<Self, ExperimentError> {
        if n_dim == 0 {
            return Err(ExperimentError::Dimension {
                n_dim,
                max: usize::MAX,
            });
        }
        if matrix.len() != rows * n_dim {
            return Err(ExperimentError::Shape {
                rows,
                cols: n_dim,
                got: matrix.len(),
            });
        }
        Ok(Self {
            n_dim,
            n_constraints: rows,
            matrix,
            seed,
        })
    }

    pub fn n_dim(&self) -> usize {
        self.n_dim
    }

    pub fn n_constraints(&self) -> usize {
        self.n_constraints
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.n_dim..(i + 1) * self.n_dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.matrix.chunks_exact(self.n_dim)
    }

    /// The instance restricted to its first `t` constraints.
    pub fn prefix(&self, t: usize) -> Self {
        let t = t.min(self.n_constraints);
        Self {
            n_dim: self.n_dim,
            n_constraints: t,
            matrix: self.matrix[..t * self.n_dim].to_vec(),
            seed: self.seed,
        }
    }

    /// Appends one constraint row.
    pub fn with_row(&self, row: &[f64]) -> Result<Self, ExperimentError> {
        if row.len() != self.n_dim {
            return Err(ExperimentError::Shape {
                rows: 1,
                cols: self.n_dim,
                got: row.len(),
            });
        }
        let mut matrix = self.matrix.clone();
        matrix.extend_from_slice(row);
        Ok(Self {
            n_dim: self.n_dim,
            n_constraints: self.n_constraints + 1,
            matrix,
            seed: self.seed,
        })
    }
}

/// Samples an instance for enumeration; rejects `n_dim > 30`.
pub fn sample_instance(n_dim: usize, n_constraints: usize, seed: u64) -> Result<PerceptronInstance, ExperimentError> {
    check_enumerable(n_dim)?;
    if n_constraints == 0 {
        return Err(ExperimentError::NoConstraints);
    }
    PerceptronInstance::sample(n_dim, n_constraints, seed)
}

fn check_enumerable(n_dim: usize) -> Result<(), ExperimentError> {
    if (1..=MAX_ENUMERATION_DIM).contains(&n_dim) {
        Ok(())
    } else {
        Err(ExperimentError::Dimension {
            n_dim,
            max: MAX_ENUMERATION_DIM,
        })
    }
}

/// `|Z_t|` for `t = 0..=M`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCountReport {
    pub counts: Vec<u64>,
    pub empirical_capacity_steps: usize,
    pub seed: u64,
}

impl BinaryCountReport {
    fn from_first_violation_histogram(hist: &[u64], seed: u64) -> Self {
        // hist[k] = number of vectors whose first violated constraint is k
        // (k = M: none violated); |Z_t| = sum over k >= t.
        let mut counts = vec![0u64; hist.len()];
        let mut acc = 0;
        for k in (0..hist.len()).rev() {
            acc += hist[k];
            counts[k] = acc;
        }
        let empirical_capacity_steps = counts.iter().rposition(|&c| c > 0).unwrap_or(0);
        Self {
            counts,
            empirical_capacity_steps,
            seed,
        }
    }
}

/// Exact `|Z_t|` for every prefix, by Gray-code enumeration.
pub fn count_solutions(instance: &PerceptronInstance) -> Result<BinaryCountReport, ExperimentError> {
    check_enumerable(instance.n_dim)?;
    let n = instance.n_dim;
    let m = instance.n_constraints;

    // column-major copy so a coordinate flip touches contiguous memory
    let mut columns = vec![0.0; n * m];
    for i in 0..m {
        for j in 0..n {
            columns[j * m + i] = instance.matrix[i * n + j];
        }
    }
    let mut sigma = vec![1.0f64; n];
    let mut field = vec![0.0f64; m];
    let resync = |sigma: &[f64], field: &mut [f64]| {
        for (i, f) in field.iter_mut().enumerate() {
            *f = instance.row(i).iter().zip(sigma).map(|(a, s)| a * s).sum();
        }
    };
    resync(&sigma, &mut field);

    let mut hist = vec![0u64; m + 1];
    let total: u64 = 1 << n;
    for step in 0..total {
        if step > 0 {
            let j = step.trailing_zeros() as usize;
            let delta = -2.0 * sigma[j];
            sigma[j] = -sigma[j];
            if step % RESYNC_INTERVAL == 0 {
                resync(&sigma, &mut field);
            } else {
                for (f, a) in field.iter_mut().zip(&columns[j * m..(j + 1) * m]) {
                    *f += delta * a;
                }
            }
        }
        let first = field.iter().position(|&f| f <= 0.0).unwrap_or(m);
        hist[first] += 1;
    }
    Ok(BinaryCountReport::from_first_violation_histogram(&hist, instance.seed))
}

/// Largest solvable prefix length over `N`.
pub fn empirical_capacity(instance: &PerceptronInstance) -> Result<f64, ExperimentError> {
    let report = count_solutions(instance)?;
    Ok(report.empirical_capacity_steps as f64 / instance.n_dim as f64)
}

/// One enumerated trial of a multi-seed run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryTrial {
    pub trial: u64,
    pub report: BinaryCountReport,
}

/// Enumerates `trials` instances with seeds `derive_seed(master_seed, i)`.
/// Results come back in trial order regardless of the worker count.
pub fn run_binary_trials(
    n_dim: usize,
    n_constraints: usize,
    trials: u64,
    master_seed: u64,
) -> Result<Vec<BinaryTrial>, ExperimentError> {
    check_enumerable(n_dim)?;
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let seed = seeds::derive_seed(master_seed, trial);
            let instance = sample_instance(n_dim, n_constraints, seed)?;
            Ok(BinaryTrial {
                trial,
                report: count_solutions(&instance)?,
            })
        })
        .collect()
}

/// Per-prefix comparison of mean counts with `2^(N - t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrefixMoment {
    pub t: usize,
    pub mean: f64,
    pub expected: f64,
    pub stderr: f64,
    /// `(mean - expected) / stderr`; zero when both agree exactly.
    pub z: f64,
}

pub fn first_moment_table(n_dim: usize, trials: &[BinaryTrial]) -> Vec<PrefixMoment> {
    let Some(first) = trials.first() else {
        return Vec::new();
    };
    let len = first.report.counts.len();
    let k = trials.len() as f64;
    (0..len)
        .map(|t| {
            let xs = trials.iter().map(|tr| tr.report.counts[t] as f64);
            let mean = xs.clone().sum::<f64>() / k;
            let var = if trials.len() > 1 {
                xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            let stderr = (var / k).sqrt();
            let expected = 2f64.powi(n_dim as i32 - t as i32);
            let diff = mean - expected;
            let z = if diff == 0.0 { 0.0 } else { diff / stderr };
            PrefixMoment {
                t,
                mean,
                expected,
                stderr,
                z,
            }
        })
        .collect()
}
