//! Machine-readable outputs: sweep tables, simulation rows and summaries,
//! and run manifests.
//!
//! Values are nats everywhere except in fields and columns named `*_bits`.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::binary_experiment::{BinaryTrial, PrefixMoment};
use crate::gardner_derrida::{GdError, GdPoint, GdTerms};
use crate::quadrature::QuadratureSpec;
use crate::spherical_experiment::{EstimatorMethod, SizeSummary, SphericalFreeEnergyEstimate};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Bumped whenever a CSV header or column meaning changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const SWEEP_HEADER: &str = "alpha,q,gd_nats,gd_bits";
pub const MINIMA_HEADER: &str = "alpha,q_star,gd_min_nats,gd_min_bits";
pub const BINARY_HEADER: &str = "seed,t,count";
pub const SPHERE_HEADER: &str = "seed,f_hat,stderr,truncated";

#[inline]
pub fn to_bits(nats: f64) -> f64 {
    nats / LN_2
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// `start, start + step, ..., stop`, each value rounded to 12 decimals so
/// that grids built from decimal literals hit their endpoints exactly.
pub fn stepped_range(start: f64, step: f64, stop: f64) -> Result<Vec<f64>, GdError> {
    if !(step > 0.0 && start.is_finite() && stop.is_finite() && stop >= start) {
        return Err(GdError::Domain(format!(
            "range needs step > 0 and stop >= start, got {start}:{step}:{stop}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| round12(start + i as f64 * step)).collect())
}

/// Cartesian `(alpha, q)` grid for the free-energy sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    q_values: Vec<f64>,
    alpha_values: Vec<f64>,
}

impl SweepGrid {
    pub fn new(q_values: Vec<f64>, alpha_values: Vec<f64>) -> Result<Self, GdError> {
        check_increasing("q", &q_values)?;
        check_increasing("alpha", &alpha_values)?;
        for &q in &q_values {
            GdPoint::new(alpha_values[0], q)?;
        }
        for &a in &alpha_values {
            GdPoint::new(a, q_values[0])?;
        }
        Ok(Self { q_values, alpha_values })
    }

    /// `q = .001:.001:.999`, `alpha = .846:.00005:.847` (999 x 21).
    pub fn standard() -> Self {
        let q = stepped_range(0.001, 0.001, 0.999).expect("static range");
        let a = stepped_range(0.846, 0.00005, 0.847).expect("static range");
        Self::new(q, a).expect("static grid")
    }

    pub fn q_values(&self) -> &[f64] {
        &self.q_values
    }

    pub fn alpha_values(&self) -> &[f64] {
        &self.alpha_values
    }
}

fn check_increasing(name: &str, xs: &[f64]) -> Result<(), GdError> {
    if xs.is_empty() {
        return Err(GdError::Domain(format!("{name} grid is empty")));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(GdError::Domain(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub q: f64,
    pub gd_nats: f64,
    pub gd_bits: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMinimum {
    pub alpha: f64,
    pub q_star: f64,
    pub gd_min_nats: f64,
    pub gd_min_bits: f64,
}

/// `GD(alpha, q)` on every grid point, alpha-major, and the per-alpha grid
/// minimum (first q attaining it).
pub fn run_sweep(grid: &SweepGrid, spec: &QuadratureSpec) -> Result<(Vec<SweepRow>, Vec<SweepMinimum>), GdError> {
    let terms = grid
        .q_values
        .par_iter()
        .map(|&q| GdTerms::at(q, spec))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(terms.len() * grid.alpha_values.len());
    let mut minima = Vec::with_capacity(grid.alpha_values.len());
    for &alpha in &grid.alpha_values {
        let start = rows.len();
        rows.extend(terms.iter().map(|t| {
            let gd = t.value(alpha);
            SweepRow {
                alpha,
                q: t.q,
                gd_nats: gd,
                gd_bits: to_bits(gd),
            }
        }));
        let best = rows[start..]
            .iter()
            .fold(None::<&SweepRow>, |acc, r| match acc {
                Some(b) if b.gd_nats <= r.gd_nats => Some(b),
                _ => Some(r),
            })
            .expect("nonempty grid");
        minima.push(SweepMinimum {
            alpha,
            q_star: best.q,
            gd_min_nats: best.gd_nats,
            gd_min_bits: best.gd_bits,
        });
    }
    Ok((rows, minima))
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// Writes `records` with a header derived from their field names.
pub fn write_csv<W: Write, T: Serialize>(w: W, records: &[T]) -> io::Result<()> {
    let mut writer = csv_writer(w);
    for r in records {
        writer.serialize(r).map_err(io::Error::other)?;
    }
    writer.flush()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryRow {
    pub seed: u64,
    pub t: usize,
    pub count: u64,
}

pub fn binary_rows(trials: &[BinaryTrial]) -> Vec<BinaryRow> {
    trials
        .iter()
        .flat_map(|tr| {
            tr.report.counts.iter().enumerate().map(|(t, &count)| BinaryRow {
                seed: tr.report.seed,
                t,
                count,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereRow {
    pub seed: u64,
    pub f_hat: f64,
    pub stderr: f64,
    pub truncated: bool,
}

pub fn sphere_rows(estimates: &[SphericalFreeEnergyEstimate], seeds: &[u64]) -> Vec<SphereRow> {
    estimates
        .iter()
        .zip(seeds)
        .map(|(e, &seed)| SphereRow {
            seed,
            f_hat: e.f_hat,
            stderr: e.stderr,
            truncated: e.truncated,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarySummary {
    pub manifest: String,
    pub n_dim: usize,
    pub n_constraints: usize,
    pub alpha: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub prefix_moments: Vec<PrefixMoment>,
    pub max_abs_z: f64,
    /// Mean of `max{t : |Z_t| >= 1} / N` over trials.
    pub empirical_capacity_mean: f64,
}

impl BinarySummary {
    pub fn new(manifest: String, alpha: f64, n_dim: usize, master_seed: u64, trials: &[BinaryTrial], moments: Vec<PrefixMoment>) -> Self {
        let max_abs_z = moments.iter().map(|m| m.z.abs()).fold(0.0, f64::max);
        let empirical_capacity_mean = trials
            .iter()
            .map(|t| t.report.empirical_capacity_steps as f64 / n_dim as f64)
            .sum::<f64>()
            / trials.len().max(1) as f64;
        Self {
            manifest,
            n_dim,
            n_constraints: moments.len().saturating_sub(1),
            alpha,
            trials: trials.len(),
            master_seed,
            prefix_moments: moments,
            max_abs_z,
            empirical_capacity_mean,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereSummary {
    pub manifest: String,
    pub alpha: f64,
    pub method: EstimatorMethod,
    pub samples: u64,
    pub master_seed: u64,
    #[serde(flatten)]
    pub size: SizeSummary,
    pub gd_reference: f64,
    pub mean_minus_gd: f64,
    pub caveat: Option<String>,
}

impl SphereSummary {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        manifest: String,
        alpha: f64,
        method: EstimatorMethod,
        samples: u64,
        master_seed: u64,
        n_dim: usize,
        n_constraints: usize,
        estimates: &[SphericalFreeEnergyEstimate],
        gd_reference: f64,
    ) -> Self {
        let size = SizeSummary::from_estimates(n_dim, n_constraints, estimates);
        Self {
            manifest,
            alpha,
            method,
            samples,
            master_seed,
            mean_minus_gd: size.mean - gd_reference,
            size,
            gd_reference,
            caveat: (method == EstimatorMethod::SequentialConditioning).then(|| SEQUENTIAL_CAVEAT.to_owned()),
        }
    }
}

pub const SEQUENTIAL_CAVEAT: &str =
    "resampled particles share ancestors, so the propagated stderr ignores correlation between levels and understates the spread";

/// Provenance record written next to every output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    /// Zero for commands that draw no randomness.
    pub master_seed: u64,
    pub artifact_version: String,
    pub csv_schema_version: u32,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn begin(command: &str, master_seed: u64) -> Self {
        Self {
            command: command.to_owned(),
            parameters: BTreeMap::new(),
            master_seed,
            artifact_version: ARTIFACT_VERSION.to_owned(),
            csv_schema_version: CSV_SCHEMA_VERSION,
            started: timestamp(),
            finished: String::new(),
            outputs: Vec::new(),
        }
    }

    pub fn param<T: Serialize>(mut self, key: &str, value: T) -> Self {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.parameters.insert(key.to_owned(), v);
        self
    }

    pub fn finish(&mut self, outputs: &[&Path]) {
        self.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
        self.finished = timestamp();
    }
}

/// RFC 3339 UTC time, pinned by `SOURCE_DATE_EPOCH` when it is set.
pub fn timestamp() -> String {
    let pinned = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0));
    pinned
        .unwrap_or_else(Utc::now)
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    sibling(out, "manifest.json")
}

/// `<out>.<suffix>` in the same directory.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".");
    name.push(suffix);
    out.with_file_name(name)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_grid_shape() {
        let g = SweepGrid::standard();
        assert_eq!(g.q_values().len(), 999);
        assert_eq!(g.alpha_values().len(), 21);
        assert_eq!(g.q_values()[0], 0.001);
        assert_eq!(*g.q_values().last().unwrap(), 0.999);
        assert_eq!(g.q_values()[499], 0.5);
        assert_eq!(g.alpha_values()[0], 0.846);
        assert_eq!(g.alpha_values()[10], 0.8465);
        assert_eq!(*g.alpha_values().last().unwrap(), 0.847);
    }

    #[test]
    fn grid_validation() {
        assert!(SweepGrid::new(vec![0.2, 0.1], vec![0.5]).is_err());
        assert!(SweepGrid::new(vec![0.5, 1.0], vec![0.5]).is_err());
        assert!(SweepGrid::new(vec![0.5], vec![]).is_err());
        assert!(SweepGrid::new(vec![0.5], vec![2.5]).is_err());
        assert!(stepped_range(1.0, 0.0, 2.0).is_err());
        assert_eq!(stepped_range(0.5, 0.1, 0.5).unwrap(), vec![0.5]);
    }

    #[test]
    fn single_point_sweep() {
        let grid = SweepGrid::new(vec![0.5], vec![0.847]).unwrap();
        let (rows, minima) = run_sweep(&grid, &QuadratureSpec::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].gd_nats - (-0.847 + 0.5 * (1.0 - LN_2))).abs() < 1e-9);
        assert_eq!(minima[0].q_star, 0.5);
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(&format!("{SWEEP_HEADER}\n")));
        assert_eq!(text.lines().count(), 2);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn sibling_names() {
        let p = Path::new("/tmp/run/out.csv");
        assert_eq!(manifest_path(p), Path::new("/tmp/run/out.csv.manifest.json"));
        assert_eq!(sibling(p, "minima.csv"), Path::new("/tmp/run/out.csv.minima.csv"));
    }
}
