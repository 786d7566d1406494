//! Command-line front end for the perceptron free-energy and capacity tools.

use std::fs::File;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use perceptron_lab::binary_experiment::{constraints_for, first_moment_table, run_binary_trials, ExperimentError};
use perceptron_lab::gardner_derrida::{gd_at, gd_min, proposition_margin_at, GdError, GdPoint, DEFAULT_OPT_TOL, PROPOSITION_ALPHA};
use perceptron_lab::moment_bounds::{capacity_upper_bound, conditional_rate};
use perceptron_lab::quadrature::{QuadratureError, QuadratureSpec};
use perceptron_lab::report::{self, RunManifest, SphereSummary, SweepGrid};
use perceptron_lab::spherical_experiment::{run_direct_trials, run_sequential_trials, EstimatorMethod, SphericalError};

#[derive(Parser)]
#[command(name = "perceptron-lab", version, about = "Free energy and capacity bounds for random perceptrons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate GD(alpha, q)
    GdEval {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        q: f64,
        #[command(flatten)]
        out: Display,
        #[command(flatten)]
        quad: Quad,
    },
    /// Minimize GD(alpha, q) over q
    GdMin {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_OPT_TOL)]
        opt_tol: f64,
        #[command(flatten)]
        out: Display,
        #[command(flatten)]
        quad: Quad,
    },
    /// Tabulate GD over an (alpha, q) grid
    Sweep {
        /// Grid CSV (alpha,q,gd_nats,gd_bits)
        #[arg(long)]
        out: PathBuf,
        /// Per-alpha minima CSV; defaults to <out>.minima.csv
        #[arg(long)]
        minima: Option<PathBuf>,
        #[arg(long, default_value_t = 0.001)]
        q_start: f64,
        #[arg(long, default_value_t = 0.001)]
        q_step: f64,
        #[arg(long, default_value_t = 0.999)]
        q_stop: f64,
        #[arg(long, default_value_t = 0.846)]
        alpha_start: f64,
        #[arg(long, default_value_t = 0.00005)]
        alpha_step: f64,
        #[arg(long, default_value_t = 0.847)]
        alpha_stop: f64,
        #[command(flatten)]
        quad: Quad,
    },
    /// Smallest alpha certified by the conditional first-moment bound
    CapacityBound {
        #[arg(long, default_value_t = 0.0)]
        slack: f64,
        #[arg(long, default_value_t = 1e-6)]
        root_tol: f64,
        #[command(flatten)]
        quad: Quad,
    },
    /// Margin of GD(alpha) below -ln 2, at q = 1/2 and minimized
    Proposition {
        #[arg(long, default_value_t = PROPOSITION_ALPHA)]
        alpha: f64,
        #[command(flatten)]
        out: Display,
        #[command(flatten)]
        quad: Quad,
    },
    /// Exact solution counts of random binary perceptrons
    SimulateBinary {
        #[arg(long)]
        n_dim: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-trial CSV (seed,t,count); the summary goes to <out>.summary.json
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo estimates of the spherical free energy
    SimulateSphere {
        #[arg(long)]
        n_dim: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = Method::Direct)]
        method: Method,
        /// Directions per instance, or per constraint for the sequential method
        #[arg(long)]
        samples: u64,
        #[arg(long)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-trial CSV (seed,f_hat,stderr,truncated); the summary goes to <out>.summary.json
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        quad: Quad,
    },
}

#[derive(Args)]
struct Display {
    /// Also report values in bits
    #[arg(long)]
    bits: bool,
    /// Print JSON instead of text
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    GaussHermite,
    Adaptive,
}

#[derive(Args)]
struct Quad {
    #[arg(long, value_enum, default_value_t = RuleArg::GaussHermite)]
    rule: RuleArg,
    /// Initial Gauss-Hermite node count
    #[arg(long, default_value_t = 400)]
    nodes: usize,
    /// Half-width of the adaptive integration interval
    #[arg(long, default_value_t = 12.0)]
    half_width: f64,
    #[arg(long, default_value_t = 1e-10)]
    abs_tol: f64,
}

impl Quad {
    fn spec(&self) -> Result<QuadratureSpec, CliError> {
        Ok(match self.rule {
            RuleArg::GaussHermite => QuadratureSpec::gauss_hermite(self.nodes, self.abs_tol)?,
            RuleArg::Adaptive => QuadratureSpec::adaptive(self.half_width, self.abs_tol)?,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Direct,
    Sequential,
}

enum CliError {
    Domain(String),
    Io(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Numeric(_) => 1,
            CliError::Domain(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Domain(m) | CliError::Io(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<QuadratureError> for CliError {
    fn from(e: QuadratureError) -> Self {
        match e {
            QuadratureError::InvalidSpec(_) | QuadratureError::Domain(_) => CliError::Domain(e.to_string()),
            QuadratureError::NonConvergence { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<GdError> for CliError {
    fn from(e: GdError) -> Self {
        match e {
            GdError::Domain(_) => CliError::Domain(e.to_string()),
            GdError::Quadrature(q) => q.into(),
            GdError::Bracket { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<SphericalError> for CliError {
    fn from(e: SphericalError) -> Self {
        match e {
            SphericalError::FreeEnergy(g) => g.into(),
            SphericalError::ConeEmpty { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_csv_file<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    report::write_csv(BufWriter::new(file), rows).map_err(|e| io_error(path, e))
}

fn write_json_file<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    report::write_json(path, value).map_err(|e| io_error(path, e))
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("PERCEPTRON_LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Domain(format!("PERCEPTRON_LAB_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Numeric(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::GdEval { alpha, q, out, quad } => {
            let spec = quad.spec()?;
            let value = gd_at(GdPoint::new(alpha, q)?, &spec)?;
            if out.json {
                print_json(&json!({
                    "alpha": alpha,
                    "q": q,
                    "gd_nats": value,
                    "gd_bits": report::to_bits(value),
                }));
            } else {
                println!("GD(alpha={alpha}, q={q}) = {value:.12} nats");
                if out.bits {
                    println!("GD(alpha={alpha}, q={q}) = {:.12} bits", report::to_bits(value));
                }
            }
        }
        Command::GdMin { alpha, opt_tol, out, quad } => {
            let spec = quad.spec()?;
            let eval = gd_min(alpha, &spec, opt_tol)?;
            if out.json {
                let mut v = serde_json::to_value(&eval).expect("serializable");
                v["value_bits"] = json!(report::to_bits(eval.value));
                print_json(&v);
            } else {
                println!("GD({alpha}) = {:.12} nats at q* = {:.9}", eval.value, eval.q_star);
                if out.bits {
                    println!("GD({alpha}) = {:.12} bits", report::to_bits(eval.value));
                }
                println!("GD({alpha}) + ln 2 = {:.6e}", eval.margin_vs_log2);
                if eval.boundary_minimum {
                    println!("minimum attained at the boundary of the overlap range");
                }
            }
        }
        Command::Sweep {
            out,
            minima,
            q_start,
            q_step,
            q_stop,
            alpha_start,
            alpha_step,
            alpha_stop,
            quad,
        } => {
            let spec = quad.spec()?;
            let grid = SweepGrid::new(
                report::stepped_range(q_start, q_step, q_stop)?,
                report::stepped_range(alpha_start, alpha_step, alpha_stop)?,
            )?;
            let minima = minima.unwrap_or_else(|| report::sibling(&out, "minima.csv"));
            let mut manifest = RunManifest::begin("sweep", 0)
                .param("q_range", [q_start, q_step, q_stop])
                .param("alpha_range", [alpha_start, alpha_step, alpha_stop])
                .param("quadrature", &spec);
            let (rows, mins) = report::run_sweep(&grid, &spec)?;
            write_csv_file(&out, &rows)?;
            write_csv_file(&minima, &mins)?;
            manifest.finish(&[&out, &minima]);
            write_json_file(&report::manifest_path(&out), &manifest)?;
            println!("wrote {} grid rows to {}", rows.len(), out.display());
            println!("wrote {} minima to {}", mins.len(), minima.display());
        }
        Command::CapacityBound { slack, root_tol, quad } => {
            let spec = quad.spec()?;
            let alpha = capacity_upper_bound(slack, &spec, root_tol)?;
            let cert = conditional_rate(alpha, slack, &spec)?;
            println!("alpha* = {alpha:.8}");
            print_json(&serde_json::to_value(cert).expect("serializable"));
        }
        Command::Proposition { alpha, out, quad } => {
            let spec = quad.spec()?;
            let rep = proposition_margin_at(alpha, &spec)?;
            if out.json {
                let mut v = serde_json::to_value(&rep).expect("serializable");
                v["note"] = json!(rep.note());
                print_json(&v);
            } else {
                println!("alpha                        {}", rep.alpha);
                println!("-ln 2 - GD(alpha, 1/2)       {:.10e}", rep.half_overlap_margin);
                println!("-ln 2 - GD(alpha)            {:.10e}  (q* = {:.6})", rep.minimized_margin, rep.q_star);
                if out.bits {
                    println!("-ln 2 - GD(alpha) [bits]     {:.10e}", report::to_bits(rep.minimized_margin));
                }
                println!("{}", rep.note());
            }
        }
        Command::SimulateBinary {
            n_dim,
            alpha,
            trials,
            seed,
            out,
        } => {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(CliError::Domain(format!("alpha must be positive, got {alpha}")));
            }
            let m = constraints_for(alpha, n_dim);
            let mut manifest = RunManifest::begin("simulate-binary", seed)
                .param("n_dim", n_dim)
                .param("alpha", alpha)
                .param("n_constraints", m)
                .param("trials", trials);
            let results = run_binary_trials(n_dim, m, trials, seed)?;
            let moments = first_moment_table(n_dim, &results);
            write_csv_file(&out, &report::binary_rows(&results))?;
            let summary_path = report::sibling(&out, "summary.json");
            let manifest_path = report::manifest_path(&out);
            let summary = report::BinarySummary::new(
                manifest_path.display().to_string(),
                alpha,
                n_dim,
                seed,
                &results,
                moments,
            );
            write_json_file(&summary_path, &summary)?;
            manifest.finish(&[&out, &summary_path]);
            write_json_file(&manifest_path, &manifest)?;
            println!("max |z| over prefixes: {:.3}", summary.max_abs_z);
            println!("mean empirical capacity: {:.4}", summary.empirical_capacity_mean);
        }
        Command::SimulateSphere {
            n_dim,
            alpha,
            method,
            samples,
            trials,
            seed,
            out,
            quad,
        } => {
            let spec = quad.spec()?;
            if trials == 0 {
                return Err(CliError::Domain("trials must be at least 1".into()));
            }
            let gd = gd_min(alpha, &spec, DEFAULT_OPT_TOL)?.value;
            let m = constraints_for(alpha, n_dim);
            let method = match method {
                Method::Direct => EstimatorMethod::DirectGaussian,
                Method::Sequential => EstimatorMethod::SequentialConditioning,
            };
            let mut manifest = RunManifest::begin("simulate-sphere", seed)
                .param("n_dim", n_dim)
                .param("alpha", alpha)
                .param("n_constraints", m)
                .param("method", method)
                .param("samples", samples)
                .param("trials", trials);
            let (estimates, seeds) = match method {
                EstimatorMethod::DirectGaussian => run_direct_trials(n_dim, m, trials, samples, seed)?,
                EstimatorMethod::SequentialConditioning => run_sequential_trials(n_dim, m, trials, samples, seed)?,
            };
            write_csv_file(&out, &report::sphere_rows(&estimates, &seeds))?;
            let summary_path = report::sibling(&out, "summary.json");
            let manifest_path = report::manifest_path(&out);
            let summary = SphereSummary::build(manifest_path.display().to_string(), alpha, method, samples, seed, n_dim, m, &estimates, gd);
            write_json_file(&summary_path, &summary)?;
            manifest.finish(&[&out, &summary_path]);
            write_json_file(&manifest_path, &manifest)?;
            println!("mean f_hat {:.6} vs GD {:.6} ({} truncated)", summary.size.mean, gd, summary.size.truncated);
        }
    }
    Ok(())
}
