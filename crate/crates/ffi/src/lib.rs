//! C ABI for `perceptron-lab`.
//!
//! Fallible functions return a [`PlStatus`] and write results through out
//! pointers, which are left untouched on failure. The message for the last
//! failure on the calling thread is available from
//! [`pl_last_error_message`]. Handles are opaque; free each one with its
//! matching `*_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use perceptron_lab::binary_experiment::{count_solutions, ExperimentError, PerceptronInstance};
use perceptron_lab::gardner_derrida::{critical_alpha, gd_at, gd_min, GdError, GdPoint};
use perceptron_lab::moment_bounds::{capacity_upper_bound, conditional_rate, Conclusion};
use perceptron_lab::quadrature::{QuadratureError, QuadratureSpec};
use perceptron_lab::specfun;
use perceptron_lab::spherical_experiment::{
    estimate_f_direct, estimate_f_sequential, spherical_feasibility, EstimatorMethod, Feasibility,
    SphericalError, SphericalFreeEnergyEstimate,
};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    NonConvergence = 3,
    Dimension = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Quadrature configuration handle.
pub struct PlQuadSpec {
    inner: QuadratureSpec,
}

/// Disorder matrix handle.
pub struct PlInstance {
    inner: PerceptronInstance,
}

/// Minimum of `GD(alpha, .)` over the overlap.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlGdEvaluation {
    pub alpha: f64,
    pub q_star: f64,
    pub value: f64,
    pub margin_vs_log2: f64,
    pub boundary_minimum: bool,
}

/// Conditional first-moment certificate; `rate = log2_term + free_energy_term + slack_epsilon`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlBoundCertificate {
    pub alpha: f64,
    pub rate: f64,
    pub log2_term: f64,
    pub free_energy_term: f64,
    pub slack_epsilon: f64,
    pub q_star: f64,
    pub bound_holds: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlEstimatorMethod {
    DirectGaussian = 0,
    SequentialConditioning = 1,
}

/// Spherical free-energy estimate in nats per dimension.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlSphericalEstimate {
    pub f_hat: f64,
    pub std_error: f64,
    pub samples: u64,
    pub method: PlEstimatorMethod,
    pub truncated: bool,
}

impl From<SphericalFreeEnergyEstimate> for PlSphericalEstimate {
    fn from(e: SphericalFreeEnergyEstimate) -> Self {
        Self {
            f_hat: e.f_hat,
            std_error: e.stderr,
            samples: e.samples,
            method: match e.method {
                EstimatorMethod::DirectGaussian => PlEstimatorMethod::DirectGaussian,
                EstimatorMethod::SequentialConditioning => PlEstimatorMethod::SequentialConditioning,
            },
            truncated: e.truncated,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

struct Failure(PlStatus, String);

impl From<QuadratureError> for Failure {
    fn from(e: QuadratureError) -> Self {
        let status = match e {
            QuadratureError::NonConvergence { .. } => PlStatus::NonConvergence,
            _ => PlStatus::Domain,
        };
        Failure(status, e.to_string())
    }
}

impl From<GdError> for Failure {
    fn from(e: GdError) -> Self {
        match e {
            GdError::Quadrature(q) => q.into(),
            GdError::Bracket { .. } => Failure(PlStatus::NonConvergence, e.to_string()),
            GdError::Domain(_) => Failure(PlStatus::Domain, e.to_string()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let status = match e {
            ExperimentError::Dimension { .. } | ExperimentError::Shape { .. } => PlStatus::Dimension,
            _ => PlStatus::Domain,
        };
        Failure(status, e.to_string())
    }
}

impl From<SphericalError> for Failure {
    fn from(e: SphericalError) -> Self {
        match e {
            SphericalError::FreeEnergy(g) => g.into(),
            SphericalError::Instance(i) => i.into(),
            SphericalError::ConeEmpty { .. } => Failure(PlStatus::NonConvergence, e.to_string()),
            _ => Failure(PlStatus::Domain, e.to_string()),
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(PlStatus::NullPointer, format!("{what} is null"))
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> PlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PlStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_owned());
            set_last_error(format!("internal panic: {msg}"));
            PlStatus::Panic
        }
    }
}

unsafe fn spec_ref<'a>(spec: *const PlQuadSpec) -> Result<&'a QuadratureSpec, Failure> {
    spec.as_ref().map(|s| &s.inner).ok_or_else(|| null("spec"))
}

unsafe fn instance_ref<'a>(instance: *const PlInstance) -> Result<&'a PerceptronInstance, Failure> {
    instance.as_ref().map(|i| &i.inner).ok_or_else(|| null("instance"))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Message of the calling thread's last failure, or NULL if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `P(Z >= x)`.
#[no_mangle]
pub extern "C" fn pl_gauss_tail(x: f64) -> f64 {
    specfun::gauss_tail(x)
}

/// `ln P(Z >= x)`, finite for all finite `x`.
#[no_mangle]
pub extern "C" fn pl_log_gauss_tail(x: f64) -> f64 {
    specfun::log_gauss_tail(x)
}

/// `P(Z >= x) / phi(x)`.
#[no_mangle]
pub extern "C" fn pl_mills_ratio(x: f64) -> f64 {
    specfun::mills_ratio(x)
}

/// Default quadrature: Gauss-Hermite, 400 nodes, tolerance 1e-10.
#[no_mangle]
pub extern "C" fn pl_quad_spec_default() -> *mut PlQuadSpec {
    Box::into_raw(Box::new(PlQuadSpec {
        inner: QuadratureSpec::default(),
    }))
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_quad_spec_gauss_hermite(node_count: usize, abs_tol: f64, out: *mut *mut PlQuadSpec) -> PlStatus {
    guard(|| {
        let inner = QuadratureSpec::gauss_hermite(node_count, abs_tol)?;
        write_out(out, Box::into_raw(Box::new(PlQuadSpec { inner })))
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_quad_spec_adaptive(half_width: f64, abs_tol: f64, out: *mut *mut PlQuadSpec) -> PlStatus {
    guard(|| {
        let inner = QuadratureSpec::adaptive(half_width, abs_tol)?;
        write_out(out, Box::into_raw(Box::new(PlQuadSpec { inner })))
    })
}

/// # Safety
/// `spec` must be NULL or a handle from a `pl_quad_spec_*` constructor that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn pl_quad_spec_free(spec: *mut PlQuadSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// `GD(alpha, q)` in nats.
///
/// # Safety
/// `spec` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_gd_at(spec: *const PlQuadSpec, alpha: f64, q: f64, out: *mut f64) -> PlStatus {
    guard(|| {
        let spec = spec_ref(spec)?;
        let v = gd_at(GdPoint::new(alpha, q)?, spec)?;
        write_out(out, v)
    })
}

/// # Safety
/// `spec` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_gd_min(spec: *const PlQuadSpec, alpha: f64, opt_tol: f64, out: *mut PlGdEvaluation) -> PlStatus {
    guard(|| {
        let e = gd_min(alpha, spec_ref(spec)?, opt_tol)?;
        write_out(
            out,
            PlGdEvaluation {
                alpha: e.alpha,
                q_star: e.q_star,
                value: e.value,
                margin_vs_log2: e.margin_vs_log2,
                boundary_minimum: e.boundary_minimum,
            },
        )
    })
}

/// Root of `GD(alpha) + ln 2`.
///
/// # Safety
/// `spec` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_critical_alpha(spec: *const PlQuadSpec, root_tol: f64, out: *mut f64) -> PlStatus {
    guard(|| write_out(out, critical_alpha(spec_ref(spec)?, root_tol)?))
}

/// # Safety
/// `spec` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_conditional_rate(
    spec: *const PlQuadSpec,
    alpha: f64,
    slack_epsilon: f64,
    out: *mut PlBoundCertificate,
) -> PlStatus {
    guard(|| {
        let c = conditional_rate(alpha, slack_epsilon, spec_ref(spec)?)?;
        write_out(
            out,
            PlBoundCertificate {
                alpha: c.alpha,
                rate: c.rate,
                log2_term: c.log2_term,
                free_energy_term: c.free_energy_term,
                slack_epsilon: c.slack_epsilon,
                q_star: c.q_star.unwrap_or(f64::NAN),
                bound_holds: c.conclusion == Conclusion::BoundHolds,
            },
        )
    })
}

/// # Safety
/// `spec` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_capacity_upper_bound(
    spec: *const PlQuadSpec,
    slack_epsilon: f64,
    root_tol: f64,
    out: *mut f64,
) -> PlStatus {
    guard(|| write_out(out, capacity_upper_bound(slack_epsilon, spec_ref(spec)?, root_tol)?))
}

/// Samples an `n_constraints x n_dim` standard Gaussian matrix.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_instance_sample(n_dim: usize, n_constraints: usize, seed: u64, out: *mut *mut PlInstance) -> PlStatus {
    guard(|| {
        let inner = PerceptronInstance::sample(n_dim, n_constraints, seed)?;
        write_out(out, Box::into_raw(Box::new(PlInstance { inner })))
    })
}

/// Copies a row-major `rows x n_dim` matrix.
///
/// # Safety
/// `matrix` must point to `rows * n_dim` readable doubles (or may be NULL
/// when `rows` is 0) and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_instance_from_matrix(
    n_dim: usize,
    rows: usize,
    matrix: *const f64,
    seed: u64,
    out: *mut *mut PlInstance,
) -> PlStatus {
    guard(|| {
        let len = rows
            .checked_mul(n_dim)
            .ok_or_else(|| Failure(PlStatus::Dimension, "matrix size overflows".into()))?;
        let data = if len == 0 {
            Vec::new()
        } else if matrix.is_null() {
            return Err(null("matrix"));
        } else {
            std::slice::from_raw_parts(matrix, len).to_vec()
        };
        let inner = PerceptronInstance::from_matrix(n_dim, rows, data, seed)?;
        write_out(out, Box::into_raw(Box::new(PlInstance { inner })))
    })
}

/// # Safety
/// `instance` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_instance_free(instance: *mut PlInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Dimension `N`, or 0 for NULL.
///
/// # Safety
/// `instance` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_instance_n_dim(instance: *const PlInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.inner.n_dim())
}

/// Number of rows `M`, or 0 for NULL.
///
/// # Safety
/// `instance` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_instance_n_constraints(instance: *const PlInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.inner.n_constraints())
}

/// Exact counts `|Z_t|` for `t = 0..=M` into `counts`, which must hold at
/// least `M + 1` entries. `written` receives `M + 1`, also when the buffer
/// is too small.
///
/// # Safety
/// `instance` must be a live handle, `counts` valid for `len` writes and
/// `written` valid for writes or NULL.
#[no_mangle]
pub unsafe extern "C" fn pl_instance_count_solutions(
    instance: *const PlInstance,
    counts: *mut u64,
    len: usize,
    written: *mut usize,
) -> PlStatus {
    guard(|| {
        let inst = instance_ref(instance)?;
        let need = inst.n_constraints() + 1;
        if !written.is_null() {
            written.write(need);
        }
        if len < need {
            return Err(Failure(
                PlStatus::BufferTooSmall,
                format!("counts buffer holds {len}, needs {need}"),
            ));
        }
        if counts.is_null() {
            return Err(null("counts"));
        }
        let report = count_solutions(inst)?;
        std::slice::from_raw_parts_mut(counts, need).copy_from_slice(&report.counts);
        Ok(())
    })
}

/// # Safety
/// `instance` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_instance_estimate_f_direct(
    instance: *const PlInstance,
    samples: u64,
    seed: u64,
    out: *mut PlSphericalEstimate,
) -> PlStatus {
    guard(|| {
        let e = estimate_f_direct(instance_ref(instance)?, samples, seed)?;
        write_out(out, e.into())
    })
}

/// # Safety
/// `instance` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_instance_estimate_f_sequential(
    instance: *const PlInstance,
    samples_per_step: u64,
    seed: u64,
    out: *mut PlSphericalEstimate,
) -> PlStatus {
    guard(|| {
        let e = estimate_f_sequential(instance_ref(instance)?, samples_per_step, seed)?;
        write_out(out, e.into())
    })
}

/// Perceptron search for a unit `sigma` with `A sigma > 0`. On success
/// `found` is true and `sigma` (length `N`) holds the witness; otherwise the
/// result is inconclusive and `sigma` is untouched.
///
/// # Safety
/// `instance` must be a live handle, `sigma` valid for `len` writes and
/// `found` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_instance_feasibility(
    instance: *const PlInstance,
    max_iters: u64,
    sigma: *mut f64,
    len: usize,
    found: *mut bool,
) -> PlStatus {
    guard(|| {
        let inst = instance_ref(instance)?;
        if found.is_null() {
            return Err(null("found"));
        }
        if len < inst.n_dim() {
            return Err(Failure(
                PlStatus::BufferTooSmall,
                format!("sigma buffer holds {len}, needs {}", inst.n_dim()),
            ));
        }
        if sigma.is_null() {
            return Err(null("sigma"));
        }
        match spherical_feasibility(inst, max_iters)? {
            Feasibility::Witness { sigma: w, .. } => {
                std::slice::from_raw_parts_mut(sigma, w.len()).copy_from_slice(&w);
                found.write(true);
            }
            Feasibility::NotFound { .. } => found.write(false),
        }
        Ok(())
    })
}
