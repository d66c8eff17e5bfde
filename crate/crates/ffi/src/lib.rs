//! C ABI over the qthermo engine.
//!
//! Matrices cross the boundary as row-major arrays of interleaved
//! `(re, im)` doubles, `2 * dim * dim` values per matrix. Objects are opaque
//! handles released with the matching `*_free` function. Every fallible call
//! returns a [`QtStatus`]; on failure [`qt_last_error`] describes the cause
//! for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use qthermo::compliance::ToleranceProfile;
use qthermo::integrator::uniform_times;
use qthermo::{
    dynamics, state, DynamicsKind, DynamicsSpec, Error, IntegratorConfig, Observable, QuantumState, RepairMode,
    Scenario, SystemModel, Trajectory,
};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QtStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed matrix, wrong length, or a state outside the domain.
    InvalidInput = 2,
    /// Inconsistent model, dynamics or integration settings.
    InvalidConfig = 3,
    /// Equilibrium targets infeasible or the solver failed.
    Solver = 4,
    /// Integration failed (step underflow, non-finite values, step limit).
    Numerical = 5,
    /// Scenario document rejected.
    Scenario = 6,
    Io = 7,
    /// A Rust panic was caught at the boundary.
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QtDynamicsKind {
    Unitary = 0,
    SeaSingle = 1,
    SeaComposite = 2,
    NaiveRelaxation = 3,
}

pub struct QtModel(SystemModel);

pub struct QtState(QuantumState);

pub struct QtDynamics(DynamicsSpec);

pub struct QtTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).unwrap_or_default());
}

fn status_of(err: &Error) -> QtStatus {
    match err {
        Error::NotSquare { .. }
        | Error::NotHermitian(_)
        | Error::TraceDeviation(_)
        | Error::NegativeEigenvalue(_)
        | Error::DimensionMismatch { .. } => QtStatus::InvalidInput,
        Error::PartitionUndeclared
        | Error::InvalidModel(_)
        | Error::InvalidDynamics(_)
        | Error::InvalidConfig(_)
        | Error::NotIdempotent(_)
        | Error::NotCommuting(_) => QtStatus::InvalidConfig,
        Error::OverflowGuard(_) | Error::Infeasible(_) | Error::NoConvergence { .. } => QtStatus::Solver,
        Error::StepUnderflow { .. }
        | Error::NonFinite(_)
        | Error::StepLimit(_)
        | Error::DegenerateProbeEnsemble { .. } => QtStatus::Numerical,
        Error::SchemaViolation { .. } | Error::Json(_) => QtStatus::Scenario,
        Error::Io(_) | Error::Csv(_) => QtStatus::Io,
    }
}

struct Failure(QtStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: QtStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f` behind the panic boundary and records any failure.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            QtStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            QtStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(QtStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(QtStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(QtStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn read_matrix(p: *const f64, dim: usize, what: &str) -> Result<DMatrix<Complex64>, Failure> {
    if dim == 0 {
        return Err(fail(QtStatus::InvalidInput, format!("{what}: dimension must be positive")));
    }
    let raw = slice(p, 2 * dim * dim, what)?;
    Ok(DMatrix::from_fn(dim, dim, |i, j| {
        let k = 2 * (i * dim + j);
        Complex64::new(raw[k], raw[k + 1])
    }))
}

unsafe fn write_matrix(m: &DMatrix<Complex64>, out: *mut f64, len: usize) -> Result<(), Failure> {
    let n = m.nrows();
    if len < 2 * n * n {
        return Err(fail(QtStatus::InvalidInput, format!("output buffer holds {len} doubles, {} required", 2 * n * n)));
    }
    if out.is_null() {
        return Err(fail(QtStatus::NullPointer, "output buffer is null"));
    }
    let dst = std::slice::from_raw_parts_mut(out, 2 * n * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            dst[2 * (i * n + j)] = z.re;
            dst[2 * (i * n + j) + 1] = z.im;
        }
    }
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Description of the last failure on this thread, or an empty string. The
/// pointer stays valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn qt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a model from a Hamiltonian and `n_invariants` additional conserved
/// observables stored back to back in `invariants`.
///
/// # Safety
/// `h` must hold `2*dim*dim` doubles, `invariants` `n_invariants` times that,
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qt_model_new(
    dim: usize,
    h: *const f64,
    n_invariants: usize,
    invariants: *const f64,
    out: *mut *mut QtModel,
) -> QtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let ham = Observable::new(read_matrix(h, dim, "h")?)?;
        let mut gs = Vec::with_capacity(n_invariants);
        if n_invariants > 0 {
            let all = slice(invariants, 2 * dim * dim * n_invariants, "invariants")?;
            for k in 0..n_invariants {
                let chunk = &all[2 * dim * dim * k..2 * dim * dim * (k + 1)];
                gs.push(Observable::new(read_matrix(chunk.as_ptr(), dim, "invariants")?)?);
            }
        }
        let model = SystemModel::simple(ham)?.with_invariants(gs)?;
        *out = boxed(QtModel(model));
        Ok(())
    })
}

/// Builds a bipartite model with `H = H_A ⊗ I + I ⊗ H_B`.
///
/// # Safety
/// `h_a` and `h_b` must hold `2*dim_a*dim_a` and `2*dim_b*dim_b` doubles;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qt_model_noninteracting(
    dim_a: usize,
    h_a: *const f64,
    dim_b: usize,
    h_b: *const f64,
    out: *mut *mut QtModel,
) -> QtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let a = Observable::new(read_matrix(h_a, dim_a, "h_a")?)?;
        let b = Observable::new(read_matrix(h_b, dim_b, "h_b")?)?;
        *out = boxed(QtModel(SystemModel::noninteracting(a, b)?));
        Ok(())
    })
}

/// Hilbert-space dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn qt_model_dim(model: *const QtModel) -> usize {
    model.as_ref().map(|m| m.0.dim()).unwrap_or(0)
}

/// # Safety
/// `model` must be null or a live model handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qt_model_free(model: *mut QtModel) {
    free(model)
}

/// Validates `rho` as a density operator and wraps it.
///
/// # Safety
/// `rho` must hold `2*dim*dim` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qt_state_new(dim: usize, rho: *const f64, out: *mut *mut QtState) -> QtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let s = QuantumState::new(read_matrix(rho, dim, "rho")?)?;
        *out = boxed(QtState(s));
        Ok(())
    })
}

/// `exp(-beta H + sum nu_i G_i) / Z` for the model.
///
/// # Safety
/// `model` must be live, `nu` must hold `n_nu` doubles and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn qt_state_gibbs(
    model: *const QtModel,
    beta: f64,
    nu: *const f64,
    n_nu: usize,
    out: *mut *mut QtState,
) -> QtStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let out = out_ptr(out, "out")?;
        let nu = slice(nu, n_nu, "nu")?;
        *out = boxed(QtState(qthermo::gibbs_density(&model.0, beta, nu)?));
        Ok(())
    })
}

/// # Safety
/// `state` must be null or a live state handle.
#[no_mangle]
pub unsafe extern "C" fn qt_state_dim(state: *const QtState) -> usize {
    state.as_ref().map(|s| s.0.dim()).unwrap_or(0)
}

/// Copies the density matrix into `out` (`len >= 2*dim*dim` doubles).
///
/// # Safety
/// `state` must be live and `out` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qt_state_matrix(state: *const QtState, out: *mut f64, len: usize) -> QtStatus {
    guard(|| {
        let s = handle(state, "state")?;
        write_matrix(s.0.matrix(), out, len)
    })
}

/// # Safety
/// `state` must be null or a live state handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qt_state_free(state: *mut QtState) {
    free(state)
}

/// Von Neumann entropy `-k_B Tr(rho ln rho)`.
///
/// # Safety
/// `state` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qt_entropy(state: *const QtState, k_b: f64, out: *mut f64) -> QtStatus {
    guard(|| {
        let s = handle(state, "state")?;
        *out_ptr(out, "out")? = state::entropy(&s.0, k_b);
        Ok(())
    })
}

/// `Tr(rho X)` for a Hermitian `X` of the state's dimension.
///
/// # Safety
/// `state` must be live, `x` must hold `2*dim*dim` doubles and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn qt_expectation(state: *const QtState, x: *const f64, out: *mut f64) -> QtStatus {
    guard(|| {
        let s = handle(state, "state")?;
        let obs = Observable::new(read_matrix(x, s.0.dim(), "x")?)?;
        *out_ptr(out, "out")? = state::expectation(&s.0, &obs)?;
        Ok(())
    })
}

/// Half the trace norm of the difference.
///
/// # Safety
/// Both states must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qt_trace_distance(a: *const QtState, b: *const QtState, out: *mut f64) -> QtStatus {
    guard(|| {
        let (a, b) = (handle(a, "a")?, handle(b, "b")?);
        if a.0.dim() != b.0.dim() {
            return Err(fail(QtStatus::InvalidInput, "states have different dimensions"));
        }
        *out_ptr(out, "out")? = a.0.trace_distance(&b.0);
        Ok(())
    })
}

/// Maximum-entropy state at mean energy `e` and invariant targets `g`.
/// `beta` may be null.
///
/// # Safety
/// `model` must be live, `g` must hold `n_g` doubles, `out` must be writable
/// and `beta` null or writable.
#[no_mangle]
pub unsafe extern "C" fn qt_solve_gibbs(
    model: *const QtModel,
    e: f64,
    g: *const f64,
    n_g: usize,
    out: *mut *mut QtState,
    beta: *mut f64,
) -> QtStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let out = out_ptr(out, "out")?;
        let g = slice(g, n_g, "g")?;
        let sol = qthermo::solve_gibbs(&model.0, e, g)?;
        if let Some(b) = beta.as_mut() {
            *b = sol.beta;
        }
        *out = boxed(QtState(sol.state));
        Ok(())
    })
}

/// Dynamics of the given kind; `tau` holds one relaxation time per
/// subsystem (or one shared value). `n_tau = 0` keeps the default.
///
/// # Safety
/// `tau` must hold `n_tau` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qt_dynamics_new(
    kind: QtDynamicsKind,
    tau: *const f64,
    n_tau: usize,
    out: *mut *mut QtDynamics,
) -> QtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let kind = match kind {
            QtDynamicsKind::Unitary => DynamicsKind::Unitary,
            QtDynamicsKind::SeaSingle => DynamicsKind::SeaSingle,
            QtDynamicsKind::SeaComposite => DynamicsKind::SeaComposite,
            QtDynamicsKind::NaiveRelaxation => DynamicsKind::NaiveRelaxation,
        };
        let mut spec = DynamicsSpec::new(kind);
        if n_tau > 0 {
            spec = spec.with_tau(slice(tau, n_tau, "tau")?.to_vec());
        }
        *out = boxed(QtDynamics(spec));
        Ok(())
    })
}

/// # Safety
/// `dynamics` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qt_dynamics_free(dynamics: *mut QtDynamics) {
    free(dynamics)
}

/// Writes `d rho / dt` (Hamiltonian plus dissipative term) into `out`.
///
/// # Safety
/// Handles must be live and `out` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qt_motion(
    model: *const QtModel,
    dynamics: *const QtDynamics,
    state: *const QtState,
    out: *mut f64,
    len: usize,
) -> QtStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let spec = handle(dynamics, "dynamics")?;
        let s = handle(state, "state")?;
        spec.0.validate(&model.0)?;
        let m = dynamics::motion(&model.0, &spec.0, &s.0)?;
        write_matrix(&m.total(), out, len)
    })
}

/// Propagates `state` over `[0, t_final]`, sampling `samples + 1` uniform
/// instants. Non-positive `rtol`/`atol` keep the defaults; `strict` selects
/// the projecting repair mode.
///
/// # Safety
/// Handles must be live and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qt_propagate(
    model: *const QtModel,
    dynamics: *const QtDynamics,
    state: *const QtState,
    t_final: f64,
    samples: usize,
    rtol: f64,
    atol: f64,
    strict: bool,
    out: *mut *mut QtTrajectory,
) -> QtStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let spec = handle(dynamics, "dynamics")?;
        let s = handle(state, "state")?;
        let out = out_ptr(out, "out")?;
        if !(t_final.is_finite() && t_final > 0.0) || samples == 0 {
            return Err(fail(QtStatus::InvalidConfig, "t_final must be positive and samples nonzero"));
        }
        let mut cfg = IntegratorConfig::default().with_times(uniform_times(0.0, t_final, samples));
        if rtol > 0.0 && atol > 0.0 {
            cfg = cfg.with_tolerances(rtol, atol);
        }
        if strict {
            cfg = cfg.with_mode(RepairMode::Strict);
        }
        let traj = qthermo::propagate(&model.0, &spec.0, &s.0, &cfg)?;
        *out = boxed(QtTrajectory(traj));
        Ok(())
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qt_trajectory_len(traj: *const QtTrajectory) -> usize {
    traj.as_ref().map(|t| t.0.len()).unwrap_or(0)
}

/// Time and a copy of the state at sample `index`. Either output may be
/// null.
///
/// # Safety
/// `traj` must be live; `time` and `state` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn qt_trajectory_sample(
    traj: *const QtTrajectory,
    index: usize,
    time: *mut f64,
    state: *mut *mut QtState,
) -> QtStatus {
    guard(|| {
        let t = handle(traj, "traj")?;
        if index >= t.0.len() {
            return Err(fail(QtStatus::InvalidInput, format!("sample {index} out of range ({})", t.0.len())));
        }
        if let Some(dst) = time.as_mut() {
            *dst = t.0.times[index];
        }
        if let Some(dst) = state.as_mut() {
            *dst = boxed(QtState(t.0.states[index].clone()));
        }
        Ok(())
    })
}

/// The trajectory as CSV text; release with [`qt_string_free`].
///
/// # Safety
/// `traj` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qt_trajectory_csv(traj: *const QtTrajectory, out: *mut *mut c_char) -> QtStatus {
    guard(|| {
        let t = handle(traj, "traj")?;
        let out = out_ptr(out, "out")?;
        *out = into_c_string(t.0.to_csv_string()?)?;
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qt_trajectory_free(traj: *mut QtTrajectory) {
    free(traj)
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| fail(QtStatus::InvalidInput, "output contains a NUL byte"))
}

/// Runs a scenario document and returns the canonical JSON report in
/// `report` (release with [`qt_string_free`]). `all_passed` may be null.
/// `profile` is "default", "strict", "loose" or null for the default.
///
/// # Safety
/// `json` and `profile` must be null or NUL-terminated; `report` must be
/// writable and `all_passed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn qt_run_scenario_json(
    json: *const c_char,
    profile: *const c_char,
    report: *mut *mut c_char,
    all_passed: *mut bool,
) -> QtStatus {
    guard(|| {
        let out = out_ptr(report, "report")?;
        *out = ptr::null_mut();
        if json.is_null() {
            return Err(fail(QtStatus::NullPointer, "json is null"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| fail(QtStatus::InvalidInput, "json is not valid UTF-8"))?;
        let profile = if profile.is_null() {
            ToleranceProfile::Default
        } else {
            let name = CStr::from_ptr(profile)
                .to_str()
                .map_err(|_| fail(QtStatus::InvalidInput, "profile is not valid UTF-8"))?;
            ToleranceProfile::parse(name)?
        };
        let sc = Scenario::from_json_str(text)?;
        let (rep, _) = sc.run(profile)?;
        if let Some(flag) = all_passed.as_mut() {
            *flag = rep.all_passed();
        }
        *out = into_c_string(rep.to_json()?)?;
        Ok(())
    })
}
