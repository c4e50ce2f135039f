//! C ABI for the `quadls` local-search clustering library.
//!
//! The surface follows the usual handle/status-code pattern:
//!
//! * instances and solutions are opaque heap handles, created and destroyed
//!   only through these functions;
//! * every fallible call returns a [`QuadlsStatus`] and writes its result
//!   through an out-pointer only on `QUADLS_STATUS_OK`;
//! * the most recent failure message per thread is available through
//!   [`quadls_last_error`];
//! * no function panics across the boundary — errors become status codes.
//!
//! The matching header `include/quadls.h` is generated by cbindgen at build
//! time and committed alongside the crate.

use quadls::driver::{self, DriverConfig};
use quadls::dp::DpProfile;
use quadls::instance::{eval_cost, Instance, Point, Solution};
use quadls::io::{parse_instance, write_instance};
use quadls::oracle::{exact_opt, OracleBudget};
use quadls::seeding::{dsquared_seed, SeedConfig};
use quadls::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Outcome of a quadls call. Anything but `OK` leaves out-parameters
/// untouched; details are available from `quadls_last_error`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadlsStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Arguments failed validation (dimensions, k, epsilon, indices, ...).
    InvalidArgument = 2,
    /// Text input could not be parsed.
    ParseError = 3,
    /// An enumeration budget was exhausted before the call could finish.
    BudgetExhausted = 4,
    /// A panic was caught at the boundary; this is a bug in the library.
    Internal = 5,
}

/// Rounding-resolution preset for the swap DP inside the driver.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadlsProfile {
    /// Engineering defaults: coarse ladders and small grids.
    Desk = 0,
    /// Resolution constants taken literally from the approximation
    /// analysis; only usable on tiny instances.
    PaperFaithful = 1,
}

/// An immutable clustering instance (opaque).
pub struct QuadlsInstance {
    inner: Instance,
}

/// A solution: open centers with cached costs (opaque).
pub struct QuadlsSolution {
    inner: Solution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("error message had NUL").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> QuadlsStatus {
    match err {
        Error::BudgetExhausted { .. } => QuadlsStatus::BudgetExhausted,
        Error::Parse(_) => QuadlsStatus::ParseError,
        _ => QuadlsStatus::InvalidArgument,
    }
}

fn fail(err: Error) -> QuadlsStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

/// Run `f` with panics converted to `Internal`; on success hand the value to
/// `store`, which writes through the caller's out-pointer.
fn guarded<T>(
    f: impl FnOnce() -> quadls::Result<T>,
    store: impl FnOnce(T),
) -> QuadlsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(value)) => {
            store(value);
            QuadlsStatus::Ok
        }
        Ok(Err(e)) => fail(e),
        Err(_) => {
            set_error("internal panic".to_string());
            QuadlsStatus::Internal
        }
    }
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn quadls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent failure on the calling thread, or null if no
/// call has failed yet. The pointer stays valid until the next failing
/// quadls call on the same thread.
#[no_mangle]
pub extern "C" fn quadls_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// Static name of a status code (e.g. "ok", "budget-exhausted").
#[no_mangle]
pub extern "C" fn quadls_status_name(status: QuadlsStatus) -> *const c_char {
    let name: &'static str = match status {
        QuadlsStatus::Ok => "ok\0",
        QuadlsStatus::NullArgument => "null-argument\0",
        QuadlsStatus::InvalidArgument => "invalid-argument\0",
        QuadlsStatus::ParseError => "parse-error\0",
        QuadlsStatus::BudgetExhausted => "budget-exhausted\0",
        QuadlsStatus::Internal => "internal\0",
    };
    name.as_ptr() as *const c_char
}

/// Build an instance from flat coordinate arrays.
///
/// `clients` holds `n_clients * dim` coordinates (point-major), `candidates`
/// holds `n_candidates * dim`, and `weights` holds `n_candidates` opening
/// weights or may be null for an unweighted instance. `exponent_p` is the
/// distance exponent of the objective (2 = squared Euclidean). On success
/// `*out` owns the new instance; release it with `quadls_instance_free`.
///
/// # Safety
///
/// `clients`, `candidates`, and `out` must be valid non-null pointers with
/// the lengths implied above; `weights` must be null or hold `n_candidates`
/// values. The arrays are only read during the call.
#[no_mangle]
pub unsafe extern "C" fn quadls_instance_new(
    dim: usize,
    clients: *const i64,
    n_clients: usize,
    candidates: *const i64,
    weights: *const f64,
    n_candidates: usize,
    k: usize,
    epsilon: f64,
    exponent_p: u32,
    out: *mut *mut QuadlsInstance,
) -> QuadlsStatus {
    if clients.is_null() || candidates.is_null() || out.is_null() {
        return QuadlsStatus::NullArgument;
    }
    if dim == 0 || dim > isize::MAX as usize / 8 {
        set_error(format!("dimension {dim} is unusable"));
        return QuadlsStatus::InvalidArgument;
    }
    let client_coords = std::slice::from_raw_parts(clients, n_clients * dim);
    let cand_coords = std::slice::from_raw_parts(candidates, n_candidates * dim);
    let weight_vals: Vec<f64> = if weights.is_null() {
        vec![0.0; n_candidates]
    } else {
        std::slice::from_raw_parts(weights, n_candidates).to_vec()
    };
    guarded(
        || {
            let clients: Vec<Point> = client_coords
                .chunks_exact(dim)
                .map(|c| Point::new(c.to_vec()))
                .collect();
            let cands: Vec<(Point, f64)> = cand_coords
                .chunks_exact(dim)
                .zip(&weight_vals)
                .map(|(c, &w)| (Point::new(c.to_vec()), w))
                .collect();
            let inst = Instance::new(dim, clients, cands, k, epsilon)?;
            Ok(inst.with_exponent(exponent_p))
        },
        |inst| *out = Box::into_raw(Box::new(QuadlsInstance { inner: inst })),
    )
}

/// Parse the line-oriented instance text format.
///
/// On success `*out` owns the new instance; release it with
/// `quadls_instance_free`.
///
/// # Safety
///
/// `text` must be a valid nul-terminated string and `out` a valid non-null
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn quadls_instance_parse(
    text: *const c_char,
    out: *mut *mut QuadlsInstance,
) -> QuadlsStatus {
    if text.is_null() || out.is_null() {
        return QuadlsStatus::NullArgument;
    }
    let text = match CStr::from_ptr(text).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("instance text is not valid UTF-8".to_string());
            return QuadlsStatus::ParseError;
        }
    };
    guarded(
        || parse_instance(text),
        |inst| *out = Box::into_raw(Box::new(QuadlsInstance { inner: inst })),
    )
}

/// Serialize an instance to the text format as a heap string.
///
/// Release the returned string with `quadls_string_free`. Returns null only
/// if `inst` is null.
///
/// # Safety
///
/// `inst` must be a pointer returned by a quadls constructor (or null).
#[no_mangle]
pub unsafe extern "C" fn quadls_instance_write(inst: *const QuadlsInstance) -> *mut c_char {
    if inst.is_null() {
        return std::ptr::null_mut();
    }
    let text = write_instance(&(*inst).inner);
    CString::new(text)
        .expect("instance text never contains NUL")
        .into_raw()
}

/// Release a string returned by `quadls_instance_write`.
///
/// # Safety
///
/// `s` must be a pointer previously returned by `quadls_instance_write`
/// (or null), and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn quadls_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Release an instance handle.
///
/// # Safety
///
/// `inst` must be a pointer returned by a quadls constructor (or null), and
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn quadls_instance_free(inst: *mut QuadlsInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Number of clients, or 0 if `inst` is null.
///
/// # Safety
///
/// `inst` must be a pointer returned by a quadls constructor (or null).
#[no_mangle]
pub unsafe extern "C" fn quadls_instance_n_clients(inst: *const QuadlsInstance) -> usize {
    if inst.is_null() {
        return 0;
    }
    (*inst).inner.clients.len()
}

/// Number of candidate centers, or 0 if `inst` is null.
///
/// # Safety
///
/// `inst` must be a pointer returned by a quadls constructor (or null).
#[no_mangle]
pub unsafe extern "C" fn quadls_instance_n_candidates(inst: *const QuadlsInstance) -> usize {
    if inst.is_null() {
        return 0;
    }
    (*inst).inner.candidates.len()
}

/// The instance's k (number of centers to open), or 0 if `inst` is null.
///
/// # Safety
///
/// `inst` must be a pointer returned by a quadls constructor (or null).
#[no_mangle]
pub unsafe extern "C" fn quadls_instance_k(inst: *const QuadlsInstance) -> usize {
    if inst.is_null() {
        return 0;
    }
    (*inst).inner.k
}

/// The instance's dimension, or 0 if `inst` is null.
///
/// # Safety
///
/// `inst` must be a pointer returned by a quadls constructor (or null).
#[no_mangle]
pub unsafe extern "C" fn quadls_instance_dim(inst: *const QuadlsInstance) -> usize {
    if inst.is_null() {
        return 0;
    }
    (*inst).inner.dim
}

/// Run the full local-search scheme.
///
/// `gamma <= 0` and `retries == 0` select the documented defaults. On
/// success `*out` owns the solution; release it with
/// `quadls_solution_free`.
///
/// # Safety
///
/// `inst` must be a live instance handle and `out` a valid non-null
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn quadls_run_driver(
    inst: *const QuadlsInstance,
    seed: u64,
    delta: usize,
    gamma: f64,
    retries: usize,
    profile: QuadlsProfile,
    out: *mut *mut QuadlsSolution,
) -> QuadlsStatus {
    if inst.is_null() || out.is_null() {
        return QuadlsStatus::NullArgument;
    }
    let inst = &(*inst).inner;
    guarded(
        || {
            let cfg = DriverConfig {
                seed,
                epsilon: None,
                delta,
                gamma: (gamma > 0.0).then_some(gamma),
                retries: (retries > 0).then_some(retries),
                profile: match profile {
                    QuadlsProfile::Desk => DpProfile::Desk,
                    QuadlsProfile::PaperFaithful => DpProfile::PaperFaithful,
                },
            };
            driver::run(inst, &cfg).map(|(sol, _trace)| sol)
        },
        |sol| *out = Box::into_raw(Box::new(QuadlsSolution { inner: sol })),
    )
}

/// D²-sampling baseline: best of `trials` independent seedings.
///
/// On success `*out` owns the solution; release it with
/// `quadls_solution_free`.
///
/// # Safety
///
/// `inst` must be a live instance handle and `out` a valid non-null
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn quadls_dsquared(
    inst: *const QuadlsInstance,
    seed: u64,
    trials: usize,
    out: *mut *mut QuadlsSolution,
) -> QuadlsStatus {
    if inst.is_null() || out.is_null() {
        return QuadlsStatus::NullArgument;
    }
    let inst = &(*inst).inner;
    guarded(
        || dsquared_seed(inst, SeedConfig { seed, trials }),
        |sol| *out = Box::into_raw(Box::new(QuadlsSolution { inner: sol })),
    )
}

/// Exact optimum by bounded enumeration over at most `max_solutions` open
/// sets; fails with `BUDGET_EXHAUSTED` when the instance needs more.
///
/// On success `*out` owns the solution; release it with
/// `quadls_solution_free`.
///
/// # Safety
///
/// `inst` must be a live instance handle and `out` a valid non-null
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn quadls_exact_opt(
    inst: *const QuadlsInstance,
    max_solutions: u64,
    out: *mut *mut QuadlsSolution,
) -> QuadlsStatus {
    if inst.is_null() || out.is_null() {
        return QuadlsStatus::NullArgument;
    }
    let inst = &(*inst).inner;
    guarded(
        || exact_opt(inst, OracleBudget { max_solutions }),
        |sol| *out = Box::into_raw(Box::new(QuadlsSolution { inner: sol })),
    )
}

/// Evaluate the exact cost of opening the given candidate indices.
///
/// On success `*out` owns the solution; release it with
/// `quadls_solution_free`.
///
/// # Safety
///
/// `inst` must be a live instance handle, `open` must point to `len`
/// indices, and `out` must be a valid non-null pointer.
#[no_mangle]
pub unsafe extern "C" fn quadls_eval(
    inst: *const QuadlsInstance,
    open: *const usize,
    len: usize,
    out: *mut *mut QuadlsSolution,
) -> QuadlsStatus {
    if inst.is_null() || open.is_null() || out.is_null() {
        return QuadlsStatus::NullArgument;
    }
    let inst = &(*inst).inner;
    let open = std::slice::from_raw_parts(open, len);
    guarded(
        || eval_cost(inst, open),
        |sol| *out = Box::into_raw(Box::new(QuadlsSolution { inner: sol })),
    )
}

/// Total cost (service plus opening), or NaN if `sol` is null.
///
/// # Safety
///
/// `sol` must be a pointer returned by a quadls call (or null).
#[no_mangle]
pub unsafe extern "C" fn quadls_solution_total(sol: *const QuadlsSolution) -> f64 {
    if sol.is_null() {
        return f64::NAN;
    }
    (*sol).inner.total()
}

/// Service cost alone, or NaN if `sol` is null.
///
/// # Safety
///
/// `sol` must be a pointer returned by a quadls call (or null).
#[no_mangle]
pub unsafe extern "C" fn quadls_solution_service_cost(sol: *const QuadlsSolution) -> f64 {
    if sol.is_null() {
        return f64::NAN;
    }
    (*sol).inner.service_cost
}

/// Opening cost alone, or NaN if `sol` is null.
///
/// # Safety
///
/// `sol` must be a pointer returned by a quadls call (or null).
#[no_mangle]
pub unsafe extern "C" fn quadls_solution_opening_cost(sol: *const QuadlsSolution) -> f64 {
    if sol.is_null() {
        return f64::NAN;
    }
    (*sol).inner.opening_cost
}

/// Number of open centers, or 0 if `sol` is null.
///
/// # Safety
///
/// `sol` must be a pointer returned by a quadls call (or null).
#[no_mangle]
pub unsafe extern "C" fn quadls_solution_len(sol: *const QuadlsSolution) -> usize {
    if sol.is_null() {
        return 0;
    }
    (*sol).inner.open.len()
}

/// Copy up to `cap` open candidate indices into `buf`; returns the number
/// of open centers regardless (call with `cap = 0` to size the buffer).
///
/// # Safety
///
/// `sol` must be a pointer returned by a quadls call (or null); `buf` must
/// point to at least `cap` writable entries unless `cap` is 0.
#[no_mangle]
pub unsafe extern "C" fn quadls_solution_centers(
    sol: *const QuadlsSolution,
    buf: *mut usize,
    cap: usize,
) -> usize {
    if sol.is_null() {
        return 0;
    }
    let open = &(*sol).inner.open;
    if !buf.is_null() && cap > 0 {
        let take = open.len().min(cap);
        std::ptr::copy_nonoverlapping(open.as_ptr(), buf, take);
    }
    open.len()
}

/// Release a solution handle.
///
/// # Safety
///
/// `sol` must be a pointer returned by a quadls call (or null), and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn quadls_solution_free(sol: *mut QuadlsSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}
