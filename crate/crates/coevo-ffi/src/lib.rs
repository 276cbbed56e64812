//! C ABI for the coevo library.
//!
//! Conventions:
//! - Every fallible call returns an `int` status code (`COEVO_OK` is 0)
//!   and delivers its result through an out-pointer.
//! - Strings crossing the boundary are NUL-terminated UTF-8. Strings the
//!   library hands out are owned by the caller and must be released with
//!   [`coevo_string_free`].
//! - Instances are opaque handles released with [`coevo_instance_free`].
//! - After any non-zero return, [`coevo_last_error`] describes the failure.
//!   The message is thread-local and stays valid until the next coevo call
//!   on the same thread.
//!
//! The generated header lives at `include/coevo.h`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;

use coevo::eval::{evaluate_hardness, ReferencePolicy, Task};
use coevo::gen_dsl::{self, GeneratorProgram};
use coevo::heur_dsl::{self, baseline_heuristic, HeuristicProgram};
use coevo::rng::Seed;
use coevo::solvers::{solve_aco_op, solve_aco_tsp, solve_gls, AcoParams, GlsParams};
use coevo::{Error, Instance, InstanceKind};

/// Success.
pub const COEVO_OK: c_int = 0;
/// A required pointer was null, not valid UTF-8, or otherwise unusable
/// before any parsing happened.
pub const COEVO_ERR_ARG: c_int = 1;
/// Input text failed to parse.
pub const COEVO_ERR_PARSE: c_int = 2;
/// Parsed input failed semantic validation.
pub const COEVO_ERR_VALIDATION: c_int = 3;
/// The solver or evaluator rejected the inputs at run time.
pub const COEVO_ERR_SOLVE: c_int = 4;
/// A panic or other internal failure.
pub const COEVO_ERR_INTERNAL: c_int = 5;

/// Opaque problem-instance handle.
pub struct CoevoInstance {
    inner: Instance,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let text = CString::new(msg.replace('\0', "?"))
        .unwrap_or_else(|_| CString::new("unrepresentable error message").expect("no NUL"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn fail(code: c_int, msg: impl Into<String>) -> c_int {
    set_error(msg.into());
    code
}

fn fail_with(err: &Error) -> c_int {
    let code = match err {
        Error::Json(_) | Error::Parse { .. } => COEVO_ERR_PARSE,
        Error::InvalidInstance(_)
        | Error::InvalidSolution(_)
        | Error::InvalidGenerator { .. }
        | Error::InvalidHeuristic { .. } => COEVO_ERR_VALIDATION,
        Error::Solver(_) | Error::Evaluation(_) | Error::Comparison(_) => COEVO_ERR_SOLVE,
        _ => COEVO_ERR_INTERNAL,
    };
    fail(code, err.to_string())
}

fn guarded(body: impl FnOnce() -> c_int) -> c_int {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(code) => code,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic payload".to_string());
            fail(COEVO_ERR_INTERNAL, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, c_int> {
    if ptr.is_null() {
        return Err(fail(COEVO_ERR_ARG, format!("{name} must not be null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(COEVO_ERR_ARG, format!("{name} is not valid UTF-8")))
}

unsafe fn write_string(out: *mut *mut c_char, text: String) -> c_int {
    match CString::new(text) {
        Ok(c) => {
            *out = c.into_raw();
            COEVO_OK
        }
        Err(_) => fail(COEVO_ERR_INTERNAL, "output contained an interior NUL byte"),
    }
}

fn parse_task(text: &str) -> Result<Task, c_int> {
    Task::from_str(text).map_err(|e| fail(COEVO_ERR_ARG, e.to_string()))
}

unsafe fn heuristic_or_baseline(
    json: *const c_char,
    task: Task,
) -> Result<HeuristicProgram, c_int> {
    if json.is_null() {
        return Ok(baseline_heuristic(task.target()));
    }
    let text = read_str(json, "heuristic_json")?;
    HeuristicProgram::from_json(text).map_err(|e| fail_with(&e))
}

/// Library version as a static NUL-terminated string. Do not free.
#[no_mangle]
pub extern "C" fn coevo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread, or null if the
/// last call succeeded. The pointer is owned by the library and is
/// invalidated by the next coevo call on the same thread. Do not free.
#[no_mangle]
pub extern "C" fn coevo_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// Releases a string previously returned through an out-pointer.
///
/// # Safety
/// `s` must be null or a pointer obtained from a coevo out-parameter that
/// has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn coevo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates an instance from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be a valid pointer.
/// On success `*out` owns the instance until [`coevo_instance_free`].
#[no_mangle]
pub unsafe extern "C" fn coevo_instance_parse_json(
    json: *const c_char,
    out: *mut *mut CoevoInstance,
) -> c_int {
    guarded(|| {
        clear_error();
        if out.is_null() {
            return fail(COEVO_ERR_ARG, "out must not be null");
        }
        let text = match read_str(json, "json") {
            Ok(s) => s,
            Err(code) => return code,
        };
        match Instance::from_json(text) {
            Ok(inst) => {
                *out = Box::into_raw(Box::new(CoevoInstance { inner: inst }));
                COEVO_OK
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Samples an `n`-node instance from a generator program.
///
/// `kind` is `"tsp"` or `"op"`. Sampling is deterministic in
/// `(generator_json, n, seed, kind)`.
///
/// # Safety
/// `generator_json` and `kind` must be NUL-terminated strings; `out` must
/// be a valid pointer. On success `*out` owns the instance until
/// [`coevo_instance_free`].
#[no_mangle]
pub unsafe extern "C" fn coevo_instance_generate(
    generator_json: *const c_char,
    n: usize,
    seed: u64,
    kind: *const c_char,
    out: *mut *mut CoevoInstance,
) -> c_int {
    guarded(|| {
        clear_error();
        if out.is_null() {
            return fail(COEVO_ERR_ARG, "out must not be null");
        }
        let gen_text = match read_str(generator_json, "generator_json") {
            Ok(s) => s,
            Err(code) => return code,
        };
        let kind = match read_str(kind, "kind") {
            Ok("tsp") => InstanceKind::Tsp,
            Ok("op") => InstanceKind::Op,
            Ok(other) => {
                return fail(
                    COEVO_ERR_ARG,
                    format!("unknown instance kind {other:?}, expected tsp|op"),
                )
            }
            Err(code) => return code,
        };
        let program = match GeneratorProgram::from_json(gen_text) {
            Ok(p) => p,
            Err(e) => return fail_with(&e),
        };
        match gen_dsl::generate(&program, n, Seed(seed), kind) {
            Ok(inst) => {
                *out = Box::into_raw(Box::new(CoevoInstance { inner: inst }));
                COEVO_OK
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Serializes an instance back to JSON.
///
/// # Safety
/// `instance` must be a live handle; `out_json` must be a valid pointer.
/// On success `*out_json` must be released with [`coevo_string_free`].
#[no_mangle]
pub unsafe extern "C" fn coevo_instance_to_json(
    instance: *const CoevoInstance,
    out_json: *mut *mut c_char,
) -> c_int {
    guarded(|| {
        clear_error();
        if out_json.is_null() {
            return fail(COEVO_ERR_ARG, "out_json must not be null");
        }
        if instance.is_null() {
            return fail(COEVO_ERR_ARG, "instance must not be null");
        }
        write_string(out_json, (*instance).inner.to_json())
    })
}

/// Number of nodes in the instance.
///
/// # Safety
/// `instance` must be a live handle; `out_n` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coevo_instance_size(
    instance: *const CoevoInstance,
    out_n: *mut usize,
) -> c_int {
    guarded(|| {
        clear_error();
        if instance.is_null() || out_n.is_null() {
            return fail(COEVO_ERR_ARG, "instance and out_n must not be null");
        }
        *out_n = (*instance).inner.n();
        COEVO_OK
    })
}

/// Releases an instance handle. Null is a no-op.
///
/// # Safety
/// `instance` must be null or a handle from a coevo constructor that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn coevo_instance_free(instance: *mut CoevoInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Runs the task's solver on an instance and returns the result as JSON
/// (best solution, objective, per-iteration trace, evaluation count).
///
/// `task` is `"tsp_gls"`, `"tsp_aco"`, or `"op_aco"`. A null
/// `heuristic_json` selects the task's baseline guide. Zero for
/// `budget_ls_iters`, `stall_cycles`, or `iterations` keeps the default
/// budget. Deterministic in all arguments.
///
/// # Safety
/// `task` must be a NUL-terminated string, `instance` a live handle,
/// `heuristic_json` null or a NUL-terminated string, and `out_json` a
/// valid pointer. On success `*out_json` must be released with
/// [`coevo_string_free`].
#[no_mangle]
pub unsafe extern "C" fn coevo_solve(
    task: *const c_char,
    instance: *const CoevoInstance,
    heuristic_json: *const c_char,
    seed: u64,
    budget_ls_iters: u64,
    stall_cycles: u32,
    iterations: u64,
    out_json: *mut *mut c_char,
) -> c_int {
    guarded(|| {
        clear_error();
        if out_json.is_null() {
            return fail(COEVO_ERR_ARG, "out_json must not be null");
        }
        if instance.is_null() {
            return fail(COEVO_ERR_ARG, "instance must not be null");
        }
        let task = match read_str(task, "task").and_then(|s| parse_task(s)) {
            Ok(t) => t,
            Err(code) => return code,
        };
        let heuristic = match heuristic_or_baseline(heuristic_json, task) {
            Ok(h) => h,
            Err(code) => return code,
        };
        let inst = &(*instance).inner;
        let result = match task {
            Task::TspGls => {
                let mut params = GlsParams::with_seed(Seed(seed));
                if budget_ls_iters > 0 {
                    params.budget_ls_iters = budget_ls_iters;
                }
                if stall_cycles > 0 {
                    params.stall_cycles = stall_cycles;
                }
                solve_gls(inst, &heuristic, &params)
            }
            Task::TspAco => {
                let mut params = AcoParams::with_seed(Seed(seed));
                if iterations > 0 {
                    params.iterations = iterations as usize;
                }
                solve_aco_tsp(inst, &heuristic, &params)
            }
            Task::OpAco => {
                let mut params = AcoParams::with_seed(Seed(seed));
                if iterations > 0 {
                    params.iterations = iterations as usize;
                }
                solve_aco_op(inst, &heuristic, &params)
            }
        };
        match result {
            Ok(res) => match serde_json::to_string_pretty(&res) {
                Ok(text) => write_string(out_json, text),
                Err(e) => fail(COEVO_ERR_INTERNAL, e.to_string()),
            },
            Err(e) => fail_with(&e),
        }
    })
}

/// Measures batch hardness of a generator against a heuristic and returns
/// the gap report as JSON. Instances are sampled with seeds
/// `seed..seed+batch-1`; the reference policy is the library default. A
/// null `heuristic_json` selects the task's baseline guide.
///
/// # Safety
/// `task` and `generator_json` must be NUL-terminated strings,
/// `heuristic_json` null or a NUL-terminated string, and `out_json` a
/// valid pointer. On success `*out_json` must be released with
/// [`coevo_string_free`].
#[no_mangle]
pub unsafe extern "C" fn coevo_gap(
    task: *const c_char,
    generator_json: *const c_char,
    heuristic_json: *const c_char,
    n: usize,
    batch: usize,
    seed: u64,
    out_json: *mut *mut c_char,
) -> c_int {
    guarded(|| {
        clear_error();
        if out_json.is_null() {
            return fail(COEVO_ERR_ARG, "out_json must not be null");
        }
        let task = match read_str(task, "task").and_then(|s| parse_task(s)) {
            Ok(t) => t,
            Err(code) => return code,
        };
        let gen_text = match read_str(generator_json, "generator_json") {
            Ok(s) => s,
            Err(code) => return code,
        };
        let generator = match GeneratorProgram::from_json(gen_text) {
            Ok(p) => p,
            Err(e) => return fail_with(&e),
        };
        let heuristic = match heuristic_or_baseline(heuristic_json, task) {
            Ok(h) => h,
            Err(code) => return code,
        };
        let policy = ReferencePolicy::default();
        match evaluate_hardness(&generator, &heuristic, n, batch, Seed(seed), task, &policy) {
            Ok(report) => write_string(out_json, report.to_json()),
            Err(e) => fail_with(&e),
        }
    })
}

/// Applies one random edit to a generator program and returns the mutated
/// program as JSON. The result always validates and always differs from
/// the input; deterministic in `(generator_json, seed)`.
///
/// # Safety
/// `generator_json` must be a NUL-terminated string; `out_json` must be a
/// valid pointer. On success `*out_json` must be released with
/// [`coevo_string_free`].
#[no_mangle]
pub unsafe extern "C" fn coevo_mutate_generator(
    generator_json: *const c_char,
    seed: u64,
    out_json: *mut *mut c_char,
) -> c_int {
    guarded(|| {
        clear_error();
        if out_json.is_null() {
            return fail(COEVO_ERR_ARG, "out_json must not be null");
        }
        let text = match read_str(generator_json, "generator_json") {
            Ok(s) => s,
            Err(code) => return code,
        };
        let program = match GeneratorProgram::from_json(text) {
            Ok(p) => p,
            Err(e) => return fail_with(&e),
        };
        let weights = gen_dsl::MutationWeights::default();
        let mutated = gen_dsl::mutate_generator(&program, Seed(seed), &weights);
        write_string(out_json, mutated.to_json())
    })
}

/// Applies one random edit to a heuristic program and returns the mutated
/// program as JSON. The result always validates and always differs from
/// the input; deterministic in `(heuristic_json, seed)`.
///
/// # Safety
/// `heuristic_json` must be a NUL-terminated string; `out_json` must be a
/// valid pointer. On success `*out_json` must be released with
/// [`coevo_string_free`].
#[no_mangle]
pub unsafe extern "C" fn coevo_mutate_heuristic(
    heuristic_json: *const c_char,
    seed: u64,
    out_json: *mut *mut c_char,
) -> c_int {
    guarded(|| {
        clear_error();
        if out_json.is_null() {
            return fail(COEVO_ERR_ARG, "out_json must not be null");
        }
        let text = match read_str(heuristic_json, "heuristic_json") {
            Ok(s) => s,
            Err(code) => return code,
        };
        let program = match HeuristicProgram::from_json(text) {
            Ok(p) => p,
            Err(e) => return fail_with(&e),
        };
        let weights = heur_dsl::MutationWeights::default();
        let mutated = heur_dsl::mutate_heuristic(&program, Seed(seed), &weights);
        write_string(out_json, mutated.to_json())
    })
}

/// Returns the task's baseline heuristic program as JSON.
///
/// # Safety
/// `task` must be a NUL-terminated string; `out_json` must be a valid
/// pointer. On success `*out_json` must be released with
/// [`coevo_string_free`].
#[no_mangle]
pub unsafe extern "C" fn coevo_baseline_heuristic(
    task: *const c_char,
    out_json: *mut *mut c_char,
) -> c_int {
    guarded(|| {
        clear_error();
        if out_json.is_null() {
            return fail(COEVO_ERR_ARG, "out_json must not be null");
        }
        let task = match read_str(task, "task").and_then(|s| parse_task(s)) {
            Ok(t) => t,
            Err(code) => return code,
        };
        write_string(out_json, baseline_heuristic(task.target()).to_json())
    })
}
