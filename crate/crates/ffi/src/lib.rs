//! C interface to `sat2mapf`.
//!
//! Objects cross the boundary as opaque handles created by `s2m_*` functions
//! and released by the matching `*_free`. Every fallible call returns an
//! `S2mStatus`; on failure `s2m_last_error` describes the most recent error
//! on the calling thread. Strings handed out by the library are owned by the
//! caller and must be released with `s2m_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sat2mapf::formula::{brute_force_sat, parse_dimacs, Assignment, Formula};
use sat2mapf::gridmap::write_map;
use sat2mapf::oracle::{descending_dstar_feasible, monotone_dstar_feasible_capped, Limits, OracleVerdict};
use sat2mapf::plan::Plan;
use sat2mapf::reduction::{build, d_star, Instance, Layout, Variant};
use sat2mapf::validator::{validate, MotionMode};
use sat2mapf::witness::{synth_feasible_monotone, synth_optimal_plan, WitnessError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum S2mStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Reduction = 4,
    /// The assignment does not satisfy the formula.
    NotSatisfying = 5,
    Witness = 6,
    Validation = 7,
    Oracle = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum S2mVariant {
    Monotone = 0,
    General = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum S2mMode {
    Parallel = 0,
    Sequential = 1,
    Monotone = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum S2mVerdict {
    Infeasible = 0,
    Feasible = 1,
    Unknown = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct S2mValidation {
    pub feasible: bool,
    pub cost: u64,
    /// Meaningless when `has_dstar` is false.
    pub dstar: u64,
    pub has_dstar: bool,
    pub monotone: bool,
    pub sequential: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct S2mOracleResult {
    pub verdict: S2mVerdict,
    /// Same question with one move per timestep.
    pub sequential: S2mVerdict,
    pub explored: u64,
}

/// Parsed formula.
pub struct S2mFormula(Formula);

/// Compiled instance together with its gadget layout.
pub struct S2mInstance {
    inst: Instance,
    layout: Layout,
}

/// Timed plan for every agent of an instance.
pub struct S2mPlan(Plan);

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

fn fail(status: S2mStatus, msg: impl Into<String>) -> S2mStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg.into()));
    status
}

fn guard(f: impl FnOnce() -> S2mStatus) -> S2mStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(S2mStatus::Panic, "internal panic"))
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, S2mStatus> {
    if s.is_null() {
        return Err(fail(S2mStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s).to_str().map_err(|e| fail(S2mStatus::InvalidUtf8, e.to_string()))
}

unsafe fn give_string(text: String, out: *mut *mut c_char) -> S2mStatus {
    match CString::new(text) {
        Ok(c) => {
            *out = c.into_raw();
            S2mStatus::Ok
        }
        Err(e) => fail(S2mStatus::InvalidUtf8, e.to_string()),
    }
}

macro_rules! deref {
    ($p:expr) => {
        match $p.as_ref() {
            Some(v) => v,
            None => return fail(S2mStatus::NullPointer, concat!("null argument `", stringify!($p), "`")),
        }
    };
}

macro_rules! out_ptr {
    ($p:expr) => {
        if $p.is_null() {
            return fail(S2mStatus::NullPointer, concat!("null output `", stringify!($p), "`"));
        }
    };
}

/// Message for the last failed call on this thread, or NULL if none.
/// Release with `s2m_string_free`.
#[no_mangle]
pub extern "C" fn s2m_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| match e.borrow().as_deref() {
        Some(msg) => CString::new(msg.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn s2m_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn s2m_formula_parse_dimacs(text: *const c_char, out: *mut *mut S2mFormula) -> S2mStatus {
    guard(|| {
        out_ptr!(out);
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_dimacs(text) {
            Ok(f) => {
                *out = Box::into_raw(Box::new(S2mFormula(f)));
                S2mStatus::Ok
            }
            Err(e) => fail(S2mStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `f` must be NULL or a live formula handle.
#[no_mangle]
pub unsafe extern "C" fn s2m_formula_free(f: *mut S2mFormula) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Number of variables, or 0 for NULL.
///
/// # Safety
/// `f` must be NULL or a live formula handle.
#[no_mangle]
pub unsafe extern "C" fn s2m_formula_num_vars(f: *const S2mFormula) -> u32 {
    f.as_ref().map_or(0, |f| f.0.num_vars())
}

/// # Safety
/// `f` must be NULL or a live formula handle.
#[no_mangle]
pub unsafe extern "C" fn s2m_formula_num_clauses(f: *const S2mFormula) -> usize {
    f.as_ref().map_or(0, |f| f.0.num_clauses())
}

/// Brute-force search. On success `values[i]` holds variable `i+1` (0 or 1)
/// and `*satisfiable` says whether `values` is meaningful.
///
/// # Safety
/// `values` must have room for `len` bytes; `satisfiable` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s2m_formula_solve(
    f: *const S2mFormula,
    values: *mut u8,
    len: usize,
    satisfiable: *mut bool,
) -> S2mStatus {
    guard(|| {
        let f = deref!(f);
        out_ptr!(satisfiable);
        let n = f.0.num_vars() as usize;
        if values.is_null() && n > 0 {
            return fail(S2mStatus::NullPointer, "null output `values`");
        }
        if len < n {
            return fail(S2mStatus::BufferTooSmall, format!("need {n} values, got room for {len}"));
        }
        match brute_force_sat(&f.0) {
            Ok(Some(a)) => {
                for (i, &v) in a.values().iter().enumerate() {
                    *values.add(i) = u8::from(v);
                }
                *satisfiable = true;
                S2mStatus::Ok
            }
            Ok(None) => {
                *satisfiable = false;
                S2mStatus::Ok
            }
            Err(e) => fail(S2mStatus::Parse, e.to_string()),
        }
    })
}

/// Compile a formula into a grid instance.
///
/// # Safety
/// `f` must be a live formula handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn s2m_reduce(f: *const S2mFormula, variant: S2mVariant, out: *mut *mut S2mInstance) -> S2mStatus {
    guard(|| {
        let f = deref!(f);
        out_ptr!(out);
        let variant = match variant {
            S2mVariant::Monotone => Variant::Monotone,
            S2mVariant::General => Variant::General,
        };
        let (inst, layout) = build(&f.0, variant);
        *out = Box::into_raw(Box::new(S2mInstance { inst, layout }));
        S2mStatus::Ok
    })
}

/// # Safety
/// `inst` must be NULL or a live instance handle.
#[no_mangle]
pub unsafe extern "C" fn s2m_instance_free(inst: *mut S2mInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// # Safety
/// `inst` must be NULL or a live instance handle.
#[no_mangle]
pub unsafe extern "C" fn s2m_instance_num_agents(inst: *const S2mInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.inst.num_agents())
}

/// # Safety
/// `inst` must be NULL or a live instance handle.
#[no_mangle]
pub unsafe extern "C" fn s2m_instance_open_cells(inst: *const S2mInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.inst.map().open_cells())
}

/// Sum of the agents' individual shortest-path distances.
///
/// # Safety
/// `inst` must be a live instance handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn s2m_instance_dstar(inst: *const S2mInstance, out: *mut u64) -> S2mStatus {
    guard(|| {
        let i = deref!(inst);
        out_ptr!(out);
        match d_star(&i.inst) {
            Ok(d) => {
                *out = d;
                S2mStatus::Ok
            }
            Err(e) => fail(S2mStatus::Reduction, e.to_string()),
        }
    })
}

/// The `.map` file contents.
///
/// # Safety
/// `inst` must be a live instance handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn s2m_instance_map_text(inst: *const S2mInstance, out: *mut *mut c_char) -> S2mStatus {
    guard(|| {
        let i = deref!(inst);
        out_ptr!(out);
        give_string(write_map(i.inst.map()), out)
    })
}

/// The `.agents` file contents.
///
/// # Safety
/// `inst` must be a live instance handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn s2m_instance_agents_text(inst: *const S2mInstance, out: *mut *mut c_char) -> S2mStatus {
    guard(|| {
        let i = deref!(inst);
        out_ptr!(out);
        give_string(i.inst.agents_text(), out)
    })
}

/// The `.layout` file contents.
///
/// # Safety
/// `inst` must be a live instance handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn s2m_instance_layout_text(inst: *const S2mInstance, out: *mut *mut c_char) -> S2mStatus {
    guard(|| {
        let i = deref!(inst);
        out_ptr!(out);
        give_string(i.layout.to_text(), out)
    })
}

/// Cost-d* plan from an assignment; `values[i]` is variable `i+1`.
///
/// # Safety
/// `values` must point to `len` readable bytes; `inst` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn s2m_witness(
    inst: *const S2mInstance,
    values: *const u8,
    len: usize,
    out: *mut *mut S2mPlan,
) -> S2mStatus {
    guard(|| {
        let i = deref!(inst);
        out_ptr!(out);
        if values.is_null() && len > 0 {
            return fail(S2mStatus::NullPointer, "null argument `values`");
        }
        let values: Vec<bool> = (0..len).map(|k| *values.add(k) != 0).collect();
        match synth_optimal_plan(&i.inst, &i.layout, &Assignment::from_values(values)) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(S2mPlan(p)));
                S2mStatus::Ok
            }
            Err(WitnessError::NotSatisfying) => fail(S2mStatus::NotSatisfying, WitnessError::NotSatisfying.to_string()),
            Err(e) => fail(S2mStatus::Witness, e.to_string()),
        }
    })
}

/// Monotone plan that exists for every formula; cost may exceed d*.
///
/// # Safety
/// `inst` must be a live instance handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn s2m_fallback_plan(inst: *const S2mInstance, out: *mut *mut S2mPlan) -> S2mStatus {
    guard(|| {
        let i = deref!(inst);
        out_ptr!(out);
        match synth_feasible_monotone(&i.inst, &i.layout) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(S2mPlan(p)));
                S2mStatus::Ok
            }
            Err(e) => fail(S2mStatus::Witness, e.to_string()),
        }
    })
}

/// # Safety
/// `text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn s2m_plan_parse(text: *const c_char, out: *mut *mut S2mPlan) -> S2mStatus {
    guard(|| {
        out_ptr!(out);
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Plan::parse(text) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(S2mPlan(p)));
                S2mStatus::Ok
            }
            Err(e) => fail(S2mStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `plan` must be a live plan handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn s2m_plan_text(plan: *const S2mPlan, out: *mut *mut c_char) -> S2mStatus {
    guard(|| {
        let p = deref!(plan);
        out_ptr!(out);
        give_string(p.0.to_text(), out)
    })
}

/// # Safety
/// `plan` must be NULL or a live plan handle.
#[no_mangle]
pub unsafe extern "C" fn s2m_plan_free(plan: *mut S2mPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// # Safety
/// `inst` and `plan` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn s2m_validate(
    inst: *const S2mInstance,
    plan: *const S2mPlan,
    mode: S2mMode,
    out: *mut S2mValidation,
) -> S2mStatus {
    guard(|| {
        let i = deref!(inst);
        let p = deref!(plan);
        out_ptr!(out);
        let mode = match mode {
            S2mMode::Parallel => MotionMode::Parallel,
            S2mMode::Sequential => MotionMode::Sequential,
            S2mMode::Monotone => MotionMode::Monotone,
        };
        match validate(&i.inst, &p.0, mode) {
            Ok(r) => {
                *out = S2mValidation {
                    feasible: r.feasible,
                    cost: r.cost,
                    dstar: r.dstar.unwrap_or(0),
                    has_dstar: r.dstar.is_some(),
                    monotone: r.is_monotone,
                    sequential: r.is_sequential,
                };
                S2mStatus::Ok
            }
            Err(e) => fail(S2mStatus::Validation, e.to_string()),
        }
    })
}

fn verdict(answer: Option<bool>) -> S2mVerdict {
    match answer {
        Some(true) => S2mVerdict::Feasible,
        Some(false) => S2mVerdict::Infeasible,
        None => S2mVerdict::Unknown,
    }
}

unsafe fn write_verdict(v: OracleVerdict, out: *mut S2mOracleResult) -> S2mStatus {
    *out = S2mOracleResult { verdict: verdict(v.feasible), sequential: verdict(v.sequential_feasible), explored: v.explored };
    S2mStatus::Ok
}

/// Is there a monotone plan of cost d*? Fails with `ORACLE` above `max_agents`.
///
/// # Safety
/// `inst` must be a live instance handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn s2m_oracle_monotone(
    inst: *const S2mInstance,
    max_agents: usize,
    out: *mut S2mOracleResult,
) -> S2mStatus {
    guard(|| {
        let i = deref!(inst);
        out_ptr!(out);
        match monotone_dstar_feasible_capped(&i.inst, max_agents) {
            Ok(v) => write_verdict(v, out),
            Err(e) => fail(S2mStatus::Oracle, e.to_string()),
        }
    })
}

/// Is there a sequential plan of cost d*? `seconds <= 0` means no time limit.
///
/// # Safety
/// `inst` must be a live instance handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn s2m_oracle_descending(
    inst: *const S2mInstance,
    max_states: u64,
    seconds: f64,
    out: *mut S2mOracleResult,
) -> S2mStatus {
    guard(|| {
        let i = deref!(inst);
        out_ptr!(out);
        let limits = Limits { max_states, seconds: (seconds > 0.0).then_some(seconds), ..Limits::default() };
        match descending_dstar_feasible(&i.inst, limits) {
            Ok(v) => write_verdict(v, out),
            Err(e) => fail(S2mStatus::Oracle, e.to_string()),
        }
    })
}
