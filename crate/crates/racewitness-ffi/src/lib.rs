//! C ABI over the race detector.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free` function. Every fallible call returns an
//! [`RwStatus`]; on failure `rw_last_error` describes the problem. Event
//! numbers crossing the boundary are 1-based input line indices.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use racewitness::decision::race_decision;
use racewitness::io::{parse, read_file, ParseError, TraceFormat};
use racewitness::m2::{m2, M2Options, RaceSet};
use racewitness::trace::{BuildOptions, Trace};

/// Status codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RwStatus {
    Ok = 0,
    NullArgument = 1,
    ParseError = 2,
    IoError = 3,
    OutOfRange = 4,
    InvalidArgument = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RwFormat {
    Simple = 0,
    Std = 1,
}

/// A parsed trace.
pub struct RwTrace {
    trace: Trace,
}

/// The outcome of an analysis.
pub struct RwResult {
    set: RaceSet,
}

/// Analysis options; pass NULL for defaults.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RwOptions {
    /// Worker threads, 0 for one per core.
    pub jobs: usize,
    /// Candidate pair budget, 0 for unlimited.
    pub max_pairs: usize,
}

/// One reported race.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RwRace {
    pub e1: u32,
    pub e2: u32,
    /// Critical-section completion enlarged a cone for this pair.
    pub cp4_used: bool,
    pub inserted: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn guard(f: impl FnOnce() -> Result<(), (RwStatus, String)>) -> RwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RwStatus::Ok
        }
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            RwStatus::Panic
        }
    }
}

fn null(what: &str) -> (RwStatus, String) {
    (RwStatus::NullArgument, format!("{what} is NULL"))
}

fn parse_error(e: ParseError) -> (RwStatus, String) {
    let code = match e {
        ParseError::Io(_) => RwStatus::IoError,
        _ => RwStatus::ParseError,
    };
    (code, e.to_string())
}

fn format_of(f: RwFormat) -> TraceFormat {
    match f {
        RwFormat::Simple => TraceFormat::Simple,
        RwFormat::Std => TraceFormat::Std,
    }
}

unsafe fn trace_ref<'a>(t: *const RwTrace) -> Result<&'a Trace, (RwStatus, String)> {
    t.as_ref().map(|t| &t.trace).ok_or_else(|| null("trace"))
}

unsafe fn result_ref<'a>(r: *const RwResult) -> Result<&'a RaceSet, (RwStatus, String)> {
    r.as_ref().map(|r| &r.set).ok_or_else(|| null("result"))
}

/// Message for the last failed call on this thread. Valid until the next
/// call on the same thread; never NULL.
#[no_mangle]
pub extern "C" fn rw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse `len` bytes of trace text.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_trace_parse(
    data: *const u8,
    len: usize,
    format: RwFormat,
    init_writes: bool,
    out: *mut *mut RwTrace,
) -> RwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if data.is_null() && len > 0 {
            return Err(null("data"));
        }
        let bytes = if len == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(data, len)
        };
        let trace = parse(bytes, format_of(format), BuildOptions { init_writes }).map_err(parse_error)?;
        *out = Box::into_raw(Box::new(RwTrace { trace }));
        Ok(())
    })
}

/// Read and parse a trace file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_trace_load(
    path: *const c_char,
    format: RwFormat,
    init_writes: bool,
    out: *mut *mut RwTrace,
) -> RwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (RwStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let trace = read_file(Path::new(path), format_of(format), BuildOptions { init_writes }).map_err(parse_error)?;
        *out = Box::into_raw(Box::new(RwTrace { trace }));
        Ok(())
    })
}

/// # Safety
/// `t` must come from `rw_trace_parse` or `rw_trace_load`, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn rw_trace_free(t: *mut RwTrace) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of input events, 0 for NULL.
///
/// # Safety
/// `t` must be a live trace handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn rw_trace_event_count(t: *const RwTrace) -> usize {
    t.as_ref().map_or(0, |t| t.trace.input_len())
}

/// Run the analysis.
///
/// # Safety
/// `t` must be a live trace handle, `opts` NULL or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rw_analyze(t: *const RwTrace, opts: *const RwOptions, out: *mut *mut RwResult) -> RwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let trace = trace_ref(t)?;
        let mut o = M2Options::default();
        if let Some(opts) = opts.as_ref() {
            o.jobs = opts.jobs;
            o.max_pairs = (opts.max_pairs > 0).then_some(opts.max_pairs);
        }
        let set = m2(trace, &o);
        *out = Box::into_raw(Box::new(RwResult { set }));
        Ok(())
    })
}

/// # Safety
/// `r` must come from `rw_analyze`, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn rw_result_free(r: *mut RwResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Number of reported races (before location deduplication).
///
/// # Safety
/// `r` must be a live result handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn rw_result_race_count(r: *const RwResult) -> usize {
    r.as_ref().map_or(0, |r| r.set.z.len())
}

/// Number of pairs left unresolved.
///
/// # Safety
/// `r` must be a live result handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn rw_result_unresolved_count(r: *const RwResult) -> usize {
    r.as_ref().map_or(0, |r| r.set.c.len())
}

/// True when no race can have been missed.
///
/// # Safety
/// `r` must be a live result handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn rw_result_complete(r: *const RwResult) -> bool {
    r.as_ref().is_some_and(|r| r.set.is_complete())
}

/// Fetch race `i`, in report order.
///
/// # Safety
/// `t` and `r` must be live handles, `r` produced from `t`; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rw_result_race(t: *const RwTrace, r: *const RwResult, i: usize, out: *mut RwRace) -> RwStatus {
    guard(|| {
        let trace = trace_ref(t)?;
        let set = result_ref(r)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let rep = set
            .z
            .get(i)
            .ok_or_else(|| (RwStatus::OutOfRange, format!("race {i} of {}", set.z.len())))?;
        *out = RwRace {
            e1: trace.event(rep.e1).index,
            e2: trace.event(rep.e2).index,
            cp4_used: rep.meta.cp4_used,
            inserted: rep.meta.inserted,
        };
        Ok(())
    })
}

/// Copy the witness of race `i` into `buf` as event indices, init writes
/// omitted. `*len` receives the full length; when it exceeds `cap` nothing
/// is copied and `BufferTooSmall` is returned, so a NULL `buf` with `cap`
/// 0 queries the size.
///
/// # Safety
/// `t` and `r` must be live handles, `r` produced from `t`; `buf` must hold
/// `cap` writable elements; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_result_witness(
    t: *const RwTrace,
    r: *const RwResult,
    i: usize,
    buf: *mut u32,
    cap: usize,
    len: *mut usize,
) -> RwStatus {
    guard(|| {
        let trace = trace_ref(t)?;
        let set = result_ref(r)?;
        let len = len.as_mut().ok_or_else(|| null("len"))?;
        let rep = set
            .z
            .get(i)
            .ok_or_else(|| (RwStatus::OutOfRange, format!("race {i} of {}", set.z.len())))?;
        let w: Vec<u32> = rep
            .witness_events(trace)
            .into_iter()
            .filter(|&e| !trace.is_init(e))
            .map(|e| trace.event(e).index)
            .collect();
        *len = w.len();
        if w.len() > cap {
            return Err((
                RwStatus::BufferTooSmall,
                format!("witness needs {} slots, got {cap}", w.len()),
            ));
        }
        if buf.is_null() && !w.is_empty() {
            return Err(null("buf"));
        }
        if !w.is_empty() {
            std::slice::from_raw_parts_mut(buf, w.len()).copy_from_slice(&w);
        }
        Ok(())
    })
}

/// Decide one pair given by input indices.
///
/// # Safety
/// `t` must be a live trace handle; `is_race` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_check_pair(t: *const RwTrace, i1: u32, i2: u32, is_race: *mut bool) -> RwStatus {
    guard(|| {
        let trace = trace_ref(t)?;
        let is_race = is_race.as_mut().ok_or_else(|| null("is_race"))?;
        let ev = |i: u32| {
            trace
                .by_index(i)
                .ok_or_else(|| (RwStatus::OutOfRange, format!("no event at index {i}")))
        };
        let (a, b) = (ev(i1)?, ev(i2)?);
        *is_race = race_decision(trace, a, b).is_race();
        Ok(())
    })
}
