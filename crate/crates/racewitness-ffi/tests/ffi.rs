use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use racewitness_ffi::*;

const TWO_SECTIONS: &str = "T1 acq l\nT1 w x\nT1 rel l\nT2 acq l\nT2 w x\nT2 rel l\nT2 r x\n";

fn last_error() -> String {
    unsafe { CStr::from_ptr(rw_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn parse(text: &str) -> *mut RwTrace {
    let mut t = ptr::null_mut();
    let st = unsafe { rw_trace_parse(text.as_ptr(), text.len(), RwFormat::Simple, true, &mut t) };
    assert_eq!(st, RwStatus::Ok, "{}", last_error());
    assert!(!t.is_null());
    t
}

#[test]
fn analyze_reports_race_and_witness() {
    let t = parse(TWO_SECTIONS);
    assert_eq!(unsafe { rw_trace_event_count(t) }, 7);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { rw_analyze(t, ptr::null(), &mut r) }, RwStatus::Ok);
    unsafe {
        assert_eq!(rw_result_race_count(r), 1);
        assert_eq!(rw_result_unresolved_count(r), 0);
        assert!(rw_result_complete(r));
        let mut race = RwRace::default();
        assert_eq!(rw_result_race(t, r, 0, &mut race), RwStatus::Ok);
        assert_eq!((race.e1, race.e2), (2, 7));

        let mut len = 0usize;
        assert_eq!(
            rw_result_witness(t, r, 0, ptr::null_mut(), 0, &mut len),
            RwStatus::BufferTooSmall
        );
        assert_eq!(len, 6);
        let mut buf = vec![0u32; len];
        assert_eq!(
            rw_result_witness(t, r, 0, buf.as_mut_ptr(), buf.len(), &mut len),
            RwStatus::Ok
        );
        assert_eq!(buf, [4, 5, 6, 1, 2, 7]);

        assert_eq!(rw_result_race(t, r, 1, &mut race), RwStatus::OutOfRange);
        assert!(last_error().contains("race 1"));
        rw_result_free(r);
        rw_trace_free(t);
    }
}

#[test]
fn options_are_honoured() {
    let t = parse(TWO_SECTIONS);
    let opts = RwOptions { jobs: 1, max_pairs: 0 };
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(rw_analyze(t, &opts, &mut r), RwStatus::Ok);
        assert_eq!(rw_result_race_count(r), 1);
        rw_result_free(r);
        rw_trace_free(t);
    }
}

#[test]
fn check_pair() {
    let t = parse(TWO_SECTIONS);
    let mut race = false;
    unsafe {
        assert_eq!(rw_check_pair(t, 2, 7, &mut race), RwStatus::Ok);
        assert!(race);
        assert_eq!(rw_check_pair(t, 2, 5, &mut race), RwStatus::Ok);
        assert!(!race);
        assert_eq!(rw_check_pair(t, 2, 99, &mut race), RwStatus::OutOfRange);
        rw_trace_free(t);
    }
}

#[test]
fn errors_are_reported() {
    let mut t = ptr::null_mut();
    let bad = "T1 frob x\n";
    let st = unsafe { rw_trace_parse(bad.as_ptr(), bad.len(), RwFormat::Simple, true, &mut t) };
    assert_eq!(st, RwStatus::ParseError);
    assert!(t.is_null());
    assert!(last_error().contains("line 1"), "{}", last_error());

    let st = unsafe { rw_trace_parse(ptr::null(), 3, RwFormat::Simple, true, &mut t) };
    assert_eq!(st, RwStatus::NullArgument);
    let st = unsafe { rw_trace_parse(bad.as_ptr(), bad.len(), RwFormat::Simple, true, ptr::null_mut()) };
    assert_eq!(st, RwStatus::NullArgument);

    let path = CString::new("/nonexistent/trace.txt").unwrap();
    let st = unsafe { rw_trace_load(path.as_ptr(), RwFormat::Simple, true, &mut t) };
    assert_eq!(st, RwStatus::IoError);

    let mut r = ptr::null_mut();
    assert_eq!(
        unsafe { rw_analyze(ptr::null(), ptr::null(), &mut r) },
        RwStatus::NullArgument
    );
    assert!(r.is_null());
    unsafe {
        assert_eq!(rw_result_race_count(ptr::null()), 0);
        assert!(!rw_result_complete(ptr::null()));
        rw_trace_free(ptr::null_mut());
        rw_result_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_error() {
    let mut t = ptr::null_mut();
    unsafe { rw_trace_parse(ptr::null(), 1, RwFormat::Simple, true, &mut t) };
    assert!(!last_error().is_empty());
    let t = parse(TWO_SECTIONS);
    assert!(last_error().is_empty());
    unsafe { rw_trace_free(t) };
}

#[test]
fn load_from_file() {
    let path = std::env::temp_dir().join(format!("rw-ffi-{}.trace", std::process::id()));
    std::fs::write(&path, TWO_SECTIONS).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut t = ptr::null_mut();
    let st = unsafe { rw_trace_load(c.as_ptr(), RwFormat::Simple, true, &mut t) };
    std::fs::remove_file(&path).ok();
    assert_eq!(st, RwStatus::Ok);
    assert_eq!(unsafe { rw_trace_event_count(t) }, 7);
    unsafe { rw_trace_free(t) };
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(rw_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/racewitness.h")).unwrap();
    for name in [
        "rw_trace_parse",
        "rw_trace_load",
        "rw_trace_free",
        "rw_analyze",
        "rw_result_race",
        "rw_result_witness",
        "rw_check_pair",
        "rw_last_error",
        "typedef struct RwTrace RwTrace",
        "RW_STATUS_BUFFER_TOO_SMALL = 6",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", "-"])
        .arg("-include")
        .arg(dir.join("include/racewitness.h"))
        .stdin(std::process::Stdio::null())
        .output()
    else {
        eprintln!("no C compiler, syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
