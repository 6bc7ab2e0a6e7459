//! C ABI for the workbench: opaque handles over the geometry, the
//! simulator, and leakage templates, with integer status codes. The
//! matching header lives at `include/plumber.h`.
//!
//! Ownership: every `*_new`/`*_load_file` constructor transfers ownership
//! to the caller, who must release it with the matching `*_free`. All
//! functions tolerate null pointers and report `PLUMBER_ERR_NULL`.

use plumber_core::geometry::{CacheGeometry, Field};
use plumber_core::lt::{deserialize_lt, LeakageTemplate};
use plumber_core::matcher::{classify_trace, TraceRecord};
use plumber_core::sim::{Replacement, SimConfig, SimState};
use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::fs;
use std::ptr;

pub const PLUMBER_OK: c_int = 0;
pub const PLUMBER_ERR_NULL: c_int = 1;
pub const PLUMBER_ERR_INVALID: c_int = 2;
pub const PLUMBER_ERR_PARSE: c_int = 3;
pub const PLUMBER_ERR_RANGE: c_int = 4;
pub const PLUMBER_ERR_UTF8: c_int = 5;
pub const PLUMBER_ERR_IO: c_int = 6;
pub const PLUMBER_ERR_BUFFER: c_int = 7;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

/// Opaque geometry handle.
pub struct PlumberGeometry(CacheGeometry);
/// Opaque simulator handle.
pub struct PlumberSim {
    state: SimState,
}
/// Opaque leakage-template handle.
pub struct PlumberLt(LeakageTemplate);

#[repr(C)]
#[derive(Clone, Copy)]
pub struct PlumberCounters {
    pub instructions: u64,
    pub previctions: u64,
    pub prefetch_issues: u64,
    pub branches: u64,
    pub mispredictions: u64,
}

// field ids for plumber_extract_field
pub const PLUMBER_FIELD_OFFSET: c_int = 0;
pub const PLUMBER_FIELD_SET: c_int = 1;
pub const PLUMBER_FIELD_TAG: c_int = 2;
pub const PLUMBER_FIELD_WORD: c_int = 3;
pub const PLUMBER_FIELD_BUS: c_int = 4;
pub const PLUMBER_FIELD_PAGE: c_int = 5;

fn field_of(id: c_int) -> Option<Field> {
    match id {
        PLUMBER_FIELD_OFFSET => Some(Field::Offset),
        PLUMBER_FIELD_SET => Some(Field::Set),
        PLUMBER_FIELD_TAG => Some(Field::Tag),
        PLUMBER_FIELD_WORD => Some(Field::Word),
        PLUMBER_FIELD_BUS => Some(Field::Bus),
        PLUMBER_FIELD_PAGE => Some(Field::Page),
        _ => None,
    }
}

// replacement policy ids for plumber_sim_new
pub const PLUMBER_POLICY_LRU: c_int = 0;
pub const PLUMBER_POLICY_FIFO: c_int = 1;
pub const PLUMBER_POLICY_RANDOM: c_int = 2;

/// Version string of the library; static storage, do not free.
#[no_mangle]
pub extern "C" fn plumber_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the last error message of this thread into `buf`. Always
/// NUL-terminates when `len > 0`.
///
/// # Safety
/// `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn plumber_last_error(buf: *mut c_char, len: usize) -> c_int {
    if buf.is_null() || len == 0 {
        return PLUMBER_ERR_NULL;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        let n = bytes.len().min(len - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
        *buf.add(n) = 0;
        if bytes.len() + 1 > len {
            PLUMBER_ERR_BUFFER
        } else {
            PLUMBER_OK
        }
    })
}

/// Default geometry: 64 B lines, 128 sets, 4 ways, 16 B bus, 4 KiB pages,
/// 32 address bits.
#[no_mangle]
pub extern "C" fn plumber_geometry_default() -> *mut PlumberGeometry {
    Box::into_raw(Box::new(PlumberGeometry(CacheGeometry::default())))
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plumber_geometry_new(
    line_size: u64,
    num_sets: u64,
    associativity: u32,
    bus_size: u64,
    page_size: u64,
    addr_bits: u32,
    out: *mut *mut PlumberGeometry,
) -> c_int {
    if out.is_null() {
        return PLUMBER_ERR_NULL;
    }
    match CacheGeometry::new(
        line_size,
        num_sets,
        associativity as usize,
        bus_size,
        page_size,
        addr_bits,
    ) {
        Ok(g) => {
            *out = Box::into_raw(Box::new(PlumberGeometry(g)));
            PLUMBER_OK
        }
        Err(e) => {
            set_error(e.to_string());
            *out = ptr::null_mut();
            PLUMBER_ERR_INVALID
        }
    }
}

/// # Safety
/// `geom` must come from a `plumber_geometry_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn plumber_geometry_free(geom: *mut PlumberGeometry) {
    if !geom.is_null() {
        drop(Box::from_raw(geom));
    }
}

/// Extract an address field (right-aligned bits of the field's range).
///
/// # Safety
/// `geom` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn plumber_extract_field(
    geom: *const PlumberGeometry,
    addr: u64,
    field: c_int,
    out: *mut u64,
) -> c_int {
    if geom.is_null() || out.is_null() {
        return PLUMBER_ERR_NULL;
    }
    let Some(f) = field_of(field) else {
        set_error(format!("unknown field id {field}"));
        return PLUMBER_ERR_INVALID;
    };
    let g = &(*geom).0;
    *out = g.extract_field(g.addr(addr), f);
    PLUMBER_OK
}

/// Compose an address from tag, set and byte offset.
///
/// # Safety
/// `geom` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn plumber_compose_addr(
    geom: *const PlumberGeometry,
    tag: u64,
    set: u64,
    offset: u64,
    out: *mut u64,
) -> c_int {
    if geom.is_null() || out.is_null() {
        return PLUMBER_ERR_NULL;
    }
    match (*geom).0.compose_addr(tag, set, offset) {
        Ok(a) => {
            *out = a.value();
            PLUMBER_OK
        }
        Err(e) => {
            set_error(e.to_string());
            PLUMBER_ERR_RANGE
        }
    }
}

/// Create a simulator. `flags` bit 0 disables the previction rule, bit 1
/// disables the prefetcher.
///
/// # Safety
/// `geom` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn plumber_sim_new(
    geom: *const PlumberGeometry,
    policy: c_int,
    seed: u64,
    flags: u32,
    out: *mut *mut PlumberSim,
) -> c_int {
    if geom.is_null() || out.is_null() {
        return PLUMBER_ERR_NULL;
    }
    let policy = match policy {
        PLUMBER_POLICY_LRU => Replacement::Lru,
        PLUMBER_POLICY_FIFO => Replacement::Fifo,
        PLUMBER_POLICY_RANDOM => Replacement::Random,
        _ => {
            set_error(format!("unknown policy id {policy}"));
            return PLUMBER_ERR_INVALID;
        }
    };
    let cfg = SimConfig {
        geometry: (*geom).0.clone(),
        policy,
        seed,
        previction_enabled: flags & 1 == 0,
        prefetcher_enabled: flags & 2 == 0,
        ..SimConfig::default()
    };
    *out = Box::into_raw(Box::new(PlumberSim {
        state: SimState::new(cfg),
    }));
    PLUMBER_OK
}

/// # Safety
/// `sim` must come from `plumber_sim_new` or be null.
#[no_mangle]
pub unsafe extern "C" fn plumber_sim_free(sim: *mut PlumberSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Refresh the microarchitectural state.
///
/// # Safety
/// `sim` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn plumber_sim_reset(sim: *mut PlumberSim) -> c_int {
    if sim.is_null() {
        return PLUMBER_ERR_NULL;
    }
    (*sim).state.reset();
    PLUMBER_OK
}

/// Run one demand load; `hit_out` (optional) receives 1 on a cache hit.
///
/// # Safety
/// `sim` must be a valid handle; `hit_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn plumber_sim_load(
    sim: *mut PlumberSim,
    addr: u64,
    instr_idx: usize,
    hit_out: *mut c_int,
) -> c_int {
    if sim.is_null() {
        return PLUMBER_ERR_NULL;
    }
    let s = &mut *sim;
    let a = s.state.geometry().addr(addr);
    // per-load event lists are dropped; the counters track totals
    let mut previctions = Vec::new();
    let mut prefetched = Vec::new();
    let access = s
        .state
        .demand_load(a, instr_idx, &mut previctions, &mut prefetched);
    if !hit_out.is_null() {
        *hit_out = matches!(access, plumber_core::sim::Access::Hit) as c_int;
    }
    PLUMBER_OK
}

/// Run one precondition load: fills the cache, invisible to the
/// prefetcher and the previction rule.
///
/// # Safety
/// `sim` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn plumber_sim_preload(sim: *mut PlumberSim, addr: u64) -> c_int {
    if sim.is_null() {
        return PLUMBER_ERR_NULL;
    }
    let s = &mut *sim;
    let a = s.state.geometry().addr(addr);
    s.state.precondition_load(a);
    PLUMBER_OK
}

/// Non-mutating presence probe; `cached_out` receives 1 when the line is
/// resident.
///
/// # Safety
/// `sim` and `cached_out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn plumber_sim_probe(
    sim: *const PlumberSim,
    addr: u64,
    cached_out: *mut c_int,
) -> c_int {
    if sim.is_null() || cached_out.is_null() {
        return PLUMBER_ERR_NULL;
    }
    let s = &*sim;
    let a = s.state.geometry().addr(addr);
    *cached_out = s.state.probe(a) as c_int;
    PLUMBER_OK
}

/// # Safety
/// `sim` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn plumber_sim_counters(
    sim: *const PlumberSim,
    out: *mut PlumberCounters,
) -> c_int {
    if sim.is_null() || out.is_null() {
        return PLUMBER_ERR_NULL;
    }
    let c = (*sim).state.counters();
    *out = PlumberCounters {
        instructions: c.instructions,
        previctions: c.previctions,
        prefetch_issues: c.prefetch_issues,
        branches: c.branches,
        mispredictions: c.mispredictions,
    };
    PLUMBER_OK
}

/// Count the concrete testcases a specification expands to, without
/// running anything.
///
/// # Safety
/// `text` must be a NUL-terminated string; `geom` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn plumber_gts_testcase_count(
    text: *const c_char,
    geom: *const PlumberGeometry,
    seed: u64,
    cap: u64,
    out: *mut u64,
) -> c_int {
    if text.is_null() || geom.is_null() || out.is_null() {
        return PLUMBER_ERR_NULL;
    }
    let Ok(text) = CStr::from_ptr(text).to_str() else {
        return PLUMBER_ERR_UTF8;
    };
    let ast = match plumber_core::gts::parse_gts(text) {
        Ok(a) => a,
        Err(e) => {
            set_error(e.to_string());
            return PLUMBER_ERR_PARSE;
        }
    };
    let variants = match plumber_core::expand::expand(&ast, seed, cap) {
        Ok(v) => v,
        Err(e) => {
            set_error(e.to_string());
            return PLUMBER_ERR_RANGE;
        }
    };
    let mut store = plumber_core::instantiate::AddressStore::new(seed);
    let mut total = 0u64;
    for (seq, plan) in &variants {
        match plumber_core::instantiate::instantiate(seq, plan, &mut store, &(*geom).0, total) {
            Ok(stream) => total += stream.len(),
            Err(e) => {
                set_error(e.to_string());
                return PLUMBER_ERR_INVALID;
            }
        }
    }
    *out = total;
    PLUMBER_OK
}

/// Load a leakage template from a `.lt.json` file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plumber_lt_load_file(
    path: *const c_char,
    out: *mut *mut PlumberLt,
) -> c_int {
    if path.is_null() || out.is_null() {
        return PLUMBER_ERR_NULL;
    }
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        return PLUMBER_ERR_UTF8;
    };
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            set_error(e.to_string());
            return PLUMBER_ERR_IO;
        }
    };
    match deserialize_lt(&bytes) {
        Ok(lt) => {
            *out = Box::into_raw(Box::new(PlumberLt(lt)));
            PLUMBER_OK
        }
        Err(e) => {
            set_error(e.to_string());
            PLUMBER_ERR_PARSE
        }
    }
}

/// # Safety
/// `lt` must come from `plumber_lt_load_file` or be null.
#[no_mangle]
pub unsafe extern "C" fn plumber_lt_free(lt: *mut PlumberLt) {
    if !lt.is_null() {
        drop(Box::from_raw(lt));
    }
}

/// Classify an access trace (parallel arrays of instruction and data
/// addresses) against a template. Writes the behavior label, or
/// "undecidable", into `label_buf`.
///
/// # Safety
/// The array pointers must reference `n` elements; `label_buf` must point
/// to `buf_len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn plumber_lt_classify_trace(
    lt: *const PlumberLt,
    geom: *const PlumberGeometry,
    instr_addrs: *const u64,
    data_addrs: *const u64,
    n: usize,
    label_buf: *mut c_char,
    buf_len: usize,
) -> c_int {
    if lt.is_null()
        || geom.is_null()
        || instr_addrs.is_null()
        || data_addrs.is_null()
        || label_buf.is_null()
    {
        return PLUMBER_ERR_NULL;
    }
    if buf_len == 0 {
        return PLUMBER_ERR_BUFFER;
    }
    let trace: Vec<TraceRecord> = (0..n)
        .map(|i| TraceRecord {
            instr_addr: *instr_addrs.add(i),
            data_addr: *data_addrs.add(i),
        })
        .collect();
    match classify_trace(&trace, &(*lt).0, &(*geom).0) {
        Ok(label) => {
            let bytes = label.as_bytes();
            if bytes.len() + 1 > buf_len {
                return PLUMBER_ERR_BUFFER;
            }
            ptr::copy_nonoverlapping(bytes.as_ptr(), label_buf as *mut u8, bytes.len());
            *label_buf.add(bytes.len()) = 0;
            PLUMBER_OK
        }
        Err(e) => {
            set_error(e.to_string());
            PLUMBER_ERR_INVALID
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_extraction_through_the_abi() {
        let geom = plumber_geometry_default();
        let mut out = 0u64;
        unsafe {
            assert_eq!(
                plumber_extract_field(geom, 0x8010_0020, PLUMBER_FIELD_BUS, &mut out),
                PLUMBER_OK
            );
            assert_eq!(out, 2);
            assert_eq!(
                plumber_extract_field(geom, 0x8010_0000, PLUMBER_FIELD_SET, &mut out),
                PLUMBER_OK
            );
            assert_eq!(out, 0);
            plumber_geometry_free(geom);
        }
    }

    #[test]
    fn null_arguments_are_rejected() {
        let mut out = 0u64;
        unsafe {
            assert_eq!(
                plumber_extract_field(ptr::null(), 0, PLUMBER_FIELD_SET, &mut out),
                PLUMBER_ERR_NULL
            );
        }
    }

    #[test]
    fn bad_geometry_reports_error_message() {
        let mut geom = ptr::null_mut();
        unsafe {
            assert_eq!(
                plumber_geometry_new(63, 128, 4, 16, 4096, 32, &mut geom),
                PLUMBER_ERR_INVALID
            );
            let mut buf = [0 as c_char; 128];
            assert_eq!(plumber_last_error(buf.as_mut_ptr(), buf.len()), PLUMBER_OK);
            let msg = CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
            assert!(msg.contains("power of two"), "{msg}");
        }
    }

    #[test]
    fn sim_loads_prefetch_and_probe() {
        unsafe {
            let geom = plumber_geometry_default();
            let mut sim = ptr::null_mut();
            assert_eq!(
                plumber_sim_new(geom, PLUMBER_POLICY_LRU, 0, 0, &mut sim),
                PLUMBER_OK
            );
            plumber_sim_reset(sim);
            // stride-1 stream of three loads
            let mut addr = 0u64;
            let mut hit = 0;
            for s in 8..11u64 {
                assert_eq!(plumber_compose_addr(geom, 2, s, 0, &mut addr), PLUMBER_OK);
                assert_eq!(
                    plumber_sim_load(sim, addr, s as usize, &mut hit),
                    PLUMBER_OK
                );
                assert_eq!(hit, 0);
            }
            let mut counters = PlumberCounters {
                instructions: 0,
                previctions: 0,
                prefetch_issues: 0,
                branches: 0,
                mispredictions: 0,
            };
            assert_eq!(plumber_sim_counters(sim, &mut counters), PLUMBER_OK);
            assert_eq!(counters.prefetch_issues, 3);
            // the next line ahead is now resident
            plumber_compose_addr(geom, 2, 11, 0, &mut addr);
            let mut cached = 0;
            assert_eq!(plumber_sim_probe(sim, addr, &mut cached), PLUMBER_OK);
            assert_eq!(cached, 1);
            plumber_sim_free(sim);
            plumber_geometry_free(geom);
        }
    }

    #[test]
    fn testcase_count_via_abi() {
        unsafe {
            let geom = plumber_geometry_default();
            let text = std::ffi::CString::new("offmut{ M[t=t1,s=s1] M[t=t1,s=s1] }").unwrap();
            let mut out = 0u64;
            assert_eq!(
                plumber_gts_testcase_count(text.as_ptr(), geom, 0, 1 << 22, &mut out),
                PLUMBER_OK
            );
            assert_eq!(out, 256);
            let bad = std::ffi::CString::new("M[t=").unwrap();
            assert_eq!(
                plumber_gts_testcase_count(bad.as_ptr(), geom, 0, 1 << 22, &mut out),
                PLUMBER_ERR_PARSE
            );
            plumber_geometry_free(geom);
        }
    }
}
