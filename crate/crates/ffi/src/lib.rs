//! C ABI over `fhnreg`.
//!
//! Conventions:
//! - every fallible call returns an [`FhnStatus`]; on failure the message is
//!   available from [`fhnreg_last_error`] on the same thread;
//! - objects are opaque handles released with their `_free` function;
//! - strings handed out are owned by the caller and released with
//!   [`fhnreg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fhnreg::cli::RunFile;
use fhnreg::hopf::coproduct;
use fhnreg::kernels::{constants, Basis, QSpec};
use fhnreg::noise::{sample_white_noise, Grid, NoiseField};
use fhnreg::renorm::renormalized_nonlinearity;
use fhnreg::solver::{run, RunResult, Termination};
use fhnreg::symbols::{homogeneity, Scaling, Symbol};
use fhnreg::{parse_nonlinearity, parse_symbol, print_symbol};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FhnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Numerical = 4,
    BufferSize = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FhnBasis {
    Heat = 0,
    Truncated = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FhnTermination {
    Completed = 0,
    CutoffHit = 1,
    Nonfinite = 2,
}

/// |τ| = r_num/r_den + (kappa_num/kappa_den)·κ
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FhnHomogeneity {
    pub r_num: i64,
    pub r_den: i64,
    pub kappa_num: i64,
    pub kappa_den: i64,
}

/// C₁, C₂ and the symmetric I_ij (row-major 3×3) at one ε.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FhnConstants {
    pub eps: f64,
    pub c1: f64,
    pub c2: f64,
    pub i: [f64; 9],
    pub err_c1: f64,
    pub err_c2: f64,
    pub err_i: [f64; 9],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FhnNormRow {
    pub t: f64,
    pub sup_u: f64,
    pub l2_u: f64,
    pub sup_v: f64,
    pub l2_v: f64,
    pub sup_phi: f64,
}

/// A canonical symbol together with its dimension.
pub struct FhnSymbol {
    symbol: Symbol,
    scaling: Scaling,
}

pub struct FhnNoise {
    field: NoiseField,
}

pub struct FhnRun {
    result: RunResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn fail(status: FhnStatus, msg: impl Into<String>) -> FhnStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning panics into a status.
fn guard(f: impl FnOnce() -> FhnStatus) -> FhnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(FhnStatus::Panic, msg)
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, FhnStatus> {
    if p.is_null() {
        return Err(fail(FhnStatus::NullPointer, "string argument is NULL"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(FhnStatus::InvalidArgument, "string is not UTF-8"))
}

unsafe fn give_string(s: String, out: *mut *mut c_char) -> FhnStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            FhnStatus::Ok
        }
        Err(_) => fail(FhnStatus::InvalidArgument, "output contains NUL"),
    }
}

macro_rules! non_null {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            return fail(FhnStatus::NullPointer, concat!(stringify!($p), " is NULL"));
        })+
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fhnreg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failure on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fhnreg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn fhnreg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// symbols

/// Parses `text` in the symbol grammar for dimension `dim`. A symbol that
/// vanishes (e.g. `I(X1)`) yields `*out = NULL` with status OK.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fhnreg_symbol_parse(text: *const c_char, dim: u32, out: *mut *mut FhnSymbol) -> FhnStatus {
    non_null!(out);
    guard(|| {
        *out = ptr::null_mut();
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let scaling = match Scaling::new(dim as usize) {
            Ok(s) => s,
            Err(e) => return fail(FhnStatus::InvalidArgument, e.to_string()),
        };
        match parse_symbol(text, &scaling) {
            Ok(Some(symbol)) => {
                *out = Box::into_raw(Box::new(FhnSymbol { symbol, scaling }));
                FhnStatus::Ok
            }
            Ok(None) => FhnStatus::Ok,
            Err(e) => fail(FhnStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `sym` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fhnreg_symbol_homogeneity(sym: *const FhnSymbol, out: *mut FhnHomogeneity) -> FhnStatus {
    non_null!(sym, out);
    let s = &*sym;
    let h = homogeneity(&s.symbol, &s.scaling);
    *out = FhnHomogeneity { r_num: *h.r.numer(), r_den: *h.r.denom(), kappa_num: *h.s.numer(), kappa_den: *h.s.denom() };
    FhnStatus::Ok
}

/// Canonical text form, re-parseable by [`fhnreg_symbol_parse`].
///
/// # Safety
/// `sym` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fhnreg_symbol_print(sym: *const FhnSymbol, out: *mut *mut c_char) -> FhnStatus {
    non_null!(sym, out);
    give_string(print_symbol(&(*sym).symbol), out)
}

/// Δτ in the `τ (x) σ + ...` notation.
///
/// # Safety
/// `sym` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fhnreg_symbol_coproduct(sym: *const FhnSymbol, out: *mut *mut c_char) -> FhnStatus {
    non_null!(sym, out);
    guard(|| {
        let s = &*sym;
        give_string(coproduct(&s.symbol, &s.scaling).to_string(), out)
    })
}

/// # Safety
/// `sym` must come from [`fhnreg_symbol_parse`]; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn fhnreg_symbol_free(sym: *mut FhnSymbol) {
    if !sym.is_null() {
        drop(Box::from_raw(sym));
    }
}

// renormalised equation and constants

/// Counterterms of the renormalised nonlinearity for `f` (text in `u`, `v`
/// or `v1..vn`), one `name = value` per line. `obstructed` reports whether
/// the result fails to be of local form.
///
/// # Safety
/// `f` must be NUL-terminated; `out` and `obstructed` writable.
#[no_mangle]
pub unsafe extern "C" fn fhnreg_renormalized_equation(
    f: *const c_char,
    n: u32,
    dim: u32,
    out: *mut *mut c_char,
    obstructed: *mut bool,
) -> FhnStatus {
    non_null!(out, obstructed);
    guard(|| {
        let text = match read_str(f) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let poly = match parse_nonlinearity(text, n as usize) {
            Ok(p) => p,
            Err(e) => return fail(FhnStatus::Parse, e.to_string()),
        };
        match renormalized_nonlinearity(&poly, dim as usize) {
            Ok(r) => {
                *obstructed = r.is_obstructed();
                give_string(r.to_string(), out)
            }
            Err(e) => fail(FhnStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Constants at scale `eps` for the scalar Q(t) = a1·e^{t·a2} on [0, horizon].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fhnreg_constants(
    eps: f64,
    dim: u32,
    basis: FhnBasis,
    a1: f64,
    a2: f64,
    horizon: f64,
    out: *mut FhnConstants,
) -> FhnStatus {
    non_null!(out);
    guard(|| {
        let q = match QSpec::new(vec![a1], vec![vec![a2]], horizon, 0) {
            Ok(q) => q,
            Err(e) => return fail(FhnStatus::InvalidArgument, e.to_string()),
        };
        let b = match basis {
            FhnBasis::Heat => Basis::G,
            FhnBasis::Truncated => Basis::K,
        };
        match constants(eps, dim as usize, Some(&q), b, None) {
            Ok(r) => {
                let flat = |m: [[f64; 3]; 3]| {
                    let mut a = [0.0; 9];
                    for (k, x) in m.iter().flatten().enumerate() {
                        a[k] = *x;
                    }
                    a
                };
                *out = FhnConstants {
                    eps: r.eps,
                    c1: r.c1,
                    c2: r.c2,
                    i: flat(r.i),
                    err_c1: r.err_c1,
                    err_c2: r.err_c2,
                    err_i: flat(r.err_i),
                };
                FhnStatus::Ok
            }
            Err(e) => fail(FhnStatus::InvalidArgument, e.to_string()),
        }
    })
}

// noise

/// White noise on `nt` slices of a `n^d` torus lattice with step `dt`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fhnreg_noise_new(
    d: u32,
    n: u32,
    nt: u32,
    dt: f64,
    seed: u64,
    out: *mut *mut FhnNoise,
) -> FhnStatus {
    non_null!(out);
    guard(|| {
        *out = ptr::null_mut();
        match Grid::new(d as usize, n as usize, nt as usize, dt, 0) {
            Ok(g) => {
                *out = Box::into_raw(Box::new(FhnNoise { field: sample_white_noise(&g, seed) }));
                FhnStatus::Ok
            }
            Err(e) => fail(FhnStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Sites per slice.
///
/// # Safety
/// `noise` must be a live handle or NULL (gives 0).
#[no_mangle]
pub unsafe extern "C" fn fhnreg_noise_sites(noise: *const FhnNoise) -> usize {
    if noise.is_null() {
        0
    } else {
        (*noise).field.grid.cells()
    }
}

/// Copies slice `s` into `buf`, which must hold exactly
/// [`fhnreg_noise_sites`] values.
///
/// # Safety
/// `noise` must be live and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn fhnreg_noise_slice(noise: *const FhnNoise, s: usize, buf: *mut f64, len: usize) -> FhnStatus {
    non_null!(noise, buf);
    guard(|| {
        let f = &(*noise).field;
        if s >= f.grid.slices() {
            return fail(FhnStatus::InvalidArgument, format!("slice {s} out of range"));
        }
        if len != f.grid.cells() {
            return fail(FhnStatus::BufferSize, format!("buffer holds {len}, slice has {}", f.grid.cells()));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&f.slice(s));
        FhnStatus::Ok
    })
}

/// SHA-256 of the field values as lowercase hex.
///
/// # Safety
/// `noise` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fhnreg_noise_checksum(noise: *const FhnNoise, out: *mut *mut c_char) -> FhnStatus {
    non_null!(noise, out);
    guard(|| give_string((*noise).field.checksum(), out))
}

/// # Safety
/// `noise` must come from [`fhnreg_noise_new`]; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn fhnreg_noise_free(noise: *mut FhnNoise) {
    if !noise.is_null() {
        drop(Box::from_raw(noise));
    }
}

// runs

/// Runs the solver on a config in the CLI's TOML format.
///
/// # Safety
/// `config` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fhnreg_simulate(config: *const c_char, out: *mut *mut FhnRun) -> FhnStatus {
    non_null!(out);
    guard(|| {
        *out = ptr::null_mut();
        let text = match read_str(config) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let file = match RunFile::parse(text).and_then(RunFile::resolve) {
            Ok(f) => f,
            Err(e) => return fail(FhnStatus::InvalidArgument, e.to_string()),
        };
        let spec = match file.spec() {
            Ok(s) => s,
            Err(e) => return fail(FhnStatus::InvalidArgument, e.to_string()),
        };
        match run(&file.run_config(), &spec) {
            Ok(result) => {
                *out = Box::into_raw(Box::new(FhnRun { result }));
                FhnStatus::Ok
            }
            Err(e) => fail(FhnStatus::Numerical, e.to_string()),
        }
    })
}

/// Rows in the norm series.
///
/// # Safety
/// `r` must be a live handle or NULL (gives 0).
#[no_mangle]
pub unsafe extern "C" fn fhnreg_run_rows(r: *const FhnRun) -> usize {
    if r.is_null() {
        0
    } else {
        (*r).result.series.len()
    }
}

/// # Safety
/// `r` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fhnreg_run_row(r: *const FhnRun, i: usize, out: *mut FhnNormRow) -> FhnStatus {
    non_null!(r, out);
    let res = &(*r).result;
    match res.series.get(i) {
        Some(x) => {
            *out = FhnNormRow { t: x.t, sup_u: x.sup_u, l2_u: x.l2_u, sup_v: x.sup_v, l2_v: x.l2_v, sup_phi: x.sup_phi };
            FhnStatus::Ok
        }
        None => fail(FhnStatus::InvalidArgument, format!("row {i} out of range")),
    }
}

/// How the run ended; `t` receives the stopping time (t_end if completed).
///
/// # Safety
/// `r` must be live and `kind` writable; `t` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn fhnreg_run_termination(r: *const FhnRun, kind: *mut FhnTermination, t: *mut f64) -> FhnStatus {
    non_null!(r, kind);
    let res = &(*r).result;
    let (k, at) = match res.termination {
        Termination::Completed => (FhnTermination::Completed, res.final_state.t),
        Termination::CutoffHit(s) => (FhnTermination::CutoffHit, s),
        Termination::Nonfinite(s) => (FhnTermination::Nonfinite, s),
    };
    *kind = k;
    if !t.is_null() {
        *t = at;
    }
    FhnStatus::Ok
}

/// Lattice sites of the final u field.
///
/// # Safety
/// `r` must be a live handle or NULL (gives 0).
#[no_mangle]
pub unsafe extern "C" fn fhnreg_run_sites(r: *const FhnRun) -> usize {
    if r.is_null() {
        0
    } else {
        (*r).result.final_state.u.len()
    }
}

/// Copies the final u into `buf` (exactly [`fhnreg_run_sites`] values).
///
/// # Safety
/// `r` must be live and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn fhnreg_run_final_u(r: *const FhnRun, buf: *mut f64, len: usize) -> FhnStatus {
    non_null!(r, buf);
    let res = &(*r).result;
    let u = &res.final_state.u;
    if len != u.len() {
        return fail(FhnStatus::BufferSize, format!("buffer holds {len}, field has {}", u.len()));
    }
    std::slice::from_raw_parts_mut(buf, len).copy_from_slice(u);
    FhnStatus::Ok
}

/// # Safety
/// `r` must come from [`fhnreg_simulate`]; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn fhnreg_run_free(r: *mut FhnRun) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
