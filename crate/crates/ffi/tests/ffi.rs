use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use fhnreg_ffi::*;

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { fhnreg_string_free(s) };
    out
}

fn last_error() -> String {
    let p = fhnreg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn parse(text: &str, dim: u32) -> (FhnStatus, *mut FhnSymbol) {
    let c = CString::new(text).unwrap();
    let mut sym = ptr::null_mut();
    let st = unsafe { fhnreg_symbol_parse(c.as_ptr(), dim, &mut sym) };
    (st, sym)
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(fhnreg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn symbol_round_trip() {
    let (st, sym) = parse("I(I(Xi)^3)*I(Xi)^2", 3);
    assert_eq!(st, FhnStatus::Ok);
    let mut h = FhnHomogeneity::default();
    assert_eq!(unsafe { fhnreg_symbol_homogeneity(sym, &mut h) }, FhnStatus::Ok);
    assert_eq!(h, FhnHomogeneity { r_num: -1, r_den: 2, kappa_num: -5, kappa_den: 1 });

    let mut s = ptr::null_mut();
    assert_eq!(unsafe { fhnreg_symbol_print(sym, &mut s) }, FhnStatus::Ok);
    let printed = take(s);
    let (st, again) = parse(&printed, 3);
    assert_eq!(st, FhnStatus::Ok);
    let mut s2 = ptr::null_mut();
    unsafe { fhnreg_symbol_print(again, &mut s2) };
    assert_eq!(take(s2), printed);

    let mut d = ptr::null_mut();
    assert_eq!(unsafe { fhnreg_symbol_coproduct(sym, &mut d) }, FhnStatus::Ok);
    assert_eq!(take(d), "RSWW (x) 1 + RSV (x) J(RSW)");
    unsafe {
        fhnreg_symbol_free(sym);
        fhnreg_symbol_free(again);
        fhnreg_symbol_free(ptr::null_mut());
    }
}

#[test]
fn vanishing_symbol_is_null() {
    let (st, sym) = parse("I(X1)", 3);
    assert_eq!(st, FhnStatus::Ok);
    assert!(sym.is_null());
}

#[test]
fn parse_errors_carry_a_message() {
    let (st, sym) = parse("I(Xi", 3);
    assert_eq!(st, FhnStatus::Parse);
    assert!(sym.is_null());
    assert!(!last_error().is_empty());
    let (st, _) = parse("Xi", 7);
    assert_eq!(st, FhnStatus::InvalidArgument);
}

#[test]
fn null_arguments_are_reported() {
    let mut sym = ptr::null_mut();
    assert_eq!(unsafe { fhnreg_symbol_parse(ptr::null(), 3, &mut sym) }, FhnStatus::NullPointer);
    let c = CString::new("Xi").unwrap();
    assert_eq!(unsafe { fhnreg_symbol_parse(c.as_ptr(), 3, ptr::null_mut()) }, FhnStatus::NullPointer);
    assert!(last_error().contains("NULL"));
    let mut h = FhnHomogeneity::default();
    assert_eq!(unsafe { fhnreg_symbol_homogeneity(ptr::null(), &mut h) }, FhnStatus::NullPointer);
    assert_eq!(unsafe { fhnreg_run_rows(ptr::null()) }, 0);
    assert_eq!(unsafe { fhnreg_noise_sites(ptr::null()) }, 0);
}

#[test]
fn renormalised_equation() {
    let f = CString::new("u - u^3 + v").unwrap();
    let mut out = ptr::null_mut();
    let mut obstructed = true;
    let st = unsafe { fhnreg_renormalized_equation(f.as_ptr(), 1, 3, &mut out, &mut obstructed) };
    assert_eq!(st, FhnStatus::Ok);
    assert!(!obstructed);
    let text = take(out);
    assert!(text.contains("c1 = -3*C1 + 9*C2"), "{text}");

    let g = CString::new("u^2*v").unwrap();
    let st = unsafe { fhnreg_renormalized_equation(g.as_ptr(), 1, 3, &mut out, &mut obstructed) };
    assert_eq!(st, FhnStatus::Ok);
    assert!(obstructed);
    take(out);

    let bad = CString::new("u^4").unwrap();
    let st = unsafe { fhnreg_renormalized_equation(bad.as_ptr(), 1, 3, &mut out, &mut obstructed) };
    assert_ne!(st, FhnStatus::Ok);
}

#[test]
fn two_dimensional_constant_grows_logarithmically() {
    let mut a = FhnConstants::default();
    let mut b = FhnConstants::default();
    unsafe {
        assert_eq!(fhnreg_constants(0.125, 2, FhnBasis::Heat, -1.0, -1.0, 1.0, &mut a), FhnStatus::Ok);
        assert_eq!(fhnreg_constants(0.0625, 2, FhnBasis::Heat, -1.0, -1.0, 1.0, &mut b), FhnStatus::Ok);
    }
    let slope = (b.c1 - a.c1) / 2f64.ln();
    assert!((slope - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 5e-3, "{slope}");
    assert_eq!(a.i[1], a.i[3]);
    let st = unsafe { fhnreg_constants(-1.0, 2, FhnBasis::Heat, -1.0, -1.0, 1.0, &mut a) };
    assert_eq!(st, FhnStatus::InvalidArgument);
}

fn noise(seed: u64) -> *mut FhnNoise {
    let mut n = ptr::null_mut();
    assert_eq!(unsafe { fhnreg_noise_new(2, 8, 3, 0.01, seed, &mut n) }, FhnStatus::Ok);
    n
}

fn checksum(n: *const FhnNoise) -> String {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { fhnreg_noise_checksum(n, &mut s) }, FhnStatus::Ok);
    take(s)
}

#[test]
fn noise_is_deterministic() {
    let (a, b, c) = (noise(5), noise(5), noise(6));
    assert_eq!(checksum(a), checksum(b));
    assert_ne!(checksum(a), checksum(c));
    let sites = unsafe { fhnreg_noise_sites(a) };
    assert_eq!(sites, 64);
    let mut buf = vec![0.0; sites];
    assert_eq!(unsafe { fhnreg_noise_slice(a, 2, buf.as_mut_ptr(), sites) }, FhnStatus::Ok);
    assert!(buf.iter().all(|x| x.is_finite()) && buf.iter().any(|x| *x != 0.0));
    assert_eq!(unsafe { fhnreg_noise_slice(a, 0, buf.as_mut_ptr(), sites - 1) }, FhnStatus::BufferSize);
    assert_eq!(unsafe { fhnreg_noise_slice(a, 3, buf.as_mut_ptr(), sites) }, FhnStatus::InvalidArgument);
    unsafe {
        fhnreg_noise_free(a);
        fhnreg_noise_free(b);
        fhnreg_noise_free(c);
    }
}

const SMALL: &str = "[grid]\nd = 2\nn = 16\ndt = 1e-3\nt_end = 0.02\n\n[noise]\nseed = 3\neps = 0.125\n\n[output]\ncadence = 10\n";

#[test]
fn simulate_through_the_handle() {
    let cfg = CString::new(SMALL).unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { fhnreg_simulate(cfg.as_ptr(), &mut r) }, FhnStatus::Ok);
    let rows = unsafe { fhnreg_run_rows(r) };
    assert_eq!(rows, 3);
    let mut row = FhnNormRow::default();
    assert_eq!(unsafe { fhnreg_run_row(r, rows - 1, &mut row) }, FhnStatus::Ok);
    assert!((row.t - 0.02).abs() < 1e-12 && row.l2_u.is_finite());
    assert_eq!(unsafe { fhnreg_run_row(r, rows, &mut row) }, FhnStatus::InvalidArgument);
    let mut kind = FhnTermination::Nonfinite;
    let mut t = 0.0;
    assert_eq!(unsafe { fhnreg_run_termination(r, &mut kind, &mut t) }, FhnStatus::Ok);
    assert_eq!(kind, FhnTermination::Completed);
    let sites = unsafe { fhnreg_run_sites(r) };
    assert_eq!(sites, 256);
    let mut u = vec![0.0; sites];
    assert_eq!(unsafe { fhnreg_run_final_u(r, u.as_mut_ptr(), sites) }, FhnStatus::Ok);
    let sup = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!((sup - row.sup_u).abs() < 1e-12);
    unsafe { fhnreg_run_free(r) };

    let bad = CString::new("[grid]\nd = 2\n[noise]\neps = 0.01\n").unwrap();
    assert_eq!(unsafe { fhnreg_simulate(bad.as_ptr(), &mut r) }, FhnStatus::InvalidArgument);
    assert!(r.is_null());
}

#[test]
fn header_compiles_as_c() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include").join("fhnreg.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["fhnreg_symbol_parse", "fhnreg_simulate", "FHN_STATUS_BUFFER_SIZE", "FhnConstants"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(cc) = which("cc") else { return };
    let dir = std::env::temp_dir().join(format!("fhnreg-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("use.c");
    std::fs::write(
        &src,
        "#include \"fhnreg.h\"\nint main(void) { FhnSymbol *s = 0; FhnStatus st = fhnreg_symbol_parse(\"Xi\", 3, &s);\n\
         fhnreg_symbol_free(s); return st == FHN_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let ok = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
        .unwrap();
    assert!(ok.success());
}

fn which(name: &str) -> Result<PathBuf, ()> {
    std::env::var_os("PATH")
        .and_then(|p| std::env::split_paths(&p).map(|d| d.join(name)).find(|c| c.is_file()))
        .ok_or(())
}
