use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use chdroplet_ffi::*;

fn last_error() -> String {
    let p = chd_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn problem_from_k(d: usize, length: f64, k: f64) -> *mut ChdProblem {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { chd_problem_from_k(d, length, k, &mut p) }, ChdStatus::Ok);
    assert!(!p.is_null());
    p
}

#[test]
fn constants_match_the_library() {
    let mut c = ChdCriticalConstants::default();
    assert_eq!(unsafe { chd_critical_constants(2, &mut c) }, ChdStatus::Ok);
    assert!((c.k_star - 1.676539193219744).abs() < 1e-12);
    assert!((c.eta_star - 2.0 / 3.0).abs() < 1e-15);
    assert!((c.c_spinodal - 27f64.sqrt() / 8.0).abs() < 1e-15);
    assert_eq!(unsafe { chd_critical_constants(1, &mut c) }, ChdStatus::Domain);
    assert!(last_error().contains("dimension"));
    assert_eq!(unsafe { chd_critical_constants(2, ptr::null_mut()) }, ChdStatus::NullPointer);
}

#[test]
fn phi_regimes() {
    let mut c = ChdCriticalConstants::default();
    unsafe { chd_critical_constants(2, &mut c) };
    let mut r = ChdPhiResult { eta_c: -1.0, phi_min: 0.0, regime: ChdRegime::Uniform };
    assert_eq!(unsafe { chd_minimize_phi(0.5 * c.c_star, 2, &mut r) }, ChdStatus::Ok);
    assert_eq!((r.regime, r.eta_c), (ChdRegime::Uniform, 0.0));
    assert_eq!(unsafe { chd_minimize_phi(c.c_star, 2, &mut r) }, ChdStatus::Ok);
    assert_eq!(r.regime, ChdRegime::Critical);
    assert_eq!(unsafe { chd_minimize_phi(2.0 * c.c_star, 2, &mut r) }, ChdStatus::Ok);
    assert!(r.regime == ChdRegime::Droplet && r.eta_c > c.eta_star);
    assert_eq!(unsafe { chd_minimize_phi(f64::NAN, 2, &mut r) }, ChdStatus::Domain);
}

#[test]
fn problem_and_field_lifecycle() {
    let p = problem_from_k(2, 40.0, 3.0);
    let n = unsafe { chd_problem_mean(p) };
    assert!((n - (-1.0 + 3.0 * 40f64.powf(-2.0 / 3.0))).abs() < 1e-15);

    let mut f = ptr::null_mut();
    assert_eq!(unsafe { chd_field_uniform(p, 64, &mut f) }, ChdStatus::Ok);
    let len = unsafe { chd_field_len(f) };
    assert_eq!(len, 64 * 64);
    let mut values = vec![0.0; len];
    assert_eq!(unsafe { chd_field_copy_values(f, values.as_mut_ptr(), len) }, ChdStatus::Ok);
    assert!(values.iter().all(|&v| v == n));
    assert_eq!(unsafe { chd_field_copy_values(f, values.as_mut_ptr(), len - 1) }, ChdStatus::Domain);

    let mut e = 0.0;
    assert_eq!(unsafe { chd_field_energy(f, &mut e) }, ChdStatus::Ok);
    let expected = 40.0 * 40.0 * (n * n - 1.0).powi(2) / 4.0;
    assert!((e - expected).abs() < 1e-9 * expected);

    unsafe {
        chd_field_free(f);
        chd_problem_free(p);
        chd_field_free(ptr::null_mut());
        chd_problem_free(ptr::null_mut());
        chd_report_free(ptr::null_mut());
    }
    assert!(unsafe { chd_problem_mean(ptr::null()) }.is_nan());
    assert_eq!(unsafe { chd_field_len(ptr::null()) }, 0);
}

#[test]
fn invalid_problem_reports_domain_error() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { chd_problem_from_n(2, -1.0, 0.0, &mut p) }, ChdStatus::Domain);
    assert!(p.is_null());
    assert!(!last_error().is_empty());
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { chd_field_uniform(ptr::null(), 64, &mut f) }, ChdStatus::NullPointer);
    assert!(last_error().contains("problem"));
}

#[test]
fn minimize_and_diagnose_supercritical() {
    let mut c = ChdCriticalConstants::default();
    unsafe { chd_critical_constants(2, &mut c) };
    let p = problem_from_k(2, 40.0, 2.0 * c.k_star);
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { chd_minimize(p, 128, 1e-6, 20_000, &mut report) }, ChdStatus::Ok);
    assert_eq!(unsafe { chd_report_converged(report) }, 1);
    assert!(unsafe { chd_report_residual(report) } <= 1e-6);

    let mut f = ptr::null_mut();
    assert_eq!(unsafe { chd_report_field(report, &mut f) }, ChdStatus::Ok);
    let mut e = 0.0;
    unsafe { chd_field_energy(f, &mut e) };
    assert!((e - unsafe { chd_report_energy(report) }).abs() < 1e-9 * e);

    let mut phi = ChdPhiResult { eta_c: 0.0, phi_min: 0.0, regime: ChdRegime::Uniform };
    let mut x = ChdExpansion::default();
    assert_eq!(unsafe { chd_expansion(p, &mut x) }, ChdStatus::Ok);
    let mut diag = ChdDiagnostics::default();
    let n = unsafe { chd_problem_mean(p) };
    unsafe { chd_minimize_phi(2.0 * c.c_star, 2, &mut phi) };
    assert_eq!(unsafe { chd_diagnose(f, n, x.r1 * x.r1, -1.0, &mut diag) }, ChdStatus::Ok);
    assert_eq!(diag.droplet, 1);
    assert!(diag.eta_measured > 0.5 && diag.l4_distance.is_finite());
    unsafe {
        chd_field_free(f);
        chd_report_free(report);
        chd_problem_free(p);
    }
}

#[test]
fn not_converged_still_returns_report() {
    let p = problem_from_k(2, 40.0, 3.0);
    let mut report = ptr::null_mut();
    let seeds = CString::new("eta-c,equimolar").unwrap();
    assert_eq!(unsafe { chd_minimize_seeded(p, 128, 1e-12, 3, seeds.as_ptr(), &mut report) }, ChdStatus::NotConverged);
    assert!(!report.is_null());
    assert_eq!(unsafe { chd_report_converged(report) }, 0);
    assert!(unsafe { chd_report_energy(report) }.is_finite());
    unsafe {
        chd_report_free(report);
        chd_problem_free(p);
    }
}

#[test]
fn bad_seed_label_is_a_domain_error() {
    let p = problem_from_k(2, 40.0, 3.0);
    let mut report = ptr::null_mut();
    let seeds = CString::new("uniform,bogus").unwrap();
    assert_eq!(unsafe { chd_minimize_seeded(p, 128, 1e-6, 10, seeds.as_ptr(), &mut report) }, ChdStatus::Domain);
    assert!(report.is_null());
    unsafe { chd_problem_free(p) };
}

#[test]
fn expansion_rejects_subcritical() {
    let p = problem_from_k(2, 200.0, 0.5);
    let mut x = ChdExpansion::default();
    assert_eq!(unsafe { chd_expansion(p, &mut x) }, ChdStatus::Precondition);
    assert!(last_error().contains("droplet"));
    unsafe { chd_problem_free(p) };
}

#[test]
fn snapshot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.snap");
    let grid = chdroplet::field::Grid::new(2, 16, 8.0).unwrap();
    let field = chdroplet::field::uniform_field(grid, -0.5).unwrap();
    chdroplet::field::write_snapshot(&path, &field, -0.5, "t").unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { chd_field_read_snapshot(c_path.as_ptr(), &mut f) }, ChdStatus::Ok);
    assert_eq!(unsafe { chd_field_len(f) }, 256);
    unsafe { chd_field_free(f) };

    let missing = CString::new(dir.path().join("none").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { chd_field_read_snapshot(missing.as_ptr(), &mut f) }, ChdStatus::Io);
    assert_eq!(unsafe { chd_field_read_snapshot(ptr::null(), &mut f) }, ChdStatus::NullPointer);
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(chd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/chdroplet.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "chd_last_error",
        "chd_minimize",
        "chd_diagnose",
        "chd_expansion",
        "CHD_STATUS_NOT_CONVERGED",
        "typedef struct ChdField ChdField",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("probe.c");
    std::fs::write(
        &source,
        "#include \"chdroplet.h\"\nint main(void) { ChdCriticalConstants c; return chd_critical_constants(2, &c) == CHD_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    match Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&source)
        .output()
    {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler found; syntax check skipped"),
    }
}
