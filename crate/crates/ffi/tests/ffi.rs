use std::ffi::CStr;
use std::path::Path;
use std::ptr;

use relsec_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(relsec_last_error_message()) }.to_string_lossy().into_owned()
}

fn problem(p1: f64, p2: f64, subs: &[RelsecSubchannel]) -> *mut RelsecProblem {
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(relsec_problem_new(p1, p2, false, &mut p), RelsecStatus::Ok);
        for s in subs {
            assert_eq!(relsec_problem_add_subchannel(p, s), RelsecStatus::Ok);
        }
    }
    p
}

const REGRESSION: RelsecSubchannel = RelsecSubchannel { sigma_sq: 1.0, sigma1_sq: 1.0, sigma2_sq: 4.0, rho1: 1.0, rho2: 1.0 };

#[test]
fn cap_matches_closed_form() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(relsec_cap(3.0, false, &mut out), RelsecStatus::Ok);
        assert!((out - 1.0).abs() < 1e-15);
        assert_eq!(relsec_cap(3.0, true, &mut out), RelsecStatus::Ok);
        assert!((out - 2.0).abs() < 1e-15);
        assert_eq!(relsec_cap(-2.0, false, &mut out), RelsecStatus::Domain);
        assert!(!last_error().is_empty());
        assert_eq!(relsec_cap(1.0, false, ptr::null_mut()), RelsecStatus::NullPointer);
    }
}

#[test]
fn problem_lifecycle_and_validation() {
    let p = problem(3.0, 1.0, &[REGRESSION, REGRESSION]);
    unsafe {
        assert_eq!(relsec_problem_len(p), 2);
        let bad = RelsecSubchannel { sigma_sq: -1.0, ..REGRESSION };
        assert_eq!(relsec_problem_add_subchannel(p, &bad), RelsecStatus::Domain);
        assert_eq!(relsec_problem_len(p), 2);
        relsec_problem_free(p);
        relsec_problem_free(ptr::null_mut());
        assert_eq!(relsec_problem_len(ptr::null()), 0);

        let mut q = ptr::null_mut();
        assert_eq!(relsec_problem_new(-1.0, 1.0, false, &mut q), RelsecStatus::Domain);
        assert!(q.is_null());
    }
}

#[test]
fn fixed_allocation_bounds() {
    let p = problem(3.0, 1.0, &[REGRESSION]);
    let (p1, p2, alpha, psi) = ([3.0], [1.0], [1.0], [0.0]);
    let (mut lower, mut upper) = (0.0, 0.0);
    unsafe {
        let nf = [RELSEC_MODE_NF];
        assert_eq!(relsec_lower_bound(p, nf.as_ptr(), p1.as_ptr(), p2.as_ptr(), alpha.as_ptr(), &mut lower), RelsecStatus::Ok);
        assert_eq!(relsec_upper_bound(p, p1.as_ptr(), p2.as_ptr(), psi.as_ptr(), &mut upper), RelsecStatus::Ok);
        assert!(lower <= upper + 1e-12);

        let bad_mode = [7u8];
        assert_eq!(
            relsec_lower_bound(p, bad_mode.as_ptr(), p1.as_ptr(), p2.as_ptr(), alpha.as_ptr(), &mut lower),
            RelsecStatus::InvalidMode
        );
        let over = [5.0];
        assert_eq!(
            relsec_upper_bound(p, over.as_ptr(), p2.as_ptr(), psi.as_ptr(), &mut upper),
            RelsecStatus::Infeasible
        );
        assert_eq!(
            relsec_upper_bound(ptr::null(), p1.as_ptr(), p2.as_ptr(), psi.as_ptr(), &mut upper),
            RelsecStatus::NullPointer
        );
        relsec_problem_free(p);
    }
}

#[test]
fn optimizers_reach_regression_values() {
    let p = problem(3.0, 1.0, &[REGRESSION]);
    let cfg = relsec_optimizer_config_default();
    let (mut rate, mut p1, mut p2, mut psi) = (0.0, [0.0], [0.0], [0.0]);
    unsafe {
        assert_eq!(
            relsec_optimize_upper(p, &cfg, &mut rate, p1.as_mut_ptr(), p2.as_mut_ptr(), psi.as_mut_ptr()),
            RelsecStatus::Ok
        );
        assert!((rate - 0.781153).abs() < 1e-4, "{rate}");
        assert!(p1[0] <= 3.0 + 1e-9 && p2[0] <= 1.0 + 1e-9);
        assert!((-1.0..=1.0).contains(&psi[0]));

        let mut lower = 0.0;
        let nf = [RELSEC_MODE_NF];
        assert_eq!(
            relsec_optimize_lower(p, nf.as_ptr(), ptr::null(), &mut lower, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()),
            RelsecStatus::Ok
        );
        assert!(lower <= rate + 1e-6);
        relsec_problem_free(p);
    }
}

#[test]
fn deaf_relay_capacity_dominates_all_nf() {
    let deaf = RelsecSubchannel { sigma1_sq: f64::INFINITY, ..REGRESSION };
    let p = problem(3.0, 1.0, &[deaf]);
    let (mut cap, mut nf) = (0.0, 0.0);
    unsafe {
        assert_eq!(relsec_optimize_deaf_relay(p, ptr::null(), &mut cap, &mut nf), RelsecStatus::Ok);
        relsec_problem_free(p);
    }
    assert!(cap >= nf - 1e-9);
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(relsec_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/relsec.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "relsec_version",
        "relsec_last_error_message",
        "relsec_optimizer_config_default",
        "relsec_cap",
        "relsec_problem_new",
        "relsec_problem_free",
        "relsec_problem_add_subchannel",
        "relsec_problem_len",
        "relsec_lower_bound",
        "relsec_upper_bound",
        "relsec_optimize_lower",
        "relsec_optimize_upper",
        "relsec_optimize_deaf_relay",
        "RELSEC_STATUS_OK",
        "typedef struct RelsecProblem RelsecProblem;",
    ] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/relsec.h");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("check.c");
    std::fs::write(&src, format!("#include \"{}\"\nint main(void) {{ return relsec_problem_len(0); }}\n", header.display())).unwrap();
    let status = match std::process::Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).status() {
        Ok(s) => s,
        Err(_) => {
            eprintln!("no C compiler found, skipping");
            return;
        }
    };
    assert!(status.success());
}
