use std::ffi::{CStr, CString};
use std::ptr;

use iblab_ffi::*;

fn last_error() -> String {
    let p = iblab_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn quick_config() -> IblabOptimizerConfig {
    let mut cfg = IblabOptimizerConfig {
        step_size: 0.0,
        max_iters: 0,
        grad_tolerance: 0.0,
        restarts: 0,
        init_scale: 0.0,
        seed: 0,
    };
    assert_eq!(unsafe { iblab_optimizer_config_default(&mut cfg) }, IblabStatus::Ok);
    cfg.restarts = 3;
    cfg.max_iters = 2000;
    cfg
}

fn noisy() -> *mut IblabJoint {
    let mut j = ptr::null_mut();
    assert_eq!(unsafe { iblab_joint_noisy(8, 2, 0.2, &mut j) }, IblabStatus::Ok);
    assert!(!j.is_null());
    j
}

#[test]
fn joint_round_trip_and_information() {
    unsafe {
        let mut j = ptr::null_mut();
        assert_eq!(iblab_joint_deterministic(16, 4, &mut j), IblabStatus::Ok);
        let (mut nx, mut ny) = (0, 0);
        assert_eq!(iblab_joint_dims(j, &mut nx, &mut ny), IblabStatus::Ok);
        assert_eq!((nx, ny), (16, 4));
        let mut info = IblabInformation::default();
        assert_eq!(iblab_joint_information(j, &mut info), IblabStatus::Ok);
        assert!((info.h_y - 4f64.ln()).abs() < 1e-12);
        assert!((info.i_xy - 4f64.ln()).abs() < 1e-12);

        let mut text = ptr::null_mut();
        assert_eq!(iblab_joint_to_json(j, &mut text), IblabStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(iblab_joint_from_json(text, &mut back), IblabStatus::Ok);
        let mut info2 = IblabInformation::default();
        iblab_joint_information(back, &mut info2);
        assert_eq!(info, info2);
        iblab_string_free(text);
        iblab_joint_free(back);
        iblab_joint_free(j);
    }
}

#[test]
fn from_probs_validates() {
    unsafe {
        let good = [0.25, 0.25, 0.0, 0.5];
        let mut j = ptr::null_mut();
        assert_eq!(iblab_joint_from_probs(good.as_ptr(), 2, 2, &mut j), IblabStatus::Ok);
        iblab_joint_free(j);

        let bad = [0.25, 0.25, 0.1, 0.5];
        let mut j = ptr::null_mut();
        assert_eq!(iblab_joint_from_probs(bad.as_ptr(), 2, 2, &mut j), IblabStatus::Validation);
        assert!(j.is_null());
        assert!(!last_error().is_empty());

        let neg = [-0.25, 0.75, 0.0, 0.5];
        assert_eq!(iblab_joint_from_probs(neg.as_ptr(), 2, 2, &mut j), IblabStatus::Validation);
        assert!(last_error().contains("-0.25"));
    }
}

#[test]
fn null_and_bad_arguments() {
    unsafe {
        assert_eq!(iblab_joint_noisy(8, 2, 0.2, ptr::null_mut()), IblabStatus::NullPointer);
        assert!(last_error().contains("out"));
        let mut info = IblabInformation::default();
        assert_eq!(iblab_joint_information(ptr::null(), &mut info), IblabStatus::NullPointer);
        let mut j = ptr::null_mut();
        let junk = CString::new("{not json").unwrap();
        assert_eq!(iblab_joint_from_json(junk.as_ptr(), &mut j), IblabStatus::InvalidArgument);
        assert_eq!(iblab_joint_noisy(8, 2, 1.5, &mut j), IblabStatus::Validation);

        let joint = noisy();
        let mut cfg = quick_config();
        cfg.restarts = 0;
        let h = IblabSurrogate {
            kind: IblabSurrogateKind::Identity,
            parameter: 0.0,
        };
        let mut p = IblabPoint::default();
        assert_eq!(iblab_optimize_at_beta(joint, 0.1, h, 8, &cfg, &mut p), IblabStatus::Validation);
        let cfg = quick_config();
        let bad_h = IblabSurrogate {
            kind: IblabSurrogateKind::Power,
            parameter: 0.5,
        };
        assert_eq!(iblab_optimize_at_beta(joint, 0.1, bad_h, 8, &cfg, &mut p), IblabStatus::Validation);
        iblab_joint_free(joint);
        iblab_joint_free(ptr::null_mut());
        iblab_string_free(ptr::null_mut());
    }
}

#[test]
fn status_resets_after_success() {
    unsafe {
        let mut j = ptr::null_mut();
        assert_eq!(iblab_joint_noisy(8, 2, 1.5, &mut j), IblabStatus::Validation);
        assert!(!iblab_last_error().is_null());
        assert_eq!(iblab_joint_noisy(8, 2, 0.1, &mut j), IblabStatus::Ok);
        assert!(iblab_last_error().is_null());
        iblab_joint_free(j);
    }
}

#[test]
fn sweep_matches_single_points() {
    unsafe {
        let joint = noisy();
        let cfg = quick_config();
        let h = IblabSurrogate {
            kind: IblabSurrogateKind::Identity,
            parameter: 0.0,
        };
        let betas = [0.01, 0.1, 0.5];
        let mut pts = [IblabPoint::default(); 3];
        assert_eq!(
            iblab_sweep_beta(joint, betas.as_ptr(), 3, h, 8, &cfg, pts.as_mut_ptr()),
            IblabStatus::Ok
        );
        for (b, p) in betas.iter().zip(&pts) {
            let mut single = IblabPoint::default();
            assert_eq!(iblab_optimize_at_beta(joint, *b, h, 8, &cfg, &mut single), IblabStatus::Ok);
            assert_eq!(&single, p);
        }
        assert!(pts[0].i_xt >= pts[2].i_xt);
        let desc = [0.5, 0.1];
        assert_eq!(
            iblab_sweep_beta(joint, desc.as_ptr(), 2, h, 8, &cfg, pts.as_mut_ptr()),
            IblabStatus::Validation
        );
        iblab_joint_free(joint);
    }
}

#[test]
fn compression_search_and_bracket_failure() {
    unsafe {
        let joint = noisy();
        let cfg = quick_config();
        let h = IblabSurrogate {
            kind: IblabSurrogateKind::Identity,
            parameter: 0.0,
        };
        let mut info = IblabInformation::default();
        iblab_joint_information(joint, &mut info);
        let mut p = IblabPoint::default();
        let mut reached = false;
        let status = iblab_beta_at_compression(joint, info.i_xy, h, 8, &cfg, 1e-3, 1.0, &mut p, &mut reached);
        assert_eq!(status, IblabStatus::Ok);
        assert!(reached);
        assert!((p.i_xt - info.i_xy).abs() <= 0.02);

        let mut det = ptr::null_mut();
        iblab_joint_deterministic(8, 2, &mut det);
        let status = iblab_beta_at_compression(det, 1.2, h, 8, &cfg, 1e-3, 1.0, &mut p, &mut reached);
        assert_eq!(status, IblabStatus::Numerical);
        iblab_joint_free(det);
        iblab_joint_free(joint);
    }
}

#[test]
fn disenib_defaults() {
    unsafe {
        let mut j = ptr::null_mut();
        iblab_joint_deterministic(8, 2, &mut j);
        let mut cfg = quick_config();
        assert_eq!(iblab_optimizer_config_disenib(&mut cfg), IblabStatus::Ok);
        assert_eq!(cfg.restarts, 20);
        cfg.restarts = 4;
        let mut r = IblabConsistencyReport::default();
        assert_eq!(iblab_optimize_disenib(j, 0, 0, &cfg, 0.05, &mut r), IblabStatus::Ok);
        assert_eq!((r.card_t, r.card_s), (2, 4));
        assert!(r.consistent, "gap {}", r.gap);
        assert!(r.objective >= r.analytic_minimum - 1e-9);
        assert_eq!(iblab_optimize_disenib(j, 1, 0, &cfg, 0.05, &mut r), IblabStatus::Validation);
        assert_eq!(iblab_optimize_disenib(j, 0, 0, &cfg, 0.0, &mut r), IblabStatus::InvalidArgument);
        iblab_joint_free(j);
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(iblab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
