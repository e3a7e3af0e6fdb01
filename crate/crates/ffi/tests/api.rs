use std::ffi::CStr;
use std::ptr;

use condtest_ffi::*;

fn gaussian() -> CtKernel {
    CtKernel { family: CtKernelFamily::Gaussian, param: 0.25, degree: 0 }
}

fn linear() -> CtKernel {
    CtKernel { family: CtKernelFamily::LinearInhomogeneous, param: 1.0, degree: 0 }
}

fn dataset(x: &[f64], z: &[f64]) -> *mut CtDataSet {
    let mut out = ptr::null_mut();
    let st = unsafe { ct_dataset_new(x.as_ptr(), z.as_ptr(), x.len(), 1, 1, &mut out) };
    assert_eq!(st, CtStatus::Ok);
    out
}

fn model(d: *const CtDataSet) -> *mut CtModel {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ct_model_fit(d, gaussian(), 0.1, linear(), &mut out) }, CtStatus::Ok);
    out
}

fn last_error() -> String {
    let p = ct_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn fit_predict_and_free() {
    let x = grid(20);
    let z: Vec<f64> = x.iter().map(|v| v * v).collect();
    let d = dataset(&x, &z);
    assert_eq!(unsafe { ct_dataset_len(d) }, 20);
    let m = model(d);
    let (mut y, mut s) = (0.0, 0.0);
    unsafe {
        assert_eq!(ct_model_predict_scalar(m, [0.5].as_ptr(), 1, &mut y), CtStatus::Ok);
        assert_eq!(ct_model_posterior_scale(m, [0.5].as_ptr(), 1, &mut s), CtStatus::Ok);
        ct_model_free(m);
        ct_dataset_free(d);
    }
    assert!((y - 0.25).abs() < 0.1, "{y}");
    assert!(s > 0.0 && s < 1.0);
    assert!(ct_last_error().is_null());
}

#[test]
fn identical_models_never_reject() {
    let x = grid(15);
    let z: Vec<f64> = x.iter().map(|v| v.sin()).collect();
    let d = dataset(&x, &z);
    let (a, b) = (model(d), model(d));
    let mut c = 1.0;
    let mut reject = vec![9u8; x.len()];
    let mut ratio = vec![0.0; x.len()];
    let mut count = 7;
    unsafe {
        assert_eq!(ct_cmmd(a, b, [0.1].as_ptr(), 1, &mut c), CtStatus::Ok);
        let st = ct_run_test(a, b, 1.0, 1.0, x.as_ptr(), x.len(), 1, reject.as_mut_ptr(), ratio.as_mut_ptr(), &mut count);
        assert_eq!(st, CtStatus::Ok);
        ct_model_free(a);
        ct_model_free(b);
        ct_dataset_free(d);
    }
    assert_eq!(c, 0.0);
    assert_eq!(count, 0);
    assert!(reject.iter().all(|&r| r == 0));
    assert!(ratio.iter().all(|&r| r == 0.0));
}

#[test]
fn shifted_data_rejects_with_zero_thresholds() {
    let x = grid(15);
    let z1: Vec<f64> = x.iter().map(|_| 0.0).collect();
    let z2: Vec<f64> = x.iter().map(|_| 1.0).collect();
    let (d1, d2) = (dataset(&x, &z1), dataset(&x, &z2));
    let (a, b) = (model(d1), model(d2));
    let mut reject = vec![0u8; x.len()];
    let mut count = 0;
    unsafe {
        let st = ct_run_test(a, b, 0.0, 0.0, x.as_ptr(), x.len(), 1, reject.as_mut_ptr(), ptr::null_mut(), &mut count);
        assert_eq!(st, CtStatus::Ok);
        for h in [a, b] {
            ct_model_free(h);
        }
        ct_dataset_free(d1);
        ct_dataset_free(d2);
    }
    assert_eq!(count, x.len());
}

#[test]
fn thresholds_and_calibration() {
    let x = grid(30);
    let z: Vec<f64> = x.iter().map(|v| (3.0 * v).cos()).collect();
    let d = dataset(&x, &z);
    let params = CtThresholdParams { s: 1.0, rho: 0.1, trace_rv: 1.0, trace_rg: 1.0, hs_rg: 1.0, op_rg: 1.0, delta: 0.05 };
    let (mut online, mut fixed) = (0.0, 0.0);
    let (mut naive, mut wild) = (0.0, 0.0);
    let (mut fn_, mut fw) = (0usize, 0usize);
    unsafe {
        assert_eq!(ct_beta_online(params, d, gaussian(), 0.1, &mut online), CtStatus::Ok);
        assert_eq!(ct_beta_fixed(params, d, gaussian(), 0.1, &mut fixed), CtStatus::Ok);
        let st = ct_calibrate(d, gaussian(), linear(), 0.1, CtBootstrap::Naive, 50, 0.05, 3, &mut naive, &mut fn_);
        assert_eq!(st, CtStatus::Ok);
        let st = ct_calibrate(d, gaussian(), linear(), 0.1, CtBootstrap::Wild, 50, 0.05, 3, &mut wild, &mut fw);
        assert_eq!(st, CtStatus::Ok);
        ct_dataset_free(d);
    }
    assert!(online > 1.0 && fixed > 1.0);
    assert!(naive > 0.0 && wild > 0.0);
    assert_eq!(fw, 1);
    assert_eq!(fn_, 100);
}

#[test]
fn errors_carry_codes_and_messages() {
    let x = grid(5);
    let d = dataset(&x, &x);
    let mut m = ptr::null_mut();
    let mut out = 0.0;
    unsafe {
        assert_eq!(ct_model_fit(d, gaussian(), -1.0, linear(), &mut m), CtStatus::Parameter);
        assert!(last_error().contains("regularization"));
        assert!(m.is_null());
        let bad = CtKernel { family: CtKernelFamily::Gaussian, param: 0.0, degree: 0 };
        assert_eq!(ct_model_fit(d, bad, 0.1, linear(), &mut m), CtStatus::Parameter);
        assert_eq!(ct_model_fit(ptr::null(), gaussian(), 0.1, linear(), &mut m), CtStatus::NullPointer);
        assert!(last_error().contains("data"));
        let mut ds = ptr::null_mut();
        assert_eq!(ct_dataset_new(ptr::null(), x.as_ptr(), 5, 1, 1, &mut ds), CtStatus::NullPointer);
        let nan = [f64::NAN; 5];
        let dn = dataset(&x, &nan);
        assert_eq!(ct_model_fit(dn, gaussian(), 0.1, linear(), &mut m), CtStatus::Input);
        ct_dataset_free(dn);
        let good = model(d);
        assert_eq!(ct_model_predict_scalar(good, [0.0, 1.0].as_ptr(), 2, &mut out), CtStatus::Input);
        assert_eq!(ct_model_predict_scalar(good, ptr::null(), 1, &mut out), CtStatus::NullPointer);
        ct_model_free(good);
        ct_dataset_free(d);
        ct_dataset_free(ptr::null_mut());
        ct_model_free(ptr::null_mut());
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(ct_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
