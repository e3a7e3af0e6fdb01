//! C interface to `condtest`.
//!
//! Data sets and fitted models are opaque heap handles created and freed
//! through this API. Every fallible call returns a [`CtStatus`]; on failure
//! the message is available from [`ct_last_error`] on the same thread.
//! Point arrays are row-major `n × dim` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use condtest::calibration::{bootstrap, BootstrapConfig, BootstrapMethod};
use condtest::testing::{run_test, ThresholdModel};
use condtest::thresholds::{beta_fixed, beta_online, ThresholdParams};
use condtest::{fit, gram, DataSet, Error, FittedModel, KernelSpec, Points};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtStatus {
    Ok = 0,
    Input = 1,
    Parameter = 2,
    Misuse = 3,
    Numerical = 4,
    Calibration = 5,
    NullPointer = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtKernelFamily {
    Gaussian = 0,
    LinearInhomogeneous = 1,
    PolynomialInhomogeneous = 2,
}

/// Kernel description. `param` is the bandwidth γ² for the Gaussian family
/// and the offset c otherwise; `degree` is read for polynomials only.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct CtKernel {
    pub family: CtKernelFamily,
    pub param: f64,
    pub degree: u32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtBootstrap {
    Naive = 0,
    Wild = 1,
    WildStudentized = 2,
}

/// Noise and norm assumptions for the analytical thresholds.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct CtThresholdParams {
    pub s: f64,
    pub rho: f64,
    pub trace_rv: f64,
    pub trace_rg: f64,
    pub hs_rg: f64,
    pub op_rg: f64,
    pub delta: f64,
}

/// Opaque set of transition pairs.
pub struct CtDataSet(DataSet);

/// Opaque fitted KRR model.
pub struct CtModel(FittedModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CtStatus {
    match e {
        Error::Input(_) | Error::Io(_) => CtStatus::Input,
        Error::Parameter(_) => CtStatus::Parameter,
        Error::Misuse(_) => CtStatus::Misuse,
        Error::Numerical(_) => CtStatus::Numerical,
        Error::Calibration(_) => CtStatus::Calibration,
        Error::Trial { source, .. } => status_of(source),
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CtStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CtStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CtStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            CtStatus::Panic
        }
    }
}

unsafe fn points(ptr: *const f64, n: usize, dim: usize, what: &'static str) -> Result<Points, Failure> {
    if n * dim == 0 {
        return Ok(Points::empty(dim));
    }
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    let data = slice::from_raw_parts(ptr, n * dim);
    Ok(Points::new(dim, data.to_vec())?)
}

unsafe fn point<'a>(ptr: *const f64, dim: usize) -> Result<&'a [f64], Failure> {
    if ptr.is_null() {
        return Err(Failure::Null("x"));
    }
    Ok(slice::from_raw_parts(ptr, dim))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &'static str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

fn kernel(k: CtKernel) -> Result<KernelSpec, Error> {
    match k.family {
        CtKernelFamily::Gaussian => KernelSpec::gaussian(k.param),
        CtKernelFamily::LinearInhomogeneous => KernelSpec::linear(k.param),
        CtKernelFamily::PolynomialInhomogeneous => KernelSpec::polynomial(k.degree, k.param),
    }
}

fn method(m: CtBootstrap) -> BootstrapMethod {
    match m {
        CtBootstrap::Naive => BootstrapMethod::Naive,
        CtBootstrap::Wild => BootstrapMethod::Wild,
        CtBootstrap::WildStudentized => BootstrapMethod::WildStudentized,
    }
}

impl From<CtThresholdParams> for ThresholdParams {
    fn from(p: CtThresholdParams) -> Self {
        ThresholdParams {
            s: p.s,
            rho: p.rho,
            trace_rv: p.trace_rv,
            trace_rg: p.trace_rg,
            hs_rg: p.hs_rg,
            op_rg: p.op_rg,
            delta: p.delta,
        }
    }
}

/// Message of the last failed call on this thread, or null. The string is
/// owned by the library and valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn ct_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ct_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `n` pairs with covariates `x` (`n × dx`) and measurements `z`
/// (`n × dz`) into a new data set.
///
/// # Safety
/// `x` and `z` must point to `n·dx` and `n·dz` readable doubles; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_dataset_new(
    x: *const f64,
    z: *const f64,
    n: usize,
    dx: usize,
    dz: usize,
    out: *mut *mut CtDataSet,
) -> CtStatus {
    guard(|| {
        let data = DataSet::new(points(x, n, dx, "x")?, points(z, n, dz, "z")?)?;
        write(out, Box::into_raw(Box::new(CtDataSet(data))), "out")
    })
}

/// Number of pairs, or 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live handle from [`ct_dataset_new`].
#[no_mangle]
pub unsafe extern "C" fn ct_dataset_len(data: *const CtDataSet) -> usize {
    data.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `data` must be null or a handle from [`ct_dataset_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ct_dataset_free(data: *mut CtDataSet) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Fits KRR with input kernel `k`, regularization `lambda` and output
/// kernel `kappa`.
///
/// # Safety
/// `data` must be a live data set handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ct_model_fit(
    data: *const CtDataSet,
    k: CtKernel,
    lambda: f64,
    kappa: CtKernel,
    out: *mut *mut CtModel,
) -> CtStatus {
    guard(|| {
        let d = handle(data, "data")?;
        let model = fit(&d.0, &kernel(k)?, lambda, &kernel(kappa)?)?;
        write(out, Box::into_raw(Box::new(CtModel(model))), "out")
    })
}

/// # Safety
/// `model` must be null or a handle from [`ct_model_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ct_model_free(model: *mut CtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Scalar prediction at `x`; the model must have 1-d measurements.
///
/// # Safety
/// `x` must point to `dim` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_model_predict_scalar(model: *const CtModel, x: *const f64, dim: usize, out: *mut f64) -> CtStatus {
    guard(|| {
        let m = handle(model, "model")?;
        write(out, m.0.predict_scalar(point(x, dim)?)?, "out")
    })
}

/// Posterior scale σ(x).
///
/// # Safety
/// `x` must point to `dim` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_model_posterior_scale(model: *const CtModel, x: *const f64, dim: usize, out: *mut f64) -> CtStatus {
    guard(|| {
        let m = handle(model, "model")?;
        write(out, m.0.posterior_scale(point(x, dim)?)?, "out")
    })
}

/// Conditional MMD between two models at `x`.
///
/// # Safety
/// Both handles must be live, `x` must point to `dim` doubles and `out` be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ct_cmmd(
    first: *const CtModel,
    second: *const CtModel,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> CtStatus {
    guard(|| {
        let (a, b) = (handle(first, "first")?, handle(second, "second")?);
        write(out, condtest::statistic::cmmd(&a.0, &b.0, point(x, dim)?)?, "out")
    })
}

/// Analytical multiplier for online sampling.
///
/// # Safety
/// `data` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ct_beta_online(
    params: CtThresholdParams,
    data: *const CtDataSet,
    k: CtKernel,
    lambda: f64,
    out: *mut f64,
) -> CtStatus {
    guard(|| {
        let d = handle(data, "data")?;
        let g = gram(&kernel(k)?, d.0.covariates())?;
        write(out, beta_online(&params.into(), &g, lambda)?, "out")
    })
}

/// Analytical multiplier for independent pairs.
///
/// # Safety
/// `data` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ct_beta_fixed(
    params: CtThresholdParams,
    data: *const CtDataSet,
    k: CtKernel,
    lambda: f64,
    out: *mut f64,
) -> CtStatus {
    guard(|| {
        let d = handle(data, "data")?;
        let g = gram(&kernel(k)?, d.0.covariates())?;
        write(out, beta_fixed(&params.into(), &g, lambda)?, "out")
    })
}

/// Bootstrapped multiplier at the quantile `1 − alpha/2` over the data
/// set's own covariates. `factorizations` may be null.
///
/// # Safety
/// `data` must be a live handle, `beta` writable, `factorizations` null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ct_calibrate(
    data: *const CtDataSet,
    k: CtKernel,
    kappa: CtKernel,
    lambda: f64,
    method_: CtBootstrap,
    replicates: usize,
    alpha: f64,
    seed: u64,
    beta: *mut f64,
    factorizations: *mut usize,
) -> CtStatus {
    guard(|| {
        let d = handle(data, "data")?;
        let cfg = BootstrapConfig::new(replicates, alpha, seed);
        let res = bootstrap(method(method_), &d.0, &kernel(k)?, &kernel(kappa)?, lambda, &cfg)?;
        write(beta, res.beta, "beta")?;
        if !factorizations.is_null() {
            factorizations.write(res.factorizations);
        }
        Ok(())
    })
}

/// Tests at `n` covariates `xs` (`n × dim`) with multipliers `beta1`,
/// `beta2`. Writes 1 or 0 per covariate into `reject`, the ratio
/// statistic/threshold into `ratio` (may be null) and the number of
/// rejections into `rejections`.
///
/// # Safety
/// Handles must be live; `xs` must hold `n·dim` doubles, `reject` `n`
/// bytes, `ratio` null or `n` doubles, `rejections` be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_run_test(
    first: *const CtModel,
    second: *const CtModel,
    beta1: f64,
    beta2: f64,
    xs: *const f64,
    n: usize,
    dim: usize,
    reject: *mut u8,
    ratio: *mut f64,
    rejections: *mut usize,
) -> CtStatus {
    guard(|| {
        let (a, b) = (handle(first, "first")?, handle(second, "second")?);
        let grid = points(xs, n, dim, "xs")?;
        if reject.is_null() && n > 0 {
            return Err(Failure::Null("reject"));
        }
        let report = run_test(&a.0, &b.0, &ThresholdModel::fixed(beta1)?, &ThresholdModel::fixed(beta2)?, &grid)?;
        for (i, r) in report.records.iter().enumerate() {
            reject.add(i).write(u8::from(r.reject));
            if !ratio.is_null() {
                ratio.add(i).write(r.ratio());
            }
        }
        write(rejections, report.records.iter().filter(|r| r.reject).count(), "rejections")
    })
}
